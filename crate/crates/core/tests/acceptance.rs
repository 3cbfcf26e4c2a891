//! The acceptance suite: one line per criterion, nonzero exit on any failure.

#![allow(clippy::type_complexity)]

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mgale_core::distributions::Distribution;
use mgale_core::doob::{check_martingale, doob_decompose, Verdict};
use mgale_core::frontend::{parse_program, parse_seed};
use mgale_core::montecarlo::{Interpreter, SimConfig, SimReport, SimVerdict, Validation};
use mgale_core::ost::fact::fact_ctx;
use mgale_core::ost::SolveOutcome;
use mgale_core::pipeline::{analyze, validate, Analysis, AnalysisRequest};
use mgale_core::recurrence::{extract_recurrences, lift_seed};
use mgale_core::symbolic::eval::eval_params;
use mgale_core::symbolic::parse::{parse_poly, parse_ratfn, ParseCtx};
use mgale_core::symbolic::{Poly, RatFn, Rational};

use common::{linear_program, martingale_program, mixed_program, params, program_path};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str) -> Result<Analysis, String> {
    let req = AnalysisRequest::from_file(&program_path(name)).map_err(|e| e.to_string())?;
    analyze(&req).map_err(|e| e.to_string())
}

fn solved(a: &Analysis) -> Result<(&Poly, &RatFn, bool), String> {
    match &a.solved {
        Some(SolveOutcome::Solved { target, value, relational }) => Ok((target, value, *relational)),
        other => Err(format!("{}: not solved ({other:?})", a.name)),
    }
}

/// `M_i` and the solved value both match the expected text after parsing.
fn exact(name: &str, mi: &str, target: &str, value: &str) -> Outcome {
    let a = run(name)?;
    let ctx = fact_ctx(&a.rs);
    let want_mi = parse_poly(mi, &ctx).map_err(|e| e.to_string())?;
    ensure(a.form.mi == want_mi, || format!("martingale {} != {want_mi}", a.form.mi))?;
    let (t, v, _) = solved(&a)?;
    let want_t = parse_poly(target, &ctx).map_err(|e| e.to_string())?;
    let want_v = parse_ratfn(value, &ctx).map_err(|e| e.to_string())?;
    ensure(*t == want_t && *v == want_v, || format!("fact {t} = {v}, expected {want_t} = {want_v}"))?;
    Ok(format!("M_i = {}, {t} = {v}", a.form.mi))
}

fn c1() -> Outcome {
    exact("geom.spp", "x[i] - p*i", "E[tau]", "1/(1 - p)")
}

fn c2() -> Outcome {
    exact("gamble.spp", "x[i]", "Pr[x[tau] = b]", "a/b")
}

fn c3() -> Outcome {
    exact("gamble2.spp", "x[i]^2 - i", "E[tau]", "a*(b - a)")
}

fn c4() -> Outcome {
    let out = exact("momentum.spp", "x[0] + x[i] - x[i-1]", "E[x[tau]]", "E[x[tau-1]]")?;
    let a = run("momentum.spp")?;
    ensure(solved(&a)?.2, || "fact is not marked relational".into())?;
    Ok(out)
}

fn c5() -> Outcome {
    let t = Instant::now();
    let a = run("fullabra.spp")?;
    let el = t.elapsed();
    let (target, value, _) = solved(&a)?;
    let ctx = fact_ctx(&a.rs);
    ensure(*target == parse_poly("E[tau]", &ctx).unwrap(), || format!("target {target}"))?;
    ensure(*value == parse_ratfn("L + L^4 + L^11", &ctx).unwrap(), || format!("E[tau] = {value}"))?;
    ensure(el < Duration::from_secs(60), || format!("took {el:?}"))?;
    Ok(format!("E[tau] = {value} in {:.2} s", el.as_secs_f64()))
}

fn c6() -> Outcome {
    let a = run("miniabra.spp")?;
    let (target, value, _) = solved(&a)?;
    let want = RatFn::from_poly(Poly::int(14));
    ensure(*value == want, || format!("{target} = {value}"))?;
    Ok(format!("{target} = {value}"))
}

struct McRun {
    name: &'static str,
    analysis: Analysis,
    params: BTreeMap<String, Rational>,
    report: SimReport,
    validation: Validation,
}

const MC_SUITE: [(&str, &[(&str, i64, i64)]); 5] = [
    ("geom.spp", &[("p", 1, 2)]),
    ("gamble.spp", &[("a", 3, 1), ("b", 10, 1)]),
    ("gamble2.spp", &[("a", 3, 1), ("b", 10, 1)]),
    ("momentum.spp", &[("a", 3, 1), ("b", 10, 1)]),
    ("miniabra.spp", &[]),
];

fn monte_carlo() -> &'static Result<(Vec<McRun>, Duration), String> {
    static RUNS: OnceLock<Result<(Vec<McRun>, Duration), String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let t = Instant::now();
        let mut out = Vec::new();
        for (name, kv) in MC_SUITE {
            let analysis = run(name)?;
            let cfg = SimConfig { trials: 100_000, seed: 20_240_601, ..Default::default() };
            let p = params(kv);
            let (report, validation) = validate(&analysis, p.clone(), cfg).map_err(|e| format!("{name}: {e}"))?;
            out.push(McRun { name, analysis, params: p, report, validation });
        }
        Ok((out, t.elapsed()))
    })
}

fn c7() -> Outcome {
    let (runs, el) = monte_carlo().as_ref().map_err(Clone::clone)?;
    let mut lines = Vec::new();
    for r in runs {
        ensure(r.validation.verdict == SimVerdict::Pass, || format!("{}:\n{}", r.name, r.validation))?;
        // The solved quantity is the last check.
        let last = r.validation.lines.iter().rfind(|l| !l.label.starts_with("E[M_") && !l.label.starts_with("|M_"));
        lines.push(format!("{} [{}]", r.name, last.map(|l| l.detail.as_str()).unwrap_or("")));
    }
    ensure(*el < Duration::from_secs(60), || format!("took {el:?}"))?;
    Ok(format!("{} programs x 100000 trials in {:.1} s; {}", runs.len(), el.as_secs_f64(), lines.join("; ")))
}

fn c8() -> Outcome {
    let mut n = 0;
    for name in ["geom.spp", "gamble.spp", "gamble2.spp", "momentum.spp", "miniabra.spp", "fullabra.spp"] {
        let a = run(name)?;
        let c = check_martingale(&a.rs, &a.form.mi);
        ensure(c.holds(), || format!("{name}: {:?}", c.verdict))?;
        n += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..200 {
        let (src, seed) = linear_program(&mut rng);
        let prog = parse_program(&src).map_err(|e| format!("{e}\n{src}"))?;
        let rs = extract_recurrences(&prog).map_err(|e| e.to_string())?;
        let sp = lift_seed(&rs, &parse_seed(&seed, &prog).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let form = doob_decompose(&rs, &sp).map_err(|e| e.to_string())?;
        let c = check_martingale(&rs, &form.mi);
        ensure(c.holds(), || format!("random program {k}, seed {seed}: {:?}\n{src}", c.verdict))?;
    }
    Ok(format!("{n} shipped programs and 200 random linear programs"))
}

fn c9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut kept, mut tried) = (0, 0);
    while kept < 100 {
        tried += 1;
        ensure(tried < 1000, || format!("only {kept} verified martingale seeds in {tried} tries"))?;
        let (src, seed) = martingale_program(&mut rng);
        let prog = parse_program(&src).map_err(|e| format!("{e}\n{src}"))?;
        let rs = extract_recurrences(&prog).map_err(|e| e.to_string())?;
        let sp = lift_seed(&rs, &parse_seed(&seed, &prog).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        if check_martingale(&rs, &sp.e_i).verdict != Verdict::Martingale {
            continue;
        }
        kept += 1;
        let form = doob_decompose(&rs, &sp).map_err(|e| e.to_string())?;
        ensure(form.mi == sp.e_i && form.m0 == sp.e_0, || {
            format!("seed {seed}: M_b = {}, M_i = {}, expected {} and {}\n{src}", form.m0, form.mi, sp.e_0, sp.e_i)
        })?;
    }
    Ok(format!("{kept} martingale seeds reproduced ({tried} generated)"))
}

/// Brute-force moment over a raw outcome list, without merging points.
fn brute_moment(outcomes: &[(Vec<i64>, Poly)], powers: &[(usize, u32)]) -> Poly {
    let mut acc = Poly::zero();
    for (v, p) in outcomes {
        let mut w = Rational::from_integer(1.into());
        for (c, k) in powers {
            for _ in 0..*k {
                w *= Rational::from_integer(v[c - 1].into());
            }
        }
        acc = acc + p.scale(&w);
    }
    acc
}

/// Every multi-index over `arity` coordinates with total degree <= `deg`.
fn multi_indices(arity: usize, deg: u32) -> Vec<Vec<(usize, u32)>> {
    fn go(c: usize, arity: usize, left: u32, cur: &mut Vec<(usize, u32)>, out: &mut Vec<Vec<(usize, u32)>>) {
        if c > arity {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            if k > 0 {
                cur.push((c, k));
            }
            go(c + 1, arity, left - k, cur, out);
            if k > 0 {
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(1, arity, deg, &mut Vec::new(), &mut out);
    out
}

fn pattern_outcomes(pattern: &str, alphabet: usize) -> Vec<(Vec<i64>, Poly)> {
    let letters: Vec<char> = pattern.chars().collect();
    let mut distinct = letters.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let p = Poly::constant(Rational::new(1.into(), alphabet.into()));
    (0..alphabet)
        .map(|k| {
            let letter = distinct.get(k).copied();
            (letters.iter().map(|l| (Some(*l) == letter) as i64).collect(), p.clone())
        })
        .collect()
}

fn c10() -> Outcome {
    let ctx = ParseCtx::new();
    let q = |s: &str| parse_poly(s, &ctx).unwrap();
    let mut checked = 0usize;
    let mut symbolic: Vec<(Distribution, Vec<(Vec<i64>, Poly)>)> = Vec::new();
    for (v1, v0) in [(1, 0), (-1, 1), (3, -2), (2, 2)] {
        symbolic.push((Distribution::bern(q("p"), v1, v0).unwrap(), vec![(vec![v1], q("p")), (vec![v0], q("1 - p"))]));
        symbolic
            .push((Distribution::bern(q("2/7"), v1, v0).unwrap(), vec![(vec![v1], q("2/7")), (vec![v0], q("5/7"))]));
    }
    for vs in [vec![-1, 1], vec![0, 1, 2, 3], vec![-2, 5, 7], vec![4]] {
        let p = Poly::constant(Rational::new(1.into(), vs.len().into()));
        symbolic.push((Distribution::unif(&vs).unwrap(), vs.iter().map(|v| (vec![*v], p.clone())).collect()));
    }
    let table = vec![(vec![1, -1], q("p")), (vec![0, 2], q("1/2 - p")), (vec![3, 0], q("1/2"))];
    symbolic.push((Distribution::table(table.clone()).unwrap(), table));
    for (pattern, alphabet) in [("111", 2), ("AB", 3), ("ABRACADABRA", 5)] {
        let d = Distribution::matches(pattern, Poly::int(alphabet as i64)).unwrap();
        symbolic.push((d, pattern_outcomes(pattern, alphabet)));
    }
    for (d, outcomes) in &symbolic {
        for powers in multi_indices(d.arity, 6) {
            let got = d.moment(&powers);
            let want = brute_moment(outcomes, &powers);
            ensure(got == want, || format!("{d} {powers:?}: {got} != {want}"))?;
            checked += 1;
        }
    }
    // A symbolic alphabet is checked at concrete sizes.
    for pattern in ["111", "ABRACADABRA"] {
        let d = Distribution::matches(pattern, q("L")).unwrap();
        for l in [5usize, 6, 9] {
            let env: BTreeMap<String, Rational> =
                [("L".to_string(), Rational::from_integer(l.into()))].into_iter().collect();
            let outcomes = pattern_outcomes(pattern, l);
            for powers in multi_indices(d.arity, 6) {
                let got = eval_params(&d.moment(&powers), &env).map_err(|e| e.to_string())?;
                let want = eval_params(&brute_moment(&outcomes, &powers), &env).map_err(|e| e.to_string())?;
                ensure(got == want, || format!("{d} at L = {l}, {powers:?}: {got} != {want}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} moments of {} distributions", symbolic.len() + 2))
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let no_params = BTreeMap::new();
    for k in 0..1000 {
        let src = mixed_program(&mut rng);
        let prog = parse_program(&src).map_err(|e| format!("{e}\n{src}"))?;
        let rs = extract_recurrences(&prog).map_err(|e| e.to_string())?;
        let interp = Interpreter::new(&prog, no_params.clone()).map_err(|e| e.to_string())?;
        let draws: Vec<_> = (0..10).map(|_| interp.draw(&mut rng)).collect();
        let a = interp.replay(&draws).map_err(|e| e.to_string())?;
        let b = rs.run_concrete(&no_params, &draws).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("pair {k} differs\n{src}\ndraws {draws:?}\ninterpreter {a:?}\nrecurrence {b:?}"))?;
    }
    Ok("1000 programs x 10 steps, traces identical".into())
}

fn c12() -> Outcome {
    let (runs, _) = monte_carlo().as_ref().map_err(Clone::clone)?;
    let mut out = Vec::new();
    for r in runs {
        let seen = r.report.max_increment.clone().ok_or_else(|| format!("{}: no increments recorded", r.name))?;
        let side = &r.analysis.side;
        let mut bounds = Vec::new();
        if let Some(c) = &side.seed_bound {
            bounds.push(eval_params(c, &r.params).map_err(|e| e.to_string())? * Rational::from_integer(2.into()));
        }
        if let Some(c) = &side.increment_bound {
            bounds.push(eval_params(c, &r.params).map_err(|e| e.to_string())?);
        }
        ensure(!bounds.is_empty(), || format!("{}: no verified bound", r.name))?;
        for b in &bounds {
            ensure(seen <= *b, || format!("{}: |dM| reached {seen}, bound {b}", r.name))?;
        }
        out.push(format!("{} max {seen} <= {}", r.name, bounds.iter().min().unwrap()));
    }
    Ok(out.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("geometric martingale and E[tau]", c1),
        ("gambler's ruin, linear seed", c2),
        ("gambler's ruin, quadratic seed with known fact", c3),
        ("momentum walk, relational fact", c4),
        ("abracadabra, symbolic alphabet", c5),
        ("miniabra", c6),
        ("Monte Carlo agreement", c7),
        ("martingale property suite", c8),
        ("Doob fixed point", c9),
        ("moment oracle", c10),
        ("interpreter and recurrence agree", c11),
        ("increment bounds hold in simulation", c12),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.2} s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.2} s): {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
