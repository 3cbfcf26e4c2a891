use super::*;
use crate::doob::doob_decompose;
use crate::frontend::{parse_hints_at, parse_program, parse_seed, parse_variant, HintScope, Program};
use crate::recurrence::{at_i, extract_recurrences, lift_seed, lower_guard, param_env, RecurrenceSystem};
use crate::symbolic::parse::{parse_poly, parse_ratfn};
use crate::symbolic::{Formula, RatFn};

const GEOM: &str = include_str!("../../../../programs/geom.spp");
const GAMBLE: &str = include_str!("../../../../programs/gamble.spp");
const GAMBLE2: &str = include_str!("../../../../programs/gamble2.spp");
const GAMBLE_FACT: &str = include_str!("../../../../programs/gamble.fact");
const MOMENTUM: &str = include_str!("../../../../programs/momentum.spp");
const MINIABRA: &str = include_str!("../../../../programs/miniabra.spp");
const FULLABRA: &str = include_str!("../../../../programs/fullabra.spp");

struct Run {
    rs: RecurrenceSystem,
    side: SideConditions,
    raw: Result<Fact, OstError>,
    fact: Option<Fact>,
    solved: Option<SolveOutcome>,
}

fn hints(p: &Program) -> Vec<crate::frontend::Hint> {
    p.pragmas.hints.iter().flat_map(|h| parse_hints_at(&h.node, p, h.span).unwrap()).collect()
}

fn run(src: &str, assume: bool, known: &str) -> Run {
    let prog = parse_program(src).unwrap();
    let rs = extract_recurrences(&prog).unwrap();
    let env = param_env(&prog);
    let seed = parse_seed(&prog.pragmas.seed.as_ref().unwrap().node, &prog).unwrap();
    let sp = lift_seed(&rs, &seed).unwrap();
    let form = doob_decompose(&rs, &sp).unwrap();
    let hs = hints(&prog);
    let invariants: Vec<Formula> = hs
        .iter()
        .filter(|h| h.scope == HintScope::EveryIteration)
        .map(|h| lower_guard(&h.formula, &at_i(0), None).unwrap())
        .collect();
    let variant = prog.pragmas.variant.as_ref().map(|v| parse_variant(&v.node, &prog).unwrap());
    let side = side_conditions(&rs, &env, &sp, &form, variant.as_ref(), &invariants).unwrap();
    let raw = apply_ost(&form, &side, assume || prog.pragmas.assume_ost);
    let (mut fact, mut solved) = (None, None);
    if let Ok(r) = &raw {
        let (f, _) = apply_hints(r, &hs, &rs, &env).unwrap();
        let known = parse_fact_file(known, &rs).unwrap();
        let target = match &prog.pragmas.solve_for {
            Some(t) => parse_target(&t.node, &rs).unwrap(),
            None => default_target(&f).unwrap(),
        };
        solved = Some(solve_for(&f, &target, &known).unwrap());
        fact = Some(f);
    }
    Run { rs, side, raw, fact, solved }
}

fn value(r: &Run) -> (String, RatFn) {
    match r.solved.as_ref().unwrap() {
        SolveOutcome::Solved { target, value, .. } => (target.to_string(), value.clone()),
        other => panic!("not solved: {other}"),
    }
}

fn rf(s: &str) -> RatFn {
    parse_ratfn(s, &crate::symbolic::parse::ParseCtx::new()).unwrap()
}

fn status<'a>(side: &'a SideConditions, name: &str) -> &'a CondStatus {
    &side.conditions.iter().find(|c| c.name == name).unwrap().status
}

#[test]
fn geometric() {
    let r = run(GEOM, false, "");
    assert!(r.side.all_verified(), "{:?}", r.side.obligations());
    assert_eq!(r.raw.as_ref().unwrap().to_string(), "0 = E[x[tau] - p*tau]");
    // Seed is unbounded; the increment itself is bounded.
    assert_eq!(r.side.seed_bound, None);
    assert_eq!(r.side.increment_bound, Some(Poly::one()));
    let (t, v) = value(&r);
    assert_eq!(t, "E[tau]");
    assert_eq!(v, rf("1/(1 - p)"));
    assert_eq!(v.to_string(), "1/(1 - p)");
}

#[test]
fn gambler_probability() {
    let r = run(GAMBLE, false, "");
    assert!(r.side.all_verified(), "{:?}", r.side.obligations());
    assert_eq!(r.side.seed_bound, Some(parse_poly("b", &Default::default()).unwrap()));
    assert!(matches!(status(&r.side, "variant decrease"), CondStatus::Verified(d) if d.contains("1/2")));
    assert_eq!(r.fact.as_ref().unwrap().to_string(), "a = b*Pr[x[tau] = b]");
    let (t, v) = value(&r);
    assert_eq!(t, "Pr[x[tau] = b]");
    assert_eq!(v, rf("a/b"));
}

#[test]
fn gambler_duration_with_fact() {
    let r = run(GAMBLE2, false, GAMBLE_FACT);
    assert!(r.side.all_verified(), "{:?}", r.side.obligations());
    assert_eq!(r.side.seed_bound, Some(parse_poly("b^2", &Default::default()).unwrap()));
    let (t, v) = value(&r);
    assert_eq!(t, "E[tau]");
    assert_eq!(v, rf("a*(b - a)"));
    // Without the fact the probability stays unknown.
    let r = run(GAMBLE2, false, "");
    match r.solved.unwrap() {
        SolveOutcome::Residual { unknowns, .. } => assert_eq!(unknowns.len(), 2),
        other => panic!("{other}"),
    }
}

#[test]
fn momentum_relational() {
    let r = run(MOMENTUM, false, "");
    assert!(!r.side.all_verified());
    assert!(r.side.increment_bound.is_some());
    match r.solved.as_ref().unwrap() {
        SolveOutcome::Solved { target, value, relational } => {
            assert!(relational);
            assert_eq!(format!("{target} = {value}"), "E[x[tau]] = E[x[tau-1]]");
        }
        other => panic!("{other}"),
    }
}

#[test]
fn refused_without_side_conditions() {
    let src = MOMENTUM.replace("#assume-ost\n", "");
    let r = run(&src, false, "");
    match r.raw {
        Err(OstError::Refused(obs)) => assert!(obs.iter().any(|o| o.contains("E[tau] < inf"))),
        other => panic!("{other:?}"),
    }
}

#[test]
fn miniabra() {
    let r = run(MINIABRA, false, "");
    let (_, v) = value(&r);
    assert_eq!(v, rf("14"));
    assert!(matches!(status(&r.side, "variant exit"), CondStatus::Obligation(_)));
    assert!(matches!(status(&r.side, "variant range"), CondStatus::Verified(_)));
    assert!(matches!(status(&r.side, "variant decrease"), CondStatus::Verified(_)), "{:?}", r.side);
}

#[test]
fn abracadabra_symbolic() {
    let r = run(FULLABRA, false, "");
    let (t, v) = value(&r);
    assert_eq!(t, "E[tau]");
    assert_eq!(v, rf("L + L^4 + L^11"));
    assert!(matches!(status(&r.side, "bounded increments"), CondStatus::Verified(_)));
    assert!(matches!(status(&r.side, "variant exit"), CondStatus::Obligation(_)));
    assert!(matches!(status(&r.side, "variant decrease"), CondStatus::Verified(_)), "{:?}", r.side);
    assert_eq!(r.rs.vars.len(), 12);
}

#[test]
fn conflicting_hints_are_rejected() {
    let prog = parse_program(GAMBLE).unwrap();
    let rs = extract_recurrences(&prog).unwrap();
    let env = param_env(&prog);
    let hs = crate::frontend::parse_hints("at-exit: x = 0; at-exit: x = b", &prog).unwrap();
    let fact = Fact {
        lhs: Poly::param("a"),
        rhs: Poly::exp(parse_poly("x[tau]", &Default::default()).unwrap()),
        status: FactStatus::Raw,
    };
    assert!(matches!(apply_hints(&fact, &hs, &rs, &env), Err(OstError::HintConflict(_))));
}

#[test]
fn fact_files_round_trip() {
    let prog = parse_program(GAMBLE).unwrap();
    let rs = extract_recurrences(&prog).unwrap();
    let facts = parse_fact_file(GAMBLE_FACT, &rs).unwrap();
    assert_eq!(print_fact_file(&facts), "Pr[x[tau] = b] = a/b\n");
    assert_eq!(parse_fact_file(&print_fact_file(&facts), &rs).unwrap(), facts);
    assert!(matches!(parse_fact_file("x = 1", &rs), Err(OstError::FactFile { line: 1, .. })));
}
