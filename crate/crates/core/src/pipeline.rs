//! End-to-end analysis: program text in, martingale, side conditions and
//! facts out, plus optional Monte Carlo validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use crate::doob::{doob_decompose, DoobError, MartingaleForm};
use crate::frontend::{
    parse_hints, parse_hints_at, parse_program, parse_seed, parse_seed_at, parse_variant, parse_variant_at,
    FrontendError, Hint, HintScope, Program,
};
use crate::montecarlo::{Check, Probe, SimConfig, SimError, SimReport, Simulation, Validation};
use crate::ost::fact::fact_ctx;
use crate::ost::{
    apply_hints, apply_ost, default_target, parse_fact_file, parse_target, side_conditions, solve_for, CondStatus,
    Fact, KnownFact, OstError, SideConditions, SolveOutcome,
};
use crate::recurrence::{
    at_i, extract_recurrences, lift_seed, lower_guard, param_env, RecurrenceError, RecurrenceSystem,
};
use crate::symbolic::parse::parse_poly;
use crate::symbolic::{ParamEnv, Rational, SymbolicError};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{file}:{source}")]
    Frontend { file: String, source: FrontendError },
    #[error(transparent)]
    Recurrence(#[from] RecurrenceError),
    #[error(transparent)]
    Doob(#[from] DoobError),
    #[error(transparent)]
    Ost(#[from] OstError),
    #[error("{path}: {source}")]
    FactFile { path: String, source: OstError },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no seed expression; add `#seed: ...` to the program or pass --seed")]
    MissingSeed,
    #[error("bad parameter assignment `{0}`; expected name = value")]
    BadAssignment(String),
}

#[derive(Clone, Debug, Default)]
pub struct AnalysisRequest {
    pub source: String,
    /// Where the program came from; fact files named in pragmas resolve
    /// relative to it.
    pub path: Option<PathBuf>,
    pub seed: Option<String>,
    pub hints: Vec<String>,
    pub variant: Option<String>,
    pub solve_for: Option<String>,
    /// Fact files given on the command line, relative to the working directory.
    pub use_facts: Vec<PathBuf>,
    pub assume_ost: bool,
    pub trace_rules: bool,
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Io { path: path.display().to_string(), msg: e.to_string() })
}

impl AnalysisRequest {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        Ok(AnalysisRequest { source: read(path)?, path: Some(path.to_path_buf()), ..Default::default() })
    }

    pub fn from_source(source: &str) -> Self {
        AnalysisRequest { source: source.to_string(), ..Default::default() }
    }

    fn name(&self) -> String {
        self.path
            .as_ref()
            .and_then(|p| p.file_name())
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "<input>".into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Solved,
    Residual,
    Refused,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Solved => "solved",
            Status::Residual => "residual",
            Status::Refused => "refused",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Solved => 0,
            Status::Residual => 2,
            Status::Refused => 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub name: String,
    pub program: Program,
    pub rs: RecurrenceSystem,
    pub env: ParamEnv,
    pub seed: String,
    pub form: MartingaleForm,
    pub side: SideConditions,
    /// OST applied with unverified side conditions.
    pub assumed: bool,
    pub raw: Option<Fact>,
    pub hinted: Option<Fact>,
    pub solved: Option<SolveOutcome>,
    pub known: Vec<KnownFact>,
    pub warnings: Vec<String>,
    pub trace_rules: bool,
}

fn frontend(file: &str) -> impl Fn(FrontendError) -> PipelineError + '_ {
    move |source| PipelineError::Frontend { file: file.to_string(), source }
}

/// Run frontend, recurrence extraction, Doob decomposition and OST.
pub fn analyze(req: &AnalysisRequest) -> Result<Analysis, PipelineError> {
    let name = req.name();
    let fe = frontend(&name);
    let program = parse_program(&req.source).map_err(&fe)?;
    let pr = &program.pragmas;
    let mut warnings = Vec::new();
    let mut flag_wins = |what: &str, pragma: bool, flag: bool| {
        if pragma && flag {
            warnings.push(format!("--{what} overrides the #{what} pragma"));
        }
    };
    flag_wins("seed", pr.seed.is_some(), req.seed.is_some());
    flag_wins("hint", !pr.hints.is_empty(), !req.hints.is_empty());
    flag_wins("variant", pr.variant.is_some(), req.variant.is_some());
    flag_wins("solve-for", pr.solve_for.is_some(), req.solve_for.is_some());
    flag_wins("use-fact", !pr.use_facts.is_empty(), !req.use_facts.is_empty());

    let rs = extract_recurrences(&program)?;
    let env = param_env(&program);

    let (seed_text, seed) = match (&req.seed, &pr.seed) {
        (Some(s), _) => (s.clone(), parse_seed(s, &program).map_err(&fe)?),
        (None, Some(s)) => (s.node.clone(), parse_seed_at(&s.node, &program, s.span).map_err(&fe)?),
        (None, None) => return Err(PipelineError::MissingSeed),
    };
    let hints: Vec<Hint> = if req.hints.is_empty() {
        let mut out = Vec::new();
        for h in &pr.hints {
            out.extend(parse_hints_at(&h.node, &program, h.span).map_err(&fe)?);
        }
        out
    } else {
        let mut out = Vec::new();
        for h in &req.hints {
            out.extend(parse_hints(h, &program).map_err(&fe)?);
        }
        out
    };
    let variant = match (&req.variant, &pr.variant) {
        (Some(v), _) => Some(parse_variant(v, &program).map_err(&fe)?),
        (None, Some(v)) => Some(parse_variant_at(&v.node, &program, v.span).map_err(&fe)?),
        (None, None) => None,
    };
    let fact_paths: Vec<PathBuf> = if req.use_facts.is_empty() {
        let dir = req.path.as_ref().and_then(|p| p.parent()).map(Path::to_path_buf).unwrap_or_default();
        pr.use_facts.iter().map(|f| dir.join(&f.node)).collect()
    } else {
        req.use_facts.clone()
    };
    let mut known = Vec::new();
    for p in &fact_paths {
        let text = read(p)?;
        let facts = parse_fact_file(&text, &rs)
            .map_err(|source| PipelineError::FactFile { path: p.display().to_string(), source })?;
        known.extend(facts);
    }

    let sp = lift_seed(&rs, &seed)?;
    let form = doob_decompose(&rs, &sp)?;
    let invariants = hints
        .iter()
        .filter(|h| h.scope == HintScope::EveryIteration)
        .map(|h| lower_guard(&h.formula, &at_i(0), None))
        .collect::<Result<Vec<_>, SymbolicError>>()
        .map_err(OstError::from)?;
    let side = side_conditions(&rs, &env, &sp, &form, variant.as_ref(), &invariants)?;

    let assume = req.assume_ost || pr.assume_ost;
    drop(fe);
    let mut out = Analysis {
        name,
        program: program.clone(),
        rs,
        env,
        seed: seed_text,
        form,
        assumed: assume && !side.all_verified(),
        side,
        raw: None,
        hinted: None,
        solved: None,
        known,
        warnings,
        trace_rules: req.trace_rules,
    };
    let raw = match apply_ost(&out.form, &out.side, assume) {
        Ok(f) => f,
        Err(OstError::Refused(_)) => return Ok(out),
        Err(e) => return Err(e.into()),
    };
    let (hinted, report) = apply_hints(&raw, &hints, &out.rs, &out.env)?;
    out.warnings.extend(report.unused.iter().map(|h| format!("hint not used: {h}")));
    let target = match (&req.solve_for, &pr.solve_for) {
        (Some(t), _) => Some(parse_target(t, &out.rs)?),
        (None, Some(t)) => Some(parse_target(&t.node, &out.rs)?),
        (None, None) => default_target(&hinted),
    };
    out.solved = match target {
        Some(t) => Some(solve_for(&hinted, &t, &out.known)?),
        None => None,
    };
    out.raw = Some(raw);
    out.hinted = Some(hinted);
    Ok(out)
}

impl Analysis {
    pub fn status(&self) -> Status {
        match (&self.raw, &self.solved) {
            (None, _) => Status::Refused,
            (Some(_), Some(s)) if s.is_solved() => Status::Solved,
            _ => Status::Residual,
        }
    }

    fn notes(&self) -> Vec<String> {
        let mut n = Vec::new();
        if self.rs.samples.len() > 1 {
            n.push("distinct sampling statements are treated as independent".to_string());
        }
        if self.assumed {
            n.push("optional stopping applied with the obligations above assumed".to_string());
        }
        n
    }

    /// Human-readable report.
    pub fn text_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "program: {}", self.name);
        let _ = writeln!(s, "status: {}", self.status().as_str());
        s.push_str("\nRECURRENCES\n");
        for x in &self.rs.vars {
            let _ = writeln!(s, "  {x}[i] = {}", self.rs.polys[x]);
        }
        for (v, d) in &self.rs.samples {
            let _ = writeln!(s, "  {v} ~ {d}");
        }
        let _ = writeln!(s, "\nSEED\n  {}", self.seed);
        s.push_str("\nMARTINGALE\n");
        let _ = writeln!(s, "  M_{} = {}", self.form.base, self.form.m0);
        let _ = writeln!(s, "  M_i = {}  (i > {})", self.form.mi, self.form.base);
        if self.trace_rules {
            for st in &self.form.trace {
                let _ = writeln!(s, "  rule {}: {} => {}", st.rule, st.before, st.after);
            }
        }
        s.push_str("\nSIDE CONDITIONS\n");
        for c in &self.side.conditions {
            let _ = writeln!(s, "  {c}");
        }
        if self.assumed {
            for o in self.side.obligations() {
                let _ = writeln!(s, "  assumed: {o}");
            }
        }
        s.push_str("\nOST FACT\n");
        match &self.raw {
            Some(f) => {
                let _ = writeln!(s, "  {f}");
            }
            None => s.push_str("  refused: side conditions not verified (use --assume-ost to proceed)\n"),
        }
        if let Some(h) = &self.hinted {
            let _ = writeln!(s, "\nHINTED FACT\n  {h}");
        }
        s.push_str("\nFINAL FACT\n");
        match &self.solved {
            Some(SolveOutcome::Solved { target, value, relational }) => {
                let kind = if *relational { "solved (relational)" } else { "solved" };
                let _ = writeln!(s, "  {target} = {value}\n  {kind}");
            }
            Some(SolveOutcome::Residual { equation, unknowns }) => {
                let names: Vec<String> = unknowns.iter().map(|u| u.to_string()).collect();
                let _ = writeln!(s, "  {equation}\n  residual; unknowns: {}", names.join(", "));
            }
            None => s.push_str("  none\n"),
        }
        if !self.known.is_empty() {
            s.push_str("\nKNOWN FACTS\n");
            for k in &self.known {
                let _ = writeln!(s, "  {k}");
            }
        }
        let notes: Vec<String> = self.warnings.iter().map(|w| format!("warning: {w}")).chain(self.notes()).collect();
        if !notes.is_empty() {
            s.push_str("\nNOTES\n");
            for n in notes {
                let _ = writeln!(s, "  {n}");
            }
        }
        s
    }

    /// Structured report, schema 1.
    pub fn to_json(&self) -> Value {
        let fact = |f: &Option<Fact>| f.as_ref().map(|f| json!({"lhs": f.lhs.to_string(), "rhs": f.rhs.to_string()}));
        let (solved, residual) = match &self.solved {
            Some(SolveOutcome::Solved { target, value, relational }) => (
                json!({"target": target.to_string(), "closed_form": value.to_string(), "relational": relational}),
                Value::Null,
            ),
            Some(SolveOutcome::Residual { equation, unknowns }) => (
                Value::Null,
                json!({
                    "equation": equation.to_string(),
                    "unknowns": unknowns.iter().map(|u| u.to_string()).collect::<Vec<_>>(),
                }),
            ),
            None => (Value::Null, Value::Null),
        };
        let mut rules = Vec::new();
        if self.trace_rules {
            rules = self
                .form
                .trace
                .iter()
                .map(|st| json!({"rule": st.rule, "before": st.before.to_string(), "after": st.after.to_string()}))
                .collect();
        }
        json!({
            "schema": SCHEMA,
            "program": self.name,
            "status": self.status().as_str(),
            "recurrences": self.rs.vars.iter().map(|x| (x.clone(), Value::from(self.rs.polys[x].to_string()))).collect::<serde_json::Map<_, _>>(),
            "samples": self.rs.samples.iter().map(|(v, d)| (v.clone(), Value::from(d.to_string()))).collect::<serde_json::Map<_, _>>(),
            "seed": self.seed,
            "martingale": {
                "base": self.form.base,
                "m0": self.form.m0.to_string(),
                "mi": self.form.mi.to_string(),
                "rules": rules,
            },
            "side_conditions": self.side.conditions.iter().map(|c| {
                let (status, detail) = match &c.status {
                    CondStatus::Verified(d) => ("verified", d),
                    CondStatus::Obligation(d) => ("obligation", d),
                };
                json!({"name": c.name, "status": status, "detail": detail})
            }).collect::<Vec<_>>(),
            "seed_bound": self.side.seed_bound.as_ref().map(|b| b.to_string()),
            "increment_bound": self.side.increment_bound.as_ref().map(|b| b.to_string()),
            "obligations": self.side.obligations(),
            "assumed": self.assumed,
            "fact": fact(&self.raw),
            "hinted": fact(&self.hinted),
            "solved": solved,
            "residual": residual,
            "known_facts": self.known.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
            "warnings": self.warnings,
            "notes": self.notes(),
        })
    }

    /// Equations to check by simulation: the OST fact, the hinted fact and
    /// the final fact.
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        for f in self.raw.iter().chain(self.hinted.iter()) {
            out.push(Check::from_fact(f));
        }
        match &self.solved {
            Some(SolveOutcome::Solved { target, value, .. }) => out.push(Check::new(target.clone(), value.clone())),
            Some(SolveOutcome::Residual { equation, .. }) => out.push(Check::from_fact(equation)),
            None => {}
        }
        out.dedup_by(|a, b| a.label == b.label);
        out
    }

    pub fn probe(&self) -> Probe {
        Probe {
            m0: self.form.m0.clone(),
            increment: self.form.increment.clone(),
            base: self.form.base,
            bound: self.side.increment_bound.clone(),
        }
    }

    /// Parameter values from the `#sim-params` pragma, if any.
    pub fn sim_params(&self) -> Result<Option<BTreeMap<String, Rational>>, PipelineError> {
        self.program.pragmas.sim_params.as_ref().map(|p| parse_assignments(&p.node)).transpose()
    }
}

/// `a = 3, b = 10` (also accepts `a=3`).
pub fn parse_assignments(text: &str) -> Result<BTreeMap<String, Rational>, PipelineError> {
    let mut out = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| PipelineError::BadAssignment(part.into()))?;
        let value = parse_poly(v.trim(), &Default::default())
            .ok()
            .and_then(|p| p.as_constant())
            .ok_or_else(|| PipelineError::BadAssignment(part.into()))?;
        out.insert(k.trim().to_string(), value);
    }
    Ok(out)
}

/// Simulate `analysis` at concrete parameters and check every derived fact,
/// the stopped martingale and the increment bound.
pub fn validate(
    analysis: &Analysis,
    params: BTreeMap<String, Rational>,
    config: SimConfig,
) -> Result<(SimReport, Validation), PipelineError> {
    let mut sim = Simulation::new(&analysis.program, params, config)?;
    sim.checks = analysis.checks();
    sim.probe = Some(analysis.probe());
    let report = sim.run()?;
    let v = sim.validate(&report);
    Ok((report, v))
}

/// Plain simulation: `tau` and each quantity at the stopping time.
pub fn simulate(
    program: &Program,
    params: BTreeMap<String, Rational>,
    config: SimConfig,
    quantities: &[String],
) -> Result<SimReport, PipelineError> {
    let rs = extract_recurrences(program)?;
    let ctx = fact_ctx(&rs);
    let mut sim = Simulation::new(program, params, config)?;
    for q in quantities {
        let p = parse_poly(q, &ctx).map_err(OstError::from)?;
        sim.quantities.push((q.clone(), p));
    }
    Ok(sim.run()?)
}

fn moments_json(m: &crate::montecarlo::Moments) -> Value {
    let var = m.stderr() * m.stderr() * m.n as f64;
    json!({"n": m.n, "mean": m.mean(), "variance": var, "stderr": m.stderr()})
}

pub fn sim_json(report: &SimReport, config: &SimConfig, labels: &[String], validation: Option<&Validation>) -> Value {
    let mut v = json!({
        "schema": SCHEMA,
        "trials": report.trials,
        "censored": report.censored,
        "rng_seed": config.seed,
        "max_steps": config.max_steps,
        "tau": moments_json(&report.tau),
        "quantities": labels.iter().zip(&report.quantities).map(|(l, m)| {
            let mut q = moments_json(m);
            q["expr"] = Value::from(l.clone());
            q
        }).collect::<Vec<_>>(),
    });
    if let Some(val) = validation {
        v["verdict"] = Value::from(val.verdict.to_string());
        v["checks"] = val.lines.iter().map(|l| json!({"label": l.label, "pass": l.pass, "detail": l.detail})).collect();
        v["max_increment"] = report.max_increment.as_ref().map(|m| Value::from(m.to_string())).unwrap_or(Value::Null);
    }
    v
}

pub fn sim_text(report: &SimReport, config: &SimConfig, labels: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "trials: {} (censored {}, max steps {})", report.trials, report.censored, config.max_steps);
    let _ = writeln!(s, "rng seed: {}", config.seed);
    let line = |s: &mut String, label: &str, m: &crate::montecarlo::Moments| {
        let _ = writeln!(s, "{label}: mean {:.6}, stderr {:.6}", m.mean(), m.stderr());
    };
    line(&mut s, "tau", &report.tau);
    for (l, m) in labels.iter().zip(&report.quantities) {
        line(&mut s, l, m);
    }
    s
}

/// The programs a bench run expects, in table order.
pub const BENCH_SUITE: [&str; 5] = ["geom", "gamble", "gamble2", "miniabra", "fullabra"];

#[derive(Clone, Debug)]
pub enum BenchResult {
    Done { status: Status, elapsed: Duration, fact: String },
    Error(String),
    Skipped,
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub name: String,
    pub result: BenchResult,
}

/// Time the analysis of each suite program found in `dir`. A directory
/// with none of them gives an empty table; missing ones are skipped.
pub fn bench(dir: &Path) -> Vec<BenchRow> {
    let present: Vec<bool> = BENCH_SUITE.iter().map(|n| dir.join(format!("{n}.spp")).is_file()).collect();
    if !present.iter().any(|p| *p) {
        return Vec::new();
    }
    BENCH_SUITE
        .iter()
        .zip(present)
        .map(|(name, here)| {
            let result = if !here {
                BenchResult::Skipped
            } else {
                let start = Instant::now();
                match AnalysisRequest::from_file(&dir.join(format!("{name}.spp"))).and_then(|r| analyze(&r)) {
                    Ok(a) => BenchResult::Done {
                        status: a.status(),
                        elapsed: start.elapsed(),
                        fact: a.solved.as_ref().map(|s| s.to_string()).unwrap_or_default(),
                    },
                    Err(e) => BenchResult::Error(e.to_string()),
                }
            };
            BenchRow { name: name.to_string(), result }
        })
        .collect()
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut s = format!("{:<10} {:>10}  {:<9} {}\n", "program", "seconds", "status", "fact");
    for r in rows {
        let _ = match &r.result {
            BenchResult::Done { status, elapsed, fact } => {
                writeln!(s, "{:<10} {:>10.3}  {:<9} {}", r.name, elapsed.as_secs_f64(), status.as_str(), fact)
            }
            BenchResult::Error(e) => writeln!(s, "{:<10} {:>10}  {:<9} {}", r.name, "-", "ERROR", e),
            BenchResult::Skipped => writeln!(s, "{:<10} {:>10}  SKIPPED", r.name, "-"),
        };
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn programs() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
    }

    #[test]
    fn assignments() {
        let m = parse_assignments("a = 3, b=10, p = 1/2").unwrap();
        assert_eq!(m["p"], Rational::new(1.into(), 2.into()));
        assert_eq!(m.len(), 3);
        assert!(parse_assignments("a 3").is_err());
        assert!(parse_assignments("a = x").is_err());
    }

    #[test]
    fn flags_override_pragmas() {
        let mut req = AnalysisRequest::from_file(&programs().join("gamble.spp")).unwrap();
        req.seed = Some("x*x".into());
        req.solve_for = Some("E[tau]".into());
        let a = analyze(&req).unwrap();
        assert_eq!(a.form.mi.to_string(), "x[i]^2 - i");
        assert!(a.warnings.iter().any(|w| w.contains("--seed")));
        assert_eq!(a.status(), Status::Residual);
        req.use_facts = vec![programs().join("gamble.fact")];
        assert_eq!(analyze(&req).unwrap().status(), Status::Solved);
    }

    #[test]
    fn missing_seed_and_refusal() {
        let src = "x[0] := 0; while (x < 3) do z ~ Bern(1/2, {0, 1}); x := x + z; end";
        assert!(matches!(analyze(&AnalysisRequest::from_source(src)), Err(PipelineError::MissingSeed)));
        let mut req = AnalysisRequest::from_source(src);
        req.seed = Some("x".into());
        let a = analyze(&req).unwrap();
        assert_eq!(a.status(), Status::Refused);
        assert!(a.text_report().contains("refused"));
        assert_eq!(a.to_json()["status"], "refused");
    }

    #[test]
    fn frontend_errors_carry_positions() {
        let e = analyze(&AnalysisRequest::from_source("x[0] := q; while (x < 1) do x := x; end")).unwrap_err();
        assert_eq!(e.to_string(), "<input>:1:9: undeclared identifier `q`");
    }

    #[test]
    fn bench_handles_empty_and_partial_suites() {
        let empty = std::env::temp_dir().join(format!("mgale-empty-{}", std::process::id()));
        std::fs::create_dir_all(&empty).unwrap();
        assert!(bench(&empty).is_empty());
        std::fs::copy(programs().join("geom.spp"), empty.join("geom.spp")).unwrap();
        let rows = bench(&empty);
        assert_eq!(rows.len(), 5);
        assert!(matches!(rows[0].result, BenchResult::Done { status: Status::Solved, .. }));
        assert!(matches!(rows[1].result, BenchResult::Skipped));
        assert!(bench_table(&rows).contains("SKIPPED"));
        std::fs::remove_dir_all(&empty).unwrap();
    }
}
