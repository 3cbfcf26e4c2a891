//! Monte Carlo validation of synthesized facts and martingales.
//!
//! Trials run in parallel, each on its own ChaCha8 stream, and all sums are
//! exact rationals, so a report does not depend on the thread count.

mod compiled;
pub mod interp;
pub mod num;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::frontend::Program;
use crate::ost::Fact;
use crate::recurrence::loop_var;
use crate::symbolic::eval::eval_params;
use crate::symbolic::{Poly, RatFn, Rational, SymbolicError, TimeVar};

use compiled::{Compiled, Scope};

pub use interp::{ConcreteDist, Interpreter, Row, Trace};
pub use num::Num;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("distribution {0}")]
    Dist(String),
    #[error("evaluation: {0}")]
    Eval(String),
    #[error("missing value for parameter `{0}`")]
    MissingParam(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{name}` = {value} is outside its declared range")]
    BadParam { name: String, value: String },
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub max_steps: u64,
    /// `n` for the stopped-martingale probe `E[M_{b+n ∧ tau}] = M_b`.
    pub probe_times: Vec<i64>,
    /// Largest censored fraction before the run is aborted.
    pub max_censored: f64,
    /// Allowed distance in standard errors.
    pub tolerance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            trials: 100_000,
            seed: 0x5eed,
            max_steps: 1_000_000,
            probe_times: vec![1, 5, 10],
            max_censored: 0.001,
            tolerance: 4.0,
        }
    }
}

/// Exact first and second moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub n: u64,
    sum: Num,
    sum_sq: Num,
}

impl Default for Moments {
    fn default() -> Self {
        Moments { n: 0, sum: Num::zero(), sum_sq: Num::zero() }
    }
}

impl Moments {
    pub fn push(&mut self, x: &Rational) {
        self.push_num(&Num::from_rational(x));
    }

    pub fn push_num(&mut self, x: &Num) {
        self.n += 1;
        self.sum = self.sum.add(x);
        self.sum_sq = self.sum_sq.add(&x.mul(x));
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum = self.sum.add(&o.sum);
        self.sum_sq = self.sum_sq.add(&o.sum_sq);
    }

    pub fn sum(&self) -> Rational {
        self.sum.to_rational()
    }

    pub fn sum_sq(&self) -> Rational {
        self.sum_sq.to_rational()
    }

    /// Moments of `x - c` for every pushed `x`.
    pub fn shifted(&self, c: &Rational) -> Moments {
        let n = Rational::from_integer(self.n.into());
        let (sum, sq) = (self.sum(), self.sum_sq());
        let two = Rational::from_integer(2.into());
        Moments {
            n: self.n,
            sum: Num::from_rational(&(&sum - c * &n)),
            sum_sq: Num::from_rational(&(sq - two * c * &sum + c * c * n)),
        }
    }

    pub fn mean_exact(&self) -> Option<Rational> {
        (self.n > 0).then(|| self.sum() / Rational::from_integer(self.n.into()))
    }

    pub fn mean(&self) -> f64 {
        self.mean_exact().and_then(|m| m.to_f64()).unwrap_or(f64::NAN)
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = Rational::from_integer(self.n.into());
        let sum = self.sum();
        let var = (self.sum_sq() - &sum * &sum / &n) / (&n - Rational::from_integer(1.into()));
        (var / n).to_f64().unwrap_or(f64::NAN).max(0.0).sqrt()
    }
}

/// An equation `lhs = rhs` between expectations, estimated per trial by
/// replacing every `E[e]` with `e` at the stopping time.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub label: String,
    pub lhs: Poly,
    pub rhs: RatFn,
}

impl Check {
    pub fn new(lhs: Poly, rhs: RatFn) -> Self {
        Check { label: format!("{lhs} = {rhs}"), lhs, rhs }
    }

    pub fn from_fact(f: &Fact) -> Self {
        Check { label: f.to_string(), lhs: f.lhs.clone(), rhs: RatFn::from_poly(f.rhs.clone()) }
    }
}

/// Martingale probe: `M_b` and the increment `M_j - M_{j-1}` over `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub m0: Poly,
    pub increment: Poly,
    pub base: i64,
    /// Claimed bound on `|M_j - M_{j-1}|`.
    pub bound: Option<Poly>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckStats {
    pub lhs: Moments,
    pub rhs: Moments,
    pub diff: Moments,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimReport {
    pub trials: u64,
    pub censored: u64,
    pub tau: Moments,
    pub quantities: Vec<Moments>,
    pub checks: Vec<CheckStats>,
    /// Largest `|M_j - M_{j-1}|` seen.
    pub max_increment: Option<Rational>,
    /// `M_{b+n ∧ tau}` per probe time.
    pub stopped: Vec<Moments>,
}

impl SimReport {
    fn empty(quantities: usize, checks: usize, probes: usize) -> Self {
        SimReport {
            quantities: vec![Moments::default(); quantities],
            checks: vec![CheckStats::default(); checks],
            stopped: vec![Moments::default(); probes],
            ..Default::default()
        }
    }

    /// Associative and commutative.
    pub fn merge(mut self, o: SimReport) -> SimReport {
        self.trials += o.trials;
        self.censored += o.censored;
        self.tau.merge(&o.tau);
        for (a, b) in self.quantities.iter_mut().zip(&o.quantities) {
            a.merge(b);
        }
        for (a, b) in self.checks.iter_mut().zip(&o.checks) {
            a.lhs.merge(&b.lhs);
            a.rhs.merge(&b.rhs);
            a.diff.merge(&b.diff);
        }
        for (a, b) in self.stopped.iter_mut().zip(&o.stopped) {
            a.merge(b);
        }
        self.max_increment = match (self.max_increment, o.max_increment) {
            (Some(a), Some(b)) => Some(if a >= b { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

pub struct Simulation<'a> {
    pub interp: Interpreter<'a>,
    /// Expressions over the final state (and `tau`), estimated as given.
    pub quantities: Vec<(String, Poly)>,
    pub checks: Vec<Check>,
    pub probe: Option<Probe>,
    pub config: SimConfig,
}

/// Everything evaluated per trial, compiled against the parameter values.
struct Prepared {
    quantities: Vec<Compiled>,
    /// `lhs`, numerator and denominator of `rhs`.
    checks: Vec<(Compiled, Compiled, Num)>,
    m0: Num,
    increment: Option<Compiled>,
}

impl<'a> Simulation<'a> {
    pub fn new(program: &'a Program, params: BTreeMap<String, Rational>, config: SimConfig) -> Result<Self, SimError> {
        Ok(Simulation {
            interp: Interpreter::new(program, params)?,
            quantities: Vec::new(),
            checks: Vec::new(),
            probe: None,
            config,
        })
    }

    fn prepare(&self) -> Result<Prepared, SimError> {
        let (vars, params) = (&self.interp.vars, &self.interp.params);
        let at_tau = |p: &Poly| Compiled::compile(p, &mut Scope::new(vars, params, &[TimeVar::Tau]));
        let mut checks = Vec::new();
        for c in &self.checks {
            let den = eval_params(&c.rhs.den, params)?;
            if den.is_zero() {
                return Err(SymbolicError::DivisionByZero.into());
            }
            checks.push((at_tau(&c.lhs)?, at_tau(&c.rhs.num)?, Num::from_rational(&den.recip())));
        }
        let (m0, increment) = match &self.probe {
            Some(p) => {
                let times = [loop_var(), TimeVar::named("j")];
                let inc = Compiled::compile(&p.increment, &mut Scope::new(vars, params, &times))?;
                (Num::from_rational(&eval_params(&p.m0, params)?), Some(inc))
            }
            None => (Num::zero(), None),
        };
        Ok(Prepared {
            quantities: self.quantities.iter().map(|(_, q)| at_tau(q)).collect::<Result<_, _>>()?,
            checks,
            m0,
            increment,
        })
    }

    fn trial(&self, k: u64, prep: &Prepared, into: &mut SimReport) -> Result<(), SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(k);
        let mut m = prep.m0.clone();
        let mut max_inc: Option<Num> = None;
        let mut stopped: Vec<Option<Num>> = vec![None; self.config.probe_times.len()];
        let mut times = Vec::with_capacity(4);
        let trace = self.interp.run(&mut rng, self.config.max_steps, &mut |j, window| {
            let (Some(p), Some(inc)) = (&self.probe, &prep.increment) else {
                return Ok(());
            };
            let newest = window.len() as i64 - 1;
            let rows = |k: i64| usize::try_from(newest - (j - k)).ok().and_then(|p| window.get(p));
            times.clear();
            times.extend([j, j]);
            let d = inc.eval(&rows, &mut times)?;
            let a = d.abs();
            if max_inc.as_ref().is_none_or(|b| a.cmp(b).is_gt()) {
                max_inc = Some(a);
            }
            m = m.add(&d);
            for (slot, n) in stopped.iter_mut().zip(&self.config.probe_times) {
                if j == p.base + n {
                    *slot = Some(m.clone());
                }
            }
            Ok(())
        })?;
        into.trials += 1;
        if trace.censored {
            into.censored += 1;
            return Ok(());
        }
        into.tau.push_num(&Num::int(trace.tau));
        let rows = |k: i64| trace.row(k);
        let mut at_tau = |c: &Compiled| {
            times.clear();
            times.push(trace.tau);
            c.eval(&rows, &mut times)
        };
        for (q, st) in prep.quantities.iter().zip(into.quantities.iter_mut()) {
            st.push_num(&at_tau(q)?);
        }
        for ((lhs, num, inv_den), st) in prep.checks.iter().zip(into.checks.iter_mut()) {
            let x = at_tau(lhs)?;
            let y = at_tau(num)?.mul(inv_den);
            st.diff.push_num(&x.add(&y.mul(&Num::int(-1))));
            st.lhs.push_num(&x);
            st.rhs.push_num(&y);
        }
        if self.probe.is_some() {
            for (slot, acc) in stopped.into_iter().zip(into.stopped.iter_mut()) {
                acc.push_num(&slot.unwrap_or_else(|| m.clone()));
            }
            into.max_increment = match (into.max_increment.take(), max_inc.map(|n| n.to_rational())) {
                (Some(a), Some(b)) => Some(if a >= b { a } else { b }),
                (a, b) => a.or(b),
            };
        }
        Ok(())
    }

    pub fn run(&self) -> Result<SimReport, SimError> {
        let prep = self.prepare()?;
        let probes = if self.probe.is_some() { self.config.probe_times.len() } else { 0 };
        let empty = || SimReport::empty(self.quantities.len(), self.checks.len(), probes);
        const CHUNK: u64 = 256;
        let chunks = self.config.trials.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut r = empty();
                for k in c * CHUNK..((c + 1) * CHUNK).min(self.config.trials) {
                    self.trial(k, &prep, &mut r)?;
                }
                Ok(r)
            })
            .try_reduce(empty, |a, b| Ok(a.merge(b)))
    }

    pub fn validate(&self, report: &SimReport) -> Validation {
        let cfg = &self.config;
        let mut lines = Vec::new();
        let frac = if report.trials == 0 { 0.0 } else { report.censored as f64 / report.trials as f64 };
        if frac > cfg.max_censored {
            return Validation {
                verdict: SimVerdict::Aborted(format!(
                    "{} of {} trials hit the {}-step limit",
                    report.censored, report.trials, cfg.max_steps
                )),
                lines,
            };
        }
        for (c, st) in self.checks.iter().zip(&report.checks) {
            lines.push(Line::estimate(&c.label, &st.diff, st.lhs.mean(), st.rhs.mean(), cfg.tolerance));
        }
        if let Some(p) = &self.probe {
            let m0 = eval_params(&p.m0, &self.interp.params).ok();
            for (n, st) in cfg.probe_times.iter().zip(&report.stopped) {
                let diff = match &m0 {
                    Some(m0) => st.shifted(m0),
                    None => st.clone(),
                };
                let label = format!("E[M_({} ^ tau)] = M_{}", p.base + n, p.base);
                let expected = m0.as_ref().and_then(|m| m.to_f64()).unwrap_or(f64::NAN);
                lines.push(Line::estimate(&label, &diff, st.mean(), expected, cfg.tolerance));
            }
            if let (Some(b), Some(seen)) = (&p.bound, &report.max_increment) {
                match eval_params(b, &self.interp.params) {
                    Ok(bound) => lines.push(Line {
                        label: format!("|M_j - M_(j-1)| <= {b}"),
                        detail: format!("max seen {seen}, bound {bound}"),
                        pass: *seen <= bound,
                    }),
                    Err(e) => lines.push(Line {
                        label: format!("|M_j - M_(j-1)| <= {b}"),
                        detail: e.to_string(),
                        pass: false,
                    }),
                }
            }
        }
        let verdict = if lines.iter().all(|l| l.pass) { SimVerdict::Pass } else { SimVerdict::Fail };
        Validation { verdict, lines }
    }
}

/// Slack for estimates whose exact difference is zero up to rounding.
const ABS_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum SimVerdict {
    Pass,
    Fail,
    Aborted(String),
}

impl fmt::Display for SimVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimVerdict::Pass => f.write_str("PASS"),
            SimVerdict::Fail => f.write_str("FAIL"),
            SimVerdict::Aborted(why) => write!(f, "ABORTED ({why})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub label: String,
    pub detail: String,
    pub pass: bool,
}

impl Line {
    fn estimate(label: &str, diff: &Moments, lhs: f64, rhs: f64, tol: f64) -> Line {
        let d = diff.mean_exact().unwrap_or_default();
        let se = diff.stderr();
        let pass = d.is_zero() || d.to_f64().is_some_and(|d| d.abs() <= tol * se.max(0.0) + ABS_FLOOR);
        Line {
            label: label.to_string(),
            detail: format!("lhs {lhs:.6}, rhs {rhs:.6}, diff {:.6}, stderr {se:.6}", d.to_f64().unwrap_or(f64::NAN)),
            pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub verdict: SimVerdict,
    pub lines: Vec<Line>,
}

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "[{}] {}: {}", if l.pass { "pass" } else { "FAIL" }, l.label, l.detail)?;
        }
        write!(f, "{}", self.verdict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::symbolic::parse::{parse_poly, parse_ratfn, ParseCtx};

    fn params(kv: &[(&str, i64, i64)]) -> BTreeMap<String, Rational> {
        kv.iter().map(|(k, n, d)| (k.to_string(), Rational::new((*n).into(), (*d).into()))).collect()
    }

    const GEOM: &str = include_str!("../../../../programs/geom.spp");

    fn geom_sim(value: &str, trials: u64) -> (SimReport, Validation) {
        let prog = parse_program(GEOM).unwrap();
        let cfg = SimConfig { trials, ..Default::default() };
        let mut sim = Simulation::new(&prog, params(&[("p", 1, 2)]), cfg).unwrap();
        let ctx = ParseCtx::new();
        sim.checks.push(Check::new(parse_poly("E[tau]", &ctx).unwrap(), parse_ratfn(value, &ctx).unwrap()));
        sim.probe = Some(Probe {
            m0: Poly::zero(),
            increment: parse_poly("z[j] - p", &ctx.clone().with_samples(["z".to_string()])).unwrap(),
            base: 0,
            bound: Some(Poly::one()),
        });
        let r = sim.run().unwrap();
        let v = sim.validate(&r);
        (r, v)
    }

    #[test]
    fn geometric_passes_and_corruption_fails() {
        let (r, v) = geom_sim("1/(1 - p)", 20_000);
        assert_eq!(v.verdict, SimVerdict::Pass, "{v}");
        assert_eq!(r.censored, 0);
        assert_eq!(r.max_increment, Some(Rational::new(1.into(), 2.into())));
        let (_, v) = geom_sim("1/(1 - p) + 1", 20_000);
        assert_eq!(v.verdict, SimVerdict::Fail, "{v}");
    }

    #[test]
    fn reports_do_not_depend_on_chunking() {
        let (a, _) = geom_sim("1/(1 - p)", 1000);
        let prog = parse_program(GEOM).unwrap();
        let cfg = SimConfig { trials: 1000, ..Default::default() };
        let mut sim = Simulation::new(&prog, params(&[("p", 1, 2)]), cfg).unwrap();
        let ctx = ParseCtx::new();
        sim.checks.push(Check::new(parse_poly("E[tau]", &ctx).unwrap(), parse_ratfn("1/(1 - p)", &ctx).unwrap()));
        sim.probe = Some(Probe {
            m0: Poly::zero(),
            increment: parse_poly("z[j] - p", &ctx.clone().with_samples(["z".to_string()])).unwrap(),
            base: 0,
            bound: Some(Poly::one()),
        });
        let prep = sim.prepare().unwrap();
        let mut seq = SimReport::empty(0, 1, 3);
        for k in (0..1000).rev() {
            let mut one = SimReport::empty(0, 1, 3);
            sim.trial(k, &prep, &mut one).unwrap();
            seq = one.merge(seq);
        }
        assert_eq!(a, seq);
    }

    #[test]
    fn censoring_aborts() {
        let prog = parse_program("x[0] := 0; while (x < 1) do z ~ Bern(1/2, {0, -1}); x := x + z; end").unwrap();
        let cfg = SimConfig { trials: 50, max_steps: 100, ..Default::default() };
        let sim = Simulation::new(&prog, BTreeMap::new(), cfg).unwrap();
        let r = sim.run().unwrap();
        assert_eq!(r.censored, 50);
        assert!(matches!(sim.validate(&r).verdict, SimVerdict::Aborted(_)));
    }
}
