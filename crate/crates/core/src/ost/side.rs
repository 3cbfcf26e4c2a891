//! Side conditions of the optional stopping theorem: bounded increments and
//! a bounded variant for finite expected stopping time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::doob::MartingaleForm;
use crate::frontend::VariantSpec;
use crate::recurrence::{at_i, loop_var, lower_expr, RecurrenceSystem, SeedProcess};
use crate::symbolic::subst::rebase_time;
use crate::symbolic::{substitute, Atom, Bindings, CmpOp, Formula, ParamEnv, Poly, RatFn, Rational};

use super::interval::{eval_interval, SymInterval};
use super::OstError;

/// Rounds before widening, on top of one per variable (values can take
/// that long to propagate along a chain of variables).
const WIDEN_AFTER: usize = 3;
const MAX_ROUNDS: usize = 32;
/// Largest state grid enumerated when checking the decrease clause.
const MAX_STATES: u64 = 1 << 12;

#[derive(Clone, Debug, PartialEq)]
pub enum CondStatus {
    Verified(String),
    Obligation(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SideCondition {
    pub name: String,
    pub status: CondStatus,
}

impl SideCondition {
    fn verified(name: &str, detail: impl Into<String>) -> Self {
        SideCondition { name: name.into(), status: CondStatus::Verified(detail.into()) }
    }

    fn obligation(name: &str, detail: impl Into<String>) -> Self {
        SideCondition { name: name.into(), status: CondStatus::Obligation(detail.into()) }
    }

    pub fn is_verified(&self) -> bool {
        matches!(self.status, CondStatus::Verified(_))
    }
}

impl fmt::Display for SideCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            CondStatus::Verified(d) => write!(f, "[verified] {}: {d}", self.name),
            CondStatus::Obligation(d) => write!(f, "[obligation] {}: {d}", self.name),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SideConditions {
    pub conditions: Vec<SideCondition>,
    /// `C` with `|E_i| <= C` on every state written by an iteration.
    pub seed_bound: Option<Poly>,
    /// Proven bound on `|M_i - M_{i-1}|`.
    pub increment_bound: Option<Poly>,
}

impl SideConditions {
    pub fn all_verified(&self) -> bool {
        self.conditions.iter().all(SideCondition::is_verified)
    }

    pub fn obligations(&self) -> Vec<String> {
        self.conditions
            .iter()
            .filter_map(|c| match &c.status {
                CondStatus::Obligation(d) => Some(format!("{}: {d}", c.name)),
                CondStatus::Verified(_) => None,
            })
            .collect()
    }
}

/// Decide a formula whose comparisons are between parameter-only terms.
pub fn decide(f: &Formula, env: &ParamEnv) -> Option<bool> {
    match f {
        Formula::True => Some(true),
        Formula::False => Some(false),
        Formula::Cmp(op, a, b) => {
            if !a.is_param_only() || !b.is_param_only() {
                return None;
            }
            let eq = if (a - b).is_zero() {
                Some(true)
            } else if env.lt(a, b) || env.lt(b, a) {
                Some(false)
            } else {
                None
            };
            match op {
                CmpOp::Eq => eq,
                CmpOp::Ne => eq.map(|e| !e),
                CmpOp::Lt if env.lt(a, b) => Some(true),
                CmpOp::Lt if env.le(b, a) => Some(false),
                CmpOp::Le if env.le(a, b) => Some(true),
                CmpOp::Le if env.lt(b, a) => Some(false),
                _ => None,
            }
        }
        Formula::And(v) => {
            let mut all = true;
            for x in v {
                match decide(x, env) {
                    Some(false) => return Some(false),
                    None => all = false,
                    Some(true) => {}
                }
            }
            all.then_some(true)
        }
        Formula::Or(v) => {
            let mut none = true;
            for x in v {
                match decide(x, env) {
                    Some(true) => return Some(true),
                    None => none = false,
                    Some(false) => {}
                }
            }
            none.then_some(false)
        }
        Formula::Not(x) => decide(x, env).map(|b| !b),
    }
}

/// Integer-valued parameter polynomial.
fn int_param_poly(p: &Poly, env: &ParamEnv) -> bool {
    p.terms().all(|(m, c)| {
        c.is_integer()
            && m.atoms().is_empty()
            && m.params().iter().all(|(n, e)| *e >= 0 && env.range(n).is_some_and(|r| r.integer))
    })
}

fn int_poly(p: &Poly, env: &ParamEnv, ints: &BTreeSet<String>) -> bool {
    p.terms().all(|(m, c)| {
        c.is_integer()
            && m.params().iter().all(|(n, e)| *e >= 0 && env.range(n).is_some_and(|r| r.integer))
            && m.atoms().iter().all(|(a, _)| match a {
                Atom::Process { name, .. } => ints.contains(name),
                Atom::Sample { .. } | Atom::Time(_) => true,
                _ => false,
            })
    })
}

/// Interval facts about program states.
#[derive(Clone, Debug)]
pub struct StateAnalysis<'a> {
    pub rs: &'a RecurrenceSystem,
    pub env: &'a ParamEnv,
    /// Every value a process variable takes.
    pub reach: BTreeMap<String, SymInterval>,
    /// Values at a state from which the loop runs another iteration.
    pub live: BTreeMap<String, SymInterval>,
    /// Values written by an iteration.
    pub post: BTreeMap<String, SymInterval>,
    /// Sample coordinates at a state from which the loop continues.
    live_samples: BTreeMap<(String, u32), SymInterval>,
    pub integer_vars: BTreeSet<String>,
}

fn coord(proj: &Option<u32>) -> u32 {
    proj.unwrap_or(1)
}

impl<'a> StateAnalysis<'a> {
    /// Analyse `rs` under its guard plus `invariants` (formulas over the
    /// state at index `i` that hold whenever the loop continues).
    pub fn new(rs: &'a RecurrenceSystem, env: &'a ParamEnv, invariants: &[Formula]) -> Self {
        let integer_vars = integer_vars(rs, env);
        let mut formulas = vec![rs.guard.clone()];
        formulas.extend(invariants.iter().cloned());
        let cons = Constraints::collect(&formulas, env, &integer_vars);

        let mut init_state: BTreeMap<String, SymInterval> = BTreeMap::new();
        let mut reach: BTreeMap<String, SymInterval> = BTreeMap::new();
        for x in &rs.vars {
            let mut iv: Option<SymInterval> = None;
            for k in 0..rs.init_len {
                let pt = SymInterval::point(rs.init[&(x.clone(), k)].clone());
                iv = Some(match iv {
                    None => pt,
                    Some(cur) => cur.hull(&pt, env),
                });
            }
            let last = SymInterval::point(rs.init[&(x.clone(), rs.init_len - 1)].clone());
            init_state.insert(x.clone(), last);
            reach.insert(x.clone(), iv.unwrap_or_else(SymInterval::top));
        }

        let mut live_samples = BTreeMap::new();
        for (s, d) in &rs.samples {
            for c in 1..=d.arity as u32 {
                let (lo, hi) = d.support_interval(c as usize);
                let key = Atom::sample(s, at_i(0), if d.arity == 1 { None } else { Some(c) });
                live_samples.insert((s.clone(), c), cons.apply(&key, SymInterval::ints(lo, hi), env));
            }
        }

        let mut sa =
            StateAnalysis { rs, env, reach, live: BTreeMap::new(), post: BTreeMap::new(), live_samples, integer_vars };
        let widen_after = WIDEN_AFTER + rs.vars.len();
        let max_rounds = widen_after + MAX_ROUNDS;
        for round in 0..max_rounds {
            sa.refresh(&cons, &init_state);
            let mut next = BTreeMap::new();
            for x in &rs.vars {
                let old = &sa.reach[x];
                let mut n = old.hull(&sa.post[x], env);
                if round >= widen_after {
                    if n.lo != old.lo {
                        n.lo = None;
                    }
                    if n.hi != old.hi {
                        n.hi = None;
                    }
                }
                next.insert(x.clone(), n);
            }
            if next == sa.reach {
                break;
            }
            sa.reach = if round + 1 == max_rounds {
                rs.vars.iter().map(|x| (x.clone(), SymInterval::top())).collect()
            } else {
                next
            };
        }
        sa.refresh(&cons, &init_state);
        sa
    }

    fn refresh(&mut self, cons: &Constraints, init_state: &BTreeMap<String, SymInterval>) {
        let env = self.env;
        self.live = self
            .rs
            .vars
            .iter()
            .map(|x| {
                let key = Atom::process(x, at_i(0));
                let mut iv = cons.apply(&key, self.reach[x].clone(), env);
                if self.rs.do_while {
                    iv = iv.hull(&init_state[x], env);
                }
                (x.clone(), iv)
            })
            .collect();
        let post: BTreeMap<String, SymInterval> = self
            .rs
            .vars
            .iter()
            .map(|x| (x.clone(), eval_interval(&self.rs.polys[x], env, &|a| self.step_atom(a))))
            .collect();
        self.post = post;
    }

    fn sample_iv(&self, name: &str, proj: &Option<u32>, live: bool) -> SymInterval {
        let Some(d) = self.rs.samples.get(name) else { return SymInterval::top() };
        let c = coord(proj);
        if live {
            return self.live_samples.get(&(name.to_string(), c)).cloned().unwrap_or_else(SymInterval::top);
        }
        let (lo, hi) = d.support_interval(c as usize);
        SymInterval::ints(lo, hi)
    }

    /// Atoms of one iteration: `x[i-1]` is a continuing state, `s[i]` fresh.
    fn step_atom(&self, a: &Atom) -> SymInterval {
        match a {
            Atom::Process { name, index } if index.base == Some(loop_var()) => match index.offset {
                -1 => self.live[name].clone(),
                o if o < -1 => self.reach[name].clone(),
                _ => SymInterval::top(),
            },
            Atom::Sample { name, index, proj } if *index == at_i(0) => self.sample_iv(name, proj, false),
            _ => SymInterval::top(),
        }
    }

    /// Atoms of a continuing state at index `i`.
    fn state_atom(&self, a: &Atom) -> SymInterval {
        match a {
            Atom::Process { name, index } if index.base == Some(loop_var()) => match index.offset {
                0 => self.live[name].clone(),
                o if o < 0 => self.reach[name].clone(),
                _ => SymInterval::top(),
            },
            Atom::Sample { name, index, proj } if *index == at_i(0) => self.sample_iv(name, proj, true),
            _ => SymInterval::top(),
        }
    }

    /// Atoms of a state written by an iteration (`x[i]` is the new value).
    fn written_atom(&self, a: &Atom) -> SymInterval {
        match a {
            Atom::Process { name, index } if index.base == Some(loop_var()) => match index.offset {
                0 => self.post[name].clone(),
                -1 => self.live[name].clone(),
                _ => self.reach[name].clone(),
            },
            other => self.step_atom(other),
        }
    }
}

/// Process variables that only ever hold integers.
fn integer_vars(rs: &RecurrenceSystem, env: &ParamEnv) -> BTreeSet<String> {
    let mut ints: BTreeSet<String> = rs.vars.iter().cloned().collect();
    loop {
        let keep: BTreeSet<String> = ints
            .iter()
            .filter(|x| {
                (0..rs.init_len).all(|k| int_param_poly(&rs.init[&((*x).clone(), k)], env))
                    && int_poly(&rs.polys[*x], env, &ints)
            })
            .cloned()
            .collect();
        if keep == ints {
            return ints;
        }
        ints = keep;
    }
}

/// Bounds on single atoms read off conjunctions of comparisons.
struct Constraints {
    bounds: BTreeMap<Atom, SymInterval>,
    excluded: Vec<(Atom, Poly)>,
    ints: BTreeSet<Atom>,
}

impl Constraints {
    fn collect(formulas: &[Formula], env: &ParamEnv, int_vars: &BTreeSet<String>) -> Self {
        let mut c = Constraints { bounds: BTreeMap::new(), excluded: Vec::new(), ints: BTreeSet::new() };
        for f in formulas {
            c.add(f, env, int_vars);
        }
        c
    }

    fn add(&mut self, f: &Formula, env: &ParamEnv, int_vars: &BTreeSet<String>) {
        match f {
            Formula::And(v) => v.iter().for_each(|x| self.add(x, env, int_vars)),
            Formula::Cmp(op, a, b) => {
                let here = |p: &Poly| -> Option<Atom> {
                    let atom = p.as_atom()?;
                    match atom {
                        Atom::Process { index, .. } | Atom::Sample { index, .. } if *index == at_i(0) => {
                            Some(atom.clone())
                        }
                        _ => None,
                    }
                };
                let (atom, val, flipped) = match (here(a), here(b)) {
                    (Some(x), None) if b.is_param_only() => (x, b.clone(), false),
                    (None, Some(x)) if a.is_param_only() => (x, a.clone(), true),
                    _ => return,
                };
                let is_int = match &atom {
                    Atom::Process { name, .. } => int_vars.contains(name),
                    _ => true,
                };
                if is_int {
                    self.ints.insert(atom.clone());
                }
                let tight = is_int && int_param_poly(&val, env);
                let one = Poly::one();
                let iv = match (op, flipped) {
                    (CmpOp::Eq, _) => SymInterval::point(val),
                    (CmpOp::Ne, _) => {
                        self.excluded.push((atom, val));
                        return;
                    }
                    (CmpOp::Le, false) => SymInterval::new(None, Some(val)),
                    (CmpOp::Le, true) => SymInterval::new(Some(val), None),
                    (CmpOp::Lt, false) => SymInterval::new(None, Some(if tight { &val - &one } else { val })),
                    (CmpOp::Lt, true) => SymInterval::new(Some(if tight { &val + &one } else { val }), None),
                };
                let cur = self.bounds.remove(&atom).unwrap_or_else(SymInterval::top);
                self.bounds.insert(atom, cur.meet(&iv, env));
            }
            _ => {}
        }
    }

    fn apply(&self, atom: &Atom, iv: SymInterval, env: &ParamEnv) -> SymInterval {
        let mut iv = match self.bounds.get(atom) {
            Some(b) => iv.meet(b, env),
            None => iv,
        };
        let is_int = self.ints.contains(atom) || matches!(atom, Atom::Sample { .. });
        for (a, v) in &self.excluded {
            if a != atom || !is_int {
                continue;
            }
            if iv.lo.as_ref().is_some_and(|l| (l - v).is_zero()) {
                iv.lo = Some(v + &Poly::one());
            }
            if iv.hi.as_ref().is_some_and(|h| (h - v).is_zero()) {
                iv.hi = Some(v - &Poly::one());
            }
        }
        iv
    }
}

/// `|M_i - M_{i-1}|` bounded: first through a bound on the seed over every
/// written state, then directly on the Doob increment.
pub fn check_bounded_increments(
    sa: &StateAnalysis,
    sp: &SeedProcess,
    form: &MartingaleForm,
) -> (SideCondition, Option<Poly>, Option<Poly>) {
    const NAME: &str = "bounded increments";
    let env = sa.env;
    let seed_iv = eval_interval(&sp.e_i, env, &|a| sa.written_atom(a));
    if let Some(c) = seed_iv.abs_bound(env) {
        let two_c = c.scale(&Rational::from_integer(2.into()));
        let cond = SideCondition::verified(NAME, format!("|E_i| <= {c}, so |M_i - M_(i-1)| <= {two_c}"));
        return (cond, Some(c), Some(two_c));
    }
    let j = crate::symbolic::TimeVar::named("j");
    let delta = rebase_time(&form.increment, &j, &at_i(0));
    if let Ok(unrolled) = sa.rs.unroll(&delta, &at_i(0)) {
        let iv = eval_interval(&unrolled, env, &|a| sa.step_atom(a));
        if let Some(d) = iv.abs_bound(env) {
            let cond = SideCondition::verified(NAME, format!("|M_i - M_(i-1)| <= {d}"));
            return (cond, None, Some(d));
        }
    }
    let cond = SideCondition::obligation(NAME, format!("no bound found; E_i ranges over {seed_iv}"));
    (cond, None, None)
}

/// Clauses of a bounded variant `0 <= v < K`, `v = 0 => !guard`, and
/// `Pr(v decreases) >= eps`.
pub fn check_bounded_variant(sa: &StateAnalysis, spec: &VariantSpec) -> Result<Vec<SideCondition>, OstError> {
    let env = sa.env;
    let v = lower_expr(&spec.expr, &at_i(0), None)?;
    let k = lower_expr(&spec.bound, &at_i(0), None)?;
    let eps = spec.eps.as_ref().map(|e| lower_expr(e, &at_i(0), None)).transpose()?;
    let mut out = Vec::new();

    let iv = eval_interval(&v, env, &|a| sa.state_atom(a));
    let range_ok =
        iv.lo.as_ref().is_some_and(|l| env.is_nonnegative(l)) && iv.hi.as_ref().is_some_and(|h| env.lt(h, &k));
    out.push(if range_ok {
        SideCondition::verified("variant range", format!("{v} in {iv}, below {k}"))
    } else {
        SideCondition::obligation("variant range", format!("0 <= {v} < {k} (found {iv})"))
    });

    out.push(match pin_exit(sa.rs, &v, env) {
        Some(why) => SideCondition::verified("variant exit", why),
        None => SideCondition::obligation("variant exit", format!("{v} = 0 implies !({})", sa.rs.guard)),
    });

    out.push(check_decrease(sa, &v, eps.as_ref())?);
    Ok(out)
}

/// `v = 0` pins an atom to a value for which the guard is false.
fn pin_exit(rs: &RecurrenceSystem, v: &Poly, env: &ParamEnv) -> Option<String> {
    for a in v.atoms() {
        let cs = v.coefficients_in(&a);
        if cs.len() != 2 || !cs[0].is_param_only() || !cs[1].is_param_only() || cs[1].is_zero() {
            continue;
        }
        let Ok(val) = RatFn::new(-&cs[0], cs[1].clone()) else { continue };
        let Some(val) = val.as_poly().cloned() else { continue };
        let b: Bindings = [(a.clone(), val.clone())].into_iter().collect();
        let g = rs.guard.map_polys(&mut |p| substitute(p, &b).unwrap_or_else(|_| p.clone()));
        if decide(&g, env) == Some(false) {
            return Some(format!("v = 0 forces {a} = {val}, where the guard is false"));
        }
    }
    None
}

fn check_decrease(sa: &StateAnalysis, v: &Poly, eps: Option<&Poly>) -> Result<SideCondition, OstError> {
    const NAME: &str = "variant decrease";
    let env = sa.env;
    let rs = sa.rs;
    let next_ix = at_i(1);
    let v_next = rs.unroll(&rebase_time(v, &loop_var(), &next_ix), &next_ix)?;
    let d = &v_next - v;

    // Joint support of the samples drawn in the next iteration.
    let mut fresh: BTreeSet<String> = BTreeSet::new();
    d.visit_atoms_deep(&mut |a| {
        if let Atom::Sample { name, index, .. } = a {
            if *index == next_ix {
                fresh.insert(name.clone());
            }
        }
    });
    let mut outcomes: Vec<(Bindings, Poly)> = vec![(Bindings::new(), Poly::one())];
    for s in &fresh {
        let dist = &rs.samples[s];
        let mut grown = Vec::new();
        for (b, p) in &outcomes {
            for (point, q) in &dist.support {
                let mut b = b.clone();
                for (c, val) in point.iter().enumerate() {
                    let proj = if dist.arity == 1 { None } else { Some(c as u32 + 1) };
                    b.insert(Atom::sample(s, next_ix.clone(), proj), Poly::int(*val));
                }
                grown.push((b, p * q));
            }
        }
        outcomes = grown;
    }
    let diffs: Vec<(Poly, Poly)> =
        outcomes.iter().map(|(b, p)| Ok((substitute(&d, b)?, p.clone()))).collect::<Result<_, OstError>>()?;

    let state_atoms: BTreeSet<Atom> = diffs.iter().flat_map(|(q, _)| q.atoms()).collect();
    let ranges: Option<Vec<(Atom, i64, i64)>> =
        state_atoms.iter().map(|a| sa.state_atom(a).as_int_range().map(|(lo, hi)| (a.clone(), lo, hi))).collect();
    let grid = ranges.as_ref().and_then(|rs| {
        rs.iter().try_fold(1u64, |acc, (_, lo, hi)| {
            if hi < lo {
                return Some(0);
            }
            acc.checked_mul((hi - lo + 1) as u64).filter(|n| *n <= MAX_STATES)
        })
    });

    let mut probs: BTreeSet<Poly> = BTreeSet::new();
    match (ranges, grid) {
        (Some(ranges), Some(_)) => {
            let mut sign_cache: BTreeMap<Poly, bool> = BTreeMap::new();
            let mut point: Vec<i64> = ranges.iter().map(|(_, lo, _)| *lo).collect();
            if ranges.iter().all(|(_, lo, hi)| lo <= hi) {
                loop {
                    let vals: BTreeMap<&Atom, i64> = ranges.iter().zip(&point).map(|((a, _, _), v)| (a, *v)).collect();
                    let mut p = Poly::zero();
                    for (q, w) in &diffs {
                        let at = q.map_atoms(&mut |a| Poly::int(vals.get(a).copied().unwrap_or(0)));
                        let dec = *sign_cache.entry(at.clone()).or_insert_with(|| env.is_positive(&-&at));
                        if dec {
                            p = p + w.clone();
                        }
                    }
                    probs.insert(p);
                    // Next grid point.
                    let mut n = 0;
                    while n < point.len() {
                        if point[n] < ranges[n].2 {
                            point[n] += 1;
                            break;
                        }
                        point[n] = ranges[n].1;
                        n += 1;
                    }
                    if n == point.len() {
                        break;
                    }
                }
            }
        }
        _ => {
            let mut p = Poly::zero();
            for (q, w) in &diffs {
                let iv = eval_interval(q, env, &|a| sa.state_atom(a));
                if iv.hi.as_ref().is_some_and(|h| env.lt(h, &Poly::zero())) {
                    p = p + w.clone();
                }
            }
            probs.insert(p);
        }
    }

    match eps {
        Some(e) => {
            if !env.is_positive(e) {
                return Ok(SideCondition::obligation(NAME, format!("epsilon {e} is not provably positive")));
            }
            match probs.iter().find(|p| !env.le(e, p)) {
                None => Ok(SideCondition::verified(NAME, format!("decreases with probability >= {e}"))),
                Some(p) => Ok(SideCondition::obligation(NAME, format!("decrease probability {p} not provably >= {e}"))),
            }
        }
        None => {
            let mut min: Option<Poly> = None;
            for p in &probs {
                min = match min {
                    None => Some(p.clone()),
                    Some(m) if env.le(&m, p) => Some(m),
                    Some(m) if env.le(p, &m) => Some(p.clone()),
                    Some(_) => {
                        return Ok(SideCondition::obligation(
                            NAME,
                            "decrease probabilities are not comparable; give epsilon explicitly",
                        ))
                    }
                };
            }
            match min {
                Some(m) if env.is_positive(&m) => {
                    Ok(SideCondition::verified(NAME, format!("decreases with probability >= {m}")))
                }
                Some(m) => {
                    Ok(SideCondition::obligation(NAME, format!("decrease probability {m} not provably positive")))
                }
                None => Ok(SideCondition::obligation(NAME, "no reachable state")),
            }
        }
    }
}

/// All side conditions for applying optional stopping to `form`.
pub fn side_conditions(
    rs: &RecurrenceSystem,
    env: &ParamEnv,
    sp: &SeedProcess,
    form: &MartingaleForm,
    variant: Option<&VariantSpec>,
    invariants: &[Formula],
) -> Result<SideConditions, OstError> {
    let sa = StateAnalysis::new(rs, env, invariants);
    let (inc, seed_bound, increment_bound) = check_bounded_increments(&sa, sp, form);
    let mut conditions = vec![inc];
    match variant {
        Some(v) => conditions.extend(check_bounded_variant(&sa, v)?),
        None => conditions
            .push(SideCondition::obligation("finite expected stopping time", "E[tau] < inf (no variant given)")),
    }
    let mut probs = Vec::new();
    for d in rs.samples.values() {
        probs.extend(d.probability_obligations(env));
    }
    conditions.push(if probs.is_empty() {
        SideCondition::verified("distributions", "all probabilities in [0, 1]")
    } else {
        SideCondition::obligation("distributions", probs.join("; "))
    });
    Ok(SideConditions { conditions, seed_bound, increment_bound })
}

/// The interval of `p` over a continuing state, for diagnostics.
pub fn state_interval(sa: &StateAnalysis, p: &Poly) -> SymInterval {
    eval_interval(p, sa.env, &|a| sa.state_atom(a))
}
