//! Expectation facts `lhs = rhs`, hint simplification and solving.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;

use crate::frontend::{Guard, Hint, HintScope};
use crate::recurrence::{lower_guard, RecurrenceSystem};
use crate::symbolic::parse::{parse_equation, parse_poly, ParseCtx};
use crate::symbolic::subst::rebase_time;
use crate::symbolic::sum::peel_last;
use crate::symbolic::{
    simplify_sum, substitute, Atom, Bindings, CmpOp, Formula, IndexExpr, ParamEnv, Poly, RatFn, TimeVar,
};

use super::side::decide;
use super::OstError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactStatus {
    Raw,
    HintSimplified,
    Solved,
    Residual,
}

impl FactStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FactStatus::Raw => "raw",
            FactStatus::HintSimplified => "hint-simplified",
            FactStatus::Solved => "solved",
            FactStatus::Residual => "residual",
        }
    }
}

/// `lhs = rhs`, where `rhs` is built from expectation atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct Fact {
    pub lhs: Poly,
    pub rhs: Poly,
    pub status: FactStatus,
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

/// A known fact `atom = value`, e.g. from a fact file.
#[derive(Clone, Debug, PartialEq)]
pub struct KnownFact {
    pub lhs: Poly,
    pub rhs: RatFn,
}

impl fmt::Display for KnownFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

fn tau() -> IndexExpr {
    IndexExpr::tau(0)
}

/// Name of the placeholder index used for every-iteration hints.
const HINT_INDEX: &str = "k";

/// Push expectations through sums and constants: `E[c*X + d] = c*E[X] + d`.
pub fn linearize(p: &Poly) -> Poly {
    p.map_atoms(&mut |a| match a {
        Atom::Exp(body) => {
            let body = simplify_sum(body);
            body.map_terms(|m, c| {
                let atoms = m.atom_part();
                let scale = Poly::term(m.param_part(), c.clone());
                if atoms.is_one() {
                    scale
                } else {
                    scale * Poly::exp(Poly::monomial(atoms))
                }
            })
        }
        other => Poly::atom(other.clone()),
    })
}

/// Apply `f` to the body of every expectation in `p`.
fn map_exp_bodies(p: &Poly, f: &mut dyn FnMut(&Poly) -> Result<Poly, OstError>) -> Result<Poly, OstError> {
    let mut err = None;
    let out = p.map_atoms(&mut |a| match a {
        Atom::Exp(body) => match f(body) {
            Ok(b) => Poly::exp(b),
            Err(e) => {
                err.get_or_insert(e);
                Poly::atom(a.clone())
            }
        },
        other => Poly::atom(other.clone()),
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Equalities `atom = value` in a conjunction, oriented atom-first.
fn equalities(f: &Formula) -> Option<Vec<(Atom, Poly)>> {
    match f {
        Formula::True => Some(vec![]),
        Formula::And(v) => {
            let mut out = Vec::new();
            for x in v {
                out.extend(equalities(x)?);
            }
            Some(out)
        }
        Formula::Cmp(CmpOp::Eq, a, b) => {
            let pick = |atom: &Poly, other: &Poly| -> Option<(Atom, Poly)> {
                let at = atom.as_atom()?;
                if !matches!(at, Atom::Process { .. }) || other.atoms().contains(at) {
                    return None;
                }
                Some((at.clone(), other.clone()))
            };
            pick(a, b).or_else(|| pick(b, a)).map(|e| vec![e])
        }
        _ => None,
    }
}

fn bind(into: &mut Bindings, atom: Atom, val: Poly, source: &str) -> Result<bool, OstError> {
    match into.get(&atom) {
        Some(old) if (old - &val).is_zero() => Ok(false),
        Some(old) => Err(OstError::HintConflict(format!("{atom} = {old} and {atom} = {val} ({source})"))),
        None => {
            into.insert(atom, val);
            Ok(true)
        }
    }
}

/// Close `bindings` under implication hints whose premise becomes decidable.
fn resolve_implications(
    bindings: &mut Bindings,
    implications: &[(Formula, Formula, String)],
    env: &ParamEnv,
    used: &mut BTreeSet<usize>,
) -> Result<(), OstError> {
    loop {
        let mut changed = false;
        for (n, (premise, conclusion, text)) in implications.iter().enumerate() {
            let p = premise.map_polys(&mut |q| substitute(q, bindings).unwrap_or_else(|_| q.clone()));
            if decide(&p, env) != Some(true) {
                continue;
            }
            let Some(eqs) = equalities(conclusion) else { continue };
            used.insert(n);
            for (a, v) in eqs {
                changed |= bind(bindings, a, v, text)?;
            }
        }
        if !changed {
            return Ok(());
        }
    }
}

/// Every-iteration equality hints, keyed by variable: `(offset, value over k)`.
type EveryHints = BTreeMap<String, Vec<(i64, Poly)>>;

/// Replace process atoms at indices provably below `tau` using `every`.
fn apply_every(p: &Poly, every: &EveryHints) -> Poly {
    let k = TimeVar::named(HINT_INDEX);
    let lookup = |name: &str, ix: &IndexExpr, below_tau: bool| -> Option<Poly> {
        if !below_tau {
            return None;
        }
        let (off, val) = every.get(name)?.first()?;
        Some(rebase_time(val, &k, &ix.shifted(-off)))
    };
    p.map_atoms(&mut |a| match a {
        Atom::Process { name, index } => {
            let below = index.base == Some(TimeVar::Tau) && index.offset <= -1;
            lookup(name, index, below).unwrap_or_else(|| Poly::atom(a.clone()))
        }
        Atom::Sum(s) => {
            let mentions =
                s.body.atoms().iter().any(|x| matches!(x, Atom::Process { name, .. } if every.contains_key(name)));
            if !mentions || s.hi.base != Some(TimeVar::Tau) {
                return Poly::atom(a.clone());
            }
            // Peel trailing terms until every summand index is below tau.
            let max_off = s
                .body
                .atoms()
                .iter()
                .filter_map(|x| match x {
                    Atom::Process { index, .. } if index.uses(&s.bound()) => Some(index.offset),
                    _ => None,
                })
                .max()
                .unwrap_or(0);
            let mut peeled = Poly::zero();
            let mut node = (**s).clone();
            while node.hi.offset + max_off > -1 {
                let split = peel_last(&node);
                let mut rest = Poly::zero();
                let mut inner = None;
                for (m, c) in split.terms() {
                    match m.atoms() {
                        [(Atom::Sum(n), 1)]
                            if m.params().is_empty() && c == &crate::symbolic::int(1) && n.var == node.var =>
                        {
                            inner = Some((**n).clone())
                        }
                        _ => rest.add_term(m.clone(), c.clone()),
                    }
                }
                peeled = peeled + rest;
                match inner {
                    Some(n) => node = n,
                    None => return apply_every(&peeled, every),
                }
            }
            let bound = node.bound();
            let body = node.body.map_atoms(&mut |x| match x {
                Atom::Process { name, index } if index.uses(&bound) => {
                    let below = node.hi.offset + index.offset <= -1;
                    lookup(name, index, below).unwrap_or_else(|| Poly::atom(x.clone()))
                }
                other => Poly::atom(other.clone()),
            });
            let summed = simplify_sum(&Poly::sum(&node.var, node.lo.clone(), node.hi.clone(), body));
            summed + apply_every(&peeled, every)
        }
        other => Poly::atom(other.clone()),
    })
}

/// Notes on how hints were used.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HintReport {
    pub unused: Vec<String>,
}

/// Rewrite a raw fact with hints: at-exit equalities and implications
/// substitute at `tau`, disjunctive at-exit hints split into indicator
/// cases, every-iteration equalities substitute below `tau`.
pub fn apply_hints(
    fact: &Fact,
    hints: &[Hint],
    rs: &RecurrenceSystem,
    env: &ParamEnv,
) -> Result<(Fact, HintReport), OstError> {
    let t = tau();
    let mut report = HintReport::default();
    let mut exit = Bindings::new();
    let mut cases: Vec<(Vec<(Formula, Bindings)>, String)> = Vec::new();
    let mut implications: Vec<(Formula, Formula, String)> = Vec::new();
    let mut every: EveryHints = BTreeMap::new();

    for h in hints {
        let text = h.to_string();
        match h.scope {
            HintScope::AtExit => {
                let f = lower_guard(&h.formula, &t, Some(&t))?;
                if let Some(eqs) = equalities(&f) {
                    for (a, v) in eqs {
                        bind(&mut exit, a, v, &text)?;
                    }
                } else if let Formula::Or(parts) = &f {
                    let mut split = Vec::new();
                    for part in parts {
                        let Some(eqs) = equalities(part) else {
                            split.clear();
                            break;
                        };
                        let mut b = Bindings::new();
                        for (a, v) in eqs {
                            bind(&mut b, a, v, &text)?;
                        }
                        split.push((part.clone(), b));
                    }
                    if split.is_empty() {
                        report.unused.push(text);
                    } else {
                        check_disjoint(&split, env, &text)?;
                        cases.push((split, text));
                    }
                } else {
                    report.unused.push(text);
                }
            }
            HintScope::Implication => {
                let Guard::Implies(a, b) = &h.formula else { unreachable!("checked by the parser") };
                implications.push((lower_guard(a, &t, Some(&t))?, lower_guard(b, &t, Some(&t))?, text));
            }
            HintScope::EveryIteration => {
                let k = IndexExpr::named(HINT_INDEX, 0);
                let f = lower_guard(&h.formula, &k, None)?;
                match equalities(&f) {
                    Some(eqs) => {
                        for (a, v) in eqs {
                            let Atom::Process { name, index } = &a else { continue };
                            let slot = every.entry(name.clone()).or_default();
                            if let Some((o, old)) = slot.first() {
                                let same = *o == index.offset && (old - &v).is_zero();
                                if !same {
                                    return Err(OstError::HintConflict(format!(
                                        "two every-iteration values for {name} ({text})"
                                    )));
                                }
                                continue;
                            }
                            slot.push((index.offset, v));
                        }
                    }
                    None => report.unused.push(text),
                }
            }
        }
    }

    let mut used = BTreeSet::new();
    resolve_implications(&mut exit, &implications, env, &mut used)?;

    let init = rs.init_bindings();
    let mut rhs = map_exp_bodies(&fact.rhs, &mut |b| {
        let b = substitute(b, &init)?;
        let b = apply_every(&b, &every);
        Ok(substitute(&b, &exit)?)
    })?;
    rhs = linearize(&rhs);

    for (split, _) in &cases {
        let keys: BTreeSet<Atom> = split.iter().flat_map(|(_, b)| b.keys().cloned()).collect();
        let mut err = None;
        rhs = rhs.map_atoms(&mut |a| {
            let Atom::Exp(body) = a else { return Poly::atom(a.clone()) };
            let mentions = body.atoms().iter().any(|x| keys.contains(x));
            if !mentions {
                return Poly::atom(a.clone());
            }
            let mut total = Poly::zero();
            for (formula, b) in split {
                let mut b = b.clone();
                for (k, v) in &exit {
                    b.entry(k.clone()).or_insert_with(|| v.clone());
                }
                if let Err(e) = resolve_implications(&mut b, &implications, env, &mut used) {
                    err.get_or_insert(e);
                }
                let inner = substitute(body, &b).unwrap_or_else(|_| (**body).clone());
                total = total + Poly::exp(inner * Poly::indicator(formula.clone()));
            }
            total
        });
        if let Some(e) = err {
            return Err(e);
        }
        rhs = linearize(&rhs);
    }
    for (n, (_, _, text)) in implications.iter().enumerate() {
        if !used.contains(&n) {
            report.unused.push(text.clone());
        }
    }

    Ok((Fact { lhs: fact.lhs.clone(), rhs: simplify_sum(&rhs), status: FactStatus::HintSimplified }, report))
}

/// Disjuncts of a case-split hint must be mutually exclusive.
fn check_disjoint(split: &[(Formula, Bindings)], env: &ParamEnv, text: &str) -> Result<(), OstError> {
    for (n, (_, a)) in split.iter().enumerate() {
        for (_, b) in &split[n + 1..] {
            let apart = a.iter().any(|(k, v)| {
                b.get(k).is_some_and(|w| {
                    let d = v - w;
                    d.is_param_only() && (env.is_positive(&d) || env.is_positive(&-&d))
                })
            });
            if !apart {
                return Err(OstError::HintConflict(format!("cases of `{text}` may overlap")));
            }
        }
    }
    Ok(())
}

/// Result of solving a fact for a target.
#[derive(Clone, Debug, PartialEq)]
pub enum SolveOutcome {
    /// `target = value`; `relational` when `value` still mentions expectations.
    Solved {
        target: Poly,
        value: RatFn,
        relational: bool,
    },
    Residual {
        equation: Fact,
        unknowns: Vec<Poly>,
    },
}

impl SolveOutcome {
    pub fn is_solved(&self) -> bool {
        matches!(self, SolveOutcome::Solved { .. })
    }
}

impl fmt::Display for SolveOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveOutcome::Solved { target, value, .. } => write!(f, "{target} = {value}"),
            SolveOutcome::Residual { equation, .. } => write!(f, "{equation}"),
        }
    }
}

fn exp_atoms(p: &Poly) -> Vec<Atom> {
    p.atoms().into_iter().filter(|a| matches!(a, Atom::Exp(_))).collect()
}

/// `E[x[tau-k]]` for a process variable.
fn is_exit_value(a: &Atom) -> bool {
    match a {
        Atom::Exp(body) => {
            matches!(body.as_atom(), Some(Atom::Process { index, .. }) if index.base == Some(TimeVar::Tau))
        }
        _ => false,
    }
}

/// Substitute known facts into `f = 0`, clearing denominators.
fn substitute_known(f: &Poly, known: &[KnownFact]) -> Poly {
    let mut f = f.clone();
    for k in known {
        let Some(atom) = k.lhs.as_atom() else { continue };
        let cs = f.coefficients_in(atom);
        let deg = cs.len() - 1;
        if deg == 0 {
            continue;
        }
        let mut out = Poly::zero();
        for (n, c) in cs.iter().enumerate() {
            out = out + c * &(k.rhs.num.pow(n as u32) * k.rhs.den.pow((deg - n) as u32));
        }
        f = out;
    }
    f
}

/// Default solve target: `E[tau]` if it occurs, else the first unknown.
pub fn default_target(fact: &Fact) -> Option<Poly> {
    let f = &fact.rhs - &fact.lhs;
    let tau_exp = Atom::Exp(Box::new(Poly::time(TimeVar::Tau)));
    let atoms = exp_atoms(&f);
    if atoms.contains(&tau_exp) {
        return Some(Poly::atom(tau_exp));
    }
    atoms.into_iter().next().map(Poly::atom)
}

/// Isolate `target` in `fact` after substituting `known`.
pub fn solve_for(fact: &Fact, target: &Poly, known: &[KnownFact]) -> Result<SolveOutcome, OstError> {
    let Some(t) = target.as_atom().filter(|a| matches!(a, Atom::Exp(_))) else {
        return Err(OstError::BadTarget(target.to_string()));
    };
    let f = substitute_known(&(&fact.rhs - &fact.lhs), known);
    let residual = |f: &Poly| {
        let unknowns = exp_atoms(f).into_iter().map(Poly::atom).collect();
        SolveOutcome::Residual {
            equation: Fact { lhs: Poly::zero(), rhs: f.clone(), status: FactStatus::Residual },
            unknowns,
        }
    };
    let cs = f.coefficients_in(t);
    if cs.len() != 2 || !cs[1].is_param_only() || cs[1].is_zero() {
        return Ok(residual(&f));
    }
    let value = RatFn::new(-&cs[0], cs[1].clone())?;
    if cs[0].is_param_only() {
        return Ok(SolveOutcome::Solved { target: target.clone(), value, relational: false });
    }
    let others = exp_atoms(&cs[0]);
    let linear = cs[0].terms().all(|(m, _)| m.atom_degree() <= 1);
    if is_exit_value(t) && linear && others.iter().all(is_exit_value) && cs[0].constant_term().is_zero() {
        return Ok(SolveOutcome::Solved { target: target.clone(), value, relational: true });
    }
    Ok(residual(&f))
}

/// Parse context for expectation syntax over a program's variables.
pub fn fact_ctx(rs: &RecurrenceSystem) -> ParseCtx {
    ParseCtx::new().with_samples(rs.samples.keys().cloned())
}

/// Parse a solve target such as `E[tau]` or `Pr[x[tau] = b]`.
pub fn parse_target(text: &str, rs: &RecurrenceSystem) -> Result<Poly, OstError> {
    let p = parse_poly(text, &fact_ctx(rs)).map_err(|e| OstError::BadTarget(format!("{text}: {e}")))?;
    match p.as_atom() {
        Some(Atom::Exp(_)) => Ok(p),
        _ => Err(OstError::BadTarget(format!("{text}: expected E[..] or Pr[..]"))),
    }
}

/// One `lhs = rhs` fact per line; `#` starts a comment.
pub fn parse_fact_file(text: &str, rs: &RecurrenceSystem) -> Result<Vec<KnownFact>, OstError> {
    let ctx = fact_ctx(rs);
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (lhs, rhs) =
            parse_equation(line, &ctx).map_err(|e| OstError::FactFile { line: n + 1, msg: e.to_string() })?;
        if !matches!(lhs.as_atom(), Some(Atom::Exp(_))) {
            return Err(OstError::FactFile { line: n + 1, msg: format!("left side `{lhs}` is not E[..] or Pr[..]") });
        }
        out.push(KnownFact { lhs, rhs });
    }
    Ok(out)
}

pub fn print_fact_file(facts: &[KnownFact]) -> String {
    facts.iter().map(|f| format!("{f}\n")).collect()
}
