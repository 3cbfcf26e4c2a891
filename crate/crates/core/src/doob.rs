//! Doob decomposition of a seed process into its martingale part, and a
//! symbolic martingale check.

use std::fmt;

use thiserror::Error;

use crate::distributions::MomentTable;
use crate::recurrence::{at_i, loop_var, RecurrenceSystem, SeedProcess};
use crate::symbolic::rewrite::rewrite_fixpoint;
use crate::symbolic::subst::{rebase_time, shift_time};
use crate::symbolic::sum::peel_last;
use crate::symbolic::{
    simplify_sum, Atom, CondExpNode, IndexExpr, Monomial, Poly, RewriteRule, RewriteStep, SymbolicError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DoobError {
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("conditional expectation could not be eliminated: {0}")]
    Stuck(String),
}

pub struct DoobCtx<'a> {
    pub rs: &'a RecurrenceSystem,
    pub moments: MomentTable,
}

impl<'a> DoobCtx<'a> {
    pub fn new(rs: &'a RecurrenceSystem) -> Self {
        DoobCtx { rs, moments: MomentTable::new() }
    }
}

/// Whether `ix` is known by the time the filtration at `f` is revealed.
fn index_measurable(ix: &IndexExpr, f: &IndexExpr) -> bool {
    match (&ix.base, &f.base) {
        (None, _) => true,
        _ => matches!(ix.compare(f), Some(o) if o.is_le()),
    }
}

pub fn measurable(a: &Atom, f: &IndexExpr) -> bool {
    match a {
        Atom::Process { index, .. } | Atom::Sample { index, .. } => index_measurable(index, f),
        Atom::Time(_) | Atom::Exp(_) => true,
        Atom::Sum(s) => {
            let top = rebase_time(&s.body, &s.bound(), &s.hi);
            poly_measurable(&top, f)
        }
        Atom::CondExp(c) => index_measurable(&c.filtration, f),
        Atom::Indicator(fm) => {
            let mut ok = true;
            fm.for_each_poly(&mut |p| ok &= poly_measurable(p, f));
            ok
        }
    }
}

fn poly_measurable(p: &Poly, f: &IndexExpr) -> bool {
    p.terms().all(|(m, _)| m.atoms().iter().all(|(a, _)| measurable(a, f)))
}

fn cond_exp_node(a: &Atom) -> Option<&CondExpNode> {
    match a {
        Atom::CondExp(c) => Some(c),
        _ => None,
    }
}

/// The single atom-only monomial of a CondExp body, if the body is one.
fn single_monomial(c: &CondExpNode) -> Option<&Monomial> {
    let mut it = c.body.terms();
    let (m, coef) = it.next()?;
    (it.next().is_none() && m.params().is_empty() && coef == &crate::symbolic::int(1)).then_some(m)
}

fn rule_constant(a: &Atom, _: &DoobCtx) -> Option<Poly> {
    let c = cond_exp_node(a)?;
    c.body.is_param_only().then(|| c.body.clone())
}

fn rule_linearity(a: &Atom, _: &DoobCtx) -> Option<Poly> {
    let c = cond_exp_node(a)?;
    if single_monomial(c).is_some() {
        return None;
    }
    Some(c.body.map_terms(|m, k| {
        let inner = Poly::monomial(m.atom_part());
        Poly::term(m.param_part(), k.clone()) * Poly::cond_exp(inner, c.filtration.clone())
    }))
}

fn rule_measurable(a: &Atom, _: &DoobCtx) -> Option<Poly> {
    let c = cond_exp_node(a)?;
    let m = single_monomial(c)?;
    m.atoms().iter().all(|(x, _)| measurable(x, &c.filtration)).then(|| c.body.clone())
}

fn rule_pull_out(a: &Atom, _: &DoobCtx) -> Option<Poly> {
    let c = cond_exp_node(a)?;
    let m = single_monomial(c)?;
    let (known, rest): (Vec<_>, Vec<_>) = m.atoms().iter().cloned().partition(|(x, _)| measurable(x, &c.filtration));
    if known.is_empty() || rest.is_empty() {
        return None;
    }
    let known = Poly::monomial(Monomial::from_parts(known, vec![]));
    let rest = Poly::monomial(Monomial::from_parts(rest, vec![]));
    Some(known * Poly::cond_exp(rest, c.filtration.clone()))
}

/// Fresh sample atoms of `m`, grouped by (name, index), when `m` has only
/// such atoms.
/// Sample name, index and coordinate powers.
type SampleGroup = (String, IndexExpr, Vec<(usize, u32)>);

fn sample_groups(m: &Monomial, f: &IndexExpr) -> Option<Vec<SampleGroup>> {
    let mut groups: Vec<SampleGroup> = Vec::new();
    for (a, k) in m.atoms() {
        let Atom::Sample { name, index, proj } = a else { return None };
        if !matches!(index.compare(f), Some(std::cmp::Ordering::Greater)) {
            return None;
        }
        let coord = proj.map(|p| p as usize).unwrap_or(1);
        match groups.iter_mut().find(|(n, ix, _)| n == name && ix == index) {
            Some(g) => g.2.push((coord, *k)),
            None => groups.push((name.clone(), index.clone(), vec![(coord, *k)])),
        }
    }
    Some(groups)
}

fn rule_moment(a: &Atom, ctx: &DoobCtx) -> Option<Poly> {
    let c = cond_exp_node(a)?;
    let m = single_monomial(c)?;
    let groups = sample_groups(m, &c.filtration)?;
    let [(name, _, powers)] = groups.as_slice() else { return None };
    let d = ctx.rs.samples.get(name)?;
    if powers.iter().any(|(coord, _)| *coord == 0 || *coord > d.arity) {
        return None;
    }
    Some(ctx.moments.moment(d, powers))
}

fn rule_independence(a: &Atom, _: &DoobCtx) -> Option<Poly> {
    let c = cond_exp_node(a)?;
    let m = single_monomial(c)?;
    let groups = sample_groups(m, &c.filtration)?;
    if groups.len() < 2 {
        return None;
    }
    let mut out = Poly::one();
    for (name, index, _) in groups {
        let part: Vec<(Atom, u32)> = m
            .atoms()
            .iter()
            .filter(|(x, _)| matches!(x, Atom::Sample { name: n, index: ix, .. } if *n == name && *ix == index))
            .cloned()
            .collect();
        out = out * Poly::cond_exp(Poly::monomial(Monomial::from_parts(part, vec![])), c.filtration.clone());
    }
    Some(out)
}

fn rule_sum_peel(a: &Atom, _: &DoobCtx) -> Option<Poly> {
    let c = cond_exp_node(a)?;
    let m = single_monomial(c)?;
    for (x, _) in m.atoms() {
        if let Atom::Sum(s) = x {
            if !measurable(x, &c.filtration) && matches!(s.hi.compare(&c.filtration), Some(o) if o.is_gt()) {
                let peeled = peel_last(s);
                let body = c.body.map_atoms(&mut |y| if y == x { peeled.clone() } else { Poly::atom(y.clone()) });
                return Some(Poly::cond_exp(body, c.filtration.clone()));
            }
        }
    }
    None
}

fn rule_unroll(a: &Atom, ctx: &DoobCtx) -> Option<Poly> {
    let c = cond_exp_node(a)?;
    let m = single_monomial(c)?;
    let target = m.atoms().iter().find_map(|(x, _)| match x {
        Atom::Process { index, .. } if matches!(index.compare(&c.filtration), Some(o) if o.is_gt()) => {
            Some(index.clone())
        }
        _ => None,
    })?;
    let body = ctx.rs.unroll(&c.body, &target).ok()?;
    Some(Poly::cond_exp(body, c.filtration.clone()))
}

/// Simplification rules for conditional expectations, in priority order.
pub fn rules<'a>() -> Vec<RewriteRule<DoobCtx<'a>>> {
    vec![
        RewriteRule { name: "constant", law: "E[c | F] = c", apply: rule_constant },
        RewriteRule { name: "linearity", law: "E[a*X + b*Y | F] = a*E[X | F] + b*E[Y | F]", apply: rule_linearity },
        RewriteRule { name: "measurable", law: "E[X | F] = X for F-measurable X", apply: rule_measurable },
        RewriteRule {
            name: "pull-out",
            law: "E[X_{i-n}*Y | F_{i-1}] = X_{i-n}*E[Y | F_{i-1}] (n > 0)",
            apply: rule_pull_out,
        },
        RewriteRule {
            name: "moment",
            law: "E[prod_c pi_c(S_i)^k_c | F_{i-1}] = moment of the sampled distribution",
            apply: rule_moment,
        },
        RewriteRule {
            name: "independence",
            law: "E[S*S' | F] = E[S | F]*E[S' | F] (S != S')",
            apply: rule_independence,
        },
        RewriteRule { name: "sum-peel", law: "sum(j=lo..i, f_j) = sum(j=lo..i-1, f_j) + f_i", apply: rule_sum_peel },
        RewriteRule { name: "unroll", law: "X_i = P_x(X_{i-1}, S_i)", apply: rule_unroll },
    ]
}

fn first_cond_exp(p: &Poly) -> Option<String> {
    let mut out = None;
    p.visit_atoms_deep(&mut |a| {
        if out.is_none() && matches!(a, Atom::CondExp(_)) {
            out = Some(a.to_string());
        }
    });
    out
}

/// Eliminate every conditional expectation in `e`.
pub fn eliminate(e: &Poly, ctx: &DoobCtx) -> Result<(Poly, Vec<RewriteStep>), DoobError> {
    let out = rewrite_fixpoint(e, &rules(), ctx)?;
    if let Some(stuck) = first_cond_exp(&out.result) {
        return Err(DoobError::Stuck(stuck));
    }
    Ok((out.result, out.trace))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleForm {
    /// `M_b`, parameters only.
    pub m0: Poly,
    /// `M_i` for `i > b`.
    pub mi: Poly,
    /// Index of the initial state.
    pub base: i64,
    /// `M_j - M_{j-1}` over the summation index `j`.
    pub increment: Poly,
    pub trace: Vec<RewriteStep>,
}

impl fmt::Display for MartingaleForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "M_{} = {}", self.base, self.m0)?;
        write!(f, "M_i = {}  (i > {})", self.mi, self.base)
    }
}

/// `M_i = E_b + sum(j=b+1..i, E_j - E[E_j | F_{j-1}])`, simplified.
pub fn doob_decompose(rs: &RecurrenceSystem, sp: &SeedProcess) -> Result<MartingaleForm, DoobError> {
    let ctx = DoobCtx::new(rs);
    let b = rs.base();
    let j = IndexExpr::named("j", 0);
    let e_j = rebase_time(&sp.e_i, &loop_var(), &j);
    let unrolled = rs.unroll(&e_j, &j)?;
    let increment = &e_j - &Poly::cond_exp(unrolled, j.shifted(-1));
    let (increment, trace) = eliminate(&increment, &ctx)?;
    let e_b = rebase_time(&sp.e_i, &loop_var(), &IndexExpr::abs(b));
    let raw = e_b + Poly::sum("j", IndexExpr::abs(b + 1), at_i(0), increment.clone());
    Ok(MartingaleForm { m0: sp.e_0.clone(), mi: simplify_sum(&raw), base: b, increment, trace })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Martingale,
    /// `E[M_i | F_{i-1}] - M_{i-1}` is this nonzero residual.
    NotMartingale(Poly),
    Unknown(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleCheck {
    pub verdict: Verdict,
    pub certificate: Vec<RewriteStep>,
}

impl MartingaleCheck {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Martingale
    }
}

/// Decide `E[M_i | F_{i-1}] = M_{i-1}` symbolically.
pub fn check_martingale(rs: &RecurrenceSystem, candidate: &Poly) -> MartingaleCheck {
    let ctx = DoobCtx::new(rs);
    let i = loop_var();
    let prev = shift_time(candidate, &i, -1);
    let e = Poly::cond_exp(candidate.clone(), at_i(-1)) - prev;
    match rewrite_fixpoint(&e, &rules(), &ctx) {
        Err(err) => MartingaleCheck { verdict: Verdict::Unknown(err.to_string()), certificate: Vec::new() },
        Ok(out) => {
            if let Some(stuck) = first_cond_exp(&out.result) {
                return MartingaleCheck { verdict: Verdict::Unknown(stuck), certificate: out.trace };
            }
            let residual = simplify_sum(&out.result);
            let verdict = if residual.is_zero() { Verdict::Martingale } else { Verdict::NotMartingale(residual) };
            MartingaleCheck { verdict, certificate: out.trace }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_program, parse_seed};
    use crate::recurrence::{extract_recurrences, lift_seed};
    use crate::symbolic::parse::{parse_poly, ParseCtx};

    fn p(s: &str) -> Poly {
        parse_poly(s, &ParseCtx::new()).unwrap()
    }

    fn decompose(src: &str, seed: &str) -> (RecurrenceSystem, MartingaleForm) {
        let prog = parse_program(src).unwrap();
        let rs = extract_recurrences(&prog).unwrap();
        let sp = lift_seed(&rs, &parse_seed(seed, &prog).unwrap()).unwrap();
        let m = doob_decompose(&rs, &sp).unwrap();
        (rs, m)
    }

    const GEOM: &str = "param p in (0, 1); x[0] := 0; while (z != 0) do z ~ Bern(p, {1, 0}); x := x[-1] + z; end";
    const GAMBLE: &str = "param a: int in [1, inf); param b: int in [2, inf);\nx[0] := a; while (0 < x < b) do z ~ Bern(1/2, {-1, 1}); x := x + z; end";
    const MOMENTUM: &str = "param a: int in [1, inf); param b: int in [2, inf);\nx[0] := a; x[1] := a; while (0 < x < b) do z ~ Bern(1/2, {-1, 1}); x := x[-1] + (x[-1] - x[-2]) + z; end";

    #[test]
    fn geometric() {
        let (rs, m) = decompose(GEOM, "x");
        assert_eq!(m.mi, p("x[i] - p*i"));
        assert_eq!(m.m0, Poly::zero());
        assert!(check_martingale(&rs, &m.mi).holds());
        match check_martingale(&rs, &p("x[i]")).verdict {
            Verdict::NotMartingale(r) => assert_eq!(r, p("p")),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn gambler_seeds() {
        let (rs, m) = decompose(GAMBLE, "x");
        assert_eq!(m.mi, p("x[i]"));
        assert_eq!(m.m0, p("a"));
        let (_, m2) = decompose(GAMBLE, "x*x");
        assert_eq!(m2.mi, p("x[i]^2 - i"));
        assert_eq!(m2.m0, p("a^2"));
        assert!(check_martingale(&rs, &m2.mi).holds());
        assert!(check_martingale(&rs, &p("a*b - 3")).holds());
    }

    #[test]
    fn momentum() {
        let (rs, m) = decompose(MOMENTUM, "x");
        assert_eq!(m.mi, p("x[0] + x[i] - x[i-1]"));
        assert_eq!(m.base, 1);
        assert!(check_martingale(&rs, &m.mi).holds());
    }

    #[test]
    fn abracadabra_keeps_a_residual_sum() {
        let src = "param L: int in [3, inf); m0[0] := 1; m1[0] := 0; m2[0] := 0;\n\
                   while (m2 = 0) do s ~ Matches(\"AB\", L); m2 := m1[-1] * pi_2(s); m1 := m0[-1] * pi_1(s); end";
        let (rs, m) = decompose(src, "1 + L*m1 + L^2*m2");
        assert_eq!(m.m0, Poly::one());
        assert_eq!(m.mi.to_string(), "L*m1[i] + L^2*m2[0] + sum(j=1..i, -m0[j-1] + L^2*m2[j]) + 1");
        assert!(check_martingale(&rs, &m.mi).holds());
    }

    #[test]
    fn stuck_terms_are_reported() {
        let (rs, _) = decompose(GEOM, "x");
        let ctx = DoobCtx::new(&rs);
        let e = Poly::cond_exp(Poly::process("x", IndexExpr::tau(0)), at_i(-1));
        assert!(matches!(eliminate(&e, &ctx), Err(DoobError::Stuck(_))));
    }
}
