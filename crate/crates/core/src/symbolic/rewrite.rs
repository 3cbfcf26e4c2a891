//! Leftmost-innermost rewriting of atoms to a fixpoint.

use super::poly::{Atom, Formula, Poly};
use super::SymbolicError;

pub const DEFAULT_STEP_CAP: usize = 100_000;

/// A rewrite rule on atoms. `apply` returns the replacement polynomial when
/// the rule matches and its side condition holds.
pub struct RewriteRule<C: ?Sized> {
    pub name: &'static str,
    /// Short statement of the law the rule implements.
    pub law: &'static str,
    pub apply: fn(&Atom, &C) -> Option<Poly>,
}

impl<C: ?Sized> Clone for RewriteRule<C> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<C: ?Sized> Copy for RewriteRule<C> {}

#[derive(Clone, Debug, PartialEq)]
pub struct RewriteStep {
    pub rule: &'static str,
    pub before: Poly,
    pub after: Poly,
}

#[derive(Clone, Debug)]
pub struct RewriteOutcome {
    pub result: Poly,
    pub trace: Vec<RewriteStep>,
}

pub fn rewrite_fixpoint<C: ?Sized>(
    e: &Poly,
    rules: &[RewriteRule<C>],
    ctx: &C,
) -> Result<RewriteOutcome, SymbolicError> {
    rewrite_capped(e, rules, ctx, DEFAULT_STEP_CAP)
}

pub fn rewrite_capped<C: ?Sized>(
    e: &Poly,
    rules: &[RewriteRule<C>],
    ctx: &C,
    cap: usize,
) -> Result<RewriteOutcome, SymbolicError> {
    let mut cur = e.clone();
    let mut trace = Vec::new();
    while let Some((next, st)) = step(&cur, rules, ctx) {
        trace.push(st);
        cur = next;
        if trace.len() >= cap {
            let mut names: Vec<&str> = Vec::new();
            for s in trace.iter().rev() {
                if !names.contains(&s.rule) {
                    names.push(s.rule);
                }
                if names.len() == 2 {
                    break;
                }
            }
            return Err(SymbolicError::IterationCap { steps: cap, rules: names.join(", ") });
        }
    }
    Ok(RewriteOutcome { result: cur, trace })
}

/// One rewrite at the leftmost-innermost redex, if any.
fn step<C: ?Sized>(p: &Poly, rules: &[RewriteRule<C>], ctx: &C) -> Option<(Poly, RewriteStep)> {
    for (m, _) in p.terms() {
        for (a, _) in m.atoms() {
            if let Some((img, st)) = step_atom(a, rules, ctx) {
                let target = a.clone();
                let out = p.map_atoms(&mut |x| if *x == target { img.clone() } else { Poly::atom(x.clone()) });
                return Some((out, st));
            }
        }
    }
    None
}

fn step_atom<C: ?Sized>(a: &Atom, rules: &[RewriteRule<C>], ctx: &C) -> Option<(Poly, RewriteStep)> {
    match a {
        Atom::Sum(s) => {
            if let Some((b, st)) = step(&s.body, rules, ctx) {
                return Some((Poly::sum(&s.var, s.lo.clone(), s.hi.clone(), b), st));
            }
        }
        Atom::CondExp(c) => {
            if let Some((b, st)) = step(&c.body, rules, ctx) {
                return Some((Poly::cond_exp(b, c.filtration.clone()), st));
            }
        }
        Atom::Exp(body) => {
            if let Some((b, st)) = step(body, rules, ctx) {
                return Some((Poly::exp(b), st));
            }
        }
        Atom::Indicator(f) => {
            if let Some((g, st)) = step_formula(f, rules, ctx) {
                return Some((Poly::indicator(g), st));
            }
        }
        _ => {}
    }
    for r in rules {
        if let Some(out) = (r.apply)(a, ctx) {
            let before = Poly::atom(a.clone());
            if out != before {
                return Some((out.clone(), RewriteStep { rule: r.name, before, after: out }));
            }
        }
    }
    None
}

fn step_formula<C: ?Sized>(f: &Formula, rules: &[RewriteRule<C>], ctx: &C) -> Option<(Formula, RewriteStep)> {
    match f {
        Formula::True | Formula::False => None,
        Formula::Cmp(op, a, b) => {
            if let Some((x, st)) = step(a, rules, ctx) {
                return Some((Formula::Cmp(*op, x, b.clone()), st));
            }
            step(b, rules, ctx).map(|(y, st)| (Formula::Cmp(*op, a.clone(), y), st))
        }
        Formula::And(v) | Formula::Or(v) => {
            for (n, x) in v.iter().enumerate() {
                if let Some((y, st)) = step_formula(x, rules, ctx) {
                    let mut w = v.clone();
                    w[n] = y;
                    let g = if matches!(f, Formula::And(_)) { Formula::And(w) } else { Formula::Or(w) };
                    return Some((g, st));
                }
            }
            None
        }
        Formula::Not(x) => step_formula(x, rules, ctx).map(|(y, st)| (Formula::Not(Box::new(y)), st)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::index::IndexExpr;

    fn const_rule(a: &Atom, _: &()) -> Option<Poly> {
        match a {
            Atom::CondExp(c) if c.body.is_param_only() => Some(c.body.clone()),
            _ => None,
        }
    }

    fn flip(a: &Atom, _: &()) -> Option<Poly> {
        match a {
            Atom::Process { name, index } if name == "a" => Some(Poly::process("b", index.clone())),
            Atom::Process { name, index } if name == "b" => Some(Poly::process("a", index.clone())),
            _ => None,
        }
    }

    #[test]
    fn constants_are_measurable() {
        let rules = [RewriteRule { name: "constant", law: "E[c | F] = c", apply: const_rule }];
        let e = Poly::cond_exp(Poly::param("c"), IndexExpr::named("i", -1));
        let out = rewrite_fixpoint(&e, &rules, &()).unwrap();
        assert_eq!(out.result, Poly::param("c"));
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn oscillation_hits_the_cap() {
        let rules = [RewriteRule { name: "a-to-b", law: "", apply: flip }];
        let e = Poly::process("a", IndexExpr::abs(0));
        let err = rewrite_capped(&e, &rules, &(), 50).unwrap_err();
        assert!(matches!(err, SymbolicError::IterationCap { steps: 50, .. }));
    }
}
