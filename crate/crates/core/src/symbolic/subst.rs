//! Simultaneous, capture-avoiding substitution of atoms and time symbols.

use std::collections::{BTreeMap, BTreeSet};

use super::index::{IndexExpr, TimeVar};
use super::poly::{Atom, CondExpNode, Formula, Poly, SumNode};
use super::SymbolicError;

pub type Bindings = BTreeMap<Atom, Poly>;

/// Rebuild `p`, sending every top-level atom through `f`.
pub fn try_map_atoms<E>(p: &Poly, f: &mut dyn FnMut(&Atom) -> Result<Poly, E>) -> Result<Poly, E> {
    let mut out = Poly::zero();
    let mut cache: BTreeMap<&Atom, Poly> = BTreeMap::new();
    for (m, c) in p.terms() {
        let mut t = Poly::term(m.param_part(), c.clone());
        for (a, k) in m.atoms() {
            let img = match cache.get(a) {
                Some(x) => x.clone(),
                None => {
                    let x = f(a)?;
                    cache.insert(a, x.clone());
                    x
                }
            };
            t = &t * &img.pow(*k);
            if t.is_zero() {
                break;
            }
        }
        out = out + t;
    }
    Ok(out)
}

/// Rebuild a compound atom by mapping its child polynomials (and indices).
pub fn map_children<E>(a: &Atom, f: &mut dyn FnMut(&Poly) -> Result<Poly, E>) -> Result<Poly, E> {
    Ok(match a {
        Atom::Sum(s) => Poly::sum(&s.var, s.lo.clone(), s.hi.clone(), f(&s.body)?),
        Atom::CondExp(c) => Poly::cond_exp(f(&c.body)?, c.filtration.clone()),
        Atom::Exp(b) => Poly::exp(f(b)?),
        Atom::Indicator(fm) => Poly::indicator(try_map_formula(fm, f)?),
        other => Poly::atom(other.clone()),
    })
}

pub fn try_map_formula<E>(fm: &Formula, f: &mut dyn FnMut(&Poly) -> Result<Poly, E>) -> Result<Formula, E> {
    Ok(match fm {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Cmp(op, a, b) => Formula::Cmp(*op, f(a)?, f(b)?),
        Formula::And(v) => Formula::And(v.iter().map(|x| try_map_formula(x, f)).collect::<Result<_, _>>()?),
        Formula::Or(v) => Formula::Or(v.iter().map(|x| try_map_formula(x, f)).collect::<Result<_, _>>()?),
        Formula::Not(x) => Formula::Not(Box::new(try_map_formula(x, f)?)),
    })
}

/// Time symbols occurring free in `p`.
pub fn free_time_vars(p: &Poly) -> BTreeSet<TimeVar> {
    let mut out = BTreeSet::new();
    collect_free(p, &mut Vec::new(), &mut out);
    out
}

fn collect_free(p: &Poly, bound: &mut Vec<String>, out: &mut BTreeSet<TimeVar>) {
    let note = |ix: &IndexExpr, bound: &Vec<String>, out: &mut BTreeSet<TimeVar>| {
        if let Some(TimeVar::Named(n)) = &ix.base {
            if bound.contains(n) {
                return;
            }
        }
        if let Some(v) = &ix.base {
            out.insert(v.clone());
        }
    };
    for (m, _) in p.terms() {
        for (a, _) in m.atoms() {
            match a {
                Atom::Process { index, .. } | Atom::Sample { index, .. } => note(index, bound, out),
                Atom::Time(v) => note(&IndexExpr::var(v.clone(), 0), bound, out),
                Atom::Sum(s) => {
                    note(&s.lo, bound, out);
                    note(&s.hi, bound, out);
                    bound.push(s.var.clone());
                    collect_free(&s.body, bound, out);
                    bound.pop();
                }
                Atom::CondExp(c) => {
                    note(&c.filtration, bound, out);
                    collect_free(&c.body, bound, out);
                }
                Atom::Exp(b) => collect_free(b, bound, out),
                Atom::Indicator(f) => f.for_each_poly(&mut |q| collect_free(q, bound, out)),
            }
        }
    }
}

fn fresh_name(base: &str, avoid: &BTreeSet<TimeVar>) -> String {
    (1..).map(|k| format!("{base}{k}")).find(|n| !avoid.contains(&TimeVar::Named(n.clone()))).unwrap()
}

/// Simultaneous substitution of atoms, then normalization.
///
/// Bound occurrences under a `Sum` are not touched: a binding whose key
/// mentions the bound variable is dropped inside that sum's body.
pub fn substitute(e: &Poly, bindings: &Bindings) -> Result<Poly, SymbolicError> {
    let mut images: BTreeSet<TimeVar> = BTreeSet::new();
    for v in bindings.values() {
        images.extend(free_time_vars(v));
    }
    subst_in(e, bindings, &images, &[])
}

fn key_mentions(a: &Atom, var: &str) -> bool {
    let p = Poly::atom(a.clone());
    free_time_vars(&p).contains(&TimeVar::Named(var.to_string()))
}

fn subst_in(
    e: &Poly,
    b: &Bindings,
    images: &BTreeSet<TimeVar>,
    filtrations: &[IndexExpr],
) -> Result<Poly, SymbolicError> {
    try_map_atoms(e, &mut |a| {
        if let Some(img) = b.get(a) {
            check_filtrations(img, filtrations)?;
            return Ok(img.clone());
        }
        match a {
            Atom::Sum(s) => {
                let mut s = (**s).clone();
                if images.contains(&s.bound()) {
                    let mut avoid = images.clone();
                    avoid.extend(free_time_vars(&s.body));
                    let fresh = fresh_name(&s.var, &avoid);
                    s = rename_bound(&s, &fresh);
                }
                let inner: Bindings =
                    b.iter().filter(|(k, _)| !key_mentions(k, &s.var)).map(|(k, v)| (k.clone(), v.clone())).collect();
                let body = subst_in(&s.body, &inner, images, filtrations)?;
                Ok(Poly::sum(&s.var, s.lo, s.hi, body))
            }
            Atom::CondExp(c) => {
                let mut fs = filtrations.to_vec();
                fs.push(c.filtration.clone());
                Ok(Poly::cond_exp(subst_in(&c.body, b, images, &fs)?, c.filtration.clone()))
            }
            other => map_children(other, &mut |q| subst_in(q, b, images, filtrations)),
        }
    })
}

fn check_filtrations(img: &Poly, filtrations: &[IndexExpr]) -> Result<(), SymbolicError> {
    let mut bad = None;
    img.visit_atoms_deep(&mut |a| {
        if let Atom::Sample { index, .. } = a {
            for f in filtrations {
                if matches!(index.compare(f), Some(o) if o.is_le()) && bad.is_none() {
                    bad = Some((a.to_string(), f.to_string()));
                }
            }
        }
    });
    match bad {
        Some((atom, filtration)) => Err(SymbolicError::FiltrationViolation { atom, filtration }),
        None => Ok(()),
    }
}

fn rename_bound(s: &SumNode, fresh: &str) -> SumNode {
    let to = IndexExpr::named(fresh, 0);
    SumNode { var: fresh.to_string(), lo: s.lo.clone(), hi: s.hi.clone(), body: rebase_time(&s.body, &s.bound(), &to) }
}

/// Replace the time symbol `v` by the index `to` everywhere it occurs free.
pub fn rebase_time(e: &Poly, v: &TimeVar, to: &IndexExpr) -> Poly {
    let rebased: Result<Poly, std::convert::Infallible> = try_map_atoms(e, &mut |a| {
        Ok(match a {
            Atom::Process { name, index } => Poly::process(name, index.rebase(v, to)),
            Atom::Sample { name, index, proj } => Poly::sample(name, index.rebase(v, to), *proj),
            Atom::Time(t) if t == v => Poly::from_index(to),
            Atom::Time(_) => Poly::atom(a.clone()),
            Atom::Sum(s) => {
                let lo = s.lo.rebase(v, to);
                let hi = s.hi.rebase(v, to);
                if &s.bound() == v {
                    Poly::sum(&s.var, lo, hi, s.body.clone())
                } else {
                    let mut s = (**s).clone();
                    if to.base.as_ref() == Some(&s.bound()) {
                        let mut avoid = free_time_vars(&s.body);
                        avoid.insert(v.clone());
                        avoid.insert(s.bound());
                        s = rename_bound(&s, &fresh_name(&s.var, &avoid));
                    }
                    Poly::sum(&s.var, lo, hi, rebase_time(&s.body, v, to))
                }
            }
            Atom::CondExp(c) => Poly::atom(Atom::CondExp(Box::new(CondExpNode {
                body: rebase_time(&c.body, v, to),
                filtration: c.filtration.rebase(v, to),
            }))),
            other => map_children::<std::convert::Infallible>(other, &mut |q| Ok(rebase_time(q, v, to)))?,
        })
    });
    match rebased {
        Ok(p) => p,
        Err(e) => match e {},
    }
}

/// Shift every free occurrence of `v` by `by`.
pub fn shift_time(e: &Poly, v: &TimeVar, by: i64) -> Poly {
    rebase_time(e, v, &IndexExpr::var(v.clone(), by))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::poly::int;

    fn x(off: i64) -> Poly {
        Poly::process("x", IndexExpr::named("i", off))
    }

    fn s(off: i64) -> Poly {
        Poly::sample("s", IndexExpr::named("i", off), None)
    }

    fn xi_atom() -> Atom {
        Atom::process("x", IndexExpr::named("i", 0))
    }

    #[test]
    fn binomial_expansion() {
        let mut b = Bindings::new();
        b.insert(xi_atom(), x(-1) + s(0));
        let out = substitute(&x(0).pow(2), &b).unwrap();
        assert_eq!(out, x(-1).pow(2) + (&x(-1) * &s(0)).scale(&int(2)) + s(0).pow(2));
    }

    #[test]
    fn process_at_tau() {
        let mut b = Bindings::new();
        b.insert(Atom::process("x", IndexExpr::tau(0)), Poly::time(TimeVar::Tau) - Poly::one());
        let out = substitute(&Poly::process("x", IndexExpr::tau(0)), &b).unwrap();
        assert_eq!(out.to_string(), "tau - 1");
    }

    #[test]
    fn shadowed_bound_variable_is_untouched() {
        let xj = Poly::process("x", IndexExpr::named("j", 0));
        let sum = Poly::sum("j", IndexExpr::abs(1), IndexExpr::named("i", 0), xj.clone());
        let mut b = Bindings::new();
        b.insert(Atom::process("x", IndexExpr::named("j", 0)), Poly::int(7));
        assert_eq!(substitute(&sum, &b).unwrap(), sum);
        assert_eq!(substitute(&xj, &b).unwrap(), Poly::int(7));
    }

    #[test]
    fn capture_is_avoided() {
        // Replacing i by j under sum(j=..) must rename the bound j.
        let body = &Poly::process("x", IndexExpr::named("j", 0)) * &Poly::time(TimeVar::named("i"));
        let sum = Poly::sum("j", IndexExpr::abs(1), IndexExpr::named("i", 0), body);
        let out = rebase_time(&sum, &TimeVar::named("i"), &IndexExpr::named("j", 0));
        assert_eq!(out.to_string(), "sum(j1=1..j, x[j1]*j)");
    }

    #[test]
    fn sample_under_its_filtration_is_rejected() {
        let y = Poly::process("y", IndexExpr::named("i", 0));
        let ce = Poly::cond_exp(y, IndexExpr::named("i", -1));
        let mut b = Bindings::new();
        b.insert(Atom::process("y", IndexExpr::named("i", 0)), s(-1));
        assert!(matches!(substitute(&ce, &b), Err(SymbolicError::FiltrationViolation { .. })));
    }
}
