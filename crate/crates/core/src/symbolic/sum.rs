//! Closed forms for finite sums: constants, power sums up to degree 4, and
//! telescoping of shifted atom patterns.

use std::collections::BTreeMap;

use num_traits::One;

use super::index::{IndexExpr, TimeVar};
use super::poly::{rat, Atom, Monomial, Poly, Rational};
use super::subst::{free_time_vars, map_children, rebase_time, try_map_atoms};

pub const MAX_POWER_SUM_DEGREE: u32 = 4;

/// Simplify every `Sum` node in `p`, innermost first.
pub fn simplify_sum(p: &Poly) -> Poly {
    let inner: Result<Poly, std::convert::Infallible> =
        try_map_atoms(p, &mut |a| map_children(a, &mut |q| Ok(simplify_sum(q))));
    let p = match inner {
        Ok(p) => p,
        Err(e) => match e {},
    };

    // Merge parameter multiples of sums over the same lower bound whose
    // upper bounds differ by a constant, peeling the extra terms.
    type Key = (String, IndexExpr, Option<TimeVar>);
    let mut groups: BTreeMap<Key, Vec<(i64, Poly)>> = BTreeMap::new();
    let mut rest = Poly::zero();
    for (m, c) in p.terms() {
        match m.atoms() {
            [(Atom::Sum(s), 1)] => {
                let coef = Poly::term(m.param_part(), c.clone());
                groups
                    .entry((s.var.clone(), s.lo.clone(), s.hi.base.clone()))
                    .or_default()
                    .push((s.hi.offset, &coef * &s.body));
            }
            _ => rest.add_term(m.clone(), c.clone()),
        }
    }
    for ((var, lo, base), members) in groups {
        let h0 = members.iter().map(|(h, _)| *h).min().unwrap();
        let hi = IndexExpr { base, offset: h0 };
        let j = TimeVar::named(&var);
        let mut body = Poly::zero();
        for (h, b) in members {
            for t in h0 + 1..=h {
                rest = rest + rebase_time(&b, &j, &hi.shifted(t - h0));
            }
            body = body + b;
        }
        rest = rest + closed_form(&var, &lo, &hi, &body);
    }
    rest
}

/// `F_d(n) = sum_{t=1}^{n} t^d` as a polynomial in `n`.
pub fn faulhaber(d: u32, n: &Poly) -> Poly {
    let n2 = n.pow(2);
    let one = Poly::one();
    match d {
        0 => n.clone(),
        1 => (&n2 + n).scale(&rat(1, 2)),
        2 => (&(n * &(n + &one)) * &(&n.scale(&rat(2, 1)) + &one)).scale(&rat(1, 6)),
        3 => (&n2 + n).scale(&rat(1, 2)).pow(2),
        4 => {
            let a = &(n * &(n + &one)) * &(&n.scale(&rat(2, 1)) + &one);
            let b = &(&n2.scale(&rat(3, 1)) + &n.scale(&rat(3, 1))) - &one;
            (&a * &b).scale(&rat(1, 30))
        }
        _ => panic!("power sums are provided up to degree {MAX_POWER_SUM_DEGREE}"),
    }
}

enum Shape {
    Free,
    Power(u32),
    Shifted(i64, Monomial),
    Other,
}

fn classify(m: &Monomial, var: &TimeVar) -> Shape {
    let mut power = 0;
    let mut shifts: Vec<i64> = Vec::new();
    for (a, k) in m.atoms() {
        match a {
            Atom::Time(t) if t == var => power += *k,
            Atom::Process { index, .. } | Atom::Sample { index, .. } if index.uses(var) => shifts.push(index.offset),
            other => {
                if free_time_vars(&Poly::atom(other.clone())).contains(var) {
                    return Shape::Other;
                }
            }
        }
    }
    match (power, shifts.is_empty()) {
        (0, true) => Shape::Free,
        (d, true) if d <= MAX_POWER_SUM_DEGREE => Shape::Power(d),
        (0, false) => {
            let r = *shifts.iter().max().unwrap();
            let atoms = Poly::monomial(m.atom_part());
            let shape = rebase_time(&atoms, var, &IndexExpr::var(var.clone(), -r));
            let shape_m = shape.terms().next().unwrap().0.clone();
            Shape::Shifted(r, shape_m)
        }
        _ => Shape::Other,
    }
}

fn closed_form(var: &str, lo: &IndexExpr, hi: &IndexExpr, body: &Poly) -> Poly {
    let j = TimeVar::named(var);
    let hi_p = Poly::from_index(hi);
    let lo_m1 = Poly::from_index(&lo.shifted(-1));
    let mut out = Poly::zero();
    let mut residual = Poly::zero();
    let mut shapes: BTreeMap<Monomial, Vec<(i64, Poly)>> = BTreeMap::new();
    for (m, c) in body.terms() {
        let coef = Poly::term(m.param_part(), c.clone());
        match classify(m, &j) {
            Shape::Free => {
                let t = Poly::term(m.clone(), c.clone());
                out = out + &t * &(&hi_p - &lo_m1);
            }
            Shape::Power(d) => {
                let rest = Poly::term(m.without_atom(&Atom::Time(j.clone())), c.clone());
                out = out + &rest * &(&faulhaber(d, &hi_p) - &faulhaber(d, &lo_m1));
            }
            Shape::Shifted(r, shape) => shapes.entry(shape).or_default().push((r, coef)),
            Shape::Other => residual.add_term(m.clone(), c.clone()),
        }
    }
    for (shape, members) in shapes {
        let y = Poly::monomial(shape);
        let at = |ix: IndexExpr| rebase_time(&y, &j, &ix);
        let r = members.iter().map(|(k, _)| *k).max().unwrap();
        let total = members.iter().fold(Poly::zero(), |acc, (_, c)| acc + c.clone());
        residual = residual + &total * &at(IndexExpr::var(j.clone(), r));
        for (k, c) in &members {
            // sum_{t=lo+k}^{hi+k} Y(t) = sum_{t=lo+r}^{hi+r} Y(t)
            //   + sum_{t=lo+k}^{lo+r-1} Y(t) - sum_{t=hi+k+1}^{hi+r} Y(t)
            for t in *k..r {
                out = out + c * &at(lo.shifted(t));
                out = out - c * &at(hi.shifted(t + 1));
            }
        }
    }
    out + Poly::sum(var, lo.clone(), hi.clone(), residual)
}

/// Split off the last term: `sum(lo..hi, f) = sum(lo..hi-1, f) + f(hi)`.
pub fn peel_last(s: &super::poly::SumNode) -> Poly {
    let last = rebase_time(&s.body, &s.bound(), &s.hi);
    Poly::sum(&s.var, s.lo.clone(), s.hi.shifted(-1), s.body.clone()) + last
}

/// Number of terms `hi - lo + 1` as a polynomial.
pub fn term_count(lo: &IndexExpr, hi: &IndexExpr) -> Poly {
    Poly::from_index(hi) - Poly::from_index(lo) + Poly::constant(Rational::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse::{parse_poly, ParseCtx};

    fn p(s: &str) -> Poly {
        parse_poly(s, &ParseCtx::new()).unwrap()
    }

    #[test]
    fn constant_summand() {
        assert_eq!(simplify_sum(&p("sum(j=1..i, p)")), p("p*i"));
    }

    #[test]
    fn gauss_sum() {
        assert_eq!(simplify_sum(&p("sum(j=1..i, j)")), p("i*(i+1)/2"));
    }

    #[test]
    fn momentum_telescopes() {
        let s = p("x[1] + sum(j=2..i, x[j] - 2*x[j-1] + x[j-2])");
        assert_eq!(simplify_sum(&s), p("x[0] + x[i] - x[i-1]"));
    }

    #[test]
    fn partial_telescoping_keeps_residual() {
        let s = p("sum(j=1..i, L*m1[j] - m0[j-1] - L*m1[j-1])");
        assert_eq!(simplify_sum(&s).to_string(), "-L*m1[0] + L*m1[i] + sum(j=1..i, -m0[j-1])");
    }

    #[test]
    fn products_with_index_stay_symbolic() {
        let s = p("sum(j=1..i, j*x[j])");
        assert_eq!(simplify_sum(&s), s);
    }

    #[test]
    fn shifted_upper_bounds_merge() {
        let s = p("-2*x[i-1] + sum(j=1..i, 2*x[j-1]) - sum(j=1..i-1, 2*x[j-1])");
        assert_eq!(simplify_sum(&s), Poly::zero());
    }

    #[test]
    fn peel_last_term() {
        let Some(Atom::Sum(s)) = p("sum(j=1..tau, x[j])").as_atom().cloned() else { panic!() };
        assert_eq!(peel_last(&s).to_string(), "x[tau] + sum(j=1..tau-1, x[j])");
    }
}
