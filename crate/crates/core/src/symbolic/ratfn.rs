//! Quotients `num / den` where `den` is a polynomial in parameters only.
//!
//! Closed forms such as `1/(1 - p)` live here. The numerator may still carry
//! atoms (expectation nodes of a relational result).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::One;

use super::poly::{Monomial, Poly, Rational};
use super::SymbolicError;

#[derive(Clone, Debug)]
pub struct RatFn {
    pub num: Poly,
    pub den: Poly,
}

impl RatFn {
    pub fn zero() -> Self {
        RatFn { num: Poly::zero(), den: Poly::one() }
    }

    pub fn one() -> Self {
        RatFn { num: Poly::one(), den: Poly::one() }
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFn { num: p, den: Poly::one() }.reduced()
    }

    /// Build `num / den`; `den` must be a nonzero parameter polynomial.
    pub fn new(num: Poly, den: Poly) -> Result<Self, SymbolicError> {
        if den.is_zero() {
            return Err(SymbolicError::DivisionByZero);
        }
        if !den.is_param_only() {
            return Err(SymbolicError::NonPolynomialDivision(den.to_string()));
        }
        Ok(RatFn { num, den }.reduced())
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// The polynomial value when the denominator is trivial.
    pub fn as_poly(&self) -> Option<&Poly> {
        self.den.as_constant().filter(|c| c.is_one()).map(|_| &self.num)
    }

    pub fn add(&self, o: &RatFn) -> RatFn {
        if self.den == o.den {
            return RatFn { num: &self.num + &o.num, den: self.den.clone() }.reduced();
        }
        RatFn { num: &(&self.num * &o.den) + &(&o.num * &self.den), den: &self.den * &o.den }.reduced()
    }

    pub fn sub(&self, o: &RatFn) -> RatFn {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> RatFn {
        RatFn { num: -&self.num, den: self.den.clone() }
    }

    pub fn mul(&self, o: &RatFn) -> RatFn {
        RatFn { num: &self.num * &o.num, den: &self.den * &o.den }.reduced()
    }

    pub fn div(&self, o: &RatFn) -> Result<RatFn, SymbolicError> {
        if o.num.is_zero() {
            return Err(SymbolicError::DivisionByZero);
        }
        if !o.num.is_param_only() {
            return Err(SymbolicError::NonPolynomialDivision(o.num.to_string()));
        }
        Ok(RatFn { num: &self.num * &o.den, den: &self.den * &o.num }.reduced())
    }

    /// Equality as rational functions: `n1 * d2 == n2 * d1`.
    pub fn equivalent(&self, o: &RatFn) -> bool {
        &self.num * &o.den == &o.num * &self.den
    }

    /// Substitute every atom and parameter through `f`, returning the value.
    pub fn map(&self, f: &dyn Fn(&Poly) -> Poly) -> Result<RatFn, SymbolicError> {
        RatFn::new(f(&self.num), f(&self.den))
    }

    fn reduced(self) -> RatFn {
        let RatFn { num, den } = self;
        if num.is_zero() {
            return RatFn::zero();
        }
        // Shift parameter exponents so that every parameter has minimum
        // exponent zero across numerator and denominator.
        let mut names = params_of(&num);
        names.extend(params_of(&den));
        let mut mins: BTreeMap<String, i32> = BTreeMap::new();
        for (m, _) in num.terms().chain(den.terms()) {
            for name in &names {
                let e = m.param_exponent(name);
                let slot = mins.entry(name.clone()).or_insert(e);
                *slot = (*slot).min(e);
            }
        }
        let shift = Monomial::from_parts(
            Vec::new(),
            mins.iter().filter(|(_, e)| **e != 0).map(|(n, e)| (n.clone(), -e)).collect(),
        );
        let mut num = num.mul_monomial(&shift, &Rational::one());
        let mut den = den.mul_monomial(&shift, &Rational::one());

        if let Some((q_num, true)) = divide_grouped(&num, &den) {
            num = q_num;
            den = Poly::one();
        } else if let Some(g) = univariate_gcd(&num, &den) {
            if let (Some((qn, true)), Some((qd, true))) = (divide_grouped(&num, &g), divide_grouped(&den, &g)) {
                num = qn;
                den = qd;
            }
        }

        // A single-term denominator folds back into Laurent form.
        if den.len() == 1 {
            let (m, c) = den.terms().next().map(|(m, c)| (m.clone(), c.clone())).unwrap();
            let inv = Monomial::one().div_params(&m);
            return RatFn { num: num.mul_monomial(&inv, &(Rational::one() / c)), den: Poly::one() };
        }
        let lead = den.terms().next().map(|(_, c)| c.clone()).unwrap();
        let inv = Rational::one() / lead;
        RatFn { num: num.scale(&inv), den: den.scale(&inv) }
    }
}

fn params_of(p: &Poly) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (m, _) in p.terms() {
        for (n, _) in m.params() {
            if !out.contains(n) {
                out.push(n.clone());
            }
        }
    }
    out
}

/// Graded lexicographic order on parameter monomials (non-negative exponents).
fn grlex(a: &Monomial, b: &Monomial) -> Ordering {
    let da: i32 = a.params().iter().map(|(_, e)| e).sum();
    let db: i32 = b.params().iter().map(|(_, e)| e).sum();
    da.cmp(&db).then_with(|| {
        let mut names: Vec<&String> = a.params().iter().chain(b.params()).map(|(n, _)| n).collect();
        names.sort();
        names.dedup();
        for n in names {
            let c = a.param_exponent(n).cmp(&b.param_exponent(n));
            if c != Ordering::Equal {
                return c;
            }
        }
        Ordering::Equal
    })
}

fn leading(p: &Poly) -> Option<(Monomial, Rational)> {
    p.terms().max_by(|(a, _), (b, _)| grlex(a, b)).map(|(m, c)| (m.clone(), c.clone()))
}

fn monomial_quotient(n: &Monomial, d: &Monomial) -> Option<Monomial> {
    let q = n.div_params(d);
    q.params().iter().all(|(_, e)| *e >= 0).then_some(q)
}

/// Polynomial division of parameter polynomials: `(quotient, remainder)`.
pub fn divmod(a: &Poly, b: &Poly) -> (Poly, Poly) {
    let (lb, cb) = leading(b).expect("division by zero polynomial");
    let mut p = a.clone();
    let mut q = Poly::zero();
    let mut r = Poly::zero();
    while let Some((lp, cp)) = leading(&p) {
        let t = match monomial_quotient(&lp, &lb) {
            Some(m) => Poly::term(m, &cp / &cb),
            None => {
                let lt = Poly::term(lp, cp);
                r = r + lt.clone();
                p = p - lt;
                continue;
            }
        };
        p = p - &t * b;
        q = q + t;
    }
    (q, r)
}

/// Divide a polynomial whose coefficients (per atom part) are parameter
/// polynomials by a parameter polynomial. The flag reports exactness.
fn divide_grouped(num: &Poly, den: &Poly) -> Option<(Poly, bool)> {
    let mut groups: BTreeMap<Monomial, Poly> = BTreeMap::new();
    for (m, c) in num.terms() {
        groups.entry(m.atom_part()).or_default().add_term(m.param_part(), c.clone());
    }
    let mut out = Poly::zero();
    for (atoms, g) in groups {
        let (q, r) = divmod(&g, den);
        if !r.is_zero() {
            return Some((Poly::zero(), false));
        }
        out = out + q.mul_monomial(&atoms, &Rational::one());
    }
    Some((out, true))
}

/// Greatest common divisor when every coefficient involves at most one parameter.
fn univariate_gcd(num: &Poly, den: &Poly) -> Option<Poly> {
    let mut names = params_of(den);
    for (m, _) in num.terms() {
        for (n, _) in m.params() {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    if names.len() != 1 {
        return None;
    }
    let mut g = den.clone();
    let mut groups: BTreeMap<Monomial, Poly> = BTreeMap::new();
    for (m, c) in num.terms() {
        groups.entry(m.atom_part()).or_default().add_term(m.param_part(), c.clone());
    }
    for h in groups.values() {
        g = poly_gcd(&g, h);
    }
    (g.len() > 1).then_some(g)
}

fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    let (mut x, mut y) = (a.clone(), b.clone());
    while !y.is_zero() {
        let (_, r) = divmod(&x, &y);
        x = y;
        y = r;
    }
    x
}

impl PartialEq for RatFn {
    fn eq(&self, other: &Self) -> bool {
        self.equivalent(other)
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.as_poly().is_some() {
            return write!(f, "{}", self.num);
        }
        // Pull a leading minus sign out of single-term numerators.
        let (neg, num) = if self.num.len() == 1 && !self.num.leading_sign_positive() {
            (true, -&self.num)
        } else {
            (false, self.num.clone())
        };
        if neg {
            f.write_str("-")?;
        }
        if num.len() > 1 {
            write!(f, "({num})")?;
        } else {
            write!(f, "{num}")?;
        }
        write!(f, "/({})", self.den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::poly::int;

    fn p() -> Poly {
        Poly::param("p")
    }

    #[test]
    fn cancels_common_univariate_factor() {
        let one = Poly::one();
        let num = &one - &(&p() * &p());
        let den = &one - &p();
        let r = RatFn::new(num, den).unwrap();
        assert_eq!(r.as_poly().unwrap(), &(p() + Poly::one()));
    }

    #[test]
    fn monomial_denominator_becomes_laurent() {
        let r = RatFn::new(Poly::param("a"), Poly::param("b")).unwrap();
        assert_eq!(r.to_string(), "a/b");
        assert!(r.as_poly().is_some());
    }

    #[test]
    fn denominator_is_normalized() {
        let r = RatFn::new(Poly::int(-2), (p() - Poly::one()).scale(&int(2))).unwrap();
        assert_eq!(r.to_string(), "1/(1 - p)");
    }

    #[test]
    fn exact_division_multivariate() {
        let a = Poly::param("a");
        let b = Poly::param("b");
        let num = &(&a * &b) - &(&a * &a);
        let den = &b - &a;
        assert_eq!(RatFn::new(num, den).unwrap().as_poly().unwrap(), &a);
    }

    #[test]
    fn semantic_equality() {
        let x = RatFn::new(Poly::one(), Poly::one() - p()).unwrap();
        let y = RatFn::new(Poly::int(2), Poly::int(2) - p().scale(&int(2))).unwrap();
        assert_eq!(x, y);
    }
}
