//! Sign decisions for parameter polynomials under declared parameter ranges.
//!
//! Each parameter is re-expressed through a new variable `u >= 0` that ranges
//! over its declared interval (`p = l + u`, `p = h - u`, or the rational map
//! `p = (l + h*u)/(1 + u)` for doubly bounded ranges, after clearing the
//! positive denominator). A polynomial whose transformed coefficients are all
//! non-negative is non-negative on the whole range.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::poly::{Monomial, Poly, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bound {
    pub value: Rational,
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ParamRange {
    pub lo: Option<Bound>,
    pub hi: Option<Bound>,
    pub integer: bool,
}

impl ParamRange {
    pub fn new(lo: Option<Bound>, hi: Option<Bound>, integer: bool) -> Self {
        let mut r = ParamRange { lo, hi, integer };
        if integer {
            r.lo = r.lo.map(|b| Bound { value: tighten_up(&b), strict: false });
            r.hi = r.hi.map(|b| Bound { value: tighten_down(&b), strict: false });
        }
        r
    }

    pub fn contains(&self, v: &Rational) -> bool {
        if self.integer && !v.is_integer() {
            return false;
        }
        let lo_ok = self.lo.as_ref().is_none_or(|b| if b.strict { v > &b.value } else { v >= &b.value });
        let hi_ok = self.hi.as_ref().is_none_or(|b| if b.strict { v < &b.value } else { v <= &b.value });
        lo_ok && hi_ok
    }
}

fn tighten_up(b: &Bound) -> Rational {
    let c = b.value.ceil();
    if b.strict && c == b.value {
        c + Rational::one()
    } else {
        c
    }
}

fn tighten_down(b: &Bound) -> Rational {
    let f = b.value.floor();
    if b.strict && f == b.value {
        f - Rational::one()
    } else {
        f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    NonNegative,
    Zero,
    NonPositive,
    Negative,
    Unknown,
}

impl Sign {
    pub fn is_positive(self) -> bool {
        self == Sign::Positive
    }

    pub fn is_nonnegative(self) -> bool {
        matches!(self, Sign::Positive | Sign::NonNegative | Sign::Zero)
    }

    pub fn is_negative(self) -> bool {
        self == Sign::Negative
    }

    pub fn is_nonpositive(self) -> bool {
        matches!(self, Sign::Negative | Sign::NonPositive | Sign::Zero)
    }
}

/// Declared parameter ranges.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamEnv {
    ranges: BTreeMap<String, ParamRange>,
}

impl ParamEnv {
    pub fn new() -> Self {
        ParamEnv::default()
    }

    pub fn declare(&mut self, name: &str, range: ParamRange) {
        self.ranges.insert(name.to_string(), range);
    }

    pub fn range(&self, name: &str) -> Option<&ParamRange> {
        self.ranges.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.ranges.keys()
    }

    pub fn sign(&self, p: &Poly) -> Sign {
        if !p.is_param_only() {
            return Sign::Unknown;
        }
        if p.is_zero() {
            return Sign::Zero;
        }
        let Some(cleared) = self.clear_laurent(p) else {
            return self.interval_sign(p);
        };
        if let Some(s) = self.transformed_sign(&cleared) {
            return s;
        }
        if let Some(s) = self.transformed_sign(&-&cleared) {
            return match s {
                Sign::Positive => Sign::Negative,
                Sign::NonNegative => Sign::NonPositive,
                other => other,
            };
        }
        self.interval_sign(p)
    }

    pub fn is_positive(&self, p: &Poly) -> bool {
        self.sign(p).is_positive()
    }

    pub fn is_nonnegative(&self, p: &Poly) -> bool {
        self.sign(p).is_nonnegative()
    }

    /// `a <= b` provably.
    pub fn le(&self, a: &Poly, b: &Poly) -> bool {
        self.is_nonnegative(&(b - a))
    }

    /// `a < b` provably.
    pub fn lt(&self, a: &Poly, b: &Poly) -> bool {
        self.is_positive(&(b - a))
    }

    /// Multiply by a positive monomial so all exponents are non-negative.
    fn clear_laurent(&self, p: &Poly) -> Option<Poly> {
        let mut need: BTreeMap<String, i32> = BTreeMap::new();
        for (m, _) in p.terms() {
            for (n, e) in m.params() {
                if *e < 0 {
                    let slot = need.entry(n.clone()).or_insert(0);
                    *slot = (*slot).max(-e);
                }
            }
        }
        for (n, e) in &need {
            if e % 2 == 1 && !self.param_positive(n) {
                return None;
            }
            if e % 2 == 0 && !self.param_nonzero(n) {
                return None;
            }
        }
        let m = Monomial::from_parts(Vec::new(), need.into_iter().collect());
        Some(p.mul_monomial(&m, &Rational::one()))
    }

    fn param_positive(&self, n: &str) -> bool {
        self.ranges
            .get(n)
            .and_then(|r| r.lo.as_ref())
            .is_some_and(|b| b.value.is_positive() || (b.value.is_zero() && b.strict))
    }

    fn param_nonzero(&self, n: &str) -> bool {
        let Some(r) = self.ranges.get(n) else { return false };
        let above = r.lo.as_ref().is_some_and(|b| b.value.is_positive() || (b.value.is_zero() && b.strict));
        let below = r.hi.as_ref().is_some_and(|b| b.value.is_negative() || (b.value.is_zero() && b.strict));
        above || below
    }

    /// `Some(Positive | NonNegative)` when the coefficient test succeeds.
    fn transformed_sign(&self, p: &Poly) -> Option<Sign> {
        let mut q = p.clone();
        let mut strict_vars: Vec<String> = Vec::new();
        let mut closed_hi: Vec<(String, Rational)> = Vec::new();
        for name in p.params() {
            let r = self.ranges.get(&name).cloned().unwrap_or_default();
            let u = format!("\u{1}{name}");
            let upoly = Poly::param(&u);
            let deg = degree_in_param(&q, &name);
            match (&r.lo, &r.hi) {
                (Some(l), Some(h)) => {
                    // p = (l + h u) / (1 + u), scaled by (1 + u)^deg.
                    let one_u = Poly::one() + upoly.clone();
                    let num = Poly::constant(l.value.clone()) + upoly.scale(&h.value);
                    q = substitute_rational(&q, &name, &num, &one_u, deg);
                    if l.strict {
                        strict_vars.push(u);
                    }
                    if !h.strict {
                        closed_hi.push((name.clone(), h.value.clone()));
                    }
                }
                (Some(l), None) => {
                    let img = Poly::constant(l.value.clone()) + upoly;
                    q = substitute_rational(&q, &name, &img, &Poly::one(), 0);
                    if l.strict {
                        strict_vars.push(u);
                    }
                }
                (None, Some(h)) => {
                    let img = Poly::constant(h.value.clone()) - upoly;
                    q = substitute_rational(&q, &name, &img, &Poly::one(), 0);
                    if h.strict {
                        strict_vars.push(u);
                    }
                }
                (None, None) => return None,
            }
        }
        if q.terms().any(|(_, c)| c.is_negative()) {
            return None;
        }
        let strict = q.terms().any(|(m, c)| c.is_positive() && m.params().iter().all(|(n, _)| strict_vars.contains(n)));
        if !strict {
            return Some(Sign::NonNegative);
        }
        for (name, h) in closed_hi {
            let at_h = substitute_rational(p, &name, &Poly::constant(h), &Poly::one(), 0);
            if !self.sign(&at_h).is_positive() {
                return Some(Sign::NonNegative);
            }
        }
        Some(Sign::Positive)
    }

    fn interval_sign(&self, p: &Poly) -> Sign {
        let mut acc = NumInterval::point(Rational::zero());
        for (m, c) in p.terms() {
            let mut t = NumInterval::point(c.clone());
            for (n, e) in m.params() {
                let r = self.ranges.get(n).cloned().unwrap_or_default();
                let base = NumInterval { lo: r.lo.map(|b| b.value), hi: r.hi.map(|b| b.value) };
                let Some(pw) = base.powi(*e) else { return Sign::Unknown };
                t = t.mul(&pw);
            }
            acc = acc.add(&t);
        }
        match (&acc.lo, &acc.hi) {
            (Some(l), _) if l.is_positive() => Sign::Positive,
            (Some(l), _) if l.is_zero() => Sign::NonNegative,
            (_, Some(h)) if h.is_negative() => Sign::Negative,
            (_, Some(h)) if h.is_zero() => Sign::NonPositive,
            _ => Sign::Unknown,
        }
    }
}

fn degree_in_param(p: &Poly, name: &str) -> u32 {
    p.terms().map(|(m, _)| m.param_exponent(name).max(0) as u32).max().unwrap_or(0)
}

/// Replace `name` by `num/den` and multiply through by `den^deg`.
fn substitute_rational(p: &Poly, name: &str, num: &Poly, den: &Poly, deg: u32) -> Poly {
    let mut out = Poly::zero();
    for (m, c) in p.terms() {
        let k = m.param_exponent(name).max(0) as u32;
        let rest = Poly::term(m.without_param(name), c.clone());
        out = out + &(&rest * &num.pow(k)) * &den.pow(deg - k.min(deg));
    }
    out
}

/// Closed interval with possibly infinite endpoints (`None`).
#[derive(Clone, Debug)]
struct NumInterval {
    lo: Option<Rational>,
    hi: Option<Rational>,
}

impl NumInterval {
    fn point(v: Rational) -> Self {
        NumInterval { lo: Some(v.clone()), hi: Some(v) }
    }

    fn add(&self, o: &NumInterval) -> NumInterval {
        NumInterval {
            lo: self.lo.as_ref().zip(o.lo.as_ref()).map(|(a, b)| a + b),
            hi: self.hi.as_ref().zip(o.hi.as_ref()).map(|(a, b)| a + b),
        }
    }

    fn mul(&self, o: &NumInterval) -> NumInterval {
        // Products of extended endpoints; an infinite factor times zero is zero.
        let ends = |x: &NumInterval| [(x.lo.clone(), -1i8), (x.hi.clone(), 1i8)];
        let mut lo: Option<Ext> = None;
        let mut hi: Option<Ext> = None;
        for (a, sa) in ends(self) {
            for (b, sb) in ends(o) {
                let v = ext_mul(&a, sa, &b, sb);
                lo = Some(match lo {
                    None => v.clone(),
                    Some(cur) => ext_min(cur, v.clone()),
                });
                hi = Some(match hi {
                    None => v,
                    Some(cur) => ext_max(cur, v),
                });
            }
        }
        NumInterval { lo: lo.unwrap().ok(), hi: hi.unwrap().ok() }
    }

    fn powi(&self, e: i32) -> Option<NumInterval> {
        if e < 0 {
            let lo = self.lo.clone()?;
            if !lo.is_positive() {
                return None;
            }
            let inv = NumInterval {
                lo: self.hi.as_ref().map(|h| Rational::one() / h).or(Some(Rational::zero())),
                hi: Some(Rational::one() / lo),
            };
            return inv.powi(-e);
        }
        let mut acc = NumInterval::point(Rational::one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        Some(acc)
    }
}

/// Extended value: `Ok(v)` finite or `Err(sign)` for an infinity.
type Ext = Result<Rational, i8>;

fn ext_mul(a: &Option<Rational>, sa: i8, b: &Option<Rational>, sb: i8) -> Ext {
    match (a, b) {
        (Some(x), Some(y)) => Ok(x * y),
        (None, Some(y)) if y.is_zero() => Ok(Rational::zero()),
        (Some(x), None) if x.is_zero() => Ok(Rational::zero()),
        (None, Some(y)) => Err(sa * if y.is_negative() { -1 } else { 1 }),
        (Some(x), None) => Err(sb * if x.is_negative() { -1 } else { 1 }),
        (None, None) => Err(sa * sb),
    }
}

fn ext_min(a: Ext, b: Ext) -> Ext {
    match (&a, &b) {
        (Err(-1), _) | (_, Err(-1)) => Err(-1),
        (Err(_), _) => b,
        (_, Err(_)) => a,
        (Ok(x), Ok(y)) => Ok(if x <= y { x.clone() } else { y.clone() }),
    }
}

fn ext_max(a: Ext, b: Ext) -> Ext {
    match (&a, &b) {
        (Err(1), _) | (_, Err(1)) => Err(1),
        (Err(_), _) => b,
        (_, Err(_)) => a,
        (Ok(x), Ok(y)) => Ok(if x >= y { x.clone() } else { y.clone() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::poly::int;

    fn unit_env() -> ParamEnv {
        let mut env = ParamEnv::new();
        env.declare(
            "p",
            ParamRange::new(
                Some(Bound { value: int(0), strict: true }),
                Some(Bound { value: int(1), strict: true }),
                false,
            ),
        );
        env.declare("L", ParamRange::new(Some(Bound { value: int(1), strict: false }), None, true));
        env
    }

    #[test]
    fn one_minus_p_is_positive() {
        let env = unit_env();
        let e = Poly::one() - Poly::param("p");
        assert_eq!(env.sign(&e), Sign::Positive);
        assert_eq!(env.sign(&-e), Sign::Negative);
    }

    #[test]
    fn bernstein_handles_products() {
        let env = unit_env();
        let p = Poly::param("p");
        let e = &p * &(Poly::one() - p.clone());
        assert!(env.is_positive(&e));
    }

    #[test]
    fn laurent_terms() {
        let env = unit_env();
        let inv = Poly::monomial(Monomial::from_param("L", -1));
        assert!(env.is_positive(&inv));
        assert!(env.is_nonnegative(&(Poly::one() - inv)));
    }

    #[test]
    fn unknown_for_mixed_sign() {
        let env = unit_env();
        let e = Poly::param("p") - Poly::constant(crate::symbolic::poly::rat(1, 2));
        assert_eq!(env.sign(&e), Sign::Unknown);
    }

    #[test]
    fn integer_ranges_are_tightened() {
        let r = ParamRange::new(Some(Bound { value: int(0), strict: true }), None, true);
        assert_eq!(r.lo, Some(Bound { value: int(1), strict: false }));
        assert!(r.contains(&int(3)));
        assert!(!r.contains(&crate::symbolic::poly::rat(3, 2)));
    }
}
