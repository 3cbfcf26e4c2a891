//! Closed intervals with parametric endpoints.
//!
//! Endpoints are parameter-only polynomials; `None` is an infinite endpoint.
//! Every operation over-approximates: when an endpoint comparison cannot be
//! decided under the parameter ranges the result is widened.

use std::fmt;

use crate::symbolic::{Atom, ParamEnv, Poly};

#[derive(Clone, Debug, PartialEq)]
pub struct SymInterval {
    pub lo: Option<Poly>,
    pub hi: Option<Poly>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    NonNeg,
    NonPos,
    Mixed,
    Unknown,
}

fn add_end(a: &Option<Poly>, b: &Option<Poly>) -> Option<Poly> {
    Some(a.as_ref()? + b.as_ref()?)
}

fn mul_end(a: &Option<Poly>, b: &Option<Poly>) -> Option<Poly> {
    Some(a.as_ref()? * b.as_ref()?)
}

impl SymInterval {
    pub fn new(lo: Option<Poly>, hi: Option<Poly>) -> Self {
        SymInterval { lo, hi }
    }

    pub fn point(p: Poly) -> Self {
        SymInterval { lo: Some(p.clone()), hi: Some(p) }
    }

    pub fn ints(lo: i64, hi: i64) -> Self {
        SymInterval { lo: Some(Poly::int(lo)), hi: Some(Poly::int(hi)) }
    }

    pub fn top() -> Self {
        SymInterval { lo: None, hi: None }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    /// Both endpoints as integers, if they are integer constants.
    pub fn as_int_range(&self) -> Option<(i64, i64)> {
        let end = |p: &Option<Poly>| -> Option<i64> {
            let c = p.as_ref()?.as_constant()?;
            if !c.is_integer() {
                return None;
            }
            i64::try_from(c.numer()).ok()
        };
        Some((end(&self.lo)?, end(&self.hi)?))
    }

    fn class(&self, env: &ParamEnv) -> Class {
        let z = Poly::zero();
        if matches!(&self.lo, Some(l) if env.le(&z, l)) {
            return Class::NonNeg;
        }
        if matches!(&self.hi, Some(h) if env.le(h, &z)) {
            return Class::NonPos;
        }
        let lo_ok = self.lo.as_ref().is_none_or(|l| env.le(l, &z));
        let hi_ok = self.hi.as_ref().is_none_or(|h| env.le(&z, h));
        if lo_ok && hi_ok {
            Class::Mixed
        } else {
            Class::Unknown
        }
    }

    pub fn add(&self, o: &SymInterval) -> SymInterval {
        SymInterval { lo: add_end(&self.lo, &o.lo), hi: add_end(&self.hi, &o.hi) }
    }

    pub fn neg(&self) -> SymInterval {
        SymInterval { lo: self.hi.as_ref().map(|h| -h), hi: self.lo.as_ref().map(|l| -l) }
    }

    pub fn mul(&self, o: &SymInterval, env: &ParamEnv) -> SymInterval {
        if let (Some(a), Some(b)) = (self.as_point(), o.as_point()) {
            return SymInterval::point(a * b);
        }
        let (a, b, c, d) = (&self.lo, &self.hi, &o.lo, &o.hi);
        use Class::*;
        let (lo, hi) = match (self.class(env), o.class(env)) {
            (Unknown, _) | (_, Unknown) => return SymInterval::top(),
            (NonNeg, NonNeg) => (mul_end(a, c), mul_end(b, d)),
            (NonNeg, NonPos) => (mul_end(b, c), mul_end(a, d)),
            (NonPos, NonNeg) => (mul_end(a, d), mul_end(b, c)),
            (NonPos, NonPos) => (mul_end(b, d), mul_end(a, c)),
            (Mixed, NonNeg) => (mul_end(a, d), mul_end(b, d)),
            (NonNeg, Mixed) => (mul_end(b, c), mul_end(b, d)),
            (Mixed, NonPos) => (mul_end(b, c), mul_end(a, c)),
            (NonPos, Mixed) => (mul_end(a, d), mul_end(a, c)),
            // min(ad, bc) >= ad + bc and max(ac, bd) <= ac + bd here.
            (Mixed, Mixed) => (add_end(&mul_end(a, d), &mul_end(b, c)), add_end(&mul_end(a, c), &mul_end(b, d))),
        };
        SymInterval { lo, hi }
    }

    pub fn pow(&self, k: u32, env: &ParamEnv) -> SymInterval {
        if k == 0 {
            return SymInterval::point(Poly::one());
        }
        if let Some(p) = self.as_point() {
            return SymInterval::point(p.pow(k));
        }
        let pw = |e: &Option<Poly>| e.as_ref().map(|p| p.pow(k));
        if k % 2 == 1 {
            return SymInterval { lo: pw(&self.lo), hi: pw(&self.hi) };
        }
        match self.class(env) {
            Class::NonNeg => SymInterval { lo: pw(&self.lo), hi: pw(&self.hi) },
            Class::NonPos => SymInterval { lo: pw(&self.hi), hi: pw(&self.lo) },
            Class::Mixed => {
                let (a, b) = (pw(&self.lo), pw(&self.hi));
                let hi = match (&a, &b) {
                    (Some(x), Some(y)) if env.le(x, y) => b.clone(),
                    (Some(x), Some(y)) if env.le(y, x) => a.clone(),
                    _ => add_end(&a, &b),
                };
                SymInterval { lo: Some(Poly::zero()), hi }
            }
            Class::Unknown => SymInterval { lo: Some(Poly::zero()), hi: None },
        }
    }

    fn as_point(&self) -> Option<&Poly> {
        match (&self.lo, &self.hi) {
            (Some(a), Some(b)) if a == b => Some(a),
            _ => None,
        }
    }

    /// Smallest interval containing both; undecidable endpoints become infinite.
    pub fn hull(&self, o: &SymInterval, env: &ParamEnv) -> SymInterval {
        let lo = match (&self.lo, &o.lo) {
            (Some(a), Some(b)) if env.le(a, b) => Some(a.clone()),
            (Some(a), Some(b)) if env.le(b, a) => Some(b.clone()),
            _ => None,
        };
        let hi = match (&self.hi, &o.hi) {
            (Some(a), Some(b)) if env.le(b, a) => Some(a.clone()),
            (Some(a), Some(b)) if env.le(a, b) => Some(b.clone()),
            _ => None,
        };
        SymInterval { lo, hi }
    }

    /// Intersection. Either endpoint is sound, so ties go to `o`.
    pub fn meet(&self, o: &SymInterval, env: &ParamEnv) -> SymInterval {
        let lo = match (&self.lo, &o.lo) {
            (None, x) | (x, None) => x.clone(),
            (Some(a), Some(b)) if env.lt(b, a) => Some(a.clone()),
            (_, b) => b.clone(),
        };
        let hi = match (&self.hi, &o.hi) {
            (None, x) | (x, None) => x.clone(),
            (Some(a), Some(b)) if env.lt(a, b) => Some(a.clone()),
            (_, b) => b.clone(),
        };
        SymInterval { lo, hi }
    }

    /// A parameter-only `C` with `|v| <= C` on the interval.
    pub fn abs_bound(&self, env: &ParamEnv) -> Option<Poly> {
        let (a, b) = (self.lo.as_ref()?, self.hi.as_ref()?);
        match self.class(env) {
            Class::NonNeg => Some(b.clone()),
            Class::NonPos => Some(-a),
            Class::Mixed => {
                let na = -a;
                Some(if env.le(&na, b) {
                    b.clone()
                } else if env.le(b, &na) {
                    na
                } else {
                    &na + b
                })
            }
            Class::Unknown => None,
        }
    }
}

impl fmt::Display for SymInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lo {
            Some(l) => write!(f, "[{l}, ")?,
            None => f.write_str("(-inf, ")?,
        }
        match &self.hi {
            Some(h) => write!(f, "{h}]"),
            None => f.write_str("inf)"),
        }
    }
}

/// Interval of `p` when each atom ranges over `atom_iv(atom)`.
pub fn eval_interval(p: &Poly, env: &ParamEnv, atom_iv: &dyn Fn(&Atom) -> SymInterval) -> SymInterval {
    let mut acc = SymInterval::point(Poly::zero());
    for (m, c) in p.terms() {
        let mut t = SymInterval::point(Poly::term(m.param_part(), c.clone()));
        for (a, k) in m.atoms() {
            t = t.mul(&atom_iv(a).pow(*k, env), env);
        }
        acc = acc.add(&t);
        if acc.lo.is_none() && acc.hi.is_none() {
            break;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::int;
    use crate::symbolic::parse::{parse_poly, ParseCtx};
    use crate::symbolic::sign::{Bound, ParamRange};

    fn p(s: &str) -> Poly {
        parse_poly(s, &ParseCtx::new()).unwrap()
    }

    fn env() -> ParamEnv {
        let mut e = ParamEnv::new();
        e.declare("b", ParamRange::new(Some(Bound { value: int(2), strict: false }), None, true));
        e.declare(
            "p",
            ParamRange::new(
                Some(Bound { value: int(0), strict: true }),
                Some(Bound { value: int(1), strict: true }),
                false,
            ),
        );
        e
    }

    fn iv(lo: &str, hi: &str) -> SymInterval {
        SymInterval::new(Some(p(lo)), Some(p(hi)))
    }

    #[test]
    fn arithmetic() {
        let e = env();
        let x = iv("1", "b - 1");
        let z = SymInterval::ints(-1, 1);
        assert_eq!(x.add(&z), iv("0", "b"));
        assert_eq!(x.add(&z).pow(2, &e), iv("0", "b^2"));
        assert_eq!(z.pow(2, &e), iv("0", "1"));
        assert_eq!(iv("-p", "1 - p").abs_bound(&e), Some(p("1")));
        assert_eq!(x.mul(&z, &e), iv("1 - b", "b - 1"));
        assert_eq!(iv("0", "1").mul(&iv("0", "1"), &e), iv("0", "1"));
    }

    #[test]
    fn hull_and_meet() {
        let e = env();
        let a = iv("0", "b");
        let top = SymInterval::new(Some(p("0")), None);
        assert_eq!(top.meet(&iv("1", "b - 1"), &e), iv("1", "b - 1"));
        assert_eq!(a.hull(&iv("1", "b + 1"), &e), iv("0", "b + 1"));
        // `p` against `1/2` is undecidable.
        assert_eq!(iv("0", "p").hull(&iv("0", "1/2"), &e).hi, None);
    }

    #[test]
    fn polynomial_evaluation() {
        let e = env();
        let q = p("x[i]^2 - 2*x[i]");
        let r = eval_interval(&q, &e, &|_| iv("0", "b"));
        assert_eq!(r, iv("-2*b", "b^2"));
        let c = r.abs_bound(&e).unwrap();
        assert!(e.le(&p("b^2"), &c) && e.le(&p("2*b"), &c));
    }
}
