//! Exact rationals with an `i128` fast path that promotes to big integers
//! on overflow.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::symbolic::Rational;

#[derive(Clone, Debug)]
pub enum Num {
    /// Reduced, denominator positive.
    Small(i128, i128),
    Big(Rational),
}

impl PartialEq for Num {
    fn eq(&self, o: &Num) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Num {}

impl PartialOrd for Num {
    fn partial_cmp(&self, o: &Num) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Num {
    fn cmp(&self, o: &Num) -> Ordering {
        if let (Num::Small(a, b), Num::Small(c, d)) = (self, o) {
            if let (Some(x), Some(y)) = (a.checked_mul(*d), c.checked_mul(*b)) {
                return x.cmp(&y);
            }
        }
        self.to_rational().cmp(&o.to_rational())
    }
}

impl Num {
    pub fn zero() -> Num {
        Num::Small(0, 1)
    }

    pub fn int(n: i64) -> Num {
        Num::Small(n as i128, 1)
    }

    pub fn from_bigint(n: &BigInt) -> Num {
        match n.to_i128() {
            Some(n) => Num::Small(n, 1),
            None => Num::Big(Rational::from_integer(n.clone())),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Num::Small(n, _) => *n == 0,
            Num::Big(r) => r.is_zero(),
        }
    }

    pub fn neg(&self) -> Num {
        match self {
            Num::Small(n, d) if *n != i128::MIN => Num::Small(-n, *d),
            other => Num::Big(-other.to_rational()),
        }
    }

    pub fn sub(&self, o: &Num) -> Num {
        self.add(&o.neg())
    }

    /// `None` when dividing by zero.
    pub fn div(&self, o: &Num) -> Option<Num> {
        if o.is_zero() {
            return None;
        }
        let inv = match o {
            Num::Small(n, d) if *n != i128::MIN => Num::small(*d, *n)?,
            other => Num::Big(other.to_rational().recip()),
        };
        Some(self.mul(&inv))
    }

    pub fn from_rational(r: &Rational) -> Num {
        match (r.numer().to_i128(), r.denom().to_i128()) {
            (Some(n), Some(d)) => Num::Small(n, d),
            _ => Num::Big(r.clone()),
        }
    }

    pub fn to_rational(&self) -> Rational {
        match self {
            Num::Small(n, d) => Rational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Num::Big(r) => r.clone(),
        }
    }

    fn small(n: i128, d: i128) -> Option<Num> {
        let g = n.gcd(&d);
        let (mut n, mut d) = (n / g, d / g);
        if d < 0 {
            n = n.checked_neg()?;
            d = d.checked_neg()?;
        }
        Some(Num::Small(n, d))
    }

    pub fn add(&self, o: &Num) -> Num {
        if let (Num::Small(a, b), Num::Small(c, d)) = (self, o) {
            let r = if b == d {
                a.checked_add(*c).and_then(|n| Num::small(n, *b))
            } else {
                a.checked_mul(*d)
                    .zip(c.checked_mul(*b))
                    .and_then(|(x, y)| x.checked_add(y))
                    .zip(b.checked_mul(*d))
                    .and_then(|(n, d)| Num::small(n, d))
            };
            if let Some(r) = r {
                return r;
            }
        }
        Num::Big(self.to_rational() + o.to_rational())
    }

    pub fn mul(&self, o: &Num) -> Num {
        if let (Num::Small(a, b), Num::Small(c, d)) = (self, o) {
            if *b == 1 && *d == 1 {
                if let Some(n) = a.checked_mul(*c) {
                    return Num::Small(n, 1);
                }
            } else if let Some(r) = a.checked_mul(*c).zip(b.checked_mul(*d)).and_then(|(n, d)| Num::small(n, d)) {
                return r;
            }
        }
        Num::Big(self.to_rational() * o.to_rational())
    }

    pub fn pow(&self, e: u32) -> Num {
        let mut acc = Num::Small(1, 1);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn abs(&self) -> Num {
        match self {
            Num::Small(n, d) if *n != i128::MIN => Num::Small(n.abs(), *d),
            other => {
                let r = other.to_rational();
                Num::Big(if r < Rational::zero() { -r } else { r })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Num {
        Num::from_rational(&Rational::new(n.into(), d.into()))
    }

    #[test]
    fn arithmetic_matches_rationals() {
        let a = q(3, 4);
        let b = q(-5, 6);
        assert_eq!(a.add(&b).to_rational(), Rational::new((-1).into(), 12.into()));
        assert_eq!(a.mul(&b).to_rational(), Rational::new((-5).into(), 8.into()));
        assert_eq!(b.abs().cmp(&a), Ordering::Greater);
        assert_eq!(a.div(&b).unwrap().to_rational(), Rational::new((-9).into(), 10.into()));
        assert_eq!(a.sub(&b).to_rational(), Rational::new(19.into(), 12.into()));
        assert!(a.div(&Num::zero()).is_none());
    }

    #[test]
    fn overflow_promotes() {
        let big = Num::Small(i128::MAX / 2 + 1, 1);
        let s = big.add(&big);
        assert!(matches!(s, Num::Big(_)));
        assert_eq!(s.to_rational(), Rational::from_integer(BigInt::from(i128::MAX / 2 + 1) * 2));
        assert!(matches!(big.mul(&big), Num::Big(_)));
        assert_eq!(big.pow(2).cmp(&big), Ordering::Greater);
    }
}
