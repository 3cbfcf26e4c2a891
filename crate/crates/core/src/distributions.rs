//! Finite-support distributions over integer tuples with exact (possibly
//! parametric) probabilities, and their moments.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::symbolic::eval::eval_params;
use crate::symbolic::{Monomial, ParamEnv, Poly, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("probabilities of {0} sum to {1}, not 1")]
    NotNormalized(String, String),
    #[error("tuple arity mismatch in {0}")]
    Arity(String),
    #[error("{0} has empty support")]
    Empty(String),
    #[error("pattern for Matches must be non-empty")]
    EmptyPattern,
    #[error("alphabet size {size} is smaller than the {distinct} distinct pattern letters")]
    Alphabet { size: String, distinct: usize },
    #[error("probability {0} is negative at the given parameters")]
    Negative(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub label: String,
    pub arity: usize,
    pub support: Vec<(Vec<i64>, Poly)>,
}

impl Distribution {
    /// `Bern(theta, {v1, v0})`: `v1` with probability `theta`, else `v0`.
    pub fn bern(theta: Poly, v1: i64, v0: i64) -> Result<Self, DistError> {
        let label = format!("Bern({theta}, {{{v1}, {v0}}})");
        let rest = Poly::one() - theta.clone();
        Self::from_points(label, 1, vec![(vec![v1], theta), (vec![v0], rest)])
    }

    /// Uniform over a finite set of integers.
    pub fn unif(values: &[i64]) -> Result<Self, DistError> {
        let mut vs = values.to_vec();
        vs.sort_unstable();
        vs.dedup();
        let label = format!("Unif{{{}}}", values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "));
        if vs.is_empty() {
            return Err(DistError::Empty(label));
        }
        let p = Poly::constant(Rational::new(BigInt::one(), BigInt::from(vs.len())));
        Self::from_points(label, 1, vs.into_iter().map(|v| (vec![v], p.clone())).collect())
    }

    /// Uniform letter over an alphabet of size `alphabet`; coordinate `k` is 1
    /// iff the letter equals the `k`-th pattern letter. Letters outside the
    /// pattern are aggregated into one all-zero point.
    pub fn matches(pattern: &str, alphabet: Poly) -> Result<Self, DistError> {
        let letters: Vec<char> = pattern.chars().collect();
        if letters.is_empty() {
            return Err(DistError::EmptyPattern);
        }
        let mut distinct: Vec<char> = letters.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let inv = match alphabet.as_constant() {
            Some(c) => {
                if c < Rational::from_integer(BigInt::from(distinct.len())) {
                    return Err(DistError::Alphabet { size: c.to_string(), distinct: distinct.len() });
                }
                Poly::constant(c.recip())
            }
            None => {
                let (m, c) = single_param_monomial(&alphabet)
                    .ok_or_else(|| DistError::Alphabet { size: alphabet.to_string(), distinct: distinct.len() })?;
                Poly::term(Monomial::one().div_params(&m), c.recip())
            }
        };
        let label = format!("Matches(\"{pattern}\", {alphabet})");
        let mut pts: Vec<(Vec<i64>, Poly)> =
            distinct.iter().map(|c| (letters.iter().map(|l| (l == c) as i64).collect(), inv.clone())).collect();
        let other = Poly::one() - inv.scale(&Rational::from_integer(BigInt::from(distinct.len())));
        pts.push((vec![0; letters.len()], other));
        Self::from_points(label, letters.len(), pts)
    }

    /// Explicit support table.
    pub fn table(entries: Vec<(Vec<i64>, Poly)>) -> Result<Self, DistError> {
        let label = format!(
            "Table{{{}}}",
            entries
                .iter()
                .map(|(v, p)| format!("({}) -> {p}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")))
                .collect::<Vec<_>>()
                .join(", ")
        );
        let arity = entries.first().map(|(v, _)| v.len()).ok_or_else(|| DistError::Empty(label.clone()))?;
        if entries.iter().any(|(v, _)| v.len() != arity) || arity == 0 {
            return Err(DistError::Arity(label));
        }
        Self::from_points(label, arity, entries)
    }

    fn from_points(label: String, arity: usize, pts: Vec<(Vec<i64>, Poly)>) -> Result<Self, DistError> {
        let mut merged: BTreeMap<Vec<i64>, Poly> = BTreeMap::new();
        for (v, p) in pts {
            let slot = merged.entry(v).or_default();
            *slot = slot.clone() + p;
        }
        let support: Vec<(Vec<i64>, Poly)> = merged.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        if support.is_empty() {
            return Err(DistError::Empty(label));
        }
        let total = support.iter().fold(Poly::zero(), |a, (_, p)| a + p.clone());
        if total != Poly::one() {
            return Err(DistError::NotNormalized(label, total.to_string()));
        }
        Ok(Distribution { label, arity, support })
    }

    /// `E[prod_c pi_c(X)^{k_c}]`; coordinates are 1-based.
    pub fn moment(&self, powers: &[(usize, u32)]) -> Poly {
        let mut acc = Poly::zero();
        for (v, p) in &self.support {
            let mut w = BigInt::one();
            for (c, k) in powers {
                w *= BigInt::from(v[c - 1]).pow(*k);
            }
            if !w.is_zero() {
                acc = acc + p.scale(&Rational::from_integer(w));
            }
        }
        acc
    }

    /// `[min, max]` of coordinate `coord` (1-based) over the support.
    pub fn support_interval(&self, coord: usize) -> (i64, i64) {
        let vals = self.support.iter().map(|(v, _)| v[coord - 1]);
        let lo = vals.clone().min().unwrap();
        let hi = vals.max().unwrap();
        (lo, hi)
    }

    /// Probabilities that are not provably within `[0, 1]` under `env`.
    pub fn probability_obligations(&self, env: &ParamEnv) -> Vec<String> {
        let mut out = Vec::new();
        for (v, p) in &self.support {
            if p.as_constant().is_some() {
                continue;
            }
            if !env.is_nonnegative(p) || !env.le(p, &Poly::one()) {
                out.push(format!("0 <= {p} <= 1 for point ({}) of {}", fmt_point(v), self.label));
            }
        }
        out
    }

    /// Concrete support with parameters substituted.
    pub fn concrete(&self, params: &BTreeMap<String, Rational>) -> Result<Vec<(Vec<i64>, Rational)>, DistError> {
        let mut out = Vec::new();
        for (v, p) in &self.support {
            let q = eval_params(p, params).map_err(|_| DistError::Negative(p.to_string()))?;
            if q.is_negative() {
                return Err(DistError::Negative(p.to_string()));
            }
            if !q.is_zero() {
                out.push((v.clone(), q));
            }
        }
        Ok(out)
    }
}

fn single_param_monomial(p: &Poly) -> Option<(Monomial, Rational)> {
    if p.len() != 1 {
        return None;
    }
    let (m, c) = p.terms().next()?;
    m.is_param_only().then(|| (m.clone(), c.clone()))
}

fn fmt_point(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

type MomentKey = (String, Vec<(usize, u32)>);

/// Lazily filled cache of moments keyed by distribution label and powers.
#[derive(Clone, Default)]
pub struct MomentTable {
    cache: Arc<Mutex<HashMap<MomentKey, Poly>>>,
}

impl MomentTable {
    pub fn new() -> Self {
        MomentTable::default()
    }

    pub fn moment(&self, d: &Distribution, powers: &[(usize, u32)]) -> Poly {
        let mut key_powers: Vec<(usize, u32)> = powers.iter().copied().filter(|(_, k)| *k > 0).collect();
        key_powers.sort_unstable();
        let key = (d.label.clone(), key_powers);
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return v.clone();
        }
        let v = d.moment(&key.1);
        self.cache.lock().unwrap().insert(key, v.clone());
        v
    }

    pub fn len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::rat;

    #[test]
    fn bernoulli_moments() {
        let d = Distribution::bern(Poly::param("p"), 1, 0).unwrap();
        assert_eq!(d.moment(&[(1, 1)]), Poly::param("p"));
        let fair = Distribution::bern(Poly::constant(rat(1, 2)), -1, 1).unwrap();
        assert_eq!(fair.moment(&[(1, 1)]), Poly::zero());
        assert_eq!(fair.moment(&[(1, 2)]), Poly::one());
        assert_eq!(fair.moment(&[]), Poly::one());
    }

    #[test]
    fn matches_projection_moment_is_inverse_alphabet() {
        let d = Distribution::matches("ABRACADABRA", Poly::param("L")).unwrap();
        assert_eq!(d.arity, 11);
        assert_eq!(d.support.len(), 6);
        let inv_l = Poly::monomial(Monomial::from_param("L", -1));
        for k in 1..=11 {
            assert_eq!(d.moment(&[(k, 1)]), inv_l);
        }
        // A at positions 1 and 4: both indicators fire together.
        assert_eq!(d.moment(&[(1, 1), (4, 1)]), inv_l);
        assert_eq!(d.moment(&[(1, 1), (2, 1)]), Poly::zero());
    }

    #[test]
    fn literal_alphabet_drops_the_other_point() {
        let d = Distribution::matches("111", Poly::int(2)).unwrap();
        assert_eq!(d.support.len(), 2);
        assert_eq!(d.moment(&[(2, 1)]), Poly::constant(rat(1, 2)));
        assert!(Distribution::matches("ABC", Poly::int(2)).is_err());
    }

    #[test]
    fn support_intervals() {
        let d = Distribution::bern(Poly::param("p"), 1, 0).unwrap();
        assert_eq!(d.support_interval(1), (0, 1));
        let u = Distribution::unif(&[-1, 0, 1]).unwrap();
        assert_eq!(u.support_interval(1), (-1, 1));
        assert_eq!(u.moment(&[(1, 2)]), Poly::constant(rat(2, 3)));
    }

    #[test]
    fn tables_must_normalize() {
        let bad = Distribution::table(vec![(vec![1, 0], Poly::constant(rat(1, 3)))]);
        assert!(matches!(bad, Err(DistError::NotNormalized(..))));
        let ok =
            Distribution::table(vec![(vec![1, 0], Poly::constant(rat(1, 3))), (vec![0, 2], Poly::constant(rat(2, 3)))])
                .unwrap();
        assert_eq!(ok.moment(&[(2, 2)]), Poly::constant(rat(8, 3)));
        assert_eq!(ok.moment(&[(1, 1), (2, 1)]), Poly::zero());
    }
}
