//! Exact evaluation of symbolic expressions under a concrete valuation.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::index::{IndexExpr, TimeVar};
use super::poly::{Atom, Formula, Poly, Rational};
use super::SymbolicError;

type ProcessFn<'a> = &'a dyn Fn(&str, i64) -> Option<Rational>;
type SampleFn<'a> = &'a dyn Fn(&str, i64, Option<u32>) -> Option<Rational>;

/// Values for parameters, time symbols and indexed atoms.
pub struct Valuation<'a> {
    pub params: &'a BTreeMap<String, Rational>,
    pub time: BTreeMap<TimeVar, i64>,
    pub process: ProcessFn<'a>,
    pub sample: SampleFn<'a>,
    /// Evaluate `E[body]` as `body` (a per-trial estimator under linearity).
    pub exp_as_body: bool,
}

impl Valuation<'_> {
    pub fn index(&self, ix: &IndexExpr) -> Result<i64, SymbolicError> {
        match &ix.base {
            None => Ok(ix.offset),
            Some(v) => self
                .time
                .get(v)
                .map(|t| t + ix.offset)
                .ok_or_else(|| SymbolicError::Unevaluable(format!("time symbol {v}"))),
        }
    }
}

pub fn eval(p: &Poly, val: &mut Valuation<'_>) -> Result<Rational, SymbolicError> {
    let mut total = Rational::zero();
    for (m, c) in p.terms() {
        let mut t = c.clone();
        for (name, e) in m.params() {
            let v = val.params.get(name).ok_or_else(|| SymbolicError::Unevaluable(format!("parameter {name}")))?;
            if v.is_zero() && *e < 0 {
                return Err(SymbolicError::DivisionByZero);
            }
            t *= pow(v, *e);
        }
        for (a, e) in m.atoms() {
            let v = eval_atom(a, val)?;
            t *= pow(&v, *e as i32);
            if t.is_zero() {
                break;
            }
        }
        total += t;
    }
    Ok(total)
}

fn pow(v: &Rational, e: i32) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..e.unsigned_abs() {
        acc *= v;
    }
    if e < 0 {
        acc.recip()
    } else {
        acc
    }
}

fn eval_atom(a: &Atom, val: &mut Valuation<'_>) -> Result<Rational, SymbolicError> {
    match a {
        Atom::Process { name, index } => {
            let k = val.index(index)?;
            (val.process)(name, k).ok_or_else(|| SymbolicError::Unevaluable(format!("{name}[{k}]")))
        }
        Atom::Sample { name, index, proj } => {
            let k = val.index(index)?;
            (val.sample)(name, k, *proj).ok_or_else(|| SymbolicError::Unevaluable(format!("{name}[{k}]")))
        }
        Atom::Time(v) => val
            .time
            .get(v)
            .map(|t| Rational::from_integer((*t).into()))
            .ok_or_else(|| SymbolicError::Unevaluable(format!("time symbol {v}"))),
        Atom::Sum(s) => {
            let lo = val.index(&s.lo)?;
            let hi = val.index(&s.hi)?;
            let bound = s.bound();
            let saved = val.time.get(&bound).copied();
            // Signed convention: sum(lo..hi) = -sum(hi+1..lo-1) when hi < lo - 1.
            let (from, to, sign) = if hi >= lo - 1 { (lo, hi, 1) } else { (hi + 1, lo - 1, -1) };
            let mut acc = Rational::zero();
            for j in from..=to {
                val.time.insert(bound.clone(), j);
                acc += eval(&s.body, val)?;
            }
            match saved {
                Some(t) => val.time.insert(bound, t),
                None => val.time.remove(&bound),
            };
            Ok(if sign < 0 { -acc } else { acc })
        }
        Atom::Exp(body) if val.exp_as_body => eval(body, val),
        Atom::Indicator(f) => Ok(if eval_formula(f, val)? { Rational::one() } else { Rational::zero() }),
        other => Err(SymbolicError::Unevaluable(other.to_string())),
    }
}

pub fn eval_formula(f: &Formula, val: &mut Valuation<'_>) -> Result<bool, SymbolicError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Cmp(op, a, b) => {
            let x = eval(a, val)?;
            let y = eval(b, val)?;
            op.holds(x.cmp(&y))
        }
        Formula::And(v) => {
            for x in v {
                if !eval_formula(x, val)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(v) => {
            for x in v {
                if eval_formula(x, val)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Not(x) => !eval_formula(x, val)?,
    })
}

/// Evaluate a parameter-only expression.
pub fn eval_params(p: &Poly, params: &BTreeMap<String, Rational>) -> Result<Rational, SymbolicError> {
    let none_p = |_: &str, _: i64| None;
    let none_s = |_: &str, _: i64, _: Option<u32>| None;
    let mut val = Valuation { params, time: BTreeMap::new(), process: &none_p, sample: &none_s, exp_as_body: false };
    eval(p, &mut val)
}
