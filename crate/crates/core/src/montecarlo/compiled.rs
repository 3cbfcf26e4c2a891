//! Polynomials with parameters substituted and names resolved, evaluated
//! over interpreter rows with [`Num`] arithmetic.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::symbolic::{Atom, CmpOp, Formula, IndexExpr, Poly, Rational, SymbolicError, TimeVar};

use super::num::Num;
use super::{Row, SimError};

#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    terms: Vec<(Num, Vec<(Factor, u32)>)>,
}

#[derive(Clone, Debug)]
enum Factor {
    Process {
        col: usize,
        index: Ix,
    },
    Sample {
        name: String,
        index: Ix,
        proj: Option<u32>,
    },
    Time(usize),
    Sum {
        slot: usize,
        lo: Ix,
        hi: Ix,
        body: Compiled,
    },
    /// `E[e]` read as `e`: one trial is one sample of the body.
    Exp(Compiled),
    Indicator(CFormula),
}

#[derive(Clone, Debug)]
enum CFormula {
    Const(bool),
    Cmp(CmpOp, Compiled, Compiled),
    And(Vec<CFormula>),
    Or(Vec<CFormula>),
    Not(Box<CFormula>),
}

/// An index relative to a time slot, or absolute.
#[derive(Clone, Copy, Debug)]
struct Ix {
    slot: Option<usize>,
    offset: i64,
}

/// Time symbols in scope, by slot.
pub(crate) struct Scope<'a> {
    vars: &'a [String],
    params: &'a BTreeMap<String, Rational>,
    times: Vec<TimeVar>,
}

impl<'a> Scope<'a> {
    pub fn new(vars: &'a [String], params: &'a BTreeMap<String, Rational>, times: &[TimeVar]) -> Self {
        Scope { vars, params, times: times.to_vec() }
    }

    fn slot(&self, v: &TimeVar) -> Result<usize, SimError> {
        self.times.iter().rposition(|t| t == v).ok_or_else(|| SimError::Eval(format!("time symbol {v} out of scope")))
    }

    fn ix(&self, ix: &IndexExpr) -> Result<Ix, SimError> {
        Ok(Ix { slot: ix.base.as_ref().map(|v| self.slot(v)).transpose()?, offset: ix.offset })
    }
}

impl Compiled {
    pub fn compile(p: &Poly, scope: &mut Scope) -> Result<Compiled, SimError> {
        let mut terms = Vec::new();
        for (m, c) in p.terms() {
            let mut coef = c.clone();
            for (name, e) in m.params() {
                let v = scope.params.get(name).ok_or_else(|| SimError::MissingParam(name.clone()))?;
                if v.is_zero() && *e < 0 {
                    return Err(SymbolicError::DivisionByZero.into());
                }
                let base = if *e < 0 { v.recip() } else { v.clone() };
                coef *= num_traits::pow(base, e.unsigned_abs() as usize);
            }
            let mut factors = Vec::new();
            for (a, e) in m.atoms() {
                factors.push((Factor::compile(a, scope)?, *e));
            }
            terms.push((Num::from_rational(&coef), factors));
        }
        Ok(Compiled { terms })
    }

    /// `rows(k)` is the state at process index `k`; `times` holds the value
    /// of each time slot.
    pub fn eval<'r>(&self, rows: &dyn Fn(i64) -> Option<&'r Row>, times: &mut Vec<i64>) -> Result<Num, SimError> {
        let mut total = Num::zero();
        for (c, factors) in &self.terms {
            let mut t = c.clone();
            for (f, e) in factors {
                t = t.mul(&f.eval(rows, times)?.pow(*e));
            }
            total = total.add(&t);
        }
        Ok(total)
    }
}

impl Ix {
    fn at(self, times: &[i64]) -> i64 {
        self.slot.map(|s| times[s]).unwrap_or(0) + self.offset
    }
}

impl Factor {
    fn compile(a: &Atom, scope: &mut Scope) -> Result<Factor, SimError> {
        Ok(match a {
            Atom::Process { name, index } => Factor::Process {
                col: scope
                    .vars
                    .iter()
                    .position(|v| v == name)
                    .ok_or_else(|| SimError::Eval(format!("unknown process {name}")))?,
                index: scope.ix(index)?,
            },
            Atom::Sample { name, index, proj } => {
                Factor::Sample { name: name.clone(), index: scope.ix(index)?, proj: *proj }
            }
            Atom::Time(v) => Factor::Time(scope.slot(v)?),
            Atom::Sum(s) => {
                let lo = scope.ix(&s.lo)?;
                let hi = scope.ix(&s.hi)?;
                scope.times.push(s.bound());
                let body = Compiled::compile(&s.body, scope);
                scope.times.pop();
                Factor::Sum { slot: scope.times.len(), lo, hi, body: body? }
            }
            Atom::Exp(body) => Factor::Exp(Compiled::compile(body, scope)?),
            Atom::Indicator(f) => Factor::Indicator(CFormula::compile(f, scope)?),
            Atom::CondExp(_) => return Err(SimError::Eval(format!("cannot simulate {a}"))),
        })
    }

    fn eval<'r>(&self, rows: &dyn Fn(i64) -> Option<&'r Row>, times: &mut Vec<i64>) -> Result<Num, SimError> {
        Ok(match self {
            Factor::Process { col, index } => {
                let k = index.at(times);
                let row = rows(k).ok_or_else(|| SimError::Eval(format!("state {k} not available")))?;
                row.values[*col].clone()
            }
            Factor::Sample { name, index, proj } => {
                let k = index.at(times);
                rows(k)
                    .and_then(|r| r.samples.get(name))
                    .and_then(|s| s.get(proj.map(|p| p as usize - 1).unwrap_or(0)))
                    .map(|v| Num::int(*v))
                    .ok_or_else(|| SimError::Eval(format!("sample {name} at {k} not available")))?
            }
            Factor::Time(s) => Num::int(times[*s]),
            Factor::Sum { slot, lo, hi, body } => {
                let (lo, hi) = (lo.at(times), hi.at(times));
                // Signed convention: sum(lo..hi) = -sum(hi+1..lo-1) when hi < lo - 1.
                let (from, to, neg) = if hi >= lo - 1 { (lo, hi, false) } else { (hi + 1, lo - 1, true) };
                let mut acc = Num::zero();
                times.truncate(*slot);
                times.push(0);
                for j in from..=to {
                    times[*slot] = j;
                    acc = acc.add(&body.eval(rows, times)?);
                }
                times.pop();
                if neg {
                    acc.mul(&Num::int(-1))
                } else {
                    acc
                }
            }
            Factor::Exp(body) => body.eval(rows, times)?,
            Factor::Indicator(f) => Num::int(f.eval(rows, times)? as i64),
        })
    }
}

impl CFormula {
    fn compile(f: &Formula, scope: &mut Scope) -> Result<CFormula, SimError> {
        Ok(match f {
            Formula::True => CFormula::Const(true),
            Formula::False => CFormula::Const(false),
            Formula::Cmp(op, a, b) => CFormula::Cmp(*op, Compiled::compile(a, scope)?, Compiled::compile(b, scope)?),
            Formula::And(v) => CFormula::And(v.iter().map(|x| CFormula::compile(x, scope)).collect::<Result<_, _>>()?),
            Formula::Or(v) => CFormula::Or(v.iter().map(|x| CFormula::compile(x, scope)).collect::<Result<_, _>>()?),
            Formula::Not(x) => CFormula::Not(Box::new(CFormula::compile(x, scope)?)),
        })
    }

    fn eval<'r>(&self, rows: &dyn Fn(i64) -> Option<&'r Row>, times: &mut Vec<i64>) -> Result<bool, SimError> {
        Ok(match self {
            CFormula::Const(b) => *b,
            CFormula::Cmp(op, a, b) => op.holds(a.eval(rows, times)?.cmp(&b.eval(rows, times)?)),
            CFormula::And(v) => {
                for x in v {
                    if !x.eval(rows, times)? {
                        return Ok(false);
                    }
                }
                true
            }
            CFormula::Or(v) => {
                for x in v {
                    if x.eval(rows, times)? {
                        return Ok(true);
                    }
                }
                false
            }
            CFormula::Not(x) => !x.eval(rows, times)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::eval::{eval, Valuation};
    use crate::symbolic::parse::{parse_poly, ParseCtx};

    #[test]
    fn agrees_with_symbolic_evaluation() {
        let ctx = ParseCtx::new().with_samples(["z".to_string()]);
        let p =
            parse_poly("x[tau]^2 - p*tau + sum(j=1..tau, z[j]*x[j-1]) + 2*Pr[x[tau] = b] + E[x[tau-1]]", &ctx).unwrap();
        let vars = vec!["x".to_string()];
        let params: BTreeMap<String, Rational> = [("p", (1, 3)), ("b", (4, 1))]
            .iter()
            .map(|(k, (n, d))| (k.to_string(), Rational::new((*n).into(), (*d).into())))
            .collect();
        let rows: Vec<Row> = (0..6)
            .map(|k| Row {
                values: vec![Num::int(k as i64 - 1)],
                samples: [("z".to_string(), vec![k as i64 % 2])].into_iter().collect(),
            })
            .collect();
        let c = Compiled::compile(&p, &mut Scope::new(&vars, &params, &[TimeVar::Tau])).unwrap();
        let got = c.eval(&|k| usize::try_from(k).ok().and_then(|k| rows.get(k)), &mut vec![5]).unwrap();
        let process =
            |_: &str, k: i64| usize::try_from(k).ok().and_then(|k| rows.get(k)).map(|r| r.values[0].to_rational());
        let sample = |_: &str, k: i64, _: Option<u32>| {
            usize::try_from(k).ok().and_then(|k| rows.get(k)).map(|r| Rational::from_integer(r.samples["z"][0].into()))
        };
        let mut val = Valuation {
            params: &params,
            time: [(TimeVar::Tau, 5)].into_iter().collect(),
            process: &process,
            sample: &sample,
            exp_as_body: true,
        };
        assert_eq!(got.to_rational(), eval(&p, &mut val).unwrap());
    }
}
