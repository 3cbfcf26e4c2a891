//! Direct interpreter for programs with exact rational state.
//!
//! Runs on the AST, not on the extracted recurrences, so the two can be
//! checked against each other.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::frontend::{DistExpr, Expr, Guard, Program, RelOp};
use crate::symbolic::Rational;

use super::num::Num;
use super::SimError;

/// Finite distribution with exact inverse-CDF sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteDist {
    pub points: Vec<(Vec<i64>, Rational)>,
    /// Cumulative weights over the common denominator `denom`.
    cumulative: Vec<u64>,
    denom: u64,
}

impl ConcreteDist {
    pub fn new(points: Vec<(Vec<i64>, Rational)>, label: &str) -> Result<Self, SimError> {
        let points: Vec<_> = points.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        if points.iter().any(|(_, p)| p.is_negative()) {
            return Err(SimError::Dist(format!("{label}: negative probability")));
        }
        let total: Rational = points.iter().map(|(_, p)| p.clone()).sum();
        if total != Rational::one() {
            return Err(SimError::Dist(format!("{label}: probabilities sum to {total}")));
        }
        let denom = points.iter().fold(BigInt::one(), |acc, (_, p)| acc.lcm(p.denom()));
        let denom_u = denom.to_u64().ok_or_else(|| SimError::Dist(format!("{label}: denominator too large")))?;
        let mut acc = BigInt::zero();
        let mut cumulative = Vec::with_capacity(points.len());
        for (_, p) in &points {
            acc += p.numer() * (&denom / p.denom());
            cumulative.push(acc.to_u64().unwrap());
        }
        Ok(ConcreteDist { points, cumulative, denom: denom_u })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> &[i64] {
        let u = rng.random_range(0..self.denom);
        let k = self.cumulative.partition_point(|c| *c <= u);
        &self.points[k].0
    }
}

fn int(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

fn num_params(params: &BTreeMap<String, Rational>) -> BTreeMap<String, Num> {
    params.iter().map(|(k, v)| (k.clone(), Num::from_rational(v))).collect()
}

fn eval_param_expr(e: &Expr, params: &BTreeMap<String, Rational>) -> Result<Rational, SimError> {
    let mut st = State::empty();
    Ok(st.eval(e, &num_params(params))?.to_rational())
}

fn concrete(d: &DistExpr, params: &BTreeMap<String, Rational>) -> Result<ConcreteDist, SimError> {
    let label = d.to_string();
    let to_i64 = |n: &BigInt| n.to_i64().ok_or_else(|| SimError::Dist(format!("{label}: value out of range")));
    let points = match d {
        DistExpr::Bern { prob, v1, v0 } => {
            let p = eval_param_expr(prob, params)?;
            vec![(vec![to_i64(v1)?], p.clone()), (vec![to_i64(v0)?], Rational::one() - p)]
        }
        DistExpr::Unif(vs) => {
            let mut vs = vs.iter().map(to_i64).collect::<Result<Vec<_>, _>>()?;
            vs.sort_unstable();
            vs.dedup();
            let p = Rational::new(BigInt::one(), BigInt::from(vs.len()));
            vs.into_iter().map(|v| (vec![v], p.clone())).collect()
        }
        DistExpr::Matches { pattern, alphabet } => {
            let l = eval_param_expr(alphabet, params)?;
            let letters: Vec<char> = pattern.chars().collect();
            let mut distinct = letters.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if l < int(distinct.len() as i64) {
                return Err(SimError::Dist(format!("{label}: alphabet smaller than the pattern's letters")));
            }
            let p = l.recip();
            let mut pts: Vec<(Vec<i64>, Rational)> =
                distinct.iter().map(|c| (letters.iter().map(|x| (x == c) as i64).collect(), p.clone())).collect();
            pts.push((vec![0; letters.len()], Rational::one() - p * int(distinct.len() as i64)));
            pts
        }
        DistExpr::Table(rows) => rows
            .iter()
            .map(|(v, p)| Ok((v.iter().map(to_i64).collect::<Result<Vec<_>, _>>()?, eval_param_expr(p, params)?)))
            .collect::<Result<_, SimError>>()?,
    };
    ConcreteDist::new(points, &label)
}

/// One written state: process values and the samples drawn to produce it.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub values: Vec<Num>,
    pub samples: BTreeMap<String, Vec<i64>>,
}

/// Evaluation scope for one iteration.
struct State<'a> {
    vars: &'a [String],
    /// Newest state last.
    history: Option<&'a VecDeque<Row>>,
    /// Values assigned so far in this iteration, by column.
    fresh: Vec<Option<Num>>,
    samples: Option<&'a BTreeMap<String, Vec<i64>>>,
}

impl<'a> State<'a> {
    fn empty() -> State<'static> {
        State { vars: &[], history: None, fresh: Vec::new(), samples: None }
    }

    fn process(&self, name: &str, offset: i64) -> Result<Num, SimError> {
        let col = self.vars.iter().position(|v| v == name).ok_or_else(|| SimError::Eval(format!("unknown {name}")))?;
        if offset == 0 {
            if let Some(Some(v)) = self.fresh.get(col) {
                return Ok(v.clone());
            }
        }
        let h = self.history.ok_or_else(|| SimError::Eval(format!("{name}[{offset}] outside the loop")))?;
        let back = if offset == 0 { 1 } else { (-offset) as usize };
        h.len()
            .checked_sub(back)
            .map(|k| h[k].values[col].clone())
            .ok_or_else(|| SimError::Eval(format!("{name}[{offset}] before the initial state")))
    }

    fn sample(&self, name: &str, coord: usize) -> Result<Num, SimError> {
        let s = self.samples.and_then(|s| s.get(name)).ok_or_else(|| SimError::Eval(format!("{name} not sampled")))?;
        Ok(Num::int(s[coord]))
    }

    fn eval(&mut self, e: &Expr, params: &BTreeMap<String, Num>) -> Result<Num, SimError> {
        Ok(match e {
            Expr::Int(n) => Num::from_bigint(n),
            Expr::Param(p) => params.get(p).cloned().ok_or_else(|| SimError::MissingParam(p.clone()))?,
            Expr::Process { name, offset } => self.process(name, *offset)?,
            Expr::Sample(s) => self.sample(s, 0)?,
            Expr::Proj(k, inner) => match &**inner {
                Expr::Sample(s) => self.sample(s, *k as usize - 1)?,
                other => return Err(SimError::Eval(format!("projection of {other}"))),
            },
            Expr::Time => return Err(SimError::Eval("`t` in a program".into())),
            Expr::Add(a, b) => self.eval(a, params)?.add(&self.eval(b, params)?),
            Expr::Sub(a, b) => self.eval(a, params)?.sub(&self.eval(b, params)?),
            Expr::Mul(a, b) => self.eval(a, params)?.mul(&self.eval(b, params)?),
            Expr::Div(a, b) => {
                let d = self.eval(b, params)?;
                self.eval(a, params)?.div(&d).ok_or_else(|| SimError::Eval("division by zero".into()))?
            }
            Expr::Neg(a) => self.eval(a, params)?.neg(),
            Expr::Pow(a, k) => self.eval(a, params)?.pow(*k),
        })
    }

    fn holds(&mut self, g: &Guard, params: &BTreeMap<String, Num>) -> Result<bool, SimError> {
        Ok(match g {
            Guard::True => true,
            Guard::False => false,
            Guard::Cmp(op, a, b) => {
                let ord = self.eval(a, params)?.cmp(&self.eval(b, params)?);
                match op {
                    RelOp::Lt => ord.is_lt(),
                    RelOp::Le => ord.is_le(),
                    RelOp::Gt => ord.is_gt(),
                    RelOp::Ge => ord.is_ge(),
                    RelOp::Eq => ord.is_eq(),
                    RelOp::Ne => ord.is_ne(),
                }
            }
            Guard::And(a, b) => self.holds(a, params)? && self.holds(b, params)?,
            Guard::Or(a, b) => self.holds(a, params)? || self.holds(b, params)?,
            Guard::Not(a) => !self.holds(a, params)?,
            Guard::Implies(a, b) => !self.holds(a, params)? || self.holds(b, params)?,
        })
    }
}

/// Called with the process index and history after each write.
pub type StepHook<'h> = dyn FnMut(i64, &VecDeque<Row>) -> Result<(), SimError> + 'h;

/// A program with concrete parameter values.
#[derive(Clone, Debug)]
pub struct Interpreter<'a> {
    pub program: &'a Program,
    pub params: BTreeMap<String, Rational>,
    nparams: BTreeMap<String, Num>,
    pub vars: Vec<String>,
    dists: Vec<(String, ConcreteDist)>,
    init: Vec<Row>,
}

/// Outcome of one run. Only the first few thousand and the last few states
/// are kept.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Process index of the final state (the stopping time).
    pub tau: i64,
    pub censored: bool,
    pub head: Vec<Row>,
    pub tail: VecDeque<Row>,
    /// Total number of states.
    pub len: usize,
}

const HEAD: usize = 4096;
const TAIL: usize = 64;

impl Trace {
    pub fn row(&self, k: i64) -> Option<&Row> {
        let k = usize::try_from(k).ok()?;
        if k < self.head.len() {
            return self.head.get(k);
        }
        let first_tail = self.len - self.tail.len();
        k.checked_sub(first_tail).and_then(|off| self.tail.get(off))
    }
}

impl<'a> Interpreter<'a> {
    pub fn new(program: &'a Program, params: BTreeMap<String, Rational>) -> Result<Self, SimError> {
        for d in &program.params {
            if !params.contains_key(&d.node.name) {
                return Err(SimError::MissingParam(d.node.name.clone()));
            }
        }
        let env = crate::recurrence::param_env(program);
        for (name, v) in &params {
            match env.range(name) {
                None => return Err(SimError::UnknownParam(name.clone())),
                Some(r) if !r.contains(v) => {
                    return Err(SimError::BadParam { name: name.clone(), value: v.to_string() })
                }
                _ => {}
            }
        }
        let dists = program
            .samples
            .iter()
            .map(|s| Ok((s.node.var.clone(), concrete(&s.node.dist, &params)?)))
            .collect::<Result<_, SimError>>()?;
        let vars = program.process_vars();
        let m = program.init_len();
        let mut init = Vec::with_capacity(m);
        for k in 0..m {
            let mut values = Vec::with_capacity(vars.len());
            for x in &vars {
                let a = program
                    .init
                    .iter()
                    .find(|i| i.node.var == *x && i.node.index == k)
                    .ok_or_else(|| SimError::Eval(format!("no initial value for {x}[{k}]")))?;
                values.push(Num::from_rational(&eval_param_expr(&a.node.value, &params)?));
            }
            init.push(Row { values, samples: BTreeMap::new() });
        }
        Ok(Interpreter { program, nparams: num_params(&params), params, vars, dists, init })
    }

    fn guard(&self, hist: &VecDeque<Row>) -> Result<bool, SimError> {
        let last = hist.back().map(|r| &r.samples);
        let mut st = State { vars: &self.vars, history: Some(hist), fresh: Vec::new(), samples: last };
        st.holds(&self.program.guard.node, &self.nparams)
    }

    /// One iteration from the newest state in `hist`, with the given draws.
    pub fn step(&self, hist: &VecDeque<Row>, draws: BTreeMap<String, Vec<i64>>) -> Result<Row, SimError> {
        let fresh = vec![None; self.vars.len()];
        let mut st = State { vars: &self.vars, history: Some(hist), fresh, samples: Some(&draws) };
        for a in &self.program.body {
            let v = st.eval(&a.node.value, &self.nparams)?;
            let col = self.vars.iter().position(|x| *x == a.node.var).expect("assigned variables are initialized");
            st.fresh[col] = Some(v);
        }
        let prev = hist.back().expect("history is never empty");
        let values =
            st.fresh.into_iter().enumerate().map(|(c, v)| v.unwrap_or_else(|| prev.values[c].clone())).collect();
        Ok(Row { values, samples: draws })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> BTreeMap<String, Vec<i64>> {
        self.dists.iter().map(|(s, d)| (s.clone(), d.sample(rng).to_vec())).collect()
    }

    /// Run to termination or `max_steps` iterations; `on_step` sees the
    /// history after each write.
    pub fn run<R: Rng>(&self, rng: &mut R, max_steps: u64, on_step: &mut StepHook) -> Result<Trace, SimError> {
        let depth = self.init.len() + 1;
        let mut window: VecDeque<Row> = self.init.iter().cloned().collect();
        let mut head: Vec<Row> = self.init.clone();
        let mut len = self.init.len();
        let mut steps = 0u64;
        let mut first = true;
        loop {
            let go = if first && self.program.do_while() { true } else { self.guard(&window)? };
            first = false;
            if !go {
                break;
            }
            if steps == max_steps {
                return Ok(self.finish(head, window, len, true));
            }
            let row = self.step(&window, self.draw(rng))?;
            steps += 1;
            len += 1;
            if head.len() < HEAD {
                head.push(row.clone());
            }
            window.push_back(row);
            while window.len() > depth.max(TAIL) {
                window.pop_front();
            }
            on_step(len as i64 - 1, &window)?;
        }
        Ok(self.finish(head, window, len, false))
    }

    fn finish(&self, head: Vec<Row>, window: VecDeque<Row>, len: usize, censored: bool) -> Trace {
        Trace { tau: len as i64 - 1, censored, head, tail: window, len }
    }

    /// Replay fixed draws, ignoring the guard. Rows for indices `0..=b+n`.
    pub fn replay(&self, draws: &[BTreeMap<String, Vec<i64>>]) -> Result<Vec<BTreeMap<String, Rational>>, SimError> {
        let mut window: VecDeque<Row> = self.init.iter().cloned().collect();
        let mut all: Vec<Row> = self.init.clone();
        for d in draws {
            let row = self.step(&window, d.clone())?;
            window.push_back(row.clone());
            all.push(row);
        }
        Ok(all
            .into_iter()
            .map(|r| self.vars.iter().cloned().zip(r.values.iter().map(Num::to_rational)).collect())
            .collect())
    }
}
