//! Polynomial recurrences `X_i = P_x(X_{i-1}, ..., S_i)` extracted from a
//! program, and seed processes lifted from seed expressions.
//!
//! Process index `k` is the value after the state with index `k` has been
//! written: init lines fill `0..m`, and the loop iteration that follows the
//! state with index `i - 1` writes index `i`. The base index is `b = m - 1`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::distributions::{DistError, Distribution};
use crate::frontend::{DistExpr, Expr, Guard, Program, RelOp};
use crate::symbolic::eval::{eval, Valuation};
use crate::symbolic::sign::{Bound, ParamRange};
use crate::symbolic::subst::rebase_time;
use crate::symbolic::term::{normalize, Term};
use crate::symbolic::{
    substitute, Atom, Bindings, CmpOp, Formula, IndexExpr, ParamEnv, Poly, Rational, SymbolicError, TimeVar,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecurrenceError {
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("distribution of `{var}`: {source}")]
    Dist { var: String, source: DistError },
    #[error("seed mentions sample variable `{0}`; E_0 would need a sample before the loop, use a seed over process variables only")]
    SampleInSeed(String),
    #[error("missing value for {0}")]
    Missing(String),
}

/// The loop index symbol used in recurrences and martingales.
pub fn loop_var() -> TimeVar {
    TimeVar::named("i")
}

pub fn at_i(offset: i64) -> IndexExpr {
    IndexExpr::named("i", offset)
}

/// Lower an AST expression to a polynomial, reading the current state at
/// index `at`. `time` gives the value of the hint symbol `t`.
pub fn lower_expr(e: &Expr, at: &IndexExpr, time: Option<&IndexExpr>) -> Result<Poly, SymbolicError> {
    normalize(&to_term(e, at, time)?)
}

fn to_term(e: &Expr, at: &IndexExpr, time: Option<&IndexExpr>) -> Result<Term, SymbolicError> {
    Ok(match e {
        Expr::Int(n) => Term::Num(Rational::from_integer(n.clone())),
        Expr::Param(p) => Term::Param(p.clone()),
        Expr::Process { name, offset } => Term::Process(name.clone(), at.shifted(*offset)),
        Expr::Sample(s) => Term::Sample(s.clone(), at.clone(), None),
        Expr::Proj(k, inner) => match &**inner {
            Expr::Sample(s) => Term::Sample(s.clone(), at.clone(), Some(*k)),
            other => return Err(SymbolicError::Unevaluable(format!("projection of {other}"))),
        },
        Expr::Time => {
            let ix = time.ok_or_else(|| SymbolicError::Unevaluable("`t` outside a hint".into()))?;
            match &ix.base {
                Some(v) => Term::add(Term::Time(v.clone()), Term::int(ix.offset)),
                None => Term::int(ix.offset),
            }
        }
        Expr::Add(a, b) => Term::add(to_term(a, at, time)?, to_term(b, at, time)?),
        Expr::Sub(a, b) => Term::sub(to_term(a, at, time)?, to_term(b, at, time)?),
        Expr::Mul(a, b) => Term::mul(to_term(a, at, time)?, to_term(b, at, time)?),
        Expr::Div(a, b) => Term::Div(Box::new(to_term(a, at, time)?), Box::new(to_term(b, at, time)?)),
        Expr::Neg(a) => Term::Neg(Box::new(to_term(a, at, time)?)),
        Expr::Pow(a, k) => Term::Pow(Box::new(to_term(a, at, time)?), *k),
    })
}

/// Lower a guard or hint formula.
pub fn lower_guard(g: &Guard, at: &IndexExpr, time: Option<&IndexExpr>) -> Result<Formula, SymbolicError> {
    Ok(match g {
        Guard::True => Formula::True,
        Guard::False => Formula::False,
        Guard::Cmp(op, a, b) => {
            let a = lower_expr(a, at, time)?;
            let b = lower_expr(b, at, time)?;
            match op {
                RelOp::Lt => Formula::Cmp(CmpOp::Lt, a, b),
                RelOp::Le => Formula::Cmp(CmpOp::Le, a, b),
                RelOp::Gt => Formula::Cmp(CmpOp::Lt, b, a),
                RelOp::Ge => Formula::Cmp(CmpOp::Le, b, a),
                RelOp::Eq => Formula::Cmp(CmpOp::Eq, a, b),
                RelOp::Ne => Formula::Cmp(CmpOp::Ne, a, b),
            }
        }
        Guard::And(a, b) => Formula::And(vec![lower_guard(a, at, time)?, lower_guard(b, at, time)?]),
        Guard::Or(a, b) => Formula::Or(vec![lower_guard(a, at, time)?, lower_guard(b, at, time)?]),
        Guard::Not(a) => Formula::Not(Box::new(lower_guard(a, at, time)?)),
        Guard::Implies(a, b) => {
            Formula::Or(vec![Formula::Not(Box::new(lower_guard(a, at, time)?)), lower_guard(b, at, time)?])
        }
    })
}

pub fn lower_dist(var: &str, d: &DistExpr) -> Result<Distribution, RecurrenceError> {
    let here = IndexExpr::abs(0);
    let to_i64 = |n: &num_bigint::BigInt| -> Result<i64, RecurrenceError> {
        i64::try_from(n).map_err(|_| RecurrenceError::Missing(format!("support value {n} out of range")))
    };
    let wrap = |source| RecurrenceError::Dist { var: var.to_string(), source };
    match d {
        DistExpr::Bern { prob, v1, v0 } => {
            Distribution::bern(lower_expr(prob, &here, None)?, to_i64(v1)?, to_i64(v0)?).map_err(wrap)
        }
        DistExpr::Unif(vs) => {
            let vs = vs.iter().map(to_i64).collect::<Result<Vec<_>, _>>()?;
            Distribution::unif(&vs).map_err(wrap)
        }
        DistExpr::Matches { pattern, alphabet } => {
            Distribution::matches(pattern, lower_expr(alphabet, &here, None)?).map_err(wrap)
        }
        DistExpr::Table(rows) => {
            let mut entries = Vec::new();
            for (v, p) in rows {
                let v = v.iter().map(to_i64).collect::<Result<Vec<_>, _>>()?;
                entries.push((v, lower_expr(p, &here, None)?));
            }
            Distribution::table(entries).map_err(wrap)
        }
    }
}

/// Parameter ranges declared by the program.
pub fn param_env(p: &Program) -> ParamEnv {
    let mut env = ParamEnv::new();
    for d in &p.params {
        let d = &d.node;
        let (lo, hi) = match &d.range {
            Some((lo, hi)) => (
                lo.value.clone().map(|v| Bound { value: v, strict: !lo.closed }),
                hi.value.clone().map(|v| Bound { value: v, strict: !hi.closed }),
            ),
            None => (None, None),
        };
        env.declare(&d.name, ParamRange::new(lo, hi, d.integer));
    }
    env
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceSystem {
    /// Process variables in declaration order.
    pub vars: Vec<String>,
    /// `P_x` over `x[i-n]` (n >= 1), `s[i]` and parameters.
    pub polys: BTreeMap<String, Poly>,
    /// Initial values, indexed by absolute history index.
    pub init: BTreeMap<(String, usize), Poly>,
    /// Deepest history reference per variable (at least 1).
    pub depth: BTreeMap<String, usize>,
    pub init_len: usize,
    pub samples: BTreeMap<String, Distribution>,
    /// The loop guard over the state at index `i`.
    pub guard: Formula,
    /// The guard reads samples: the first iteration runs unconditionally.
    pub do_while: bool,
}

impl RecurrenceSystem {
    pub fn base(&self) -> i64 {
        self.init_len as i64 - 1
    }

    /// `X_k ↦ value` for every initialized index `k`.
    pub fn init_bindings(&self) -> Bindings {
        self.init.iter().map(|((x, k), v)| (Atom::process(x, IndexExpr::abs(*k as i64)), v.clone())).collect()
    }

    /// `X_at ↦ P_x` with the loop index moved to `at`.
    pub fn unroll_bindings(&self, at: &IndexExpr) -> Bindings {
        self.polys.iter().map(|(x, p)| (Atom::process(x, at.clone()), rebase_time(p, &loop_var(), at))).collect()
    }

    /// Replace every `X_at` in `e` by one step of its recurrence.
    pub fn unroll(&self, e: &Poly, at: &IndexExpr) -> Result<Poly, SymbolicError> {
        substitute(e, &self.unroll_bindings(at))
    }

    /// Concrete unrolling: the process values at indices `0..=b+n` given
    /// the samples of `n` iterations.
    pub fn run_concrete(
        &self,
        params: &BTreeMap<String, Rational>,
        samples: &[BTreeMap<String, Vec<i64>>],
    ) -> Result<Vec<BTreeMap<String, Rational>>, RecurrenceError> {
        let mut trace: Vec<BTreeMap<String, Rational>> = Vec::new();
        for k in 0..self.init_len {
            let mut row = BTreeMap::new();
            for x in &self.vars {
                let v = &self.init[&(x.clone(), k)];
                row.insert(x.clone(), crate::symbolic::eval::eval_params(v, params)?);
            }
            trace.push(row);
        }
        for draw in samples {
            let i = trace.len() as i64;
            let mut row = BTreeMap::new();
            for x in &self.vars {
                let prev = &trace;
                let process = |name: &str, k: i64| -> Option<Rational> {
                    usize::try_from(k).ok().and_then(|k| prev.get(k)).and_then(|r| r.get(name)).cloned()
                };
                let sample = |name: &str, k: i64, proj: Option<u32>| -> Option<Rational> {
                    if k != i {
                        return None;
                    }
                    let v = draw.get(name)?;
                    let c = proj.map(|p| p as usize - 1).unwrap_or(0);
                    v.get(c).map(|n| Rational::from_integer((*n).into()))
                };
                let mut val = Valuation {
                    params,
                    time: [(loop_var(), i)].into_iter().collect(),
                    process: &process,
                    sample: &sample,
                    exp_as_body: false,
                };
                row.insert(x.clone(), eval(&self.polys[x], &mut val)?);
            }
            trace.push(row);
        }
        Ok(trace)
    }
}

impl std::fmt::Display for RecurrenceSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for x in &self.vars {
            writeln!(f, "{x}[i] = {}", self.polys[x])?;
        }
        Ok(())
    }
}

pub fn extract_recurrences(p: &Program) -> Result<RecurrenceSystem, RecurrenceError> {
    let vars = p.process_vars();
    let mut init = BTreeMap::new();
    for i in &p.init {
        let v = lower_expr(&i.node.value, &IndexExpr::abs(0), None)?;
        init.insert((i.node.var.clone(), i.node.index), v);
    }
    let mut samples = BTreeMap::new();
    for s in &p.samples {
        samples.insert(s.node.var.clone(), lower_dist(&s.node.var, &s.node.dist)?);
    }

    // Same-iteration reads are inlined in textual order.
    let i = at_i(0);
    let mut current: Bindings = Bindings::new();
    let mut polys = BTreeMap::new();
    for a in &p.body {
        let raw = lower_expr(&a.node.value, &i, None)?;
        let px = substitute(&raw, &current)?;
        current.insert(Atom::process(&a.node.var, i.clone()), px.clone());
        polys.insert(a.node.var.clone(), px);
    }
    for x in &vars {
        polys.entry(x.clone()).or_insert_with(|| Poly::process(x, at_i(-1)));
    }

    let mut depth: BTreeMap<String, usize> = vars.iter().map(|x| (x.clone(), 1)).collect();
    for px in polys.values() {
        px.visit_atoms_deep(&mut |a| {
            if let Atom::Process { name, index } = a {
                let d = (-index.offset).max(1) as usize;
                let slot = depth.entry(name.clone()).or_insert(1);
                *slot = (*slot).max(d);
            }
        });
    }

    Ok(RecurrenceSystem {
        vars,
        polys,
        init,
        depth,
        init_len: p.init_len(),
        samples,
        guard: lower_guard(&p.guard.node, &i, None)?,
        do_while: p.do_while(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedProcess {
    /// `E_i` over `x[i-n]` atoms.
    pub e_i: Poly,
    /// `E_b`, parameters only.
    pub e_0: Poly,
}

pub fn lift_seed(rs: &RecurrenceSystem, seed: &Expr) -> Result<SeedProcess, RecurrenceError> {
    let mut sample = None;
    seed.walk(&mut |e| {
        if let Expr::Sample(s) = e {
            sample.get_or_insert_with(|| s.clone());
        }
    });
    if let Some(s) = sample {
        return Err(RecurrenceError::SampleInSeed(s));
    }
    let e_i = lower_expr(seed, &at_i(0), None)?;
    let e_b = rebase_time(&e_i, &loop_var(), &IndexExpr::abs(rs.base()));
    let e_0 = substitute(&e_b, &rs.init_bindings())?;
    if !e_0.is_param_only() {
        return Err(RecurrenceError::Missing(format!("initial value in {e_0}")));
    }
    Ok(SeedProcess { e_i, e_0 })
}
