//! Exact symbolic kernel: canonical polynomials over time-indexed atoms,
//! summation, (conditional) expectation and indicator nodes.

pub mod eval;
pub mod index;
pub mod parse;
pub mod poly;
pub mod print;
pub mod ratfn;
pub mod rewrite;
pub mod sign;
pub mod subst;
pub mod sum;
pub mod term;

use thiserror::Error;

pub use index::{IndexExpr, TimeVar};
pub use poly::{int, rat, Atom, CmpOp, CondExpNode, Formula, Monomial, Poly, Rational, SumNode};
pub use ratfn::RatFn;
pub use rewrite::{rewrite_fixpoint, RewriteOutcome, RewriteRule, RewriteStep};
pub use sign::ParamEnv;
pub use subst::{substitute, Bindings};
pub use sum::simplify_sum;
pub use term::{normalize, normalize_ratfn, Term, TermFormula};

/// The canonical symbolic expression type.
pub type SymExpr = Poly;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolicError {
    #[error("exponent {got} exceeds the degree cap {cap}")]
    DegreeCap { cap: u32, got: u32 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot divide a polynomial by `{0}`")]
    NonPolynomialDivision(String),
    #[error("substitution places sample atom `{atom}` under the filtration F({filtration})")]
    FiltrationViolation { atom: String, filtration: String },
    #[error("rewriting did not terminate after {steps} steps (last rules: {rules})")]
    IterationCap { steps: usize, rules: String },
    #[error("cannot evaluate `{0}`")]
    Unevaluable(String),
    #[error("parse error at column {col}: {msg}")]
    Parse { col: usize, msg: String },
}
