//! Optional stopping: side conditions, the raw fact `E[M_0] = E[M_tau]`,
//! hint simplification and solving for a target expectation.

pub mod fact;
pub mod interval;
pub mod side;

use thiserror::Error;

use crate::doob::MartingaleForm;
use crate::recurrence::loop_var;
use crate::symbolic::subst::rebase_time;
use crate::symbolic::{IndexExpr, Poly, SymbolicError};

pub use fact::{
    apply_hints, default_target, linearize, parse_fact_file, parse_target, print_fact_file, solve_for, Fact,
    FactStatus, HintReport, KnownFact, SolveOutcome,
};
pub use interval::SymInterval;
pub use side::{side_conditions, CondStatus, SideCondition, SideConditions, StateAnalysis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OstError {
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("optional stopping refused; unproven side conditions:\n  {}", .0.join("\n  "))]
    Refused(Vec<String>),
    #[error("conflicting hints: {0}")]
    HintConflict(String),
    #[error("bad solve target `{0}`")]
    BadTarget(String),
    #[error("fact file line {line}: {msg}")]
    FactFile { line: usize, msg: String },
}

/// `M_i` at the stopping time: every free `i` becomes `tau`.
pub fn at_tau(mi: &Poly) -> Poly {
    rebase_time(mi, &loop_var(), &IndexExpr::tau(0))
}

/// `E[M_b] = E[M_tau]`. Refused unless every side condition is verified or
/// `assume` is set.
pub fn apply_ost(form: &MartingaleForm, side: &SideConditions, assume: bool) -> Result<Fact, OstError> {
    if !assume && !side.all_verified() {
        return Err(OstError::Refused(side.obligations()));
    }
    Ok(Fact { lhs: form.m0.clone(), rhs: Poly::exp(at_tau(&form.mi)), status: FactStatus::Raw })
}

#[cfg(test)]
mod tests;
