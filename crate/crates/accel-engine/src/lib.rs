//! Acceleration of single-path integer loops.
//!
//! Given a loop `while φ(x) { x := a(x) }` with a solvable update, this crate
//! produces a quantifier-free formula ψ(x, n, x′) that relates a state x to
//! the state x′ reached after n > 0 iterations. ψ always contains the
//! componentwise closed-form equations x′ = a^n(x); the interesting part is
//! covering the guard: each conjunct of φ must be shown to hold before every
//! one of the n steps.
//!
//! That covering is built clause by clause. A [`techniques`] entry inspects
//! one guard clause χ and, when an SMT-checked side condition holds, returns
//! a formula ψ₂ expressing "χ held throughout". The [`calculus`] driver tries
//! the techniques in a fixed priority order, letting later attempts assume
//! the clauses already discharged, until the guard is exhausted (solved) or
//! no technique applies (stuck). Results are flagged exact when ψ is
//! equivalent to the n-step relation, approximate when it only implies it.

use accel_core::{ClosedFormError, ExprError};
use accel_smt::SmtError;
use thiserror::Error;

mod calculus;
mod techniques;

pub use calculus::{
    accel_step, accelerate, canonical_problem, AccelProblem, AccelResult, EngineConfig,
    StepRecord, StepResult,
};
pub use techniques::{
    try_eventual_decrease, try_eventual_increase, try_monotonic_decrease,
    try_monotonic_increase, try_technique, Attempt, QueryRecord, TechniqueEnv, TechniqueId,
    TechniqueOutcome,
};

/// Errors shared by the technique layer and the driver.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no closed form")]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error("instantiation failed")]
    Expr(#[from] ExprError),
}
