//! Core symbolic layer for the loop acceleration engine.
//!
//! The crate provides the data types everything else is built from:
//!
//! * [`expr::PolyExp`] — canonical polynomial-exponential expressions over the
//!   program variables, their primed copies and the iteration counter `n`,
//!   with exact rational coefficients.
//! * [`formula::Formula`] — quantifier-free conjunctions of clauses over
//!   strict inequalities `e > 0`.
//! * [`loop_ir::Loop`] — single-path integer loops `while guard do update`,
//!   their text format, update classification and concrete stepping.
//! * [`closed_form`] — symbolic summation and closed forms `x_i^(n)` for
//!   triangular updates, valid for every `n >= 0`.
//! * [`oracle`] — a concrete simulation oracle that checks acceleration
//!   results against actual loop runs over a finite state box.

pub mod closed_form;
pub mod expr;
pub mod formula;
pub mod loop_ir;
pub mod oracle;
pub mod rat;
pub mod var;

pub use closed_form::{closed_form_at, compute_closed_form, sum_closed, ClosedForm, ClosedFormError, SumConfig};
pub use expr::{ExprError, Monomial, PolyExp, Term};
pub use formula::{Atom, Clause, CmpOp, Formula};
pub use loop_ir::{classify_update, parse_loop, print_loop, Classification, Loop, ParseError, SemanticError, UpdateShape};
pub use oracle::{check_approx, check_exact, run_n, OracleError, OracleReport, OracleVerdict, RunOutcome, StateBox, Witness};
pub use rat::Rat;
pub use var::{Assignment, Var, VarNames};
