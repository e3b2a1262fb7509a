//! Concrete simulation oracle.
//!
//! An acceleration result claims, for a loop with update `a` and guard
//! `phi`, that `psi(x, n, x')` implies the loop runs `n` steps from `x` and
//! ends in `x'` (and for exact results, the converse too). The oracle checks
//! that claim the blunt way: enumerate every start state in a finite box,
//! simulate, and compare against `psi` evaluated on concrete numbers for
//! every `n` up to a bound. Because updates are deterministic, the state
//! after `n` steps is `a^n(x)` whether or not the guard stayed true along
//! the way, so each start state needs a single forward simulation.
//!
//! The oracle knows nothing about how `psi` was produced, which is the
//! point: it catches bugs in the closed forms, the techniques, and the
//! solver alike.

use num_bigint::BigInt;
use thiserror::Error;

use crate::expr::ExprError;
use crate::formula::Formula;
use crate::loop_ir::{Loop, SemanticError};
use crate::var::Assignment;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error(transparent)]
    Step(#[from] SemanticError),
    #[error(transparent)]
    Eval(#[from] ExprError),
}

/// Result of running a loop for up to `n` guarded steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    /// All `n` steps ran; carries the final state.
    Ran(Vec<BigInt>),
    /// The guard failed after `steps < n` steps; carries the stuck state.
    Blocked { steps: u64, state: Vec<BigInt> },
}

/// Run the loop from `state` for at most `n` guarded steps.
pub fn run_n(l: &Loop, state: &[BigInt], n: u64) -> Result<RunOutcome, OracleError> {
    let mut s = state.to_vec();
    for k in 0..n {
        if !l.guard_holds(&s)? {
            return Ok(RunOutcome::Blocked { steps: k, state: s });
        }
        s = l.apply(&s)?;
    }
    Ok(RunOutcome::Ran(s))
}

/// The finite search space: all start states in `[lo, hi]^d`, iteration
/// counts `1..=max_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateBox {
    pub lo: i64,
    pub hi: i64,
    pub max_n: u64,
}

impl Default for StateBox {
    fn default() -> Self {
        StateBox { lo: -8, hi: 8, max_n: 8 }
    }
}

impl StateBox {
    /// All integer points of the box in dimension `d`, odometer order.
    pub fn states(&self, d: usize) -> impl Iterator<Item = Vec<BigInt>> + '_ {
        let width = (self.hi - self.lo + 1).max(0) as u64;
        let total = width.checked_pow(d as u32).expect("state box too large");
        (0..total).map(move |mut idx| {
            let mut s = Vec::with_capacity(d);
            for _ in 0..d {
                s.push(BigInt::from(self.lo + (idx % width) as i64));
                idx /= width;
            }
            s
        })
    }
}

/// A concrete refutation: starting at `start`, the claim about running
/// exactly `n` steps (ending at `end`) disagrees with the simulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub start: Vec<BigInt>,
    pub n: u64,
    pub end: Vec<BigInt>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleVerdict {
    Consistent,
    /// `psi` was true but the loop cannot run that many steps.
    SoundnessViolation(Witness),
    /// The loop runs that many steps but `psi` was false (exact claims only).
    ExactnessViolation(Witness),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport {
    pub verdict: OracleVerdict,
    pub states_checked: u64,
    pub pairs_checked: u64,
}

fn check(l: &Loop, psi: &Formula, bx: &StateBox, exact: bool) -> Result<OracleReport, OracleError> {
    let d = l.dim();
    let mut states_checked = 0u64;
    let mut pairs_checked = 0u64;
    for start in bx.states(d) {
        states_checked += 1;
        // one forward simulation: states and the guarded prefix length
        let mut trajectory = Vec::with_capacity(bx.max_n as usize + 1);
        trajectory.push(start.clone());
        let mut prefix = bx.max_n;
        for k in 0..bx.max_n {
            let last = trajectory.last().expect("nonempty");
            if !l.guard_holds(last)? && k < prefix {
                prefix = k;
            }
            let next = l.apply(last)?;
            trajectory.push(next);
        }
        for n in 1..=bx.max_n {
            pairs_checked += 1;
            let end = &trajectory[n as usize];
            let sigma = Assignment::from_state(&start).with_n(n).with_primed(end);
            let claimed = psi.evaluate(&sigma)?;
            let runnable = n <= prefix;
            if claimed && !runnable {
                return Ok(OracleReport {
                    verdict: OracleVerdict::SoundnessViolation(Witness {
                        start,
                        n,
                        end: end.clone(),
                    }),
                    states_checked,
                    pairs_checked,
                });
            }
            if exact && runnable && !claimed {
                return Ok(OracleReport {
                    verdict: OracleVerdict::ExactnessViolation(Witness {
                        start,
                        n,
                        end: end.clone(),
                    }),
                    states_checked,
                    pairs_checked,
                });
            }
        }
    }
    Ok(OracleReport { verdict: OracleVerdict::Consistent, states_checked, pairs_checked })
}

/// Check the one-sided claim: wherever `psi(x, n, a^n(x))` holds, the loop
/// really runs `n` steps.
pub fn check_approx(l: &Loop, psi: &Formula, bx: &StateBox) -> Result<OracleReport, OracleError> {
    check(l, psi, bx, false)
}

/// Check the two-sided claim: `psi(x, n, a^n(x))` holds exactly when the
/// loop runs `n` steps.
pub fn check_exact(l: &Loop, psi: &Formula, bx: &StateBox) -> Result<OracleReport, OracleError> {
    check(l, psi, bx, true)
}
