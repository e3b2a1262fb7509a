//! The four conditional acceleration techniques.
//!
//! Each technique attacks a single pending guard clause χ. Its side condition
//! is an entailment over unprimed variables only, checked by the SMT client;
//! the premise may assume the already-processed condition φ̌ because the run
//! is known to satisfy φ̌ before every step. On success the technique yields
//! ψ₂, a formula over (x, n) that covers χ for the whole run, together with
//! an exactness flag.
//!
//! The two monotonicity techniques accept arbitrary clauses. The two eventual
//! ones are restricted to single-atom clauses `e > 0`: they ask the solver
//! whether e's slope along the loop can ever reverse, and on success check e
//! only at the endpoints of the run.

use std::collections::BTreeMap;
use std::fmt;

use accel_core::{Atom, Clause, CmpOp, ExprError, Formula, PolyExp, Var, VarNames};
use accel_smt::{SmtClient, Verdict};

use crate::EngineError;

/// One of the four techniques, in the driver's priority order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TechniqueId {
    MonotonicIncrease,
    MonotonicDecrease,
    EventualDecrease,
    EventualIncrease,
}

impl TechniqueId {
    /// All techniques, highest priority first.
    pub const ALL: [TechniqueId; 4] = [
        TechniqueId::MonotonicIncrease,
        TechniqueId::MonotonicDecrease,
        TechniqueId::EventualDecrease,
        TechniqueId::EventualIncrease,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            TechniqueId::MonotonicIncrease => "inc",
            TechniqueId::MonotonicDecrease => "dec",
            TechniqueId::EventualDecrease => "ev-dec",
            TechniqueId::EventualIncrease => "ev-inc",
        }
    }
}

impl fmt::Display for TechniqueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Everything a technique needs besides the clause under attack.
pub struct TechniqueEnv<'a> {
    /// The update substitution a.
    pub update: &'a BTreeMap<Var, PolyExp>,
    /// a ∘ a, composed by substitution so queries stay polynomial.
    pub update_twice: &'a BTreeMap<Var, PolyExp>,
    /// Closed forms instantiated at n - 1 (the state before the last step).
    pub closed_prev: &'a BTreeMap<Var, PolyExp>,
    pub names: &'a VarNames,
    pub client: &'a mut SmtClient,
    /// Treat Unknown verdicts as Valid. Deliberately unsound; exists so the
    /// test suite can demonstrate that the simulation oracle catches the
    /// resulting corruption. Must stay off in real use.
    pub unknown_is_valid: bool,
}

/// One entailment query, kept for traces and stuck-problem diagnostics.
#[derive(Clone, Debug)]
pub struct QueryRecord {
    pub technique: TechniqueId,
    pub premise: Formula,
    pub conclusion: Formula,
    pub verdict: Verdict,
}

impl QueryRecord {
    pub fn render(&self, names: &VarNames) -> String {
        let verdict = match &self.verdict {
            Verdict::Valid => "valid".to_string(),
            Verdict::NotValid(sigma) => format!("refuted by {}", sigma.render(names)),
            Verdict::Unknown(reason) => format!("unknown ({reason})"),
        };
        format!(
            "[{}] {} ==> {} : {}",
            self.technique,
            self.premise.render(names),
            self.conclusion.render(names),
            verdict
        )
    }
}

/// A successful application: given φ̌, ψ₂ covers the clause for all n > 0.
#[derive(Clone, Debug)]
pub struct TechniqueOutcome {
    pub technique: TechniqueId,
    pub psi2: Formula,
    pub exact: bool,
    pub queries: Vec<QueryRecord>,
}

/// Result of attempting one technique on one clause.
#[derive(Debug)]
pub enum Attempt {
    Applied(TechniqueOutcome),
    /// Side condition failed or the clause has the wrong shape; any queries
    /// issued are kept so stuck problems can explain themselves.
    NotApplicable(Vec<QueryRecord>),
}

pub fn try_technique(
    technique: TechniqueId,
    chi: &Clause,
    processed: &Formula,
    env: &mut TechniqueEnv<'_>,
) -> Result<Attempt, EngineError> {
    match technique {
        TechniqueId::MonotonicIncrease => try_monotonic_increase(chi, processed, env),
        TechniqueId::MonotonicDecrease => try_monotonic_decrease(chi, processed, env),
        TechniqueId::EventualDecrease => try_eventual_decrease(chi, processed, env),
        TechniqueId::EventualIncrease => try_eventual_increase(chi, processed, env),
    }
}

/// χ is invariant: φ̌ ∧ χ entails χ[a]. Once χ holds it keeps holding, so
/// checking it at the start of the run suffices: ψ₂ = χ(x). Exact.
pub fn try_monotonic_increase(
    chi: &Clause,
    processed: &Formula,
    env: &mut TechniqueEnv<'_>,
) -> Result<Attempt, EngineError> {
    let stepped = subst_clause(chi, env.update)?;
    let premise = processed.and(&clause_formula(chi.clone()));
    let conclusion = clause_formula(stepped);
    let (ok, record) = entail(env, TechniqueId::MonotonicIncrease, premise, conclusion)?;
    if !ok {
        return Ok(Attempt::NotApplicable(vec![record]));
    }
    Ok(Attempt::Applied(TechniqueOutcome {
        technique: TechniqueId::MonotonicIncrease,
        psi2: clause_formula(chi.clone()),
        exact: true,
        queries: vec![record],
    }))
}

/// χ is a converse invariant: φ̌ ∧ χ[a] entails χ. If χ still holds before
/// the last step it held before every earlier one, so ψ₂ = χ(a^{n-1}(x)),
/// instantiated through the closed form. Exact.
pub fn try_monotonic_decrease(
    chi: &Clause,
    processed: &Formula,
    env: &mut TechniqueEnv<'_>,
) -> Result<Attempt, EngineError> {
    let stepped = subst_clause(chi, env.update)?;
    let premise = processed.and(&clause_formula(stepped));
    let conclusion = clause_formula(chi.clone());
    let (ok, record) = entail(env, TechniqueId::MonotonicDecrease, premise, conclusion)?;
    if !ok {
        return Ok(Attempt::NotApplicable(vec![record]));
    }
    let psi2 = clause_formula(subst_clause(chi, env.closed_prev)?);
    Ok(Attempt::Applied(TechniqueOutcome {
        technique: TechniqueId::MonotonicDecrease,
        psi2,
        exact: true,
        queries: vec![record],
    }))
}

/// For a single atom e > 0: once e stops growing it never grows again
/// (φ̌ ∧ e ≥ e[a] entails e[a] ≥ e[a²]). Along such a run e is first
/// non-decreasing, then non-increasing, so its minimum over the run is at one
/// of the endpoints: ψ₂ = e(x) > 0 ∧ e(a^{n-1}(x)) > 0. Exact.
pub fn try_eventual_decrease(
    chi: &Clause,
    processed: &Formula,
    env: &mut TechniqueEnv<'_>,
) -> Result<Attempt, EngineError> {
    let Some(atom) = singleton_atom(chi) else {
        return Ok(Attempt::NotApplicable(Vec::new()));
    };
    let e = atom.expr();
    let e_next = e.subst(env.update)?;
    let e_next2 = e.subst(env.update_twice)?;
    let premise = processed.and(&Formula::from_cmp(e, CmpOp::Ge, &e_next));
    let conclusion = Formula::from_cmp(&e_next, CmpOp::Ge, &e_next2);
    let (ok, record) = entail(env, TechniqueId::EventualDecrease, premise, conclusion)?;
    if !ok {
        return Ok(Attempt::NotApplicable(vec![record]));
    }
    let mut psi2 = Formula::singleton(atom.clone());
    psi2.push_atom(atom.subst(env.closed_prev)?);
    Ok(Attempt::Applied(TechniqueOutcome {
        technique: TechniqueId::EventualDecrease,
        psi2,
        exact: true,
        queries: vec![record],
    }))
}

/// For a single atom e > 0: once e starts growing it never shrinks again
/// (φ̌ ∧ e ≤ e[a] entails e[a] ≤ e[a²]). If e is positive now and does not
/// shrink on the first step it stays positive: ψ₂ = e(x) > 0 ∧ e(x) ≤
/// e(a(x)). This only covers runs that start in the growing phase, so the
/// result is never exact.
pub fn try_eventual_increase(
    chi: &Clause,
    processed: &Formula,
    env: &mut TechniqueEnv<'_>,
) -> Result<Attempt, EngineError> {
    let Some(atom) = singleton_atom(chi) else {
        return Ok(Attempt::NotApplicable(Vec::new()));
    };
    let e = atom.expr();
    let e_next = e.subst(env.update)?;
    let e_next2 = e.subst(env.update_twice)?;
    let stays_up = Formula::from_cmp(e, CmpOp::Le, &e_next);
    let premise = processed.and(&stays_up);
    let conclusion = Formula::from_cmp(&e_next, CmpOp::Le, &e_next2);
    let (ok, record) = entail(env, TechniqueId::EventualIncrease, premise, conclusion)?;
    if !ok {
        return Ok(Attempt::NotApplicable(vec![record]));
    }
    let psi2 = Formula::singleton(atom.clone()).and(&stays_up);
    Ok(Attempt::Applied(TechniqueOutcome {
        technique: TechniqueId::EventualIncrease,
        psi2,
        exact: false,
        queries: vec![record],
    }))
}

/// a ∘ a as a substitution.
pub(crate) fn compose_update(
    update: &BTreeMap<Var, PolyExp>,
) -> Result<BTreeMap<Var, PolyExp>, ExprError> {
    update.iter().map(|(v, e)| Ok((*v, e.subst(update)?))).collect()
}

fn entail(
    env: &mut TechniqueEnv<'_>,
    technique: TechniqueId,
    premise: Formula,
    conclusion: Formula,
) -> Result<(bool, QueryRecord), EngineError> {
    let verdict = env.client.check_validity(&premise, &conclusion, env.names)?;
    let ok = match &verdict {
        Verdict::Valid => true,
        Verdict::Unknown(_) => env.unknown_is_valid,
        Verdict::NotValid(_) => false,
    };
    Ok((ok, QueryRecord { technique, premise, conclusion, verdict }))
}

fn subst_clause(chi: &Clause, map: &BTreeMap<Var, PolyExp>) -> Result<Clause, ExprError> {
    chi.iter().map(|a| a.subst(map)).collect()
}

fn clause_formula(clause: Clause) -> Formula {
    let mut f = Formula::truth();
    f.push_clause(clause);
    f
}

fn singleton_atom(chi: &Clause) -> Option<&Atom> {
    if chi.len() == 1 {
        chi.iter().next()
    } else {
        None
    }
}
