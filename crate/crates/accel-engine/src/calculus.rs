//! The acceleration driver.
//!
//! A problem carries the partial result ψ, the processed condition φ̌ and the
//! pending guard clauses φ̂. Each step scans technique tiers in priority
//! order (monotonic increase, monotonic decrease, eventual decrease, eventual
//! increase) and within a tier the pending clauses in guard order; the first
//! success moves its clause from φ̂ to φ̌ and conjoins ψ₂ onto ψ. After any
//! success the scan restarts from the highest tier, since a freshly processed
//! clause strengthens φ̌ and can unlock techniques that just failed. The
//! driver stops when φ̂ is empty (solved) or a full scan makes no progress
//! (stuck), so it takes at most one step per guard clause.

use std::collections::BTreeMap;

use accel_core::{
    closed_form_at, compute_closed_form, Clause, ClosedForm, CmpOp, Formula, Loop, PolyExp,
    SumConfig, Var, VarNames,
};
use accel_smt::SmtClient;

use crate::techniques::{
    self, Attempt, QueryRecord, TechniqueEnv, TechniqueId, TechniqueOutcome,
};
use crate::EngineError;

/// Driver configuration. The two `enable_*` switches exist for ablation
/// experiments; `unknown_is_valid` is the deliberate soundness hole described
/// on [`TechniqueEnv`].
#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub enable_ev_dec: bool,
    pub enable_ev_inc: bool,
    pub unknown_is_valid: bool,
    pub sum: SumConfig,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig {
            enable_ev_dec: true,
            enable_ev_inc: true,
            unknown_is_valid: false,
            sum: SumConfig::default(),
        }
    }
}

impl EngineConfig {
    fn tiers(&self) -> Vec<TechniqueId> {
        let mut tiers = vec![TechniqueId::MonotonicIncrease, TechniqueId::MonotonicDecrease];
        if self.enable_ev_dec {
            tiers.push(TechniqueId::EventualDecrease);
        }
        if self.enable_ev_inc {
            tiers.push(TechniqueId::EventualIncrease);
        }
        tiers
    }
}

/// One successful driver step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    /// Position of the discharged clause in the original guard.
    pub clause_index: usize,
    pub clause: Clause,
    pub technique: TechniqueId,
    pub psi2: Formula,
    pub exact: bool,
}

/// An in-flight acceleration of one loop.
#[derive(Debug)]
pub struct AccelProblem {
    lp: Loop,
    closed: ClosedForm,
    update: BTreeMap<Var, PolyExp>,
    update_twice: BTreeMap<Var, PolyExp>,
    closed_prev: BTreeMap<Var, PolyExp>,
    psi: Formula,
    condition: Formula,
    processed: Formula,
    pending: Vec<(usize, Clause)>,
    exact: bool,
    trace: Vec<StepRecord>,
    queries: Vec<QueryRecord>,
}

impl AccelProblem {
    pub fn program(&self) -> &Loop {
        &self.lp
    }

    /// The whole partial result, closed-form equations included.
    pub fn psi(&self) -> &Formula {
        &self.psi
    }

    /// Only the accumulated ψ₂ conjuncts.
    pub fn condition(&self) -> &Formula {
        &self.condition
    }

    pub fn processed(&self) -> &Formula {
        &self.processed
    }

    pub fn pending(&self) -> &[(usize, Clause)] {
        &self.pending
    }

    pub fn is_solved(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn exact_so_far(&self) -> bool {
        self.exact
    }

    pub fn trace(&self) -> &[StepRecord] {
        &self.trace
    }

    pub fn queries(&self) -> &[QueryRecord] {
        &self.queries
    }

    pub fn into_result(self) -> AccelResult {
        let solved = self.pending.is_empty();
        AccelResult {
            names: self.lp.names,
            closed: self.closed,
            formula: self.psi,
            condition: self.condition,
            exact: self.exact && solved,
            solved,
            residual: self.pending.into_iter().map(|(_, c)| c).collect(),
            trace: self.trace,
            queries: self.queries,
        }
    }
}

/// Final outcome of [`accelerate`].
#[derive(Debug)]
pub struct AccelResult {
    pub names: VarNames,
    pub closed: ClosedForm,
    /// ψ(x, n, x′): closed-form equations plus `condition`. A sound
    /// acceleration only when `solved`.
    pub formula: Formula,
    /// The accumulated ψ₂ part of the formula, without the equations.
    pub condition: Formula,
    /// Equivalence rather than mere implication. Only claimed when solved.
    pub exact: bool,
    pub solved: bool,
    /// Guard clauses no technique could discharge.
    pub residual: Vec<Clause>,
    pub trace: Vec<StepRecord>,
    pub queries: Vec<QueryRecord>,
}

impl AccelResult {
    pub fn steps(&self) -> usize {
        self.trace.len()
    }

    /// Technique usage counts in priority order, for reporting.
    pub fn technique_counts(&self) -> Vec<(TechniqueId, usize)> {
        TechniqueId::ALL
            .iter()
            .map(|&t| (t, self.trace.iter().filter(|s| s.technique == t).count()))
            .filter(|&(_, c)| c > 0)
            .collect()
    }
}

/// The starting problem: ψ holds the equations x′ = a^n(x), nothing is
/// processed, and the whole guard is pending. A loop whose guard folded to
/// `true` is already solved.
pub fn canonical_problem(lp: &Loop, closed: ClosedForm) -> Result<AccelProblem, EngineError> {
    debug_assert_eq!(lp.dim(), closed.dim());
    let update = lp.update_map();
    let update_twice = techniques::compose_update(&update)?;
    let prev = PolyExp::var(Var::N).sub(&PolyExp::one());
    let closed_prev = closed_form_at(&closed, &prev)?;
    let mut psi = Formula::truth();
    for (i, form) in closed.forms.iter().enumerate() {
        psi.push_cmp(&PolyExp::var(Var::XPrime(i as u32)), CmpOp::Eq, form);
    }
    let pending = lp.guard.clauses().iter().cloned().enumerate().collect();
    Ok(AccelProblem {
        lp: lp.clone(),
        closed,
        update,
        update_twice,
        closed_prev,
        psi,
        condition: Formula::truth(),
        processed: Formula::truth(),
        pending,
        exact: true,
        trace: Vec::new(),
        queries: Vec::new(),
    })
}

/// Outcome of one [`accel_step`] call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepResult {
    /// One clause was discharged.
    Progress,
    /// Nothing pending; the problem was already solved.
    Solved,
    /// No (technique, clause) pair applies.
    Stuck,
}

pub fn accel_step(
    p: &mut AccelProblem,
    client: &mut SmtClient,
    cfg: &EngineConfig,
) -> Result<StepResult, EngineError> {
    if p.pending.is_empty() {
        return Ok(StepResult::Solved);
    }
    let mut hit: Option<(usize, TechniqueOutcome)> = None;
    'tiers: for technique in cfg.tiers() {
        for pos in 0..p.pending.len() {
            let clause = &p.pending[pos].1;
            let mut env = TechniqueEnv {
                update: &p.update,
                update_twice: &p.update_twice,
                closed_prev: &p.closed_prev,
                names: &p.lp.names,
                client,
                unknown_is_valid: cfg.unknown_is_valid,
            };
            match techniques::try_technique(technique, clause, &p.processed, &mut env)? {
                Attempt::Applied(outcome) => {
                    hit = Some((pos, outcome));
                    break 'tiers;
                }
                Attempt::NotApplicable(failed) => p.queries.extend(failed),
            }
        }
    }
    let Some((pos, outcome)) = hit else {
        return Ok(StepResult::Stuck);
    };
    let (clause_index, clause) = p.pending.remove(pos);
    let TechniqueOutcome { technique, psi2, exact, queries } = outcome;
    p.queries.extend(queries);
    p.psi = p.psi.and(&psi2);
    p.condition = p.condition.and(&psi2);
    p.processed.push_clause(clause.clone());
    p.exact &= exact;
    p.trace.push(StepRecord { clause_index, clause, technique, psi2, exact });
    Ok(StepResult::Progress)
}

/// Accelerate a loop end to end: compute the closed form, then run the
/// driver to completion.
pub fn accelerate(
    lp: &Loop,
    client: &mut SmtClient,
    cfg: &EngineConfig,
) -> Result<AccelResult, EngineError> {
    let closed = compute_closed_form(lp, &cfg.sum)?;
    let mut p = canonical_problem(lp, closed)?;
    let budget = p.pending.len();
    for _ in 0..=budget {
        match accel_step(&mut p, client, cfg)? {
            StepResult::Progress => continue,
            StepResult::Solved | StepResult::Stuck => break,
        }
    }
    assert!(p.trace.len() <= budget, "one step per guard clause");
    Ok(p.into_result())
}

#[cfg(test)]
mod tests {
    use super::*;
    use accel_core::parse_loop;
    use accel_smt::testutil::ensure_solver;
    use accel_smt::SolverConfig;

    const NON_DEC: &str = "vars x1 x2 ; guard x1 > 0 && x2 > 0 ; update x1 = x1 - 1, x2 = x2 + 1 ;";

    fn client() -> SmtClient {
        SmtClient::new(SolverConfig::new(ensure_solver()))
    }

    fn run(src: &str, cfg: &EngineConfig) -> AccelResult {
        accelerate(&parse_loop(src).unwrap(), &mut client(), cfg).unwrap()
    }

    fn short_trace(r: &AccelResult) -> Vec<(&'static str, String)> {
        r.trace
            .iter()
            .map(|s| {
                let atoms: Vec<String> =
                    s.clause.iter().map(|a| a.render(&r.names)).collect();
                (s.technique.short_name(), atoms.join(" || "))
            })
            .collect()
    }

    #[test]
    fn canonical_problem_holds_equations_and_full_pending_guard() {
        let lp = parse_loop(NON_DEC).unwrap();
        let closed = compute_closed_form(&lp, &SumConfig::default()).unwrap();
        let p = canonical_problem(&lp, closed).unwrap();
        // two equations, desugared to two atoms each
        assert_eq!(p.psi().clauses().len(), 4);
        assert_eq!(p.pending().len(), 2);
        assert!(p.processed().is_true());
        assert!(p.condition().is_true());
        assert!(!p.is_solved());
        assert_eq!(
            p.psi().render(&lp.names),
            "-x1 + x1' + n + 1 > 0 && x1 - x1' - n + 1 > 0 \
             && -x2 + x2' - n + 1 > 0 && x2 - x2' + n + 1 > 0"
        );
    }

    #[test]
    fn coupled_counters_need_the_invariant_first() {
        let r = run(NON_DEC, &EngineConfig::default());
        assert!(r.solved);
        assert!(r.exact);
        assert_eq!(
            short_trace(&r),
            vec![("inc", "x2 > 0".to_string()), ("dec", "x1 > 0".to_string())]
        );
        assert_eq!(r.condition.render(&r.names), "x2 > 0 && x1 - n + 1 > 0");
    }

    #[test]
    fn trivial_guard_is_solved_without_any_query() {
        let r = run("vars x ; guard 1 > 0 ; update x = x + 3 ;", &EngineConfig::default());
        assert!(r.solved && r.exact);
        assert_eq!(r.steps(), 0);
        assert!(r.queries.is_empty());
        assert!(r.condition.is_true());
        assert_eq!(
            r.formula.render(&r.names),
            "-x + x' - 3*n + 1 > 0 && x - x' + 3*n + 1 > 0"
        );
    }

    #[test]
    fn oscillating_guard_expression_gets_stuck_with_diagnostics() {
        // x3's increment x2 shrinks without bound, so x3 rises then falls
        let r = run(
            "vars x1 x2 x3 ; guard x3 > 0 ; update x1 = x1 + 1, x2 = x2 - x1, x3 = x3 + x2 ;",
            &EngineConfig::default(),
        );
        assert!(!r.solved);
        assert!(!r.exact, "stuck results must not claim exactness");
        assert_eq!(r.residual.len(), 1);
        assert_eq!(r.queries.len(), 4, "one failed query per technique");
        assert_eq!(r.steps(), 0);
    }

    #[test]
    fn ablation_switches_disable_their_tiers() {
        let ev_inc_loop = "vars x1 x2 ; guard x1 > 0 ; update x1 = x1 + x2, x2 = x2 + 1 ;";
        let full = run(ev_inc_loop, &EngineConfig::default());
        assert!(full.solved && !full.exact);
        let cfg = EngineConfig { enable_ev_inc: false, ..EngineConfig::default() };
        let ablated = run(ev_inc_loop, &cfg);
        assert!(!ablated.solved);
        let ev_dec_loop = "vars x1 x2 ; guard x1 > 0 ; update x1 = x1 + x2, x2 = x2 - 1 ;";
        let cfg = EngineConfig { enable_ev_dec: false, ..EngineConfig::default() };
        assert!(run(ev_dec_loop, &EngineConfig::default()).solved);
        assert!(!run(ev_dec_loop, &cfg).solved);
    }

    #[test]
    fn unsupported_updates_error_out_before_any_query() {
        let mut c = client();
        for src in [
            "vars x y ; guard x > 0 ; update x = y, y = x ;",
            "vars x ; guard x > 0 ; update x = -x ;",
        ] {
            let lp = parse_loop(src).unwrap();
            let err = accelerate(&lp, &mut c, &EngineConfig::default()).unwrap_err();
            assert!(matches!(err, EngineError::ClosedForm(_)), "{err:?}");
        }
        assert_eq!(c.queries_sent(), 0);
    }
}
