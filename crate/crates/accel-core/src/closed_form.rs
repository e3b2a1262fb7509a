//! Closed forms for triangular updates.
//!
//! For an update in triangular form the value of each variable after `n`
//! steps is a polynomial-exponential in the initial values and `n`. The
//! kernel is `solve_rec`, which solves the scalar recurrence
//!
//! ```text
//! f(0) = init,    f(n+1) = c * f(n) + q(n)
//! ```
//!
//! by undetermined coefficients, one term `r * X * n^k * b^n` of `q` at a
//! time (`X` collects the initial-value variables, which ride along as
//! constants). A term with `b != c` has a particular solution `P(n) * b^n`
//! with `P` of degree `k`; a resonant term (`b == c`) picks up one extra
//! degree through the power-sum polynomial. Summation is the special case
//! `c = 1`, `init = 0`.
//!
//! Power-sum polynomials come from the telescoping identity
//! `sum_{m<=k} C(k+1,m) * F_m(n) = n^(k+1)`, so everything stays exact
//! rational arithmetic. Degrees are capped (`SumConfig::degree_cap`,
//! default 8) to keep pathological inputs from grinding.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::One;
use thiserror::Error;

use crate::expr::{ExprError, PolyExp};
use crate::loop_ir::{classify_update, Loop, SemanticError};
use crate::rat::{rat_int, Rat};
use crate::var::Var;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ClosedFormError {
    #[error(transparent)]
    Unsupported(#[from] SemanticError),
    #[error("closed form needs degree {degree}, above the cap {cap}")]
    DegreeCapExceeded { degree: u32, cap: u32 },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Knobs for the recurrence solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SumConfig {
    /// Largest allowed degree in `n` of any intermediate or final form.
    pub degree_cap: u32,
}

impl Default for SumConfig {
    fn default() -> Self {
        SumConfig { degree_cap: 8 }
    }
}

/// Closed forms of a loop, indexed like its variables: `forms[i]` equals the
/// value of `x_i` after `n` iterations, for every `n >= 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedForm {
    pub forms: Vec<PolyExp>,
}

impl ClosedForm {
    pub fn dim(&self) -> usize {
        self.forms.len()
    }

    /// Evaluate all components on an initial state at a given `n`.
    pub fn eval_state(&self, state: &[BigInt], n: impl Into<BigInt>) -> Result<Vec<Rat>, ExprError> {
        let sigma = crate::var::Assignment::from_state(state).with_n(n);
        self.forms.iter().map(|f| f.evaluate(&sigma)).collect()
    }
}

/// The substitution `x_i -> forms[i][n := at]`, e.g. `at = n - 1` to speak
/// about the state one step before the end.
pub fn closed_form_at(cf: &ClosedForm, at: &PolyExp) -> Result<BTreeMap<Var, PolyExp>, ExprError> {
    let mut map = BTreeMap::new();
    for (i, f) in cf.forms.iter().enumerate() {
        map.insert(Var::X(i as u32), f.subst_n(at)?);
    }
    Ok(map)
}

/// `F_k(n) = sum_{j=0}^{n-1} j^k` as a polynomial in `n`, degree `k + 1`.
fn power_sum(k: u32) -> PolyExp {
    let n = PolyExp::var(Var::N);
    let mut fs: Vec<PolyExp> = Vec::with_capacity(k as usize + 1);
    for i in 0..=k {
        let mut acc = n.pow(i + 1);
        for (m, fm) in fs.iter().enumerate() {
            let c = binomial(BigInt::from(i as u64 + 1), BigInt::from(m));
            acc = acc.sub(&fm.scale(&rat_int(c)));
        }
        fs.push(acc.scale(&Rat::new(BigInt::one(), BigInt::from(i + 1))));
    }
    fs.pop().expect("k + 1 entries")
}

/// Solve `f(0) = init`, `f(n+1) = c * f(n) + q(n)` with `c >= 1`.
pub fn solve_rec(
    c: &BigInt,
    init: &PolyExp,
    q: &PolyExp,
    cfg: &SumConfig,
) -> Result<PolyExp, ClosedFormError> {
    assert!(c >= &BigInt::one(), "homogeneous coefficient must be >= 1, got {c}");
    let n = PolyExp::var(Var::N);
    let mut parts = PolyExp::zero();
    for t in q.terms() {
        let (xmono, k) = t.mono.split_counter();
        let b = t.base.clone().unwrap_or_else(BigInt::one);
        let resonant = b == *c;
        let degree = if resonant { k + 1 } else { k };
        if degree > cfg.degree_cap {
            return Err(ClosedFormError::DegreeCapExceeded { degree, cap: cfg.degree_cap });
        }
        let particular = if resonant {
            // P(n) = (r/c) * F_k(n) * c^n
            let scale = &t.coeff / rat_int(c.clone());
            power_sum(k).scale(&scale).mul(&PolyExp::exp(c.clone()))
        } else {
            // P(n) = (sum_j p_j n^j) * b^n with
            // (b - c) p_j = r*[j == k] - b * sum_{m > j} C(m, j) p_m
            let bc = rat_int(b.clone()) - rat_int(c.clone());
            let mut p = vec![rat_int(0); k as usize + 1];
            for j in (0..=k).rev() {
                let mut rhs = if j == k { t.coeff.clone() } else { rat_int(0) };
                for m in (j + 1)..=k {
                    let cmj = binomial(BigInt::from(m), BigInt::from(j));
                    rhs -= rat_int(&b * cmj) * &p[m as usize];
                }
                p[j as usize] = rhs / &bc;
            }
            let mut poly = PolyExp::zero();
            for (j, pj) in p.into_iter().enumerate() {
                poly = poly.add(&n.pow(j as u32).scale(&pj));
            }
            poly.mul(&PolyExp::exp(b))
        };
        parts = parts.add(&particular.mul(&mono_expr(&xmono)));
    }
    // pin the initial value: f = A * c^n + parts with A = init - parts(0)
    let at_zero = parts.subst_n(&PolyExp::zero())?;
    let a = init.sub(&at_zero);
    Ok(a.mul(&PolyExp::exp(c.clone())).add(&parts))
}

fn mono_expr(m: &crate::expr::Monomial) -> PolyExp {
    let mut e = PolyExp::one();
    for (v, p) in m.iter() {
        e = e.mul(&PolyExp::var(*v).pow(*p));
    }
    e
}

/// `sum_closed(e) = sum_{j=0}^{n-1} e[n := j]` in closed form.
pub fn sum_closed(e: &PolyExp, cfg: &SumConfig) -> Result<PolyExp, ClosedFormError> {
    solve_rec(&BigInt::one(), &PolyExp::zero(), e, cfg)
}

/// Closed forms for all variables of a triangular loop, solving them in
/// dependency order and substituting already-solved forms into later
/// addends.
pub fn compute_closed_form(l: &Loop, cfg: &SumConfig) -> Result<ClosedForm, ClosedFormError> {
    let classification = classify_update(l)?;
    let mut forms: Vec<Option<PolyExp>> = vec![None; l.dim()];
    let mut solved: BTreeMap<Var, PolyExp> = BTreeMap::new();
    for &i in &classification.order {
        let shape = &classification.shapes[i];
        // q(n) = addend with earlier variables at their step-n values
        let q = shape.addend.subst(&solved)?;
        let init = PolyExp::var(Var::X(i as u32));
        let f = solve_rec(&shape.coeff, &init, &q, cfg)?;
        solved.insert(Var::X(i as u32), f.clone());
        forms[i] = Some(f);
    }
    Ok(ClosedForm { forms: forms.into_iter().map(Option::unwrap).collect() })
}
