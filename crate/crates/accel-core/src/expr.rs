//! Canonical polynomial-exponential expressions.
//!
//! A `PolyExp` is a finite sum of terms `coeff * monomial * base^n` where the
//! coefficient is an exact rational, the monomial ranges over program
//! variables, primed variables and the counter `n`, and the optional
//! exponential factor has a constant integer base `>= 2` (base 1 normalizes
//! away, and a factor `b^(a*n + c)` is normalized to `b^c * (b^a)^n`, so the
//! exponent is always plain `n`). Terms are merged and sorted by a fixed
//! total order, so structural equality coincides with algebraic equality.
//!
//! The class is closed under addition, multiplication, and substitution of
//! program variables; substituting the counter is only allowed with linear
//! integer-coefficient expressions with non-negative leading coefficient,
//! anything else escapes the class and is reported as an error.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rat::{is_integer, rat_int, rat_pow, Rat};
use crate::var::{Assignment, Var, VarNames};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ExprError {
    /// An operation would leave the polynomial-exponential class, e.g.
    /// substituting `n -> -n` under `2^n`.
    #[error("class escape: {0}")]
    ClassEscape(String),
    /// An exponential was evaluated at a negative counter value.
    #[error("negative exponent: n = {0}")]
    NegativeExponent(BigInt),
    /// Counter value too large to exponentiate.
    #[error("exponent out of range: n = {0}")]
    ExponentTooLarge(BigInt),
    /// Evaluation met a variable the assignment does not bind.
    #[error("assignment has no value for {0}")]
    MissingVariable(String),
    /// A polynomial was required (SMT rendering, linear views) but the
    /// expression has an exponential factor or a rational coefficient.
    #[error("not a polynomial with integer coefficients: {0}")]
    NonPolynomial(String),
}

/// A power product of variables, sorted by variable, powers >= 1.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn var_pow(v: Var, pow: u32) -> Self {
        if pow == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(v, pow)])
        }
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Var, u32)> {
        self.0.iter()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, p)| *p).sum()
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.0.iter().find(|(w, _)| *w == v).map_or(0, |(_, p)| *p)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut map: BTreeMap<Var, u32> = self.0.iter().cloned().collect();
        for (v, p) in &other.0 {
            *map.entry(*v).or_insert(0) += p;
        }
        Monomial(map.into_iter().collect())
    }

    /// Split off the counter: returns the monomial without `n` and the power
    /// of `n` it carried.
    pub fn split_counter(&self) -> (Monomial, u32) {
        let k = self.degree_in(Var::N);
        let rest = Monomial(self.0.iter().filter(|(v, _)| *v != Var::N).cloned().collect());
        (rest, k)
    }
}

/// One term of a `PolyExp`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Term {
    pub coeff: Rat,
    pub mono: Monomial,
    /// `Some(b)` means a factor `b^n` with a constant integer base `b >= 2`.
    pub base: Option<BigInt>,
}

/// Canonical ordering of term keys: exponential-free terms first, then by
/// base; within a base, higher total degree first, ties broken by the
/// monomial's lexicographic order. Any fixed total order would do; this one
/// prints polynomials the way people write them (`x1 - n + 1`).
fn key_cmp(a: &Term, b: &Term) -> Ordering {
    let base_a = a.base.clone().unwrap_or_else(BigInt::one);
    let base_b = b.base.clone().unwrap_or_else(BigInt::one);
    base_a
        .cmp(&base_b)
        .then_with(|| b.mono.degree().cmp(&a.mono.degree()))
        .then_with(|| a.mono.cmp(&b.mono))
}

/// A canonical polynomial-exponential expression.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PolyExp {
    terms: Vec<Term>,
}

impl PartialOrd for PolyExp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PolyExp {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut it_a = self.terms.iter();
        let mut it_b = other.terms.iter();
        loop {
            match (it_a.next(), it_b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(a), Some(b)) => {
                    let c = key_cmp(a, b).then_with(|| a.coeff.cmp(&b.coeff));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
            }
        }
    }
}

impl PolyExp {
    fn from_map(map: BTreeMap<(Option<BigInt>, Monomial), Rat>) -> Self {
        let mut terms: Vec<Term> = map
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((base, mono), coeff)| Term { coeff, mono, base })
            .collect();
        terms.sort_by(key_cmp);
        PolyExp { terms }
    }

    fn to_map(&self) -> BTreeMap<(Option<BigInt>, Monomial), Rat> {
        self.terms.iter().map(|t| ((t.base.clone(), t.mono.clone()), t.coeff.clone())).collect()
    }

    pub fn zero() -> Self {
        PolyExp { terms: Vec::new() }
    }

    pub fn one() -> Self {
        PolyExp::from_rat(rat_int(1))
    }

    pub fn int(i: i64) -> Self {
        PolyExp::from_rat(rat_int(i))
    }

    pub fn from_bigint(i: BigInt) -> Self {
        PolyExp::from_rat(rat_int(i))
    }

    pub fn from_rat(r: Rat) -> Self {
        if r.is_zero() {
            PolyExp::zero()
        } else {
            PolyExp { terms: vec![Term { coeff: r, mono: Monomial::one(), base: None }] }
        }
    }

    pub fn var(v: Var) -> Self {
        PolyExp { terms: vec![Term { coeff: rat_int(1), mono: Monomial::var(v), base: None }] }
    }

    /// The factor `base^n`. Base 1 is the constant 1; bases below 1 are not
    /// representable and a programming error.
    pub fn exp(base: BigInt) -> Self {
        assert!(base >= BigInt::one(), "exponential base must be >= 1, got {base}");
        if base.is_one() {
            PolyExp::one()
        } else {
            PolyExp { terms: vec![Term { coeff: rat_int(1), mono: Monomial::one(), base: Some(base) }] }
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.as_slice() {
            [] => Some(rat_int(0)),
            [t] if t.mono.is_one() && t.base.is_none() => Some(t.coeff.clone()),
            _ => None,
        }
    }

    pub fn add(&self, other: &PolyExp) -> PolyExp {
        let mut map = self.to_map();
        for t in &other.terms {
            let e = map.entry((t.base.clone(), t.mono.clone())).or_insert_with(|| rat_int(0));
            *e += &t.coeff;
        }
        PolyExp::from_map(map)
    }

    pub fn neg(&self) -> PolyExp {
        PolyExp {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: -t.coeff.clone(), mono: t.mono.clone(), base: t.base.clone() })
                .collect(),
        }
    }

    pub fn sub(&self, other: &PolyExp) -> PolyExp {
        self.add(&other.neg())
    }

    pub fn scale(&self, r: &Rat) -> PolyExp {
        if r.is_zero() {
            return PolyExp::zero();
        }
        PolyExp {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: &t.coeff * r, mono: t.mono.clone(), base: t.base.clone() })
                .collect(),
        }
    }

    pub fn mul(&self, other: &PolyExp) -> PolyExp {
        let mut map: BTreeMap<(Option<BigInt>, Monomial), Rat> = BTreeMap::new();
        for a in &self.terms {
            for b in &other.terms {
                let base = match (&a.base, &b.base) {
                    (None, None) => None,
                    (Some(x), None) | (None, Some(x)) => Some(x.clone()),
                    // b1^n * b2^n = (b1*b2)^n
                    (Some(x), Some(y)) => Some(x * y),
                };
                let mono = a.mono.mul(&b.mono);
                let coeff = &a.coeff * &b.coeff;
                let e = map.entry((base, mono)).or_insert_with(|| rat_int(0));
                *e += coeff;
            }
        }
        PolyExp::from_map(map)
    }

    pub fn pow(&self, e: u32) -> PolyExp {
        let mut acc = PolyExp::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        for t in &self.terms {
            for (v, _) in t.mono.iter() {
                s.insert(*v);
            }
            if t.base.is_some() {
                s.insert(Var::N);
            }
        }
        s
    }

    /// Largest total monomial degree (the counter included).
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.mono.degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms.iter().map(|t| t.mono.degree_in(v)).max().unwrap_or(0)
    }

    /// No exponential factors.
    pub fn is_polynomial(&self) -> bool {
        self.terms.iter().all(|t| t.base.is_none())
    }

    /// Polynomial of total degree <= 1.
    pub fn is_linear(&self) -> bool {
        self.is_polynomial() && self.degree() <= 1
    }

    /// All coefficients integral.
    pub fn has_integer_coeffs(&self) -> bool {
        self.terms.iter().all(|t| is_integer(&t.coeff))
    }

    /// View as `alpha * n + beta` with integer alpha, beta; `None` when the
    /// expression is not of that shape.
    pub fn as_linear_int_in_n(&self) -> Option<(BigInt, BigInt)> {
        let mut alpha = BigInt::zero();
        let mut beta = BigInt::zero();
        for t in &self.terms {
            if t.base.is_some() || !is_integer(&t.coeff) {
                return None;
            }
            if t.mono.is_one() {
                beta = t.coeff.numer().clone();
            } else if t.mono == Monomial::var(Var::N) {
                alpha = t.coeff.numer().clone();
            } else {
                return None;
            }
        }
        Some((alpha, beta))
    }

    /// View as `c * v + p` with `p` free of `v`; `None` when `v` occurs
    /// nonlinearly, with a non-constant coefficient, or under an exponential.
    pub fn linear_in(&self, v: Var) -> Option<(Rat, PolyExp)> {
        let mut c = rat_int(0);
        let mut rest = Vec::new();
        for t in &self.terms {
            if t.mono.degree_in(v) == 0 {
                rest.push(t.clone());
            } else if t.mono == Monomial::var(v) && t.base.is_none() {
                c += &t.coeff;
            } else {
                return None;
            }
        }
        let mut p = PolyExp { terms: rest };
        p.terms.sort_by(key_cmp);
        Some((c, p))
    }

    /// Simultaneous substitution. Program and primed variables may be
    /// replaced by arbitrary `PolyExp`s; the counter only by a linear
    /// integer-coefficient expression `alpha*n + beta` with `alpha >= 0`
    /// (otherwise an exponential would need a fractional or variable base).
    pub fn subst(&self, map: &BTreeMap<Var, PolyExp>) -> Result<PolyExp, ExprError> {
        let mut acc = PolyExp::zero();
        for t in &self.terms {
            let mut prod = PolyExp::from_rat(t.coeff.clone());
            for (v, pow) in t.mono.iter() {
                let factor = match map.get(v) {
                    None => PolyExp { terms: vec![Term { coeff: rat_int(1), mono: Monomial::var_pow(*v, *pow), base: None }] },
                    Some(e) => e.pow(*pow),
                };
                prod = prod.mul(&factor);
            }
            if let Some(b) = &t.base {
                let factor = match map.get(&Var::N) {
                    None => PolyExp::exp(b.clone()),
                    Some(g) => {
                        let (alpha, beta) = g.as_linear_int_in_n().ok_or_else(|| {
                            ExprError::ClassEscape(format!(
                                "cannot substitute the counter under {b}^n with a non-linear or non-integer expression"
                            ))
                        })?;
                        if alpha.is_negative() {
                            return Err(ExprError::ClassEscape(format!(
                                "substituting the counter under {b}^n with negative slope {alpha} leaves the class"
                            )));
                        }
                        let shift = rat_pow(b, &beta).ok_or_else(|| {
                            ExprError::ClassEscape(format!("cannot form {b}^{beta}"))
                        })?;
                        let alpha_u: u32 = (&alpha).try_into().map_err(|_| {
                            ExprError::ClassEscape(format!("exponent slope {alpha} too large"))
                        })?;
                        // b^(alpha n + beta) = b^beta * (b^alpha)^n
                        PolyExp::exp(b.pow(alpha_u)).scale(&shift)
                    }
                };
                prod = prod.mul(&factor);
            }
            acc = acc.add(&prod);
        }
        Ok(acc)
    }

    /// Substitute only the counter.
    pub fn subst_n(&self, e: &PolyExp) -> Result<PolyExp, ExprError> {
        let mut map = BTreeMap::new();
        map.insert(Var::N, e.clone());
        self.subst(&map)
    }

    /// Exact evaluation. Exponentials demand a non-negative counter value.
    pub fn evaluate(&self, sigma: &Assignment) -> Result<Rat, ExprError> {
        let mut sum = rat_int(0);
        for t in &self.terms {
            let mut val = t.coeff.clone();
            for (v, pow) in t.mono.iter() {
                let base = rat_int(sigma.get(*v)?.clone());
                let mut p = rat_int(1);
                for _ in 0..*pow {
                    p *= &base;
                }
                val *= p;
            }
            if let Some(b) = &t.base {
                let n = sigma.get(Var::N)?;
                if n.is_negative() {
                    return Err(ExprError::NegativeExponent(n.clone()));
                }
                let e: u32 =
                    n.try_into().map_err(|_| ExprError::ExponentTooLarge(n.clone()))?;
                val *= rat_int(b.pow(e));
            }
            sum += val;
        }
        Ok(sum)
    }

    /// Best-effort check that the expression takes integer values on every
    /// integer assignment (counter >= 0). Sampling can only refute; the
    /// positive claim groups terms by (monomial, base) and checks each
    /// group's polynomial in `n` against the binomial-coefficient basis
    /// (all forward differences at 0 integral). False negatives are
    /// possible, false positives are not.
    pub fn is_integer_valued_on_integers(&self) -> bool {
        // cheap refutation by deterministic pseudo-random sampling
        let vars: Vec<Var> = self.free_vars().into_iter().collect();
        let mut seed: u64 = 0x9e3779b97f4a7c15;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _ in 0..24 {
            let mut sigma = Assignment::new();
            for v in &vars {
                let val = if v.is_counter() {
                    BigInt::from(next() % 10)
                } else {
                    BigInt::from((next() % 15) as i64 - 5)
                };
                sigma.set(*v, val);
            }
            match self.evaluate(&sigma) {
                Ok(r) if !is_integer(&r) => return false,
                _ => {}
            }
        }

        // group by (x-part, base) and check the polynomial in n
        type CounterPoly = Vec<(u32, Rat)>;
        let mut groups: BTreeMap<(Option<BigInt>, Monomial), CounterPoly> = BTreeMap::new();
        for t in &self.terms {
            let (xmono, k) = t.mono.split_counter();
            groups.entry((t.base.clone(), xmono)).or_default().push((k, t.coeff.clone()));
        }
        for coeffs in groups.values() {
            let deg = coeffs.iter().map(|(k, _)| *k).max().unwrap_or(0) as usize;
            // values p(0), ..., p(deg)
            let mut row: Vec<Rat> = (0..=deg)
                .map(|nv| {
                    let mut acc = rat_int(0);
                    for (k, c) in coeffs {
                        acc += c * rat_int(BigInt::from(nv).pow(*k));
                    }
                    acc
                })
                .collect();
            while !row.is_empty() {
                if !is_integer(&row[0]) {
                    return false;
                }
                row = row.windows(2).map(|w| &w[1] - &w[0]).collect();
            }
        }
        true
    }

    /// Human rendering with declared names, e.g. `-1/6*n^3 + x1*2^n`.
    pub fn render(&self, names: &VarNames) -> String {
        self.render_with(|v| names.display(v))
    }

    fn render_with(&self, disp: impl Fn(Var) -> String) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coeff.is_negative();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let abs = t.coeff.abs();
            let mut factors: Vec<String> = Vec::new();
            for (v, pow) in t.mono.iter() {
                if *pow == 1 {
                    factors.push(disp(*v));
                } else {
                    factors.push(format!("{}^{}", disp(*v), pow));
                }
            }
            if let Some(b) = &t.base {
                factors.push(format!("{b}^n"));
            }
            if factors.is_empty() {
                out.push_str(&abs.to_string());
            } else {
                if !abs.is_one() {
                    out.push_str(&abs.to_string());
                    out.push('*');
                }
                out.push_str(&factors.join("*"));
            }
        }
        out
    }

    /// SMT-LIB2 rendering of a polynomial with integer coefficients.
    /// Exponentials and rational coefficients are not expressible here.
    pub fn render_smt2(&self, names: &VarNames) -> Result<String, ExprError> {
        if !self.is_polynomial() {
            return Err(ExprError::NonPolynomial(self.render(names)));
        }
        if !self.has_integer_coeffs() {
            return Err(ExprError::NonPolynomial(self.render(names)));
        }
        let smt_name = |v: Var| match v {
            Var::XPrime(_) => format!("|{}|", names.display(v)),
            _ => names.display(v),
        };
        let lit = |i: &BigInt| {
            if i.is_negative() {
                format!("(- {})", i.magnitude())
            } else {
                i.to_string()
            }
        };
        if self.terms.is_empty() {
            return Ok("0".to_string());
        }
        let rendered: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                let c = t.coeff.numer();
                let mut factors: Vec<String> = Vec::new();
                for (v, pow) in t.mono.iter() {
                    for _ in 0..*pow {
                        factors.push(smt_name(*v));
                    }
                }
                if factors.is_empty() {
                    lit(c)
                } else if c.is_one() && factors.len() == 1 {
                    factors.pop().unwrap()
                } else {
                    let mut parts = Vec::new();
                    if !c.is_one() {
                        parts.push(lit(c));
                    }
                    parts.extend(factors);
                    if parts.len() == 1 {
                        parts.pop().unwrap()
                    } else {
                        format!("(* {})", parts.join(" "))
                    }
                }
            })
            .collect();
        Ok(if rendered.len() == 1 {
            rendered.into_iter().next().unwrap()
        } else {
            format!("(+ {})", rendered.join(" "))
        })
    }
}

impl fmt::Display for PolyExp {
    /// Fallback rendering with x1, x2, ... names.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_with(|v| v.to_string()))
    }
}
