//! Guard formulas in conjunctive normal form over strict inequalities.
//!
//! Every comparison desugars into atoms of the single shape `p > 0` with `p`
//! a `PolyExp`: `p >= q` becomes `p - q + 1 > 0` (sound over the integers),
//! `p == q` becomes the two clauses `p - q + 1 > 0` and `q - p + 1 > 0`.
//! Atoms are normalized to primitive integer form: denominators cleared and
//! the coefficient gcd divided out, so `2*x1 - 4 > 0` and `x1/2 - 1 > 0`
//! are the same atom. A clause is a set of atoms read as a disjunction; a
//! formula is a conjunction of clauses that keeps insertion order (the
//! acceleration calculus walks clauses in guard order) but compares as a
//! set.
//!
//! Trivially true atoms delete their clause, trivially false atoms drop out
//! of their clause, and a clause emptied this way collapses to the canonical
//! contradiction `0 > 0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::expr::{ExprError, PolyExp};
use crate::rat::{rat_int, Rat};
use crate::var::{Assignment, Var, VarNames};

/// Comparison operators of the surface syntax.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
        })
    }
}

/// A strict inequality `p > 0` in primitive integer form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Atom {
    expr: PolyExp,
}

impl Atom {
    /// Normalize `e > 0`: clear denominators, divide out the content.
    pub fn new(e: PolyExp) -> Atom {
        Atom { expr: primitive_integer_form(e) }
    }

    pub fn expr(&self) -> &PolyExp {
        &self.expr
    }

    /// `Some(b)` when the atom is variable-free.
    pub fn truth(&self) -> Option<bool> {
        self.expr.as_constant().map(|c| c.is_positive())
    }

    pub fn falsum() -> Atom {
        Atom { expr: PolyExp::zero() }
    }

    pub fn subst(&self, map: &BTreeMap<Var, PolyExp>) -> Result<Atom, ExprError> {
        Ok(Atom::new(self.expr.subst(map)?))
    }

    pub fn evaluate(&self, sigma: &Assignment) -> Result<bool, ExprError> {
        Ok(self.expr.evaluate(sigma)?.is_positive())
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        self.expr.free_vars()
    }

    pub fn render(&self, names: &VarNames) -> String {
        format!("{} > 0", self.expr.render(names))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} > 0", self.expr)
    }
}

/// Multiply by the denominator lcm, then divide by the coefficient gcd.
fn primitive_integer_form(e: PolyExp) -> PolyExp {
    if e.is_zero() {
        return e;
    }
    let mut l = BigInt::one();
    for t in e.terms() {
        l = l.lcm(t.coeff.denom());
    }
    let cleared = e.scale(&rat_int(l));
    let mut g = BigInt::zero();
    for t in cleared.terms() {
        g = g.gcd(t.coeff.numer());
    }
    cleared.scale(&Rat::new(BigInt::one(), g))
}

/// A disjunction of atoms.
pub type Clause = BTreeSet<Atom>;

fn clause_render(c: &Clause, names: Option<&VarNames>) -> String {
    let parts: Vec<String> = c
        .iter()
        .map(|a| match names {
            Some(n) => a.render(n),
            None => a.to_string(),
        })
        .collect();
    if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        format!("({})", parts.join(" || "))
    }
}

/// A conjunction of clauses. Insertion-ordered, duplicate-free, and folded:
/// pushing a clause applies the constant simplifications documented on the
/// module.
#[derive(Clone, Debug, Default)]
pub struct Formula {
    clauses: Vec<Clause>,
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        let a: BTreeSet<&Clause> = self.clauses.iter().collect();
        let b: BTreeSet<&Clause> = other.clauses.iter().collect();
        a == b
    }
}

impl Eq for Formula {}

impl Formula {
    /// The empty conjunction, i.e. true.
    pub fn truth() -> Formula {
        Formula { clauses: Vec::new() }
    }

    /// The canonical contradiction `0 > 0`.
    pub fn falsum() -> Formula {
        let mut f = Formula::truth();
        f.push_raw(std::iter::once(Atom::falsum()).collect());
        f
    }

    pub fn singleton(a: Atom) -> Formula {
        let mut f = Formula::truth();
        f.push_clause(std::iter::once(a).collect());
        f
    }

    /// Desugar a comparison into clauses and conjoin them.
    pub fn push_cmp(&mut self, lhs: &PolyExp, op: CmpOp, rhs: &PolyExp) {
        let one = PolyExp::one();
        match op {
            CmpOp::Gt => self.push_atom(Atom::new(lhs.sub(rhs))),
            CmpOp::Ge => self.push_atom(Atom::new(lhs.sub(rhs).add(&one))),
            CmpOp::Lt => self.push_atom(Atom::new(rhs.sub(lhs))),
            CmpOp::Le => self.push_atom(Atom::new(rhs.sub(lhs).add(&one))),
            CmpOp::Eq => {
                self.push_atom(Atom::new(lhs.sub(rhs).add(&one)));
                self.push_atom(Atom::new(rhs.sub(lhs).add(&one)));
            }
        }
    }

    pub fn from_cmp(lhs: &PolyExp, op: CmpOp, rhs: &PolyExp) -> Formula {
        let mut f = Formula::truth();
        f.push_cmp(lhs, op, rhs);
        f
    }

    pub fn push_atom(&mut self, a: Atom) {
        self.push_clause(std::iter::once(a).collect());
    }

    /// Conjoin one clause, folding constants and dropping duplicates.
    pub fn push_clause(&mut self, clause: Clause) {
        let mut kept = Clause::new();
        for a in clause {
            match a.truth() {
                Some(true) => return,
                Some(false) => continue,
                None => {
                    kept.insert(a);
                }
            }
        }
        if kept.is_empty() {
            kept.insert(Atom::falsum());
        }
        self.push_raw(kept);
    }

    fn push_raw(&mut self, clause: Clause) {
        if !self.clauses.contains(&clause) {
            self.clauses.push(clause);
        }
    }

    /// Conjoin another formula clause by clause.
    pub fn and(&self, other: &Formula) -> Formula {
        let mut out = self.clone();
        for c in &other.clauses {
            out.push_clause(c.clone());
        }
        out
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_true(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Syntactically false: some clause is the canonical contradiction.
    pub fn is_false(&self) -> bool {
        self.clauses.iter().any(|c| c.iter().all(|a| a.truth() == Some(false)))
    }

    /// All atoms across all clauses, in clause order.
    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.clauses.iter().flat_map(|c| c.iter())
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        self.atoms().flat_map(|a| a.free_vars()).collect()
    }

    pub fn subst(&self, map: &BTreeMap<Var, PolyExp>) -> Result<Formula, ExprError> {
        let mut out = Formula::truth();
        for c in &self.clauses {
            let mut clause = Clause::new();
            for a in c {
                clause.insert(a.subst(map)?);
            }
            out.push_clause(clause);
        }
        Ok(out)
    }

    pub fn evaluate(&self, sigma: &Assignment) -> Result<bool, ExprError> {
        for c in &self.clauses {
            let mut any = false;
            for a in c {
                if a.evaluate(sigma)? {
                    any = true;
                    break;
                }
            }
            if !any {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn render(&self, names: &VarNames) -> String {
        if self.clauses.is_empty() {
            return "true".to_string();
        }
        self.clauses.iter().map(|c| clause_render(c, Some(names))).collect::<Vec<_>>().join(" && ")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return f.write_str("true");
        }
        let s = self.clauses.iter().map(|c| clause_render(c, None)).collect::<Vec<_>>().join(" && ");
        f.write_str(&s)
    }
}
