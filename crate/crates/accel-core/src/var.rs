//! Variable space and variable assignments.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;

use crate::expr::ExprError;

/// A variable as it may occur inside an expression: a program variable `x_i`
/// (by declaration index), its primed post-state copy `x_i'`, or the
/// iteration counter `n`. The declared names live in [`VarNames`]; keeping
/// indices here makes term ordering independent of spelling.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Var {
    X(u32),
    XPrime(u32),
    N,
}

impl Var {
    pub fn is_primed(&self) -> bool {
        matches!(self, Var::XPrime(_))
    }

    pub fn is_counter(&self) -> bool {
        matches!(self, Var::N)
    }
}

impl fmt::Display for Var {
    /// Fallback spelling used in error messages and `Debug`-style output
    /// when no [`VarNames`] is at hand (1-based, like the usual x1, x2, ...).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::XPrime(i) => write!(f, "x{}'", i + 1),
            Var::N => write!(f, "n"),
        }
    }
}

/// Declared program variable names, in declaration order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VarNames {
    names: Vec<String>,
}

impl VarNames {
    pub fn new(names: Vec<String>) -> Self {
        VarNames { names }
    }

    /// Synthetic x1..xd names, handy for tests and generated loops.
    pub fn numbered(d: usize) -> Self {
        VarNames { names: (1..=d).map(|i| format!("x{i}")).collect() }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|x| x == name).map(|i| i as u32)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|s| s.as_str())
    }

    /// Spelling of a variable under these names. Primed variables get a
    /// trailing apostrophe, the counter is always `n`.
    pub fn display(&self, v: Var) -> String {
        match v {
            Var::X(i) => self.name(i as usize).to_string(),
            Var::XPrime(i) => format!("{}'", self.name(i as usize)),
            Var::N => "n".to_string(),
        }
    }
}

/// A partial map from variables to integers. Evaluation demands that every
/// variable it meets is present; a miss is an error, never a default.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Assignment {
    map: BTreeMap<Var, BigInt>,
}

impl Assignment {
    pub fn new() -> Self {
        Assignment { map: BTreeMap::new() }
    }

    /// Assignment of the program variables from a state vector.
    pub fn from_state(state: &[BigInt]) -> Self {
        let mut a = Assignment::new();
        for (i, v) in state.iter().enumerate() {
            a.set(Var::X(i as u32), v.clone());
        }
        a
    }

    pub fn set(&mut self, v: Var, val: impl Into<BigInt>) -> &mut Self {
        self.map.insert(v, val.into());
        self
    }

    pub fn with(mut self, v: Var, val: impl Into<BigInt>) -> Self {
        self.set(v, val);
        self
    }

    /// Add the counter value.
    pub fn with_n(self, n: impl Into<BigInt>) -> Self {
        self.with(Var::N, n)
    }

    /// Add primed values from a post-state vector.
    pub fn with_primed(mut self, post: &[BigInt]) -> Self {
        for (i, v) in post.iter().enumerate() {
            self.set(Var::XPrime(i as u32), v.clone());
        }
        self
    }

    pub fn get(&self, v: Var) -> Result<&BigInt, ExprError> {
        self.map.get(&v).ok_or_else(|| ExprError::MissingVariable(v.to_string()))
    }

    pub fn contains(&self, v: Var) -> bool {
        self.map.contains_key(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &BigInt)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Render with declared names, e.g. `{x1 = 1, x2 = 0}`.
    pub fn render(&self, names: &VarNames) -> String {
        let parts: Vec<String> =
            self.map.iter().map(|(v, k)| format!("{} = {}", names.display(*v), k)).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

impl FromIterator<(Var, BigInt)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (Var, BigInt)>>(iter: T) -> Self {
        Assignment { map: iter.into_iter().collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fallback_display_is_one_based() {
        assert_eq!(Var::X(0).to_string(), "x1");
        assert_eq!(Var::XPrime(2).to_string(), "x3'");
        assert_eq!(Var::N.to_string(), "n");
    }

    #[test]
    fn missing_variable_is_an_error() {
        let a = Assignment::from_state(&[BigInt::from(4)]);
        assert!(a.get(Var::X(0)).is_ok());
        let err = a.get(Var::N).unwrap_err();
        assert!(matches!(err, ExprError::MissingVariable(ref s) if s == "n"));
    }

    #[test]
    fn names_round_trip() {
        let names = VarNames::new(vec!["a".into(), "b".into()]);
        assert_eq!(names.index("b"), Some(1));
        assert_eq!(names.display(Var::XPrime(1)), "b'");
    }
}
