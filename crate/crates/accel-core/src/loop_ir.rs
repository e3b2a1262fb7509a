//! Single-path integer loops: surface syntax, parsing, printing, and the
//! triangular-update classification that decides whether closed forms exist.
//!
//! A loop file has three sections:
//!
//! ```text
//! # comments run to end of line
//! vars x y ;
//! guard x > 0 && y >= x ;
//! update x = x - 1, y = y + x ;
//! ```
//!
//! Variables not mentioned in the update section keep their value.
//! Expressions use `+ - * ^` and parentheses; exponents must be non-negative
//! integer literals. The identifiers `vars`, `guard`, `update`, and `n` are
//! reserved (`n` is the iteration counter in the output formula).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed};
use thiserror::Error;

use crate::expr::{ExprError, PolyExp};
use crate::formula::{CmpOp, Formula};
use crate::rat::is_integer;
use crate::var::{Assignment, Var, VarNames};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: unexpected {found}, expected {expected}")]
    Unexpected { line: usize, found: String, expected: String },
    #[error("line {line}: unknown variable `{name}`")]
    UnknownVariable { line: usize, name: String },
    #[error("line {line}: duplicate variable `{name}`")]
    DuplicateVariable { line: usize, name: String },
    #[error("line {line}: `{name}` is a reserved identifier")]
    ReservedIdent { line: usize, name: String },
    #[error("line {line}: exponent must be a non-negative integer literal")]
    BadExponent { line: usize },
    #[error("line {line}: variable `{name}` is updated twice")]
    DuplicateUpdate { line: usize, name: String },
    #[error("line {line}: stray character `{0}`", .found)]
    StrayChar { line: usize, found: char },
}

/// Errors of well-formed loops that fall outside the supported fragment.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SemanticError {
    #[error("update of `{name}` is not in triangular form: {reason}")]
    NotTriangular { name: String, reason: String },
    #[error("no admissible solve order: {0} depend on each other cyclically")]
    CyclicDependency(String),
    #[error("update of `{name}` produced a non-integer value")]
    NonIntegerStep { name: String },
}

/// A single-path loop `while guard { x := update(x) }` over integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loop {
    pub names: VarNames,
    pub guard: Formula,
    pub update: Vec<PolyExp>,
}

impl Loop {
    pub fn dim(&self) -> usize {
        self.update.len()
    }

    /// The update as a substitution `x_i -> a_i(x)`.
    pub fn update_map(&self) -> BTreeMap<Var, PolyExp> {
        self.update.iter().enumerate().map(|(i, e)| (Var::X(i as u32), e.clone())).collect()
    }

    pub fn guard_holds(&self, state: &[BigInt]) -> Result<bool, ExprError> {
        self.guard.evaluate(&Assignment::from_state(state))
    }

    /// One execution step, ignoring the guard.
    pub fn apply(&self, state: &[BigInt]) -> Result<Vec<BigInt>, SemanticError> {
        let sigma = Assignment::from_state(state);
        let mut next = Vec::with_capacity(self.update.len());
        for (i, e) in self.update.iter().enumerate() {
            let v = e
                .evaluate(&sigma)
                .map_err(|_| SemanticError::NonIntegerStep { name: self.names.name(i).to_string() })?;
            if !is_integer(&v) {
                return Err(SemanticError::NonIntegerStep { name: self.names.name(i).to_string() });
            }
            next.push(v.to_integer());
        }
        Ok(next)
    }
}

/// Shape of one triangular update `x_i' = c * x_i + p` with `c >= 1` and `p`
/// a polynomial over variables solved before `x_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateShape {
    pub coeff: BigInt,
    pub addend: PolyExp,
}

/// A witness that the update is triangular: `order[k]` names the variable
/// solved at position `k`, and `shapes[i]` is the shape of variable `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub order: Vec<usize>,
    pub shapes: Vec<UpdateShape>,
}

/// Decide triangularity and produce a solve order.
///
/// Greedily picks, among the not yet solved variables, the lowest-index one
/// whose update is `c * x_i + p` with constant integer `c >= 1` and `p` only
/// over already-solved variables. Greedy choice is complete here: a variable
/// eligible under some admissible order stays eligible as the solved set
/// grows, so if any order exists the scan never gets stuck.
pub fn classify_update(l: &Loop) -> Result<Classification, SemanticError> {
    let d = l.dim();
    let mut order = Vec::with_capacity(d);
    let mut solved = vec![false; d];
    let mut shapes: Vec<Option<UpdateShape>> = vec![None; d];
    let mut reasons: Vec<Option<String>> = vec![None; d];

    for _ in 0..d {
        let mut picked = None;
        for i in 0..d {
            if solved[i] {
                continue;
            }
            let v = Var::X(i as u32);
            let (c, p) = match l.update[i].linear_in(v) {
                Some(cp) => cp,
                None => {
                    reasons[i] = Some(format!(
                        "`{}` occurs nonlinearly in its own update",
                        l.names.name(i)
                    ));
                    continue;
                }
            };
            if !is_integer(&c) || c.numer() < &BigInt::one() {
                reasons[i] = Some(format!("self-coefficient {c} is not a positive integer"));
                continue;
            }
            let blocker = p.free_vars().into_iter().find(|w| match w {
                Var::X(j) => !solved[*j as usize],
                _ => true,
            });
            if let Some(w) = blocker {
                reasons[i] = Some(format!(
                    "addend mentions `{}`, which is not solved yet",
                    l.names.display(w)
                ));
                continue;
            }
            picked = Some((i, UpdateShape { coeff: c.to_integer(), addend: p }));
            break;
        }
        match picked {
            Some((i, shape)) => {
                solved[i] = true;
                shapes[i] = Some(shape);
                order.push(i);
            }
            None => {
                let stuck: Vec<String> = (0..d)
                    .filter(|i| !solved[*i])
                    .map(|i| l.names.name(i).to_string())
                    .collect();
                if let Some(i) = (0..d).find(|i| !solved[*i]) {
                    if let Some(reason) = reasons[i].take() {
                        if !reason.contains("not solved yet") || stuck.len() == 1 {
                            return Err(SemanticError::NotTriangular {
                                name: l.names.name(i).to_string(),
                                reason,
                            });
                        }
                    }
                }
                return Err(SemanticError::CyclicDependency(stuck.join(", ")));
            }
        }
    }

    Ok(Classification { order, shapes: shapes.into_iter().map(Option::unwrap).collect() })
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(&'static str),
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '#' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        break;
                    }
                }
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Int(s.parse().expect("digits")), line));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Ident(s), line));
            }
            '&' => {
                chars.next();
                if chars.peek() == Some(&'&') {
                    chars.next();
                    toks.push((Tok::Sym("&&"), line));
                } else {
                    return Err(ParseError::StrayChar { line, found: '&' });
                }
            }
            '>' | '<' | '=' => {
                chars.next();
                let two = chars.peek() == Some(&'=');
                let sym = match (c, two) {
                    ('>', true) => ">=",
                    ('>', false) => ">",
                    ('<', true) => "<=",
                    ('<', false) => "<",
                    ('=', true) => "==",
                    _ => "=",
                };
                if two {
                    chars.next();
                }
                toks.push((Tok::Sym(sym), line));
            }
            '+' | '-' | '*' | '^' | '(' | ')' | ';' | ',' => {
                chars.next();
                let sym = match c {
                    '+' => "+",
                    '-' => "-",
                    '*' => "*",
                    '^' => "^",
                    '(' => "(",
                    ')' => ")",
                    ';' => ";",
                    _ => ",",
                };
                toks.push((Tok::Sym(sym), line));
            }
            other => return Err(ParseError::StrayChar { line, found: other }),
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// parser

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    vars: BTreeMap<String, u32>,
}

const RESERVED: [&str; 4] = ["vars", "guard", "update", "n"];

impl<'a> Parser<'a> {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or_else(|| self.toks.last()).map_or(1, |(_, l)| *l)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let found = match self.toks.get(self.pos) {
            Some((t, _)) => t.to_string(),
            None => "end of input".to_string(),
        };
        ParseError::Unexpected { line: self.line(), found, expected: expected.to_string() }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Sym(t)) if *t == s => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{s}`"))),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(t)) if t == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{kw}`"))),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn var(&mut self) -> Result<Var, ParseError> {
        let line = self.line();
        let name = self.ident()?;
        match self.vars.get(&name) {
            Some(i) => Ok(Var::X(*i)),
            None => Err(ParseError::UnknownVariable { line, name }),
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<PolyExp, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Sym("+")) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Sym("-")) => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    // term := unary ('*' unary)*
    fn term(&mut self) -> Result<PolyExp, ParseError> {
        let mut acc = self.unary()?;
        while self.peek() == Some(&Tok::Sym("*")) {
            self.pos += 1;
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<PolyExp, ParseError> {
        if self.peek() == Some(&Tok::Sym("-")) {
            self.pos += 1;
            Ok(self.unary()?.neg())
        } else {
            self.power()
        }
    }

    // power := primary ('^' INT)?
    fn power(&mut self) -> Result<PolyExp, ParseError> {
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Sym("^")) {
            self.pos += 1;
            let line = self.line();
            match self.next() {
                Some(Tok::Int(e)) if !e.is_negative() => {
                    let e: u32 = (&e)
                        .try_into()
                        .map_err(|_| ParseError::BadExponent { line })?;
                    Ok(base.pow(e))
                }
                _ => Err(ParseError::BadExponent { line }),
            }
        } else {
            Ok(base)
        }
    }

    // primary := INT | IDENT | '(' expr ')'
    fn primary(&mut self) -> Result<PolyExp, ParseError> {
        match self.peek() {
            Some(Tok::Int(_)) => {
                if let Some(Tok::Int(i)) = self.next() {
                    Ok(PolyExp::from_bigint(i))
                } else {
                    unreachable!()
                }
            }
            Some(Tok::Ident(_)) => Ok(PolyExp::var(self.var()?)),
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn cmp(&mut self) -> Result<(PolyExp, CmpOp, PolyExp), ParseError> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym("==")) => CmpOp::Eq,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.pos += 1;
        let rhs = self.expr()?;
        Ok((lhs, op, rhs))
    }
}

/// Parse the loop syntax documented on this module.
pub fn parse_loop(src: &str) -> Result<Loop, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks: &toks, pos: 0, vars: BTreeMap::new() };

    p.expect_keyword("vars")?;
    let mut names = Vec::new();
    loop {
        match p.peek() {
            Some(Tok::Ident(_)) => {
                let line = p.line();
                let name = p.ident()?;
                if RESERVED.contains(&name.as_str()) {
                    return Err(ParseError::ReservedIdent { line, name });
                }
                if p.vars.contains_key(&name) {
                    return Err(ParseError::DuplicateVariable { line, name });
                }
                p.vars.insert(name.clone(), names.len() as u32);
                names.push(name);
            }
            Some(Tok::Sym(";")) if !names.is_empty() => {
                p.pos += 1;
                break;
            }
            _ => return Err(p.unexpected("a variable name")),
        }
    }

    p.expect_keyword("guard")?;
    let mut guard = Formula::truth();
    loop {
        let (lhs, op, rhs) = p.cmp()?;
        guard.push_cmp(&lhs, op, &rhs);
        match p.peek() {
            Some(Tok::Sym("&&")) => {
                p.pos += 1;
            }
            Some(Tok::Sym(";")) => {
                p.pos += 1;
                break;
            }
            _ => return Err(p.unexpected("`&&` or `;`")),
        }
    }

    p.expect_keyword("update")?;
    let mut update: Vec<Option<PolyExp>> = vec![None; names.len()];
    loop {
        let line = p.line();
        let target = p.var()?;
        let Var::X(i) = target else { unreachable!() };
        if update[i as usize].is_some() {
            return Err(ParseError::DuplicateUpdate { line, name: names[i as usize].clone() });
        }
        p.expect_sym("=")?;
        update[i as usize] = Some(p.expr()?);
        match p.peek() {
            Some(Tok::Sym(",")) => {
                p.pos += 1;
            }
            Some(Tok::Sym(";")) => {
                p.pos += 1;
                break;
            }
            _ => return Err(p.unexpected("`,` or `;`")),
        }
    }

    if p.pos != toks.len() {
        return Err(p.unexpected("end of input"));
    }

    let update = update
        .into_iter()
        .enumerate()
        .map(|(i, u)| u.unwrap_or_else(|| PolyExp::var(Var::X(i as u32))))
        .collect();
    Ok(Loop { names: VarNames::new(names), guard, update })
}

/// Render a loop back to the surface syntax. The result reparses to a
/// structurally identical loop.
pub fn print_loop(l: &Loop) -> String {
    let mut out = String::new();
    let names: Vec<&str> = (0..l.dim()).map(|i| l.names.name(i)).collect();
    writeln!(out, "vars {} ;", names.join(" ")).unwrap();
    let guard = if l.guard.is_true() {
        "1 > 0".to_string()
    } else {
        l.guard
            .clauses()
            .iter()
            .map(|c| {
                debug_assert_eq!(c.len(), 1, "loop guards are conjunctions of atoms");
                c.iter().next().expect("nonempty clause").render(&l.names)
            })
            .collect::<Vec<_>>()
            .join(" && ")
    };
    writeln!(out, "guard {guard} ;").unwrap();
    let updates: Vec<String> = l
        .update
        .iter()
        .enumerate()
        .map(|(i, e)| format!("{} = {}", l.names.name(i), e.render(&l.names)))
        .collect();
    writeln!(out, "update {} ;", updates.join(", ")).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;

    const DOWN_COUNT: &str = "
# x counts down while y accumulates
vars x y ;
guard x > 0 ;
update x = x - 1, y = y + x ;
";

    #[test]
    fn parses_sections_and_fills_identity() {
        let l = parse_loop("vars a b ; guard a >= b ; update a = a + 1 ;").unwrap();
        assert_eq!(l.dim(), 2);
        assert_eq!(l.guard.to_string(), "x1 - x2 + 1 > 0");
        assert_eq!(l.update[1], PolyExp::var(Var::X(1)));
        assert_eq!(l.names.name(0), "a");
    }

    #[test]
    fn comments_and_multi_clause_guards() {
        let l = parse_loop(DOWN_COUNT).unwrap();
        assert_eq!(l.guard.clauses().len(), 1);
        let l2 = parse_loop("vars x ; guard x > 0 && x < 10 ; update x = x + 1 ;").unwrap();
        assert_eq!(l2.guard.clauses().len(), 2);
        let l3 = parse_loop("vars x ; guard x == 2 ; update x = x ;").unwrap();
        assert_eq!(l3.guard.to_string(), "x1 - 1 > 0 && -x1 + 3 > 0");
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(
            parse_loop("vars n ; guard n > 0 ; update n = n ;"),
            Err(ParseError::ReservedIdent { name, .. }) if name == "n"
        ));
        assert!(matches!(
            parse_loop("vars x x ; guard x > 0 ; update x = x ;"),
            Err(ParseError::DuplicateVariable { .. })
        ));
        assert!(matches!(
            parse_loop("vars x ; guard y > 0 ; update x = x ;"),
            Err(ParseError::UnknownVariable { name, .. }) if name == "y"
        ));
        assert!(matches!(
            parse_loop("vars x ; guard x > 0 ; update x = x, x = x ;"),
            Err(ParseError::DuplicateUpdate { .. })
        ));
        assert!(matches!(
            parse_loop("vars x ; guard x > 0 ; update x = x ^ x ;"),
            Err(ParseError::BadExponent { .. })
        ));
        assert!(matches!(
            parse_loop("vars x ; guard x > 0 ; update x = x ; trailing"),
            Err(ParseError::Unexpected { .. })
        ));
        let err = parse_loop("vars x ; guard x > 0 ; update x = x + $ ;").unwrap_err();
        assert!(matches!(err, ParseError::StrayChar { found: '$', .. }));
    }

    #[test]
    fn expression_grammar() {
        let l = parse_loop("vars x y ; guard x > 0 ; update x = -x^2 + 2*(y - 1), y = y ;")
            .unwrap();
        let expected = PolyExp::var(Var::X(0))
            .pow(2)
            .neg()
            .add(&PolyExp::var(Var::X(1)).scale(&rat_int(2)))
            .sub(&PolyExp::int(2));
        assert_eq!(l.update[0], expected);
    }

    #[test]
    fn print_parse_round_trip() {
        for src in [
            DOWN_COUNT,
            "vars x ; guard 1 > 0 ; update x = x + 1 ;",
            "vars a b c ; guard a^2 - b > 3 && c <= a ; update b = 2*b + a, c = c + b^2 ;",
        ] {
            let l = parse_loop(src).unwrap();
            let printed = print_loop(&l);
            let reparsed = parse_loop(&printed).unwrap();
            assert_eq!(l, reparsed, "print/parse changed {printed}");
        }
    }

    #[test]
    fn apply_steps_the_state() {
        let l = parse_loop(DOWN_COUNT).unwrap();
        let s = l.apply(&[BigInt::from(2), BigInt::from(0)]).unwrap();
        assert_eq!(s, vec![BigInt::from(1), BigInt::from(2)]);
        assert!(l.guard_holds(&[BigInt::from(2), BigInt::from(0)]).unwrap());
        assert!(!l.guard_holds(&[BigInt::from(0), BigInt::from(5)]).unwrap());
    }

    #[test]
    fn classification_accepts_triangular_updates() {
        // solved in declaration order
        let l = parse_loop(DOWN_COUNT).unwrap();
        let c = classify_update(&l).unwrap();
        assert_eq!(c.order, vec![0, 1]);
        assert_eq!(c.shapes[0].coeff, BigInt::from(1));
        assert_eq!(c.shapes[0].addend, PolyExp::int(-1));
        assert_eq!(c.shapes[1].addend, PolyExp::var(Var::X(0)));

        // needs reordering: x depends on y, y on nothing
        let l = parse_loop("vars x y ; guard x > 0 ; update x = x + y^2, y = 3*y + 1 ;").unwrap();
        let c = classify_update(&l).unwrap();
        assert_eq!(c.order, vec![1, 0]);
        assert_eq!(c.shapes[1].coeff, BigInt::from(3));
    }

    #[test]
    fn classification_rejects_the_rest() {
        // self-coefficient 0 (a reset)
        let l = parse_loop("vars x ; guard x > 0 ; update x = 5 ;").unwrap();
        assert!(matches!(
            classify_update(&l),
            Err(SemanticError::NotTriangular { reason, .. }) if reason.contains("positive integer")
        ));
        // negative self-coefficient
        let l = parse_loop("vars x ; guard x > 0 ; update x = -x ;").unwrap();
        assert!(classify_update(&l).is_err());
        // nonlinear self-occurrence
        let l = parse_loop("vars x ; guard x > 0 ; update x = x^2 ;").unwrap();
        assert!(matches!(
            classify_update(&l),
            Err(SemanticError::NotTriangular { reason, .. }) if reason.contains("nonlinearly")
        ));
        // a swap drops the self-coefficient to zero
        let l = parse_loop("vars x y ; guard x > 0 ; update x = y, y = x ;").unwrap();
        assert!(matches!(classify_update(&l), Err(SemanticError::NotTriangular { .. })));
        // mutual additive dependency has no admissible order
        let l = parse_loop("vars x y ; guard x > 0 ; update x = x + y, y = y + x ;").unwrap();
        assert!(matches!(classify_update(&l), Err(SemanticError::CyclicDependency(_))));
    }
}
