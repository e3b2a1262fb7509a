//! A deliberately small integer solver speaking enough SMT-LIB2 to answer
//! the acceleration engine's side-condition queries when no full SMT solver
//! is installed.
//!
//! It is sound but far from complete:
//!
//! * `unsat` is backed by a rational Fourier–Motzkin refutation of every
//!   disjunctive branch (nonlinear literals are dropped from a branch, which
//!   only weakens it, so a refutation still stands; strict integer
//!   comparisons are tightened to `>=` with a slack of one first).
//! * `sat` is backed by an explicit model found by enumerating assignments
//!   of bounded max-norm, verified by evaluating the original assertions.
//! * Everything else is `unknown`.
//!
//! Supported commands: `set-option`, `set-logic`, `declare-const`,
//! `declare-fun` (zero-ary, Int), `push`, `pop`, `assert`, `check-sat`,
//! `get-model`, `exit`. Terms may use `and or not > >= < <= = + - *`,
//! integer numerals, and declared constants.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::Signed;
use thiserror::Error;

use accel_core::{Assignment, PolyExp, Var};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum InputError {
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("empty command")]
    Empty,
    #[error("unknown command {0}")]
    UnknownCommand(String),
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("only sort Int is supported, got {0}")]
    UnsupportedSort(String),
    #[error("malformed term: {0}")]
    MalformedTerm(String),
    #[error("cannot pop below the root scope")]
    PopUnderflow,
    #[error("model is not available")]
    NoModel,
}

// ---------------------------------------------------------------------------
// s-expressions

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s) => Some(s),
            Sexp::List(_) => None,
        }
    }
}

/// Parse one complete s-expression from the whole input.
pub fn parse_sexp(src: &str) -> Result<Sexp, InputError> {
    let mut toks = tokenize(src);
    let e = parse_tokens(&mut toks)?;
    if toks.is_empty() {
        Ok(e)
    } else {
        Err(InputError::Unbalanced)
    }
}

fn tokenize(src: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let mut comment = false;
    for c in src.chars() {
        if comment {
            if c == '\n' {
                comment = false;
            }
            continue;
        }
        match c {
            ';' => {
                comment = true;
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                toks.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks.reverse();
    toks
}

fn parse_tokens(toks: &mut Vec<String>) -> Result<Sexp, InputError> {
    match toks.pop() {
        None => Err(InputError::Empty),
        Some(t) if t == "(" => {
            let mut items = Vec::new();
            loop {
                match toks.last().map(|s| s.as_str()) {
                    Some(")") => {
                        toks.pop();
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(parse_tokens(toks)?),
                    None => return Err(InputError::Unbalanced),
                }
            }
        }
        Some(t) if t == ")" => Err(InputError::Unbalanced),
        Some(t) => Ok(Sexp::Atom(t)),
    }
}

/// Drain every complete top-level s-expression from an input buffer,
/// leaving a trailing incomplete prefix (if any) in place.
pub fn split_commands(buf: &mut String) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = None;
    let mut comment = false;
    let mut consumed = 0;
    for (i, c) in buf.char_indices() {
        if comment {
            if c == '\n' {
                comment = false;
            }
            continue;
        }
        match c {
            ';' => comment = true,
            '(' => {
                if depth == 0 {
                    start = Some(i);
                }
                depth += 1;
            }
            ')' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    if let Some(s) = start.take() {
                        out.push(buf[s..=i].to_string());
                        consumed = i + c.len_utf8();
                    }
                }
            }
            _ => {}
        }
    }
    buf.drain(..consumed);
    out
}

// ---------------------------------------------------------------------------
// formulas

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CmpKind {
    Gt,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
enum Fm {
    Truth(bool),
    Cmp(PolyExp, CmpKind, PolyExp),
    Not(Box<Fm>),
    And(Vec<Fm>),
    Or(Vec<Fm>),
}

impl Fm {
    fn eval(&self, sigma: &Assignment) -> bool {
        match self {
            Fm::Truth(b) => *b,
            Fm::Cmp(a, k, b) => {
                let (a, b) = (a.evaluate(sigma), b.evaluate(sigma));
                let (a, b) = match (a, b) {
                    (Ok(a), Ok(b)) => (a, b),
                    // all variables are bound and terms are polynomial, so
                    // evaluation cannot fail; treat a miss as unsatisfied
                    _ => return false,
                };
                match k {
                    CmpKind::Gt => a > b,
                    CmpKind::Ge => a >= b,
                    CmpKind::Eq => a == b,
                }
            }
            Fm::Not(f) => !f.eval(sigma),
            Fm::And(fs) => fs.iter().all(|f| f.eval(sigma)),
            Fm::Or(fs) => fs.iter().any(|f| f.eval(sigma)),
        }
    }
}

/// Negation normal form; afterwards `Not` no longer occurs.
fn nnf(f: &Fm, neg: bool) -> Fm {
    match f {
        Fm::Truth(b) => Fm::Truth(*b != neg),
        Fm::Not(g) => nnf(g, !neg),
        Fm::And(fs) => {
            let inner: Vec<Fm> = fs.iter().map(|g| nnf(g, neg)).collect();
            if neg {
                Fm::Or(inner)
            } else {
                Fm::And(inner)
            }
        }
        Fm::Or(fs) => {
            let inner: Vec<Fm> = fs.iter().map(|g| nnf(g, neg)).collect();
            if neg {
                Fm::And(inner)
            } else {
                Fm::Or(inner)
            }
        }
        Fm::Cmp(a, k, b) => {
            if !neg {
                return f.clone();
            }
            match k {
                // not (a > b)  <=>  b >= a
                CmpKind::Gt => Fm::Cmp(b.clone(), CmpKind::Ge, a.clone()),
                CmpKind::Ge => Fm::Cmp(b.clone(), CmpKind::Gt, a.clone()),
                CmpKind::Eq => Fm::Or(vec![
                    Fm::Cmp(a.clone(), CmpKind::Gt, b.clone()),
                    Fm::Cmp(b.clone(), CmpKind::Gt, a.clone()),
                ]),
            }
        }
    }
}

const DNF_CAP: usize = 128;

/// Branches of the disjunctive normal form. Each literal is a polynomial
/// `e` read as `e >= 0`; strict integer comparisons already tightened.
fn dnf(f: &Fm) -> Option<Vec<Vec<PolyExp>>> {
    match f {
        Fm::Truth(true) => Some(vec![Vec::new()]),
        Fm::Truth(false) => Some(Vec::new()),
        Fm::Cmp(a, k, b) => {
            let d = a.sub(b);
            let lits = match k {
                CmpKind::Gt => vec![d.sub(&PolyExp::one())],
                CmpKind::Ge => vec![d],
                CmpKind::Eq => vec![d.clone(), d.neg()],
            };
            Some(vec![lits])
        }
        Fm::Or(fs) => {
            let mut out = Vec::new();
            for g in fs {
                out.extend(dnf(g)?);
                if out.len() > DNF_CAP {
                    return None;
                }
            }
            Some(out)
        }
        Fm::And(fs) => {
            let mut acc: Vec<Vec<PolyExp>> = vec![Vec::new()];
            for g in fs {
                let branches = dnf(g)?;
                let mut next = Vec::new();
                for a in &acc {
                    for b in &branches {
                        let mut merged = a.clone();
                        merged.extend(b.iter().cloned());
                        next.push(merged);
                        if next.len() > DNF_CAP {
                            return None;
                        }
                    }
                }
                acc = next;
            }
            Some(acc)
        }
        Fm::Not(_) => unreachable!("runs on negation normal form"),
    }
}

const FM_CAP: usize = 2000;

/// Try to refute `/\ e_i >= 0` over the rationals by Fourier–Motzkin.
/// `true` means definitely unsatisfiable; `false` means no refutation found
/// (which decides nothing). Nonlinear literals are ignored.
fn fm_refutes(lits: &[PolyExp]) -> bool {
    let mut cons: Vec<PolyExp> = lits.iter().filter(|e| e.is_linear()).cloned().collect();
    loop {
        for e in &cons {
            if let Some(c) = e.as_constant() {
                if c.is_negative() {
                    return true;
                }
            }
        }
        let var = cons
            .iter()
            .flat_map(|e| e.free_vars())
            .next();
        let Some(v) = var else {
            return false;
        };
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut rest = Vec::new();
        for e in cons {
            match e.linear_in(v) {
                Some((c, r)) if c.is_positive() => lower.push((c, r)),
                Some((c, r)) if c.is_negative() => upper.push((c, r)),
                _ => rest.push(e),
            }
        }
        if lower.len() * upper.len() + rest.len() > FM_CAP {
            return false;
        }
        // c1 v + r1 >= 0 (c1 > 0) and c2 v + r2 >= 0 (c2 < 0) combine to
        // (-c2) r1 + c1 r2 >= 0
        for (c1, r1) in &lower {
            for (c2, r2) in &upper {
                let combined = r1.scale(&-c2.clone()).add(&r2.scale(c1));
                rest.push(combined);
            }
        }
        cons = rest;
    }
}

// ---------------------------------------------------------------------------
// solver

struct Scope {
    decls: Vec<(String, Var)>,
    asserts: Vec<Fm>,
}

/// Reply of one executed command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reply {
    None,
    Text(String),
    Exit,
}

pub struct Solver {
    scopes: Vec<Scope>,
    next_var: u32,
    model: Option<Vec<(String, BigInt)>>,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

/// Total number of candidate points the model search may visit.
const SEARCH_BUDGET: u64 = 200_000;

impl Solver {
    pub fn new() -> Self {
        Solver {
            scopes: vec![Scope { decls: Vec::new(), asserts: Vec::new() }],
            next_var: 0,
            model: None,
        }
    }

    fn lookup(&self, name: &str) -> Option<Var> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.decls.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    fn decls(&self) -> Vec<(String, Var)> {
        self.scopes.iter().flat_map(|s| s.decls.iter().cloned()).collect()
    }

    fn term(&self, s: &Sexp) -> Result<PolyExp, InputError> {
        match s {
            Sexp::Atom(a) => {
                if let Ok(i) = a.parse::<BigInt>() {
                    return Ok(PolyExp::from_bigint(i));
                }
                match self.lookup(a) {
                    Some(v) => Ok(PolyExp::var(v)),
                    None => Err(InputError::UnknownSymbol(a.clone())),
                }
            }
            Sexp::List(items) => {
                let (op, args) = items
                    .split_first()
                    .ok_or_else(|| InputError::MalformedTerm("()".to_string()))?;
                let op = op
                    .atom()
                    .ok_or_else(|| InputError::MalformedTerm("non-atom operator".to_string()))?;
                let args: Vec<PolyExp> =
                    args.iter().map(|a| self.term(a)).collect::<Result<_, _>>()?;
                match (op, args.len()) {
                    ("+", _) => {
                        Ok(args.iter().fold(PolyExp::zero(), |acc, a| acc.add(a)))
                    }
                    ("-", 1) => Ok(args[0].neg()),
                    ("-", n) if n >= 2 => {
                        Ok(args[1..].iter().fold(args[0].clone(), |acc, a| acc.sub(a)))
                    }
                    ("*", _) => Ok(args.iter().fold(PolyExp::one(), |acc, a| acc.mul(a))),
                    _ => Err(InputError::MalformedTerm(format!("operator {op}"))),
                }
            }
        }
    }

    fn formula(&self, s: &Sexp) -> Result<Fm, InputError> {
        match s {
            Sexp::Atom(a) if a == "true" => Ok(Fm::Truth(true)),
            Sexp::Atom(a) if a == "false" => Ok(Fm::Truth(false)),
            Sexp::List(items) => {
                let (op, args) = items
                    .split_first()
                    .ok_or_else(|| InputError::MalformedTerm("()".to_string()))?;
                match op.atom() {
                    Some("and") => Ok(Fm::And(
                        args.iter().map(|a| self.formula(a)).collect::<Result<_, _>>()?,
                    )),
                    Some("or") => Ok(Fm::Or(
                        args.iter().map(|a| self.formula(a)).collect::<Result<_, _>>()?,
                    )),
                    Some("not") if args.len() == 1 => {
                        Ok(Fm::Not(Box::new(self.formula(&args[0])?)))
                    }
                    Some(cmp @ (">" | ">=" | "<" | "<=" | "=")) if args.len() == 2 => {
                        let a = self.term(&args[0])?;
                        let b = self.term(&args[1])?;
                        Ok(match cmp {
                            ">" => Fm::Cmp(a, CmpKind::Gt, b),
                            ">=" => Fm::Cmp(a, CmpKind::Ge, b),
                            "<" => Fm::Cmp(b, CmpKind::Gt, a),
                            "<=" => Fm::Cmp(b, CmpKind::Ge, a),
                            _ => Fm::Cmp(a, CmpKind::Eq, b),
                        })
                    }
                    _ => Err(InputError::MalformedTerm(format!("{s:?}"))),
                }
            }
            Sexp::Atom(a) => Err(InputError::MalformedTerm(a.clone())),
        }
    }

    fn declare(&mut self, name: &str) {
        let v = Var::X(self.next_var);
        self.next_var += 1;
        self.scopes.last_mut().expect("root scope").decls.push((name.to_string(), v));
    }

    fn check_sat(&mut self) -> String {
        self.model = None;
        let asserts: Vec<Fm> =
            self.scopes.iter().flat_map(|s| s.asserts.iter().cloned()).collect();
        let conj = Fm::And(asserts);
        if let Some(branches) = dnf(&nnf(&conj, false)) {
            if branches.iter().all(|b| fm_refutes(b)) {
                return "unsat".to_string();
            }
        }
        match self.search_model(&conj) {
            Some(model) => {
                self.model = Some(model);
                "sat".to_string()
            }
            None => "unknown".to_string(),
        }
    }

    fn search_model(&self, conj: &Fm) -> Option<Vec<(String, BigInt)>> {
        let decls = self.decls();
        let v = decls.len() as u32;
        if v == 0 {
            return if conj.eval(&Assignment::new()) { Some(Vec::new()) } else { None };
        }
        // largest radius whose closed cube fits the budget
        let mut rmax = 0i64;
        while rmax < 1000
            && (2 * (rmax + 1) + 1).checked_pow(v).is_some_and(|p| p as u64 <= SEARCH_BUDGET)
        {
            rmax += 1;
        }
        for r in 0..=rmax {
            let width = (2 * r + 1) as u64;
            let total = width.pow(v);
            'point: for mut idx in 0..total {
                let mut vals = Vec::with_capacity(decls.len());
                let mut on_shell = r == 0;
                for _ in 0..v {
                    let coord = -r + (idx % width) as i64;
                    idx /= width;
                    if coord.abs() == r {
                        on_shell = true;
                    }
                    vals.push(coord);
                }
                if !on_shell {
                    // interior points were already tried at a smaller radius
                    continue 'point;
                }
                let mut sigma = Assignment::new();
                for ((_, var), val) in decls.iter().zip(&vals) {
                    sigma.set(*var, *val);
                }
                if conj.eval(&sigma) {
                    return Some(
                        decls
                            .iter()
                            .zip(&vals)
                            .map(|((name, _), val)| (name.clone(), BigInt::from(*val)))
                            .collect(),
                    );
                }
            }
        }
        None
    }

    fn render_model(&self) -> Result<String, InputError> {
        let model = self.model.as_ref().ok_or(InputError::NoModel)?;
        let mut out = String::from("(\n");
        for (name, val) in model {
            let lit = if val.is_negative() {
                format!("(- {})", val.magnitude())
            } else {
                val.to_string()
            };
            writeln!(out, "  (define-fun {name} () Int {lit})").unwrap();
        }
        out.push(')');
        Ok(out)
    }

    /// Execute one command, returning what to print.
    pub fn execute(&mut self, cmd: &Sexp) -> Result<Reply, InputError> {
        let Sexp::List(items) = cmd else {
            return Err(InputError::UnknownCommand(format!("{cmd:?}")));
        };
        let head = items
            .first()
            .and_then(|s| s.atom())
            .ok_or(InputError::Empty)?;
        match head {
            "set-option" | "set-logic" | "set-info" => Ok(Reply::None),
            "declare-const" | "declare-fun" => {
                let name = items
                    .get(1)
                    .and_then(|s| s.atom())
                    .ok_or_else(|| InputError::MalformedTerm("missing name".to_string()))?;
                let sort = items.last().and_then(|s| s.atom()).unwrap_or("");
                if sort != "Int" {
                    return Err(InputError::UnsupportedSort(sort.to_string()));
                }
                if head == "declare-fun" {
                    match items.get(2) {
                        Some(Sexp::List(args)) if args.is_empty() => {}
                        _ => {
                            return Err(InputError::MalformedTerm(
                                "only zero-ary functions".to_string(),
                            ))
                        }
                    }
                }
                self.declare(name);
                Ok(Reply::None)
            }
            "push" | "pop" => {
                let k: usize = items
                    .get(1)
                    .and_then(|s| s.atom())
                    .map_or(Ok(1), |a| a.parse())
                    .map_err(|_| InputError::MalformedTerm("push/pop count".to_string()))?;
                for _ in 0..k {
                    if head == "push" {
                        self.scopes.push(Scope { decls: Vec::new(), asserts: Vec::new() });
                    } else {
                        if self.scopes.len() == 1 {
                            return Err(InputError::PopUnderflow);
                        }
                        self.scopes.pop();
                    }
                }
                Ok(Reply::None)
            }
            "assert" => {
                let body = items
                    .get(1)
                    .ok_or_else(|| InputError::MalformedTerm("assert needs a body".to_string()))?;
                let f = self.formula(body)?;
                self.scopes.last_mut().expect("root scope").asserts.push(f);
                Ok(Reply::None)
            }
            "check-sat" => Ok(Reply::Text(self.check_sat())),
            "get-model" => Ok(Reply::Text(self.render_model()?)),
            "exit" => Ok(Reply::Exit),
            other => Err(InputError::UnknownCommand(other.to_string())),
        }
    }
}
