//! Client for an external SMT solver process.
//!
//! The acceleration calculus needs one kind of question answered: is
//! `premise -> conclusion` valid over the integers? The client turns that
//! into an unsatisfiability query (`premise` and the negated `conclusion`),
//! ships it to a solver speaking SMT-LIB2 over stdin/stdout, and maps the
//! answer to a [`Verdict`]:
//!
//! * `unsat` becomes [`Verdict::Valid`];
//! * `sat` becomes [`Verdict::NotValid`] carrying the solver's model, but
//!   only after the model has been re-verified by exact evaluation here —
//!   a model that does not check out degrades to `Unknown`;
//! * everything else (including timeouts) is [`Verdict::Unknown`], which
//!   callers must treat as "technique not applicable", never as valid.
//!
//! One solver process serves a whole run; every query is wrapped in
//! `(push 1)`/`(pop 1)`. Timeouts are enforced by wall clock on this side
//! (a reader thread feeds a channel), the stuck process is killed and a
//! fresh one is spawned on the next query.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use accel_core::{Assignment, Formula, Var, VarNames};

pub mod testutil;

#[derive(Error, Debug)]
pub enum SmtError {
    #[error("failed to spawn solver `{command}`: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("solver protocol error: {0}")]
    Protocol(String),
    #[error("query not expressible: {0}")]
    Invalid(String),
    #[error("no SMT solver found; pass --solver, set ACCEL_SMT_CMD, or install z3")]
    NoSolver,
}

/// Answer to a validity query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// A verified counterexample: the premise holds, the conclusion fails.
    NotValid(Assignment),
    /// No usable answer; the string says why (unknown, timeout, bad model).
    Unknown(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    /// Program and arguments, e.g. `["z3", "-in"]`.
    pub command: Vec<String>,
    pub timeout: Duration,
}

impl SolverConfig {
    pub fn new(command: Vec<String>) -> Self {
        SolverConfig { command, timeout: Duration::from_millis(1000) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

/// Stanza sent right after spawning.
pub fn render_preamble() -> &'static str {
    "(set-option :print-success false)\n(set-option :produce-models true)\n(set-logic QF_NIA)\n"
}

fn atom_smt2(a: &accel_core::Atom, names: &VarNames) -> Result<String, SmtError> {
    let e = a
        .expr()
        .render_smt2(names)
        .map_err(|err| SmtError::Invalid(err.to_string()))?;
    Ok(format!("(> {e} 0)"))
}

fn formula_smt2(f: &Formula, names: &VarNames) -> Result<String, SmtError> {
    if f.clauses().is_empty() {
        return Ok("true".to_string());
    }
    let clauses: Vec<String> = f
        .clauses()
        .iter()
        .map(|c| {
            let atoms: Vec<String> =
                c.iter().map(|a| atom_smt2(a, names)).collect::<Result<_, _>>()?;
            Ok(if atoms.len() == 1 {
                atoms.into_iter().next().unwrap()
            } else {
                format!("(or {})", atoms.join(" "))
            })
        })
        .collect::<Result<_, SmtError>>()?;
    Ok(if clauses.len() == 1 {
        clauses.into_iter().next().unwrap()
    } else {
        format!("(and {})", clauses.join(" "))
    })
}

/// Render one validity query. The output is deterministic byte for byte:
/// push, declarations (the program variables in order, then `n` if it
/// occurs), the premise, the negated conclusion, check-sat.
pub fn render_query(
    premise: &Formula,
    conclusion: &Formula,
    names: &VarNames,
) -> Result<String, SmtError> {
    let mut vars = premise.free_vars();
    vars.extend(conclusion.free_vars());
    if let Some(v) = vars.iter().find(|v| v.is_primed()) {
        return Err(SmtError::Invalid(format!(
            "primed variable {} in a side-condition query",
            names.display(*v)
        )));
    }
    let mut out = String::from("(push 1)\n");
    for i in 0..names.len() {
        out.push_str(&format!("(declare-const {} Int)\n", names.name(i)));
    }
    if vars.contains(&Var::N) {
        out.push_str("(declare-const n Int)\n");
    }
    out.push_str(&format!("(assert {})\n", formula_smt2(premise, names)?));
    out.push_str(&format!("(assert (not {}))\n", formula_smt2(conclusion, names)?));
    out.push_str("(check-sat)\n");
    Ok(out)
}

/// Exact re-check of a candidate counterexample.
pub fn verify_counterexample(premise: &Formula, conclusion: &Formula, sigma: &Assignment) -> bool {
    matches!(premise.evaluate(sigma), Ok(true)) && matches!(conclusion.evaluate(sigma), Ok(false))
}

/// Pick the solver command: explicit choice, then the `ACCEL_SMT_CMD`
/// environment variable, then `z3` from the path, then the bundled
/// fallback solver next to the running executable.
pub fn resolve_solver_command(explicit: Option<&str>) -> Result<Vec<String>, SmtError> {
    let split = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    if let Some(s) = explicit {
        let parts = split(s);
        if !parts.is_empty() {
            return Ok(parts);
        }
    }
    if let Ok(s) = std::env::var("ACCEL_SMT_CMD") {
        let parts = split(&s);
        if !parts.is_empty() {
            return Ok(parts);
        }
    }
    if let Some(path) = std::env::var_os("PATH") {
        for dir in std::env::split_paths(&path) {
            if dir.join("z3").is_file() {
                return Ok(vec!["z3".to_string(), "-in".to_string()]);
            }
        }
    }
    if let Ok(exe) = std::env::current_exe() {
        let candidates = [exe.parent(), exe.parent().and_then(|d| d.parent())];
        for dir in candidates.into_iter().flatten() {
            let name = if cfg!(windows) { "accel-minismt.exe" } else { "accel-minismt" };
            let p = dir.join(name);
            if p.is_file() {
                return Ok(vec![p.to_string_lossy().into_owned()]);
            }
        }
    }
    Err(SmtError::NoSolver)
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<String>,
}

impl Session {
    fn spawn(config: &SolverConfig) -> Result<Session, SmtError> {
        let (prog, args) = config.command.split_first().ok_or(SmtError::NoSolver)?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SmtError::Spawn { command: config.command.join(" "), source })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            let mut line = String::new();
            loop {
                line.clear();
                match reader.read_line(&mut line) {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {
                        if tx.send(line.clone()).is_err() {
                            break;
                        }
                    }
                }
            }
        });
        stdin
            .write_all(render_preamble().as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| SmtError::Protocol(format!("cannot write preamble: {e}")))?;
        Ok(Session { child, stdin, lines })
    }

    fn send(&mut self, text: &str) -> Result<(), SmtError> {
        self.stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SmtError::Protocol(format!("cannot write to solver: {e}")))
    }

    fn recv_line(&self, deadline: Instant) -> Result<Option<String>, SmtError> {
        let now = Instant::now();
        if now >= deadline {
            return Ok(None);
        }
        match self.lines.recv_timeout(deadline - now) {
            Ok(l) => Ok(Some(l.trim_end().to_string())),
            Err(mpsc::RecvTimeoutError::Timeout) => Ok(None),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(SmtError::Protocol("solver closed its output".to_string()))
            }
        }
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Handle to one (lazily spawned) solver process.
pub struct SmtClient {
    config: SolverConfig,
    session: Option<Session>,
    queries: u64,
}

impl SmtClient {
    pub fn new(config: SolverConfig) -> Self {
        SmtClient { config, session: None, queries: 0 }
    }

    pub fn queries_sent(&self) -> u64 {
        self.queries
    }

    /// Ask whether `premise -> conclusion` is valid over the integers.
    pub fn check_validity(
        &mut self,
        premise: &Formula,
        conclusion: &Formula,
        names: &VarNames,
    ) -> Result<Verdict, SmtError> {
        let query = render_query(premise, conclusion, names)?;
        self.queries += 1;
        if self.session.is_none() {
            self.session = Some(Session::spawn(&self.config)?);
        }
        let result = self.run_query(&query, premise, conclusion, names);
        match &result {
            // a dead or stuck process is discarded; the next query respawns
            Err(_) => self.drop_session(),
            Ok(Verdict::Unknown(reason)) if reason.contains("timed out") => self.drop_session(),
            _ => {}
        }
        result
    }

    fn drop_session(&mut self) {
        if let Some(mut s) = self.session.take() {
            s.kill();
        }
    }

    fn run_query(
        &mut self,
        query: &str,
        premise: &Formula,
        conclusion: &Formula,
        names: &VarNames,
    ) -> Result<Verdict, SmtError> {
        let timeout = self.config.timeout;
        let session = self.session.as_mut().expect("session spawned");
        session.send(query)?;
        let deadline = Instant::now() + timeout;
        let answer = loop {
            match session.recv_line(deadline)? {
                None => return Ok(Verdict::Unknown(format!("solver timed out after {timeout:?}"))),
                Some(l) if l.is_empty() => continue,
                Some(l) => break l,
            }
        };
        match answer.as_str() {
            "unsat" => {
                session.send("(pop 1)\n")?;
                Ok(Verdict::Valid)
            }
            "unknown" => {
                session.send("(pop 1)\n")?;
                Ok(Verdict::Unknown("solver answered unknown".to_string()))
            }
            "sat" => {
                session.send("(get-model)\n")?;
                let model_text = Self::read_balanced(session, deadline)?;
                session.send("(pop 1)\n")?;
                let sigma = match parse_model(&model_text, names) {
                    Some(s) => s,
                    None => {
                        return Err(SmtError::Protocol(format!(
                            "unreadable model: {model_text}"
                        )))
                    }
                };
                if verify_counterexample(premise, conclusion, &sigma) {
                    Ok(Verdict::NotValid(sigma))
                } else {
                    Ok(Verdict::Unknown("solver model failed re-verification".to_string()))
                }
            }
            other => Err(SmtError::Protocol(format!("unexpected solver answer: {other}"))),
        }
    }

    fn read_balanced(session: &mut Session, deadline: Instant) -> Result<String, SmtError> {
        let mut text = String::new();
        loop {
            match session.recv_line(deadline)? {
                None => {
                    return Err(SmtError::Protocol("timed out while reading a model".to_string()))
                }
                Some(l) => {
                    text.push_str(&l);
                    text.push('\n');
                    let mut depth = 0i64;
                    let mut seen = false;
                    for c in text.chars() {
                        match c {
                            '(' => {
                                depth += 1;
                                seen = true;
                            }
                            ')' => depth -= 1,
                            _ => {}
                        }
                    }
                    if seen && depth <= 0 {
                        return Ok(text);
                    }
                }
            }
        }
    }
}

impl Drop for SmtClient {
    fn drop(&mut self) {
        if let Some(mut s) = self.session.take() {
            let _ = s.send("(exit)\n");
            s.kill();
        }
    }
}

// ---------------------------------------------------------------------------
// model parsing

#[derive(Debug, PartialEq)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn sx_tokens(src: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    for c in src.chars() {
        match c {
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

fn sx_parse(toks: &mut Vec<String>) -> Option<Sx> {
    match toks.pop()? {
        t if t == "(" => {
            let mut items = Vec::new();
            loop {
                match toks.last().map(|s| s.as_str()) {
                    Some(")") => {
                        toks.pop();
                        return Some(Sx::List(items));
                    }
                    Some(_) => items.push(sx_parse(toks)?),
                    None => return None,
                }
            }
        }
        t if t == ")" => None,
        t => Some(Sx::Atom(t)),
    }
}

fn sx_int(s: &Sx) -> Option<BigInt> {
    match s {
        Sx::Atom(a) => a.parse().ok(),
        Sx::List(items) => match items.as_slice() {
            [Sx::Atom(minus), inner] if minus == "-" => Some(-sx_int(inner)?),
            _ => None,
        },
    }
}

/// Extract variable values from a `get-model` response. Declared variables
/// the model does not mention default to zero. Returns `None` when the text
/// is not a model at all.
fn parse_model(text: &str, names: &VarNames) -> Option<Assignment> {
    let mut toks = sx_tokens(text);
    let top = sx_parse(&mut toks)?;
    let items = match top {
        Sx::List(items) => items,
        Sx::Atom(_) => return None,
    };
    // older solvers wrap the list in a `model` keyword
    let items = match items.first() {
        Some(Sx::Atom(a)) if a == "model" => &items[1..],
        _ => &items[..],
    };
    let mut found: BTreeMap<String, BigInt> = BTreeMap::new();
    for item in items {
        let Sx::List(parts) = item else { continue };
        match parts.as_slice() {
            [Sx::Atom(df), Sx::Atom(name), Sx::List(args), Sx::Atom(sort), value]
                if df == "define-fun" && args.is_empty() && sort == "Int" =>
            {
                let stripped = name.trim_matches('|');
                found.insert(stripped.to_string(), sx_int(value)?);
            }
            _ => continue,
        }
    }
    let mut sigma = Assignment::new();
    for i in 0..names.len() {
        let v = found.get(names.name(i)).cloned().unwrap_or_else(BigInt::zero);
        sigma.set(Var::X(i as u32), v);
    }
    sigma.set(Var::N, found.get("n").cloned().unwrap_or_else(BigInt::zero));
    Some(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use accel_core::{Atom, CmpOp, PolyExp};

    fn x(i: u32) -> PolyExp {
        PolyExp::var(Var::X(i))
    }

    #[test]
    fn query_rendering_is_byte_stable() {
        let names = VarNames::numbered(2);
        let mut premise = Formula::truth();
        premise.push_atom(Atom::new(x(0)));
        premise.push_atom(Atom::new(x(1)));
        let conclusion = Formula::singleton(Atom::new(x(1).add(&PolyExp::one())));
        let q = render_query(&premise, &conclusion, &names).unwrap();
        assert_eq!(
            q,
            "(push 1)\n\
             (declare-const x1 Int)\n\
             (declare-const x2 Int)\n\
             (assert (and (> x1 0) (> x2 0)))\n\
             (assert (not (> (+ x2 1) 0)))\n\
             (check-sat)\n"
        );
    }

    #[test]
    fn singleton_collapse_and_counter_declaration() {
        let names = VarNames::numbered(1);
        let n = PolyExp::var(Var::N);
        let premise = Formula::singleton(Atom::new(x(0).sub(&n)));
        let conclusion = Formula::from_cmp(&x(0), CmpOp::Eq, &PolyExp::zero());
        let q = render_query(&premise, &conclusion, &names).unwrap();
        assert_eq!(
            q,
            "(push 1)\n\
             (declare-const x1 Int)\n\
             (declare-const n Int)\n\
             (assert (> (+ x1 (* (- 1) n)) 0))\n\
             (assert (not (and (> (+ x1 1) 0) (> (+ (* (- 1) x1) 1) 0))))\n\
             (check-sat)\n"
        );
    }

    #[test]
    fn primed_variables_are_rejected() {
        let names = VarNames::numbered(1);
        let f = Formula::singleton(Atom::new(PolyExp::var(Var::XPrime(0))));
        assert!(matches!(
            render_query(&f, &Formula::truth(), &names),
            Err(SmtError::Invalid(_))
        ));
    }

    #[test]
    fn model_parsing_fills_missing_variables_with_zero() {
        let names = VarNames::numbered(3);
        let text = "(\n  (define-fun x1 () Int 3)\n  (define-fun x3 () Int (- 2))\n)";
        let sigma = parse_model(text, &names).unwrap();
        assert_eq!(sigma.get(Var::X(0)).unwrap(), &BigInt::from(3));
        assert_eq!(sigma.get(Var::X(1)).unwrap(), &BigInt::from(0));
        assert_eq!(sigma.get(Var::X(2)).unwrap(), &BigInt::from(-2));
        assert_eq!(sigma.get(Var::N).unwrap(), &BigInt::from(0));

        let wrapped = "(model (define-fun x1 () Int 7))";
        let sigma = parse_model(wrapped, &names).unwrap();
        assert_eq!(sigma.get(Var::X(0)).unwrap(), &BigInt::from(7));

        assert!(parse_model("sat", &names).is_none());
    }

    #[test]
    fn counterexample_verification_is_exact() {
        let premise = Formula::singleton(Atom::new(x(0)));
        let conclusion = Formula::singleton(Atom::new(x(0).sub(&PolyExp::int(5))));
        // x1 = 3: premise 3 > 0 holds, conclusion 3 - 5 > 0 fails
        let sigma = Assignment::new().with(Var::X(0), 3).with_n(0);
        assert!(verify_counterexample(&premise, &conclusion, &sigma));
        // x1 = 6 satisfies both, not a counterexample
        let sigma = Assignment::new().with(Var::X(0), 6).with_n(0);
        assert!(!verify_counterexample(&premise, &conclusion, &sigma));
    }

    #[test]
    fn explicit_command_wins_resolution() {
        let cmd = resolve_solver_command(Some("my-solver --flag")).unwrap();
        assert_eq!(cmd, vec!["my-solver".to_string(), "--flag".to_string()]);
    }
}
