//! Rendering of acceleration results: a human report in the input grammar's
//! expression syntax, and an SMT-LIB2 script over x, n and primed x′.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use accel_core::{Clause, Formula, PolyExp, Var, VarNames};
use accel_engine::AccelResult;
use anyhow::bail;

pub fn clause_text(c: &Clause, names: &VarNames) -> String {
    let atoms: Vec<String> = c.iter().map(|a| a.render(names)).collect();
    atoms.join(" || ")
}

/// The default report. Atoms print in the loop grammar so they can be pasted
/// back into guards.
pub fn human_report(name: &str, r: &AccelResult, trace: bool) -> String {
    let mut out = String::new();
    let banner = if !r.solved {
        "stuck".to_string()
    } else if r.exact {
        format!("solved EXACT in {} steps", r.steps())
    } else {
        format!("solved APPROX in {} steps", r.steps())
    };
    writeln!(out, "{name}: {banner}").unwrap();
    writeln!(out, "closed form:").unwrap();
    for (i, form) in r.closed.forms.iter().enumerate() {
        writeln!(out, "  {}' = {}", r.names.name(i), form.render(&r.names)).unwrap();
    }
    if !r.condition.is_true() {
        writeln!(out, "condition:").unwrap();
        writeln!(out, "  {}", r.condition.render(&r.names)).unwrap();
    }
    if !r.solved {
        writeln!(out, "pending:").unwrap();
        for c in &r.residual {
            writeln!(out, "  {}", clause_text(c, &r.names)).unwrap();
        }
    }
    if trace {
        if !r.trace.is_empty() {
            writeln!(out, "trace:").unwrap();
            for (i, s) in r.trace.iter().enumerate() {
                writeln!(
                    out,
                    "  {}. [{}] {}  ~>  {}",
                    i + 1,
                    s.technique,
                    clause_text(&s.clause, &r.names),
                    s.psi2.render(&r.names)
                )
                .unwrap();
            }
        }
        if !r.queries.is_empty() {
            writeln!(out, "solver queries:").unwrap();
            for q in &r.queries {
                writeln!(out, "  {}", q.render(&r.names)).unwrap();
            }
        }
    }
    out
}

fn clause_sexp(c: &Clause, names: &VarNames) -> anyhow::Result<String> {
    let mut atoms = Vec::with_capacity(c.len());
    for a in c {
        atoms.push(format!("(> {} 0)", a.expr().render_smt2(names)?));
    }
    Ok(nary("or", atoms))
}

fn formula_sexp(f: &Formula, names: &VarNames) -> anyhow::Result<String> {
    if f.is_true() {
        return Ok("true".to_string());
    }
    let mut clauses = Vec::with_capacity(f.clauses().len());
    for c in f.clauses() {
        clauses.push(clause_sexp(c, names)?);
    }
    Ok(nary("and", clauses))
}

fn nary(op: &str, mut items: Vec<String>) -> String {
    if items.len() == 1 {
        items.pop().unwrap()
    } else {
        format!("({op} {})", items.join(" "))
    }
}

/// Emit ψ as a standalone SMT-LIB2 script. Formulas with exponentials in n
/// cannot be expressed in QF_NIA; passing `expand_n = Some(k)` grounds n over
/// [1, k] instead, one disjunct per value.
pub fn smt2_script(r: &AccelResult, expand_n: Option<u64>) -> anyhow::Result<String> {
    let names = &r.names;
    let body = match expand_n {
        Some(0) => bail!("--expand-n needs at least 1"),
        Some(k) => {
            let mut disjuncts = Vec::with_capacity(k as usize);
            for i in 1..=k {
                let mut map = BTreeMap::new();
                map.insert(Var::N, PolyExp::int(i as i64));
                let grounded = r.formula.subst(&map)?;
                disjuncts.push(format!("(and (= n {i}) {})", formula_sexp(&grounded, names)?));
            }
            nary("or", disjuncts)
        }
        None => {
            if r.formula.atoms().any(|a| !a.expr().is_polynomial()) {
                bail!(
                    "formula contains exponentials in n and has no QF_NIA rendering; \
                     pass --expand-n K to ground n over [1, K]"
                );
            }
            formula_sexp(&r.formula, names)?
        }
    };
    let mut out = String::new();
    writeln!(out, "(set-logic QF_NIA)").unwrap();
    for i in 0..names.len() {
        writeln!(out, "(declare-const {} Int)", names.name(i)).unwrap();
    }
    for i in 0..names.len() {
        writeln!(out, "(declare-const |{}'| Int)", names.name(i)).unwrap();
    }
    writeln!(out, "(declare-const n Int)").unwrap();
    writeln!(out, "(assert (>= n 1))").unwrap();
    writeln!(out, "(assert {body})").unwrap();
    writeln!(out, "(check-sat)").unwrap();
    Ok(out)
}
