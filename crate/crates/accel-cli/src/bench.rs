//! Benchmark harness: accelerate every `.loop` file in a directory on a
//! worker pool and tabulate the outcomes, text and CSV.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use accel_engine::{accelerate, AccelResult};
use accel_smt::SmtClient;
use rayon::prelude::*;

use crate::{load_loop, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Exact,
    Approx,
    Fail,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Exact => "exact",
            Outcome::Approx => "approx",
            Outcome::Fail => "fail",
        }
    }
}

/// One per-loop row of the benchmark table.
#[derive(Clone, Debug)]
pub struct RunStats {
    pub file: String,
    pub outcome: Outcome,
    pub steps: usize,
    pub ms: u128,
    pub techniques: String,
    /// Failure detail for the text table; empty for accelerated loops.
    pub note: String,
}

pub fn techniques_str(r: &AccelResult) -> String {
    let counts: Vec<String> = r
        .technique_counts()
        .iter()
        .map(|(t, c)| format!("{t}:{c}"))
        .collect();
    counts.join(";")
}

fn run_one(client: &mut SmtClient, cfg: &RunConfig, path: &Path) -> RunStats {
    let file = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let start = Instant::now();
    let outcome = load_loop(path)
        .and_then(|lp| accelerate(&lp, client, &cfg.engine).map_err(anyhow::Error::from));
    let ms = start.elapsed().as_millis();
    match outcome {
        Ok(r) if r.solved => RunStats {
            file,
            outcome: if r.exact { Outcome::Exact } else { Outcome::Approx },
            steps: r.steps(),
            ms,
            techniques: techniques_str(&r),
            note: String::new(),
        },
        Ok(r) => RunStats {
            file,
            outcome: Outcome::Fail,
            steps: r.steps(),
            ms,
            techniques: techniques_str(&r),
            note: format!("stuck, {} clause(s) left", r.residual.len()),
        },
        Err(e) => RunStats {
            file,
            outcome: Outcome::Fail,
            steps: 0,
            ms,
            techniques: String::new(),
            note: format!("{:#}", e),
        },
    }
}

/// Accelerate every `.loop` file under `dir`. Each worker owns one solver
/// session; rows come back in filename order regardless of scheduling.
pub fn bench_dir(dir: &Path, cfg: &RunConfig) -> anyhow::Result<Vec<RunStats>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "loop"))
        .collect();
    files.sort();
    let stats = files
        .par_iter()
        .map_init(|| cfg.client(), |client, path| run_one(client, cfg, path))
        .collect();
    Ok(stats)
}

/// Counts for the aggregate row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Totals {
    pub loops: usize,
    pub exact: usize,
    pub approx: usize,
    pub fail: usize,
}

impl Totals {
    pub fn accelerated(&self) -> usize {
        self.exact + self.approx
    }
}

pub fn totals(stats: &[RunStats]) -> Totals {
    let mut t = Totals { loops: stats.len(), ..Totals::default() };
    for s in stats {
        match s.outcome {
            Outcome::Exact => t.exact += 1,
            Outcome::Approx => t.approx += 1,
            Outcome::Fail => t.fail += 1,
        }
    }
    t
}

pub fn text_table(stats: &[RunStats]) -> String {
    let mut out = String::new();
    if stats.is_empty() {
        writeln!(out, "no .loop files found").unwrap();
        return out;
    }
    let file_w = stats.iter().map(|s| s.file.len()).max().unwrap().max("file".len());
    let tech_w = stats
        .iter()
        .map(|s| s.techniques.len())
        .max()
        .unwrap()
        .max("techniques".len());
    writeln!(
        out,
        "{:<file_w$}  {:<7}  {:>5}  {:>6}  {:<tech_w$}  note",
        "file", "outcome", "steps", "ms", "techniques"
    )
    .unwrap();
    for s in stats {
        writeln!(
            out,
            "{:<file_w$}  {:<7}  {:>5}  {:>6}  {:<tech_w$}  {}",
            s.file,
            s.outcome.as_str(),
            s.steps,
            s.ms,
            s.techniques,
            s.note
        )
        .unwrap();
    }
    let t = totals(stats);
    let avg = stats.iter().map(|s| s.ms).sum::<u128>() as f64 / stats.len() as f64;
    writeln!(
        out,
        "total: {} loops | exact {} | approx {} | fail {} | avg rt {:.1} ms",
        t.loops, t.exact, t.approx, t.fail, avg
    )
    .unwrap();
    out
}

pub fn write_csv<W: io::Write>(stats: &[RunStats], w: W) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["file", "outcome", "exact", "steps", "ms", "techniques"])?;
    for s in stats {
        wtr.write_record([
            s.file.as_str(),
            s.outcome.as_str(),
            if s.outcome == Outcome::Exact { "true" } else { "false" },
            &s.steps.to_string(),
            &s.ms.to_string(),
            s.techniques.as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
