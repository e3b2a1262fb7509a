//! `accel`: accelerate single-path integer loops into formulas over
//! (x, n, x′), cross-check results by simulation, and benchmark corpora.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use accel_cli::bench::{bench_dir, text_table, write_csv};
use accel_cli::emit::{human_report, smt2_script};
use accel_cli::{accelerate_path, RunConfig};
use accel_core::oracle::{check_approx, check_exact, OracleVerdict, StateBox};
use accel_core::SumConfig;
use accel_engine::EngineConfig;
use accel_smt::resolve_solver_command;
use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "accel",
    version,
    about = "Accelerate single-path integer loops into closed-form formulas",
    args_conflicts_with_subcommands = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Option<Cmd>,
    #[command(flatten)]
    run: AccelCmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Accelerate a loop, then cross-check the formula by simulation.
    Check(CheckCmd),
    /// Accelerate every .loop file in a directory and tabulate outcomes.
    Bench(BenchCmd),
}

#[derive(Args)]
struct CommonOpts {
    /// SMT solver command line, e.g. "z3 -in". Defaults to z3 from PATH,
    /// then the bundled fallback solver.
    #[arg(long, env = "ACCEL_SMT_CMD", value_name = "CMD")]
    solver: Option<String>,
    /// Wall-clock timeout per solver query, in milliseconds.
    #[arg(long, env = "ACCEL_TIMEOUT_MS", value_name = "MS", default_value_t = 1000)]
    timeout_ms: u64,
    /// Largest polynomial degree the closed-form engine will sum.
    #[arg(long, env = "ACCEL_DEGREE_CAP", value_name = "K", default_value_t = 8)]
    degree_cap: u32,
    /// Disable the eventual-decrease technique (ablation).
    #[arg(long, env = "ACCEL_NO_EV_DEC")]
    no_ev_dec: bool,
    /// Disable the eventual-increase technique (ablation).
    #[arg(long, env = "ACCEL_NO_EV_INC")]
    no_ev_inc: bool,
    /// Accept Unknown solver verdicts as Valid. Unsound by construction;
    /// exists so the test suite can prove the simulation oracle notices.
    #[arg(long = "unsound-unknown-is-valid", env = "ACCEL_UNSOUND_UNKNOWN_IS_VALID", hide = true)]
    unknown_is_valid: bool,
}

impl CommonOpts {
    fn run_config(&self) -> anyhow::Result<RunConfig> {
        let solver = resolve_solver_command(self.solver.as_deref())?;
        Ok(RunConfig {
            solver,
            timeout: Duration::from_millis(self.timeout_ms),
            engine: EngineConfig {
                enable_ev_dec: !self.no_ev_dec,
                enable_ev_inc: !self.no_ev_inc,
                unknown_is_valid: self.unknown_is_valid,
                sum: SumConfig { degree_cap: self.degree_cap },
            },
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Smt2,
}

#[derive(Args)]
struct AccelCmd {
    /// Loop file to accelerate.
    #[arg(value_name = "FILE")]
    file: Option<PathBuf>,
    /// Output format.
    #[arg(long, env = "ACCEL_FORMAT", value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Print the derivation trace and every solver query.
    #[arg(long, env = "ACCEL_TRACE")]
    trace: bool,
    /// For smt2 output of formulas with exponentials: ground n over [1, K].
    #[arg(long, env = "ACCEL_EXPAND_N", value_name = "K")]
    expand_n: Option<u64>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct CheckCmd {
    /// Loop file to check.
    #[arg(value_name = "FILE")]
    file: PathBuf,
    /// Initial-state box the oracle enumerates, as LO:HI per coordinate.
    #[arg(long = "box", env = "ACCEL_BOX", value_name = "LO:HI", default_value = "-8:8", value_parser = parse_box)]
    state_box: (i64, i64),
    /// Largest iteration count the oracle simulates.
    #[arg(long, env = "ACCEL_MAX_N", value_name = "N", default_value_t = 8)]
    max_n: u64,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct BenchCmd {
    /// Directory of .loop files.
    #[arg(value_name = "DIR")]
    dir: PathBuf,
    /// Also write CSV, to a file or to standard output with `-`.
    #[arg(long, env = "ACCEL_CSV", value_name = "PATH")]
    csv: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

fn parse_box(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if lo > hi {
        return Err(format!("empty box {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Some(Cmd::Check(c)) => cmd_check(c),
        Some(Cmd::Bench(b)) => cmd_bench(b),
        None => cmd_accelerate(cli.run),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn cmd_accelerate(args: AccelCmd) -> anyhow::Result<i32> {
    let Some(file) = args.file else {
        bail!("no loop file given; see --help");
    };
    let cfg = args.common.run_config()?;
    let (_, r) = accelerate_path(&file, &cfg)?;
    match args.format {
        Format::Human => print!("{}", human_report(&display_name(&file), &r, args.trace)),
        Format::Smt2 => {
            if !r.solved {
                eprintln!("stuck: partial formulas are not emitted as smt2");
                return Ok(2);
            }
            print!("{}", smt2_script(&r, args.expand_n)?);
        }
    }
    Ok(if r.solved { 0 } else { 2 })
}

fn cmd_check(args: CheckCmd) -> anyhow::Result<i32> {
    let cfg = args.common.run_config()?;
    let (lp, r) = accelerate_path(&args.file, &cfg)?;
    let name = display_name(&args.file);
    if !r.solved {
        println!("{name}: stuck; nothing to check");
        return Ok(2);
    }
    let claimed = if r.exact { "EXACT" } else { "APPROX" };
    let (lo, hi) = args.state_box;
    let bx = StateBox { lo, hi, max_n: args.max_n };
    let approx = check_approx(&lp, &r.formula, &bx)?;
    if let OracleVerdict::SoundnessViolation(w) = approx.verdict {
        println!(
            "{name}: UNSOUND ({claimed} claimed): from {:?} the formula admits n = {} but the loop stops earlier",
            w.start, w.n
        );
        return Ok(3);
    }
    let exact_report = check_exact(&lp, &r.formula, &bx)?;
    if let OracleVerdict::ExactnessViolation(w) = exact_report.verdict {
        if r.exact {
            println!(
                "{name}: EXACTNESS VIOLATED: from {:?} the loop runs n = {} steps but the formula denies it",
                w.start, w.n
            );
            return Ok(3);
        }
        println!(
            "{name}: consistent as APPROX ({} states, {} pairs); coverage gap witnessed from {:?} at n = {}, as an under-approximation permits",
            approx.states_checked, approx.pairs_checked, w.start, w.n
        );
        return Ok(0);
    }
    println!(
        "{name}: consistent as {claimed} ({} states, {} pairs)",
        approx.states_checked, approx.pairs_checked
    );
    Ok(0)
}

fn cmd_bench(args: BenchCmd) -> anyhow::Result<i32> {
    let cfg = args.common.run_config()?;
    let stats = bench_dir(&args.dir, &cfg)?;
    print!("{}", text_table(&stats));
    if let Some(path) = args.csv {
        if path == Path::new("-") {
            write_csv(&stats, io::stdout().lock())?;
        } else {
            write_csv(&stats, File::create(&path)?)?;
        }
    }
    Ok(0)
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
