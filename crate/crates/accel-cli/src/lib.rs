//! Plumbing for the `accel` binary: file loading, run configuration, output
//! rendering and the benchmark harness. Kept as a library so integration
//! tests can drive the same code paths in process.

use std::fs;
use std::path::Path;
use std::time::Duration;

use accel_core::{parse_loop, Loop};
use accel_engine::{accelerate, AccelResult, EngineConfig};
use accel_smt::{SmtClient, SolverConfig};
use anyhow::Context;

pub mod bench;
pub mod emit;

/// Everything one acceleration run needs to know.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub solver: Vec<String>,
    pub timeout: Duration,
    pub engine: EngineConfig,
}

impl RunConfig {
    pub fn client(&self) -> SmtClient {
        SmtClient::new(SolverConfig::new(self.solver.clone()).with_timeout(self.timeout))
    }
}

pub fn load_loop(path: &Path) -> anyhow::Result<Loop> {
    let src = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    parse_loop(&src).with_context(|| format!("cannot parse {}", path.display()))
}

/// Load and accelerate one file with a fresh client.
pub fn accelerate_path(path: &Path, cfg: &RunConfig) -> anyhow::Result<(Loop, AccelResult)> {
    let lp = load_loop(path)?;
    let mut client = cfg.client();
    let r = accelerate(&lp, &mut client, &cfg.engine)?;
    Ok((lp, r))
}
