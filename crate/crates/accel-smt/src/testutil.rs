//! Helpers for tests that need a real solver process.
//!
//! Test runs should work on machines with no SMT solver installed, so this
//! builds the bundled fallback solver on demand (once per process) and
//! hands out a command for it. An installed `z3` or an explicit
//! `ACCEL_SMT_CMD` short-circuits the build.

use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;

/// Command line for a working solver, for use in tests.
///
/// Panics when the fallback solver cannot be built, since no test needing a
/// solver can do anything useful then.
pub fn ensure_solver() -> Vec<String> {
    if let Ok(cmd) = std::env::var("ACCEL_SMT_CMD") {
        let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        if !parts.is_empty() {
            return parts;
        }
    }
    if let Some(path) = std::env::var_os("PATH") {
        for dir in std::env::split_paths(&path) {
            if dir.join("z3").is_file() {
                return vec!["z3".to_string(), "-in".to_string()];
            }
        }
    }
    vec![built_minismt().to_string_lossy().into_owned()]
}

fn built_minismt() -> &'static PathBuf {
    static BUILT: OnceLock<PathBuf> = OnceLock::new();
    BUILT.get_or_init(|| {
        let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .parent()
            .and_then(|p| p.parent())
            .expect("workspace root")
            .to_path_buf();
        let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
        let mut args = vec!["build", "-p", "accel-minismt"];
        if profile == "release" {
            args.push("--release");
        }
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".to_string());
        let status = Command::new(cargo)
            .args(&args)
            .current_dir(&root)
            .status()
            .expect("run cargo build for the fallback solver");
        assert!(status.success(), "building accel-minismt failed");
        let target = std::env::var("CARGO_TARGET_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|_| root.join("target"));
        let bin = target.join(profile).join(if cfg!(windows) {
            "accel-minismt.exe"
        } else {
            "accel-minismt"
        });
        assert!(bin.is_file(), "built solver not found at {}", bin.display());
        bin
    })
}
