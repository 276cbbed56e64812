//! Shared fixtures for the acceptance suite: the big co-evolution run that
//! three criteria inspect, scratch-dir management, and the pass-line
//! printer.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use coevo::eval::Task;
use coevo::evolve::{run_coevolution, EvolutionConfig, EvolutionState, OfflineSynthesizer};
use coevo::rng::Seed;

pub struct SharedRun {
    pub dir: PathBuf,
    pub state: EvolutionState,
    pub wall: Duration,
}

/// The configuration under test for the trend, co-adaptation, and
/// determinism criteria: tsp_gls, n = 100, 15 generations, offline
/// synthesis, master seed 2024.
pub fn evolve_config() -> EvolutionConfig {
    EvolutionConfig::new(Task::TspGls, 100, 15, Seed(2024))
}

/// Runs the configuration once per test process and shares the result.
pub fn shared_run() -> &'static SharedRun {
    static RUN: OnceLock<SharedRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = scratch_dir("acceptance_run_a");
        let start = Instant::now();
        let artifacts = run_coevolution(&evolve_config(), &dir, &mut OfflineSynthesizer)
            .expect("the shared evolution run must complete");
        SharedRun {
            dir,
            state: artifacts.state,
            wall: start.elapsed(),
        }
    })
}

/// Fresh scratch directory under the cargo target tmpdir; any stale copy
/// from a previous invocation is removed first.
pub fn scratch_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).expect("clear stale scratch dir");
    }
    dir
}

pub fn pass(criterion: usize, detail: impl std::fmt::Display) {
    println!("criterion {criterion:02}: PASS ({detail})");
}
