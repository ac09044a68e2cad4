//! Seed sweeps: the same scenario replayed over a contiguous seed range,
//! in parallel, with a deterministic summary.
//!
//! Each seed's trajectory is rendered to the same CSV the `run` command
//! writes and hashed, so a summary pins down every run byte for byte without
//! storing the tables. Results are merged in seed order and the summary
//! carries nothing about scheduling, so any worker count produces identical
//! output.

use lfsim_core::engine::{RunError, TerminalReason, Trajectory};
use lfsim_core::model::Violation;
use lfsim_core::scenario::ScenarioConfig;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::output::trajectory_csv;

#[derive(Debug)]
pub enum SweepError {
    /// The scenario does not validate; no runs were attempted.
    Invalid(Vec<Violation>),
    /// A run aborted; the failing seed is named.
    Run { seed: u64, error: RunError },
    /// The worker pool could not be created.
    Pool(String),
}

impl std::fmt::Display for SweepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepError::Invalid(violations) => {
                writeln!(f, "invalid scenario:")?;
                for v in violations {
                    writeln!(f, "  {}: {}", v.subject, v.message)?;
                }
                Ok(())
            }
            SweepError::Run { seed, error } => write!(f, "seed {seed}: {error}"),
            SweepError::Pool(message) => write!(f, "cannot build worker pool: {message}"),
        }
    }
}

impl std::error::Error for SweepError {}

/// Parse an inclusive seed range written `a..b`.
pub fn parse_seed_range(text: &str) -> Result<(u64, u64), String> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| format!("seed range {text:?} must look like a..b"))?;
    let first: u64 =
        a.trim().parse().map_err(|_| format!("seed range start {a:?} is not an integer"))?;
    let last: u64 =
        b.trim().parse().map_err(|_| format!("seed range end {b:?} is not an integer"))?;
    if first > last {
        return Err(format!("seed range {text:?} is empty (start exceeds end)"));
    }
    Ok((first, last))
}

/// One seed's outcome: how the run ended, where it ended, and a SHA-256 of
/// its trajectory table.
#[derive(Clone, Debug, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub steps: usize,
    pub terminal: TerminalReason,
    /// Final max distance of each leader group to its target.
    pub final_leader_dist: Vec<f64>,
    /// Final max distance of followers to each leader target, when there are
    /// followers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_follower_dist: Option<Vec<f64>>,
    pub trajectory_sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub schema: &'static str,
    pub first_seed: u64,
    pub last_seed: u64,
    pub runs: Vec<SeedRun>,
    pub steps_min: usize,
    pub steps_max: usize,
    pub steps_mean: f64,
}

fn final_distances(trajectory: &Trajectory) -> (Vec<f64>, Option<Vec<f64>>) {
    match trajectory.metrics.last() {
        Some(rec) => (rec.leader_dist.clone(), rec.follower_dist.clone()),
        None => (
            trajectory.initial.leader_dist.clone(),
            trajectory.initial.follower_dist.clone(),
        ),
    }
}

fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write as _;
        write!(hex, "{byte:02x}").unwrap();
    }
    hex
}

/// Run `cfg` once per seed in `first..=last` on `workers` threads (0 picks
/// the library default) and fold the outcomes into a summary ordered by seed.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    first: u64,
    last: u64,
    workers: usize,
) -> Result<SweepSummary, SweepError> {
    let violations = cfg.validate();
    if !violations.is_empty() {
        return Err(SweepError::Invalid(violations));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;

    let seeds: Vec<u64> = (first..=last).collect();
    let runs: Result<Vec<SeedRun>, SweepError> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut cfg = cfg.clone();
                cfg.seed = seed;
                let compiled = cfg.build().map_err(SweepError::Invalid)?;
                let trajectory =
                    lfsim_core::engine::run(&compiled).map_err(|error| SweepError::Run { seed, error })?;
                let (final_leader_dist, final_follower_dist) = final_distances(&trajectory);
                let table = trajectory_csv(&compiled.structure, &trajectory);
                Ok(SeedRun {
                    seed,
                    steps: trajectory.steps(),
                    terminal: trajectory.terminal,
                    final_leader_dist,
                    final_follower_dist,
                    trajectory_sha256: sha256_hex(&table),
                })
            })
            .collect()
    });
    let runs = runs?;

    let steps_min = runs.iter().map(|r| r.steps).min().unwrap_or(0);
    let steps_max = runs.iter().map(|r| r.steps).max().unwrap_or(0);
    let steps_mean = if runs.is_empty() {
        0.0
    } else {
        runs.iter().map(|r| r.steps as f64).sum::<f64>() / runs.len() as f64
    };
    Ok(SweepSummary {
        schema: "lfsim-sweep-v1",
        first_seed: first,
        last_seed: last,
        runs,
        steps_min,
        steps_max,
        steps_mean,
    })
}
