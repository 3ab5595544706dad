//! Experiment runner: seeded runs, grid search and summaries.

pub mod config;
pub mod grid;
pub mod runner;
pub mod summary;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{Algorithm, ExperimentConfig, GridSpec, PolicySpec};
pub use grid::{grid_search, grid_search_all, GridEntry, GridReport};
pub use runner::{build_environment, run_policy, RewardLog, RunStreams, StepRow, STEP_COLUMNS};
pub use summary::{summarize_dir, Summary, SummaryCell};

use crate::error::Result;

/// Runs every policy of `config` with one seed. Logs follow policy order.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<Vec<RewardLog>> {
    run_seeds(config, &[seed])
}

/// Runs every (policy, seed) pair in parallel. Logs are ordered by policy,
/// then by seed as listed.
pub fn run_seeds(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<RewardLog>> {
    config.validate()?;
    let env = build_environment(config, config.horizon)?;
    let jobs: Vec<(&PolicySpec, u64)> = config
        .policies
        .iter()
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    jobs.par_iter()
        .map(|&(spec, seed)| run_policy(env.as_ref(), spec, config.batch_size, seed))
        .collect()
}

/// Writes `<out>/<pattern>/<policy-slug>.csv` (all seeds, one header) and a
/// matching `.events.csv` for pool events. Returns the step-log paths.
pub fn write_logs(config: &ExperimentConfig, logs: &[RewardLog], out: &Path) -> Result<Vec<PathBuf>> {
    let dir = out.join(config.pattern_name());
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for policy in &config.policies {
        let label = policy.label();
        let mine: Vec<&RewardLog> = logs.iter().filter(|l| l.algorithm == label).collect();
        if mine.is_empty() {
            continue;
        }
        let slug = policy.slug();
        let path = dir.join(format!("{slug}.csv"));
        let mut steps = fs::File::create(&path)?;
        let mut events = BufWriter::new(fs::File::create(dir.join(format!("{slug}.events.csv")))?);
        for (i, log) in mine.iter().enumerate() {
            log.write_csv(&mut steps, i == 0)?;
            log.write_events(&mut events, i == 0)?;
        }
        written.push(path);
    }
    Ok(written)
}
