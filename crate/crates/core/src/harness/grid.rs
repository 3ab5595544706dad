//! Hyperparameter grid search on the head of the stream.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{ExperimentConfig, PolicySpec};
use super::runner::{build_environment, run_policy};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub spec: PolicySpec,
    pub per_seed: Vec<f64>,
    pub mean: f64,
}

/// Grid points of one policy, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub policy: String,
    pub validation_horizon: usize,
    pub seeds: Vec<u64>,
    pub entries: Vec<GridEntry>,
}

impl GridReport {
    pub fn best(&self) -> &PolicySpec {
        &self.entries[0].spec
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} (first {} steps, {} seeds)",
            self.policy,
            self.validation_horizon,
            self.seeds.len()
        );
        let width = self
            .entries
            .iter()
            .map(|e| e.spec.describe().len())
            .max()
            .unwrap_or(0);
        for (rank, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "  {:>2}. {:<width$}  {:.4}",
                rank + 1,
                e.spec.describe(),
                e.mean
            );
        }
        out
    }
}

/// Steps used for tuning: the leading `fraction` of the horizon, rounded up.
pub fn validation_horizon(horizon: usize, fraction: f64) -> usize {
    // The slack keeps products like 30000 * 0.1 from rounding up a step.
    let steps = (horizon as f64 * fraction - 1e-9).ceil() as usize;
    steps.clamp(1, horizon.max(1))
}

/// Less capacity first: smaller window, larger discount, fewer bases.
fn capacity_order(a: &PolicySpec, b: &PolicySpec) -> Ordering {
    a.window
        .cmp(&b.window)
        .then_with(|| {
            let (ga, gb) = (a.gamma().unwrap_or(1.0), b.gamma().unwrap_or(1.0));
            gb.total_cmp(&ga)
        })
        .then_with(|| a.max_bases.cmp(&b.max_bases))
}

/// Evaluates every grid point of `config.policies[index]` on the validation
/// head with the grid seeds and ranks them by mean reward.
pub fn grid_search(config: &ExperimentConfig, index: usize) -> Result<GridReport> {
    Ok(grid_search_policies(config, &[index])?.remove(0))
}

/// Grid search for every policy, plus a copy of `config` with each policy's
/// grid replaced by its best point.
pub fn grid_search_all(config: &ExperimentConfig) -> Result<(Vec<GridReport>, ExperimentConfig)> {
    let indices: Vec<usize> = (0..config.policies.len()).collect();
    let reports = grid_search_policies(config, &indices)?;
    let mut tuned = config.clone();
    for (policy, report) in tuned.policies.iter_mut().zip(&reports) {
        *policy = report.best().clone();
    }
    Ok((reports, tuned))
}

fn grid_search_policies(config: &ExperimentConfig, indices: &[usize]) -> Result<Vec<GridReport>> {
    config.validate()?;
    let horizon = validation_horizon(config.horizon, config.validation_fraction);
    let env = build_environment(config, horizon)?;
    let seeds = config.grid_seeds();
    let points: Vec<(usize, Vec<PolicySpec>)> = indices
        .iter()
        .map(|&i| (i, config.policies[i].grid_points()))
        .collect();
    let jobs: Vec<(usize, usize, u64)> = points
        .iter()
        .enumerate()
        .flat_map(|(pi, (_, specs))| {
            let seeds = &seeds;
            (0..specs.len()).flat_map(move |k| seeds.iter().map(move |&s| (pi, k, s)))
        })
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(pi, k, seed)| {
            run_policy(env.as_ref(), &points[pi].1[k], config.batch_size, seed)
                .map(|log| log.mean_reward())
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(points.len());
    let mut cursor = 0;
    for (i, specs) in points {
        let mut entries: Vec<GridEntry> = specs
            .into_iter()
            .map(|spec| {
                let per_seed = scores[cursor..cursor + seeds.len()].to_vec();
                cursor += seeds.len();
                let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
                GridEntry {
                    spec,
                    per_seed,
                    mean,
                }
            })
            .collect();
        entries.sort_by(|a, b| {
            b.mean
                .total_cmp(&a.mean)
                .then_with(|| capacity_order(&a.spec, &b.spec))
        });
        reports.push(GridReport {
            policy: config.policies[i].label(),
            validation_horizon: horizon,
            seeds: seeds.clone(),
            entries,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Algorithm;

    #[test]
    fn validation_head_rounds_up() {
        assert_eq!(validation_horizon(30000, 0.1), 3000);
        assert_eq!(validation_horizon(1001, 0.1), 101);
        assert_eq!(validation_horizon(5, 0.1), 1);
        assert_eq!(validation_horizon(6000, 1.0), 6000);
        assert_eq!(validation_horizon(6000, 0.25), 1500);
    }

    #[test]
    fn ties_prefer_less_capacity() {
        let mut a = PolicySpec::new(Algorithm::AllSeasonSw);
        a.window = Some(50);
        a.max_bases = Some(5);
        let mut b = a.clone();
        b.window = Some(100);
        b.max_bases = Some(3);
        assert_eq!(capacity_order(&a, &b), Ordering::Less);
        let mut c = a.clone();
        c.max_bases = Some(3);
        assert_eq!(capacity_order(&c, &a), Ordering::Less);
        let mut d = PolicySpec::new(Algorithm::DLints);
        d.kappa = Some(5.0);
        let mut e = d.clone();
        e.kappa = Some(1.0);
        assert_eq!(capacity_order(&d, &e), Ordering::Less);
    }
}
