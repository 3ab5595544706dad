//! Seeded single runs: one policy against one environment.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{
    Algorithm, DatasetSpec, EnvironmentSpec, ExperimentConfig, PolicySpec, ScheduleSpec, TaskSpec,
};
use crate::data::{load_feature_table, load_idx, PcaModel};
use crate::env::{
    arm_shift_permutations, gaussian_clusters, make_schedule, orthonormal_parameters,
    ChangeSchedule, ClassificationEnv, Environment, ScheduleFile, SyntheticLinearEnv, TaskMode,
};
use crate::error::{Error, Result};
use crate::policy::{ActionSet, BanditId, BanditPolicy, PolicyKind, StepOutcome};
use crate::pool::{BanditPool, PoolConfig, PoolEvent, ShadowMemory};

/// Independent random streams derived from one root seed. Each purpose
/// gets its own ChaCha stream, so changing how often one is consumed never
/// shifts another.
pub struct RunStreams {
    pub actions: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    /// Thompson samples and tie-breaks among equal action scores.
    pub policy: ChaCha8Rng,
    /// Bandit selection inside a pool.
    pub selection: ChaCha8Rng,
}

impl RunStreams {
    pub const ACTIONS: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const POLICY: u64 = 3;
    pub const SELECTION: u64 = 4;

    pub fn new(seed: u64) -> Self {
        Self {
            actions: stream(seed, Self::ACTIONS),
            noise: stream(seed, Self::NOISE),
            policy: stream(seed, Self::POLICY),
            selection: stream(seed, Self::SELECTION),
        }
    }
}

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Id of a single-policy agent in the `bandit_id` column.
pub const SINGLE_POLICY_ID: BanditId = 1;

/// A runnable learner: either one bandit or a pool.
pub enum Agent {
    Single(BanditPolicy),
    Pool(BanditPool),
}

impl Agent {
    pub fn build(spec: &PolicySpec, dim: usize) -> Result<Self> {
        spec.validate()?;
        if spec.grid.is_some() {
            return Err(Error::Config(format!(
                "policy '{}' still has a grid; run grid search first",
                spec.label()
            )));
        }
        let single = |kind| {
            BanditPolicy::new(SINGLE_POLICY_ID, kind, dim, spec.regularizer, spec.noise_variance)
                .map(Agent::Single)
        };
        let missing = |what: &str| Error::Config(format!("policy '{}' needs {what}", spec.label()));
        match spec.algorithm {
            Algorithm::Lints => single(PolicyKind::LinTs),
            Algorithm::Random => single(PolicyKind::Random),
            Algorithm::SwLints => single(PolicyKind::SlidingWindow {
                window: spec.window.ok_or_else(|| missing("window"))?,
            }),
            Algorithm::DLints => single(PolicyKind::Discounted {
                gamma: spec.gamma().ok_or_else(|| missing("discount"))?,
            }),
            Algorithm::AllSeasonSw | Algorithm::AllSeasonDisc => {
                let shadow = if spec.algorithm == Algorithm::AllSeasonSw {
                    ShadowMemory::Window(spec.window.ok_or_else(|| missing("window"))?)
                } else {
                    ShadowMemory::Discount(spec.gamma().ok_or_else(|| missing("discount"))?)
                };
                let mut config =
                    PoolConfig::new(dim, spec.max_bases.ok_or_else(|| missing("max_bases"))?, shadow);
                config.regularizer = spec.regularizer;
                config.noise_variance = spec.noise_variance;
                config.distance = spec.distance;
                config.victim = spec.victim;
                BanditPool::new(config).map(Agent::Pool)
            }
            Algorithm::Bob | Algorithm::Denband => {
                Err(Error::Unsupported(spec.algorithm.default_label().into()))
            }
        }
    }

    pub fn run_batch<F>(
        &mut self,
        batch: &[ActionSet],
        feedback: F,
        policy_rng: &mut ChaCha8Rng,
        selection_rng: &mut ChaCha8Rng,
    ) -> Result<Vec<StepOutcome>>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        match self {
            Agent::Single(p) => p.run_batch(batch, feedback, policy_rng),
            Agent::Pool(p) => p.run_batch(batch, feedback, policy_rng, selection_rng),
        }
    }

    pub fn drain_events(&mut self) -> Vec<PoolEvent> {
        match self {
            Agent::Single(_) => Vec::new(),
            Agent::Pool(p) => p.drain_events(),
        }
    }
}

/// One row of a step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub seed: u64,
    pub batch: usize,
    pub t: usize,
    pub algorithm: String,
    pub arm: usize,
    pub reward: f64,
    pub bandit_id: BanditId,
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub batch: usize,
    pub event: PoolEvent,
}

/// Everything recorded by one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardLog {
    pub algorithm: String,
    pub seed: u64,
    pub rows: Vec<StepRow>,
    /// Mean reward of each batch, in batch order.
    pub batch_averages: Vec<f64>,
    pub events: Vec<EventRow>,
}

impl RewardLog {
    pub fn mean_reward(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.reward).sum::<f64>() / self.rows.len() as f64
    }

    pub fn write_csv<W: Write>(&self, writer: W, header: bool) -> Result<()> {
        write_rows(&self.rows, writer, header)
    }

    pub fn write_events<W: Write>(&self, mut writer: W, header: bool) -> Result<()> {
        if header {
            writeln!(writer, "seed,batch,event,bandit_id")?;
        }
        for e in &self.events {
            let (kind, id) = match e.event {
                PoolEvent::Promoted(id) => ("promoted", id.to_string()),
                PoolEvent::Pruned(id) => ("pruned", id.to_string()),
                PoolEvent::DegenerateWeights => ("degenerate-weights", String::new()),
            };
            writeln!(writer, "{},{},{kind},{id}", self.seed, e.batch)?;
        }
        Ok(())
    }
}

pub const STEP_COLUMNS: [&str; 8] = [
    "seed",
    "batch",
    "t",
    "algorithm",
    "arm",
    "reward",
    "bandit_id",
    "pool_size",
];

pub fn write_rows<W: Write>(rows: &[StepRow], writer: W, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.into());
    if header {
        w.write_record(STEP_COLUMNS).map_err(io)?;
    }
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Plays `spec` on `env` for the environment's horizon. Actions and rewards
/// are drawn in step order from their own streams, so every policy sees
/// the same action sets and noise for a given seed.
pub fn run_policy(
    env: &dyn Environment,
    spec: &PolicySpec,
    batch_size: usize,
    seed: u64,
) -> Result<RewardLog> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut agent = Agent::build(spec, env.dim())?;
    let mut streams = RunStreams::new(seed);
    let algorithm = spec.label();
    let horizon = env.horizon();
    let mut rows = Vec::with_capacity(horizon);
    let mut batch_averages = Vec::with_capacity(horizon.div_ceil(batch_size));
    let mut events = Vec::new();

    let mut start = 1;
    let mut batch = 1;
    while start <= horizon {
        let end = (start + batch_size - 1).min(horizon);
        let sets = (start..=end)
            .map(|t| env.action_set(t, &mut streams.actions))
            .collect::<Result<Vec<_>>>()?;
        let outcomes = agent.run_batch(
            &sets,
            |step, arm| env.reward(start + step, &sets[step], arm, &mut streams.noise),
            &mut streams.policy,
            &mut streams.selection,
        )?;

        let mut sum = 0.0;
        for (i, o) in outcomes.iter().enumerate() {
            sum += o.reward;
            rows.push(StepRow {
                seed,
                batch,
                t: start + i,
                algorithm: algorithm.clone(),
                arm: o.arm,
                reward: o.reward,
                bandit_id: o.bandit_id,
                pool_size: o.pool_size,
            });
        }
        batch_averages.push(sum / outcomes.len() as f64);
        events.extend(
            agent
                .drain_events()
                .into_iter()
                .map(|event| EventRow { batch, event }),
        );
        start = end + 1;
        batch += 1;
    }
    Ok(RewardLog {
        algorithm,
        seed,
        rows,
        batch_averages,
        events,
    })
}

/// Builds the configured environment over the first `horizon` steps. For
/// datasets, only the first `horizon` rows are read into features (PCA is
/// fit on exactly those rows).
pub fn build_environment(config: &ExperimentConfig, horizon: usize) -> Result<Box<dyn Environment>> {
    if horizon == 0 || horizon > config.horizon {
        return Err(Error::Config(format!(
            "horizon {horizon} outside 1..={}",
            config.horizon
        )));
    }
    match &config.environment {
        EnvironmentSpec::Synthetic {
            arms,
            dim,
            noise_variance,
            parameter_seed,
            schedule,
        } => {
            let mut sched = build_schedule(schedule, config.horizon)?;
            if sched.parameters().is_empty() {
                let count = sched.param_ids().into_iter().max().unwrap_or(0) + 1;
                sched = sched.with_parameters(orthonormal_parameters(count, *dim, *parameter_seed)?)?;
            }
            let sched = sched.truncated(horizon)?;
            Ok(Box::new(SyntheticLinearEnv::new(sched, *arms, *dim, *noise_variance)?))
        }
        EnvironmentSpec::Classification {
            classes,
            dataset,
            tasks,
            schedule,
            normalize,
        } => {
            let sched = build_schedule(schedule, config.horizon)?.truncated(horizon)?;
            let (mut contexts, labels) = load_contexts(dataset, *classes, horizon)?;
            if *normalize {
                for x in &mut contexts {
                    let norm = x.norm();
                    if norm > 0.0 {
                        *x /= norm;
                    }
                }
            }
            let mode = match tasks {
                TaskSpec::TwoArm { splits } => TaskMode::TwoArm(
                    splits.iter().map(|s| s.resolve()).collect::<Result<_>>()?,
                ),
                TaskSpec::ArmShift { count, seed } => {
                    let mut rng = stream(*seed, 0);
                    TaskMode::ArmShift(arm_shift_permutations(*count, *classes, &mut rng)?)
                }
            };
            Ok(Box::new(ClassificationEnv::new(contexts, labels, *classes, sched, mode)?))
        }
    }
}

pub fn build_schedule(spec: &ScheduleSpec, horizon: usize) -> Result<ChangeSchedule> {
    match spec {
        ScheduleSpec::File { path } => {
            let sched = ScheduleFile::load(path)?.into_schedule()?;
            if sched.horizon() < horizon {
                return Err(Error::Config(format!(
                    "schedule {} covers {} steps, the experiment needs {horizon}",
                    path.display(),
                    sched.horizon()
                )));
            }
            sched.truncated(horizon)
        }
        ScheduleSpec::Sequence { sequence } => ChangeSchedule::from_sequence(horizon, sequence),
        ScheduleSpec::Generated {
            pattern,
            parameters,
            min_segment,
            seed,
        } => make_schedule(*pattern, horizon, *parameters, *min_segment, &mut stream(*seed, 0)),
    }
}

fn load_contexts(
    dataset: &DatasetSpec,
    classes: usize,
    rows: usize,
) -> Result<(Vec<DVector<f64>>, Vec<usize>)> {
    let too_few = |have: usize| {
        Error::Config(format!("dataset has {have} rows, the horizon needs {rows}"))
    };
    let (features, labels, pca) = match dataset {
        DatasetSpec::Clusters {
            dim,
            separation,
            seed,
        } => {
            let mut rng = stream(*seed, 0);
            return gaussian_clusters(rows, classes, *dim, *separation, &mut rng);
        }
        DatasetSpec::Idx {
            images,
            labels,
            pixel_scale,
            pca,
        } => {
            let raw = load_idx(images, labels)?;
            if raw.len() < rows {
                return Err(too_few(raw.len()));
            }
            let x = raw.feature_matrix(rows) * *pixel_scale;
            let y = raw.labels()[..rows].iter().map(|&l| l as usize).collect();
            (x, y, *pca)
        }
        DatasetSpec::Table { path, pca } => {
            let table = load_feature_table(path)?;
            if table.len() < rows {
                return Err(too_few(table.len()));
            }
            let p = table.dim();
            let x = nalgebra::DMatrix::from_fn(rows, p, |i, j| table.features[i][j]);
            (x, table.labels[..rows].to_vec(), *pca)
        }
    };
    let x = match pca {
        Some(target) => PcaModel::fit(&features, target)?.transform(&features)?,
        None => features,
    };
    let contexts = (0..x.nrows()).map(|i| x.row(i).transpose()).collect();
    Ok((contexts, labels))
}
