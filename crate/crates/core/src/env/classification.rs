//! Classification datasets recast as seasonal bandits.
//!
//! Each step shows one row; every arm's action vector places the row's
//! features into that arm's block. The reward is 1 when the chosen arm is
//! the correct answer under the task active in the current period.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schedule::ChangeSchedule;
use super::Environment;
use crate::error::{Error, Result};
use crate::policy::ActionSet;

/// Binary task: arm 0 is correct iff the label is in `first_arm`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSplit {
    pub name: String,
    pub first_arm: BTreeSet<usize>,
}

impl LabelSplit {
    pub fn new(name: impl Into<String>, first_arm: impl IntoIterator<Item = usize>) -> Self {
        Self {
            name: name.into(),
            first_arm: first_arm.into_iter().collect(),
        }
    }

    /// Built-in splits of the ten digit / fashion classes.
    ///
    /// | name | arm 0 labels |
    /// |---|---|
    /// | `parity` | even digits 0 2 4 6 8 |
    /// | `divisible-by-three` | 0 3 6 9 |
    /// | `non-prime` | 0 1 4 6 8 9 |
    /// | `upper-body` | T-shirt 0, pullover 2, dress 3, coat 4, shirt 6 |
    /// | `winter` | pullover 2, coat 4, ankle boot 9 |
    /// | `shoes` | sandal 5, sneaker 7, ankle boot 9 |
    pub fn preset(name: &str) -> Result<Self> {
        let labels: &[usize] = match name {
            "parity" => &[0, 2, 4, 6, 8],
            "divisible-by-three" => &[0, 3, 6, 9],
            "non-prime" => &[0, 1, 4, 6, 8, 9],
            "upper-body" => &[0, 2, 3, 4, 6],
            "winter" => &[2, 4, 9],
            "shoes" => &[5, 7, 9],
            other => return Err(Error::invalid(format!("unknown task preset '{other}'"))),
        };
        Ok(Self::new(name, labels.iter().copied()))
    }

    pub fn correct_arm(&self, label: usize) -> usize {
        if self.first_arm.contains(&label) {
            0
        } else {
            1
        }
    }
}

/// How the correct arm depends on the label in each stationary period.
/// Schedule parameter id `k` selects the `k`-th task.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskMode {
    TwoArm(Vec<LabelSplit>),
    /// Correct arm is `permutation[label]`.
    ArmShift(Vec<Vec<usize>>),
}

impl TaskMode {
    fn n_tasks(&self) -> usize {
        match self {
            TaskMode::TwoArm(t) => t.len(),
            TaskMode::ArmShift(p) => p.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationEnv {
    contexts: Vec<DVector<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
    schedule: ChangeSchedule,
    mode: TaskMode,
}

impl ClassificationEnv {
    /// Step `t` shows row `t - 1`, so at least `horizon` rows are needed.
    pub fn new(
        contexts: Vec<DVector<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
        schedule: ChangeSchedule,
        mode: TaskMode,
    ) -> Result<Self> {
        if contexts.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} labels",
                contexts.len(),
                labels.len()
            )));
        }
        if contexts.len() < schedule.horizon() {
            return Err(Error::invalid(format!(
                "horizon {} exceeds the {} available rows",
                schedule.horizon(),
                contexts.len()
            )));
        }
        let p = contexts.first().map_or(0, |c| c.len());
        if p == 0 || contexts.iter().any(|c| c.len() != p) {
            return Err(Error::invalid("feature rows must share a positive dimension"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::invalid(format!("label {bad} outside 0..{n_classes}")));
        }
        if let TaskMode::ArmShift(perms) = &mode {
            for perm in perms {
                let set: BTreeSet<usize> = perm.iter().copied().collect();
                if perm.len() != n_classes || set.len() != n_classes || set.iter().any(|&a| a >= n_classes)
                {
                    return Err(Error::invalid(format!(
                        "{perm:?} is not a permutation of 0..{n_classes}"
                    )));
                }
            }
        }
        if let Some(&id) = schedule.param_ids().iter().find(|&&id| id >= mode.n_tasks()) {
            return Err(Error::invalid(format!(
                "schedule uses task {id} but only {} tasks are defined",
                mode.n_tasks()
            )));
        }
        Ok(Self {
            contexts,
            labels,
            n_classes,
            schedule,
            mode,
        })
    }

    pub fn mode(&self) -> &TaskMode {
        &self.mode
    }

    pub fn context_dim(&self) -> usize {
        self.contexts[0].len()
    }

    pub fn label_at(&self, t: usize) -> Result<usize> {
        self.schedule.period_index_at(t)?;
        Ok(self.labels[t - 1])
    }

    /// Correct arm for `label` under task `task`.
    pub fn correct_arm(&self, label: usize, task: usize) -> Result<usize> {
        if label >= self.n_classes {
            return Err(Error::invalid(format!("unknown label {label}")));
        }
        match &self.mode {
            TaskMode::TwoArm(splits) => splits
                .get(task)
                .map(|s| s.correct_arm(label))
                .ok_or_else(|| Error::invalid(format!("unknown task {task}"))),
            TaskMode::ArmShift(perms) => perms
                .get(task)
                .map(|p| p[label])
                .ok_or_else(|| Error::invalid(format!("unknown task {task}"))),
        }
    }

    /// 1 if `arm` is correct for `label` under `task`, else 0.
    pub fn task_reward(&self, label: usize, arm: usize, task: usize) -> Result<f64> {
        if arm >= self.n_arms() {
            return Err(Error::invalid(format!("arm {arm} out of range")));
        }
        Ok(if self.correct_arm(label, task)? == arm {
            1.0
        } else {
            0.0
        })
    }
}

impl Environment for ClassificationEnv {
    fn horizon(&self) -> usize {
        self.schedule.horizon()
    }

    fn dim(&self) -> usize {
        self.n_arms() * self.context_dim()
    }

    fn n_arms(&self) -> usize {
        match &self.mode {
            TaskMode::TwoArm(_) => 2,
            TaskMode::ArmShift(_) => self.n_classes,
        }
    }

    fn schedule(&self) -> &ChangeSchedule {
        &self.schedule
    }

    fn action_set(&self, t: usize, _rng: &mut dyn RngCore) -> Result<ActionSet> {
        self.schedule.period_index_at(t)?;
        build_contextualized_actions(t, &self.contexts[t - 1], self.n_arms())
    }

    fn reward(
        &self,
        t: usize,
        _actions: &ActionSet,
        arm: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<f64> {
        let task = self.schedule.param_at(t)?;
        self.task_reward(self.labels[t - 1], arm, task)
    }

    fn best_expected_reward(&self, _t: usize, _actions: &ActionSet) -> Result<f64> {
        Ok(1.0)
    }
}

/// `K` block vectors of length `K·p`; arm `a` holds `context` in block `a`.
pub fn build_contextualized_actions(
    t: usize,
    context: &DVector<f64>,
    arms: usize,
) -> Result<ActionSet> {
    let p = context.len();
    if arms < 2 || p == 0 {
        return Err(Error::invalid("need at least two arms and a non-empty context"));
    }
    let actions = (0..arms)
        .map(|a| {
            let mut x = DVector::zeros(arms * p);
            x.rows_mut(a * p, p).copy_from(context);
            x
        })
        .collect();
    ActionSet::new(t, actions)
}

/// Identity followed by `count - 1` distinct random permutations of
/// `0..classes`.
pub fn arm_shift_permutations<R: Rng + ?Sized>(
    count: usize,
    classes: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let factorial = (1..=classes).try_fold(1usize, |acc, k| acc.checked_mul(k));
    if count == 0 || factorial.is_some_and(|f| count > f) {
        return Err(Error::invalid(format!(
            "cannot draw {count} distinct permutations of {classes} classes"
        )));
    }
    let mut perms = vec![(0..classes).collect::<Vec<_>>()];
    while perms.len() < count {
        let mut p: Vec<usize> = (0..classes).collect();
        p.shuffle(rng);
        if !perms.contains(&p) {
            perms.push(p);
        }
    }
    Ok(perms)
}

/// Synthetic stand-in for an image corpus: `classes` Gaussian clusters in
/// `R^dim` with means at distance `separation` from the origin along random
/// directions and unit isotropic noise. Labels are drawn uniformly.
pub fn gaussian_clusters<R: Rng + ?Sized>(
    rows: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    rng: &mut R,
) -> Result<(Vec<DVector<f64>>, Vec<usize>)> {
    if rows == 0 || classes == 0 || dim == 0 {
        return Err(Error::invalid("rows, classes and dim must be positive"));
    }
    let means: Vec<DVector<f64>> = (0..classes)
        .map(|_| {
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let n = v.norm();
            v * (separation / n)
        })
        .collect();
    let mut contexts = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let label = rng.random_range(0..classes);
        let noise = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        contexts.push(&means[label] + noise);
        labels.push(label);
    }
    Ok((contexts, labels))
}
