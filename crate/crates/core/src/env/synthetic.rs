use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::schedule::ChangeSchedule;
use super::Environment;
use crate::error::{check_dim, Error, Result};
use crate::policy::ActionSet;

/// Linear rewards `r = <θ*_t, x> + ε`, `ε ~ N(0, σ²)`, with `θ*_t` taken
/// from the schedule and unit-norm random actions.
#[derive(Debug, Clone)]
pub struct SyntheticLinearEnv {
    schedule: ChangeSchedule,
    n_arms: usize,
    dim: usize,
    noise_variance: f64,
}

impl SyntheticLinearEnv {
    pub fn new(
        schedule: ChangeSchedule,
        n_arms: usize,
        dim: usize,
        noise_variance: f64,
    ) -> Result<Self> {
        if n_arms == 0 || dim == 0 {
            return Err(Error::invalid("arm count and dimension must be positive"));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid("noise variance must be non-negative"));
        }
        for id in schedule.param_ids() {
            let theta = schedule
                .parameters()
                .get(&id)
                .ok_or_else(|| Error::invalid(format!("no parameter vector for id {id}")))?;
            check_dim(dim, theta.len())?;
        }
        Ok(Self {
            schedule,
            n_arms,
            dim,
            noise_variance,
        })
    }

    pub fn schedule(&self) -> &ChangeSchedule {
        &self.schedule
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// `n_arms` standard Gaussian vectors, each scaled to unit norm.
    pub fn synth_action_set<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<ActionSet> {
        let actions = (0..self.n_arms)
            .map(|_| {
                let mut v = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = v.norm();
                if norm > 0.0 {
                    v /= norm;
                } else {
                    v[0] = 1.0;
                }
                v
            })
            .collect();
        ActionSet::new(t, actions)
    }

    /// Noiseless reward `<θ*_t, x>`.
    pub fn expected_reward(&self, t: usize, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let theta = self.schedule.theta_at(t)?;
        Ok(theta.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
    }

    pub fn reward_draw<R: Rng + ?Sized>(
        &self,
        t: usize,
        x: &DVector<f64>,
        rng: &mut R,
    ) -> Result<f64> {
        let mean = self.expected_reward(t, x)?;
        if self.noise_variance == 0.0 {
            return Ok(mean);
        }
        let z: f64 = rng.sample(StandardNormal);
        Ok(mean + self.noise_variance.sqrt() * z)
    }
}

impl Environment for SyntheticLinearEnv {
    fn horizon(&self) -> usize {
        self.schedule.horizon()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn n_arms(&self) -> usize {
        self.n_arms
    }

    fn schedule(&self) -> &ChangeSchedule {
        &self.schedule
    }

    fn action_set(&self, t: usize, rng: &mut dyn RngCore) -> Result<ActionSet> {
        self.synth_action_set(t, rng)
    }

    fn reward(
        &self,
        t: usize,
        actions: &ActionSet,
        arm: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        let x = actions
            .get(arm)
            .ok_or_else(|| Error::invalid(format!("arm {arm} out of range")))?;
        self.reward_draw(t, x, rng)
    }

    fn best_expected_reward(&self, t: usize, actions: &ActionSet) -> Result<f64> {
        actions
            .iter()
            .map(|x| self.expected_reward(t, x))
            .try_fold(f64::NEG_INFINITY, |m, r| Ok(m.max(r?)))
    }
}

/// `count` orthonormal vectors in `R^dim` from Gram-Schmidt on Gaussian
/// draws seeded by `seed`.
pub fn orthonormal_parameters(count: usize, dim: usize, seed: u64) -> Result<BTreeMap<usize, Vec<f64>>> {
    if count == 0 || count > dim {
        return Err(Error::invalid(format!(
            "cannot draw {count} orthonormal vectors in dimension {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / norm);
        }
    }
    Ok(basis
        .into_iter()
        .enumerate()
        .map(|(i, v)| (i, v.iter().copied().collect()))
        .collect())
}

/// The default seasonal sequence: four parameters visited as
/// 0-1-0-2-1-3-0-2-1, eight change points of which three lead to a
/// parameter not seen before.
pub const SEASONAL_SEQUENCE: [usize; 9] = [0, 1, 0, 2, 1, 3, 0, 2, 1];
