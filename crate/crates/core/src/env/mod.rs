//! Piecewise-stationary environments.

pub mod classification;
pub mod schedule;
pub mod synthetic;

use rand::RngCore;

use crate::error::Result;
use crate::policy::ActionSet;

pub use classification::{
    arm_shift_permutations, build_contextualized_actions, gaussian_clusters, ClassificationEnv,
    LabelSplit, TaskMode,
};
pub use schedule::{make_schedule, ChangeSchedule, Pattern, Period, ScheduleFile};
pub use synthetic::{orthonormal_parameters, SyntheticLinearEnv, SEASONAL_SEQUENCE};

/// A bandit problem whose reward function changes according to a
/// [`ChangeSchedule`]. Steps are 1-based, `1..=horizon()`.
pub trait Environment: Send + Sync {
    fn horizon(&self) -> usize;
    /// Length of every action vector.
    fn dim(&self) -> usize;
    fn n_arms(&self) -> usize;
    fn schedule(&self) -> &ChangeSchedule;
    fn action_set(&self, t: usize, rng: &mut dyn RngCore) -> Result<ActionSet>;
    fn reward(&self, t: usize, actions: &ActionSet, arm: usize, rng: &mut dyn RngCore)
        -> Result<f64>;
    /// Largest expected reward available at step `t`, for regret.
    fn best_expected_reward(&self, t: usize, actions: &ActionSet) -> Result<f64>;
}
