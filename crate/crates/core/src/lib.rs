//! Seasonal contextual bandits.
//!
//! A pool of linear Thompson sampling bandits that detects abrupt changes of
//! the reward function through posterior-predictive weights, spawns new
//! bandits for unseen regimes and reuses old ones when a regime returns.
//! Also ships the environments, data loaders and experiment harness used to
//! evaluate it.

pub mod data;
pub mod env;
pub mod error;
pub mod harness;
pub mod gaussian;
pub mod policy;
pub mod pool;

pub use env::{ChangeSchedule, Environment, Pattern};
pub use error::{Error, Result};
pub use gaussian::{symmetric_kl, GaussianBelief, Observation};
pub use policy::{ActionSet, BanditId, BanditPolicy, PolicyKind, StepOutcome};
pub use pool::{BanditPool, PairDistance, PoolConfig, PoolEvent, PruneVictim, ShadowMemory, SHADOW_ID};
