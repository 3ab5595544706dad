//! Benchmark fixtures for the seasonal bandit crates.

use allseason::{ActionSet, BanditPolicy, BanditPool, GaussianBelief, Observation, PolicyKind, PoolConfig, ShadowMemory};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `arms` actions of dimension `arms * context_dim`: the context copied
/// into the block of each arm, zeros elsewhere.
pub fn contextual_actions(rng: &mut impl Rng, t: usize, arms: usize, context_dim: usize) -> ActionSet {
    let context: Vec<f64> = (0..context_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let actions = (0..arms)
        .map(|k| {
            let mut x = DVector::zeros(arms * context_dim);
            x.rows_mut(k * context_dim, context_dim).copy_from_slice(&context);
            x
        })
        .collect();
    ActionSet::new(t, actions).expect("non-empty action set")
}

/// Observations of random contextual actions under a random linear reward.
pub fn observations(rng: &mut impl Rng, n: usize, arms: usize, context_dim: usize) -> Vec<Observation> {
    let dim = arms * context_dim;
    let theta = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    (0..n)
        .map(|t| {
            let set = contextual_actions(rng, t, arms, context_dim);
            let x = set.get(rng.random_range(0..arms)).unwrap().clone();
            let r = theta.dot(&x) + rng.random_range(-0.1..0.1);
            Observation::new(x, r)
        })
        .collect()
}

pub fn trained_belief(seed: u64, n: usize, arms: usize, context_dim: usize) -> GaussianBelief {
    let mut b = GaussianBelief::new(arms * context_dim, 1.0, 0.1).unwrap();
    b.update(&observations(&mut rng(seed), n, arms, context_dim)).unwrap();
    b
}

/// A pool with `bases` members, each trained on its own random regime.
pub fn trained_pool(bases: usize, arms: usize, context_dim: usize) -> BanditPool {
    let dim = arms * context_dim;
    let members = (0..bases)
        .map(|i| {
            let mut p = BanditPolicy::new(i as u64 + 1, PolicyKind::LinTs, dim, 1.0, 0.1).unwrap();
            p.update(&observations(&mut rng(i as u64), 200, arms, context_dim)).unwrap();
            p
        })
        .collect();
    let mut config = PoolConfig::new(dim, bases, ShadowMemory::Window(100));
    config.noise_variance = 0.1;
    BanditPool::with_bases(config, members).unwrap()
}
