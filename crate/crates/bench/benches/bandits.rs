use std::hint::black_box;

use allseason::symmetric_kl;
use allseason_bench::{contextual_actions, observations, rng, trained_belief, trained_pool};
use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};

// (arms, context dim): a small problem and the 440-dim image setup.
const SHAPES: [(usize, usize); 2] = [(5, 5), (10, 44)];

fn belief_update(c: &mut Criterion) {
    let mut group = c.benchmark_group("belief_update");
    for (arms, p) in SHAPES {
        let belief = trained_belief(1, 500, arms, p);
        let batch = observations(&mut rng(2), 10, arms, p);
        group.bench_function(BenchmarkId::from_parameter(arms * p), |b| {
            b.iter_batched(
                || belief.clone(),
                |mut bel| {
                    bel.update(&batch).unwrap();
                    bel
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn predictive(c: &mut Criterion) {
    let mut group = c.benchmark_group("predictive");
    for (arms, p) in SHAPES {
        let belief = trained_belief(1, 500, arms, p);
        let set = contextual_actions(&mut rng(3), 0, arms, p);
        let x = set.get(0).unwrap();
        group.bench_function(BenchmarkId::from_parameter(arms * p), |b| {
            b.iter(|| belief.predictive_log_density(black_box(x), 0.5).unwrap())
        });
    }
    group.finish();
}

fn kl(c: &mut Criterion) {
    let mut group = c.benchmark_group("symmetric_kl");
    for (arms, p) in SHAPES {
        let a = trained_belief(1, 500, arms, p);
        let b2 = trained_belief(2, 50, arms, p);
        // Fresh clones so the covariance cache starts cold, as after an update.
        group.bench_function(BenchmarkId::new("cold", arms * p), |b| {
            b.iter_batched(
                || (a.clone(), b2.clone()),
                |(x, y)| symmetric_kl(&x, &y).unwrap(),
                BatchSize::SmallInput,
            )
        });
        group.bench_function(BenchmarkId::new("warm", arms * p), |b| {
            b.iter(|| symmetric_kl(black_box(&a), black_box(&b2)).unwrap())
        });
    }
    group.finish();
}

fn pool_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("pool_batch");
    group.sample_size(20);
    for (arms, p) in SHAPES {
        let pool = trained_pool(5, arms, p);
        let mut r = rng(4);
        let batch: Vec<_> = (0..10).map(|t| contextual_actions(&mut r, t, arms, p)).collect();
        group.bench_function(BenchmarkId::from_parameter(arms * p), |b| {
            let (mut policy_rng, mut selection_rng) = (rng(5), rng(6));
            b.iter_batched(
                || pool.clone(),
                |mut pool| {
                    pool.run_batch(&batch, |step, arm| Ok(((step + arm) % 2) as f64), &mut policy_rng, &mut selection_rng)
                        .unwrap();
                    pool
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, belief_update, predictive, kl, pool_batch);
criterion_main!(benches);
