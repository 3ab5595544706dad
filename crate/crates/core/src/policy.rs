//! Action-selection policies: linear Thompson sampling and its passively
//! forgetting variants, plus a uniform-random baseline.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{GaussianBelief, Observation};

/// Stable label of a bandit. Ids come from a monotone counter and are
/// never reused.
pub type BanditId = u64;

/// The actions available at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    t: usize,
    actions: Vec<DVector<f64>>,
}

impl ActionSet {
    pub fn new(t: usize, actions: Vec<DVector<f64>>) -> Result<Self> {
        let first = actions
            .first()
            .ok_or_else(|| Error::invalid("action set is empty"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("actions must have positive dimension"));
        }
        for a in &actions {
            check_dim(dim, a.len())?;
        }
        Ok(Self { t, actions })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn get(&self, index: usize) -> Option<&DVector<f64>> {
        self.actions.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.actions.iter()
    }
}

impl std::ops::Index<usize> for ActionSet {
    type Output = DVector<f64>;

    fn index(&self, index: usize) -> &DVector<f64> {
        &self.actions[index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    LinTs,
    /// Belief rebuilt from the last `window` observations.
    SlidingWindow { window: usize },
    /// Exponential forgetting with factor `gamma` in (0, 1].
    Discounted { gamma: f64 },
    Random,
}

impl PolicyKind {
    fn validate(&self) -> Result<()> {
        match *self {
            PolicyKind::SlidingWindow { window: 0 } => {
                Err(Error::invalid("sliding window must hold at least one observation"))
            }
            PolicyKind::Discounted { gamma } if !(gamma > 0.0 && gamma <= 1.0) => {
                Err(Error::invalid(format!("discount {gamma} outside (0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// What happened at one step of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub arm: usize,
    pub reward: f64,
    pub bandit_id: BanditId,
    pub pool_size: usize,
}

#[derive(Debug, Clone)]
pub struct BanditPolicy {
    id: BanditId,
    kind: PolicyKind,
    prior: GaussianBelief,
    belief: GaussianBelief,
    window: VecDeque<Observation>,
}

impl BanditPolicy {
    pub fn new(
        id: BanditId,
        kind: PolicyKind,
        dim: usize,
        regularizer: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        kind.validate()?;
        let prior = GaussianBelief::new(dim, regularizer, noise_variance)?;
        Ok(Self {
            id,
            kind,
            belief: prior.clone(),
            prior,
            window: VecDeque::new(),
        })
    }

    /// A LinTS policy starting from an existing belief.
    pub fn from_belief(id: BanditId, belief: GaussianBelief) -> Result<Self> {
        let prior =
            GaussianBelief::new(belief.dim(), belief.regularizer(), belief.noise_variance())?;
        Ok(Self {
            id,
            kind: PolicyKind::LinTs,
            prior,
            belief,
            window: VecDeque::new(),
        })
    }

    pub fn id(&self) -> BanditId {
        self.id
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn belief(&self) -> &GaussianBelief {
        &self.belief
    }

    pub fn dim(&self) -> usize {
        self.belief.dim()
    }

    /// Sliding-window buffer, oldest first. Empty for other kinds.
    pub fn window(&self) -> &VecDeque<Observation> {
        &self.window
    }

    /// Belief rebuilt from the prior and the window buffer alone.
    pub fn rebuild_from_window(&self) -> Result<GaussianBelief> {
        let mut belief = self.prior.clone();
        belief.update(self.window.iter())?;
        Ok(belief)
    }

    /// Picks an action index. Thompson kinds sample `θ̂` from the belief and
    /// maximize `<θ̂, x>`; maximizers tie-break uniformly at random.
    pub fn play<R: Rng + ?Sized>(&self, actions: &ActionSet, rng: &mut R) -> Result<usize> {
        if actions.is_empty() {
            return Err(Error::invalid("action set is empty"));
        }
        if let PolicyKind::Random = self.kind {
            return Ok(rng.random_range(0..actions.len()));
        }
        check_dim(self.dim(), actions.dim())?;
        let theta = self.belief.sample(rng)?;
        argmax_uniform_ties(actions.iter().map(|x| theta.dot(x)), rng)
    }

    pub fn update(&mut self, batch: &[Observation]) -> Result<()> {
        for obs in batch {
            obs.check(self.dim())?;
        }
        match self.kind {
            PolicyKind::LinTs => self.belief.update(batch),
            PolicyKind::Discounted { gamma } => self.belief.discounted_update(batch, gamma),
            PolicyKind::Random => Ok(()),
            PolicyKind::SlidingWindow { window } => {
                if batch.is_empty() {
                    return Ok(());
                }
                self.window.extend(batch.iter().cloned());
                while self.window.len() > window {
                    self.window.pop_front();
                }
                self.belief = self.rebuild_from_window()?;
                Ok(())
            }
        }
    }

    /// Plays every action set of a batch, then absorbs all of the batch's
    /// observations in one update. `feedback(step, arm)` returns the reward.
    pub fn run_batch<R, F>(
        &mut self,
        batch: &[ActionSet],
        mut feedback: F,
        rng: &mut R,
    ) -> Result<Vec<StepOutcome>>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let mut outcomes = Vec::with_capacity(batch.len());
        let mut observations = Vec::with_capacity(batch.len());
        for (step, actions) in batch.iter().enumerate() {
            let arm = self.play(actions, rng)?;
            let reward = feedback(step, arm)?;
            observations.push(Observation::new(actions[arm].clone(), reward));
            outcomes.push(StepOutcome {
                arm,
                reward,
                bandit_id: self.id,
                pool_size: 1,
            });
        }
        self.update(&observations)?;
        Ok(outcomes)
    }
}

/// Index of the maximal score; exact ties are broken uniformly.
pub(crate) fn argmax_uniform_ties<I, R>(scores: I, rng: &mut R) -> Result<usize>
where
    I: IntoIterator<Item = f64>,
    R: Rng + ?Sized,
{
    let mut best = f64::NEG_INFINITY;
    let mut winners: Vec<usize> = Vec::new();
    for (i, s) in scores.into_iter().enumerate() {
        if s.is_nan() {
            return Err(Error::Numeric("NaN action score".into()));
        }
        if s > best || winners.is_empty() {
            best = s;
            winners.clear();
            winners.push(i);
        } else if s == best {
            winners.push(i);
        }
    }
    match winners.len() {
        0 => Err(Error::invalid("action set is empty")),
        1 => Ok(winners[0]),
        n => Ok(winners[rng.random_range(0..n)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn obs(xs: &[f64], r: f64) -> Observation {
        Observation::new(v(xs), r)
    }

    #[test]
    fn empty_action_set_is_rejected() {
        assert!(matches!(ActionSet::new(0, vec![]), Err(Error::InvalidArgument(_))));
        assert!(ActionSet::new(0, vec![v(&[1.0]), v(&[1.0, 2.0])]).is_err());
    }

    #[test]
    fn dominated_arm_is_never_chosen() {
        let belief = GaussianBelief::from_parts(
            1.0,
            1.0,
            DMatrix::from_diagonal_element(2, 2, 1e9),
            v(&[1e9, 0.0]),
        )
        .unwrap();
        let policy = BanditPolicy::from_belief(1, belief).unwrap();
        let actions = ActionSet::new(0, vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            assert_eq!(policy.play(&actions, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn random_policy_is_uniform() {
        let policy = BanditPolicy::new(0, PolicyKind::Random, 1, 1.0, 1.0).unwrap();
        let actions = ActionSet::new(0, (0..10).map(|i| v(&[i as f64])).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 10];
        let n = 100_000;
        for _ in 0..n {
            counts[policy.play(&actions, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((0.09..=0.11).contains(&f), "frequency {f}");
        }
    }

    #[test]
    fn identical_actions_split_evenly() {
        let policy = BanditPolicy::new(0, PolicyKind::LinTs, 2, 1.0, 1.0).unwrap();
        let actions = ActionSet::new(0, vec![v(&[0.6, 0.8]), v(&[0.6, 0.8])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let first = (0..n)
            .filter(|_| policy.play(&actions, &mut rng).unwrap() == 0)
            .count();
        let f = first as f64 / n as f64;
        // 5 standard deviations of a fair Bernoulli mean over 1e4 trials.
        assert!((f - 0.5).abs() < 0.025, "frequency {f}");
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = v(&[0.3, -1.2, 0.5]);
        let xs = [v(&[1.0, 0.0, 0.2]), v(&[0.1, -0.4, 0.9]), v(&[-0.5, 0.5, 0.5])];
        let base = argmax_uniform_ties(xs.iter().map(|x| theta.dot(x)), &mut rng).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let scaled = argmax_uniform_ties(xs.iter().map(|x| theta.dot(&(x * c))), &mut rng);
            assert_eq!(scaled.unwrap(), base);
        }
    }

    #[test]
    fn sliding_window_keeps_only_recent_observations() {
        let mut p = BanditPolicy::new(0, PolicyKind::SlidingWindow { window: 1 }, 1, 1.0, 1.0)
            .unwrap();
        p.update(&[obs(&[1.0], 0.0)]).unwrap();
        p.update(&[obs(&[1.0], 1.0)]).unwrap();
        assert_eq!(p.window().len(), 1);
        assert_abs_diff_eq!(p.belief().mean()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn wide_window_matches_lints() {
        let stream: Vec<Vec<Observation>> = (0..5)
            .map(|b| {
                (0..3)
                    .map(|k| obs(&[(b + k) as f64 * 0.1, 1.0 - k as f64 * 0.3], b as f64 - k as f64))
                    .collect()
            })
            .collect();
        let mut lin = BanditPolicy::new(0, PolicyKind::LinTs, 2, 1.0, 1.0).unwrap();
        let mut sw =
            BanditPolicy::new(1, PolicyKind::SlidingWindow { window: 100 }, 2, 1.0, 1.0).unwrap();
        for batch in &stream {
            lin.update(batch).unwrap();
            sw.update(batch).unwrap();
        }
        assert_eq!(lin.belief().precision(), sw.belief().precision());
        assert_eq!(lin.belief().information(), sw.belief().information());
        assert!((lin.belief().mean() - sw.belief().mean()).amax() <= 1e-12);
    }

    #[test]
    fn invalid_kinds_are_rejected() {
        assert!(BanditPolicy::new(0, PolicyKind::SlidingWindow { window: 0 }, 2, 1.0, 1.0).is_err());
        assert!(BanditPolicy::new(0, PolicyKind::Discounted { gamma: 0.0 }, 2, 1.0, 1.0).is_err());
        assert!(BanditPolicy::new(0, PolicyKind::Discounted { gamma: 1.5 }, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn update_rejects_wrong_dimension() {
        let mut p =
            BanditPolicy::new(0, PolicyKind::SlidingWindow { window: 3 }, 2, 1.0, 1.0).unwrap();
        assert!(p.update(&[obs(&[1.0], 1.0)]).is_err());
        assert!(p.window().is_empty());
    }

    #[test]
    fn random_policy_ignores_updates() {
        let mut p = BanditPolicy::new(0, PolicyKind::Random, 2, 1.0, 1.0).unwrap();
        p.update(&[obs(&[1.0, 1.0], 1.0)]).unwrap();
        assert_eq!(p.belief().precision(), &DMatrix::identity(2, 2));
    }
}
