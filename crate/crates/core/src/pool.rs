//! The All-Season meta-bandit.
//!
//! A pool of long-memory LinTS *base* bandits plus one short-memory *shadow*
//! bandit. Each step samples the acting bandit from posterior-predictive
//! weights. At the end of a batch the pool, in order:
//!
//! 1. promotes the shadow into a new base bandit if the shadow played,
//! 2. refreshes the shadow with every observation of the batch,
//! 3. updates each base bandit on the observations it was assigned,
//! 4. prunes the closest pair of bases while there are more than `max_bases`,
//! 5. recomputes the weights from the batch's predictive log-densities.
//!
//! Weights score every member with the belief it held when the batch
//! started, so an observation is never judged by a posterior that has
//! already absorbed it.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{mean_distance, symmetric_kl, GaussianBelief, Observation};
use crate::policy::{ActionSet, BanditId, BanditPolicy, PolicyKind, StepOutcome};

/// Id of the shadow bandit. Base bandits are numbered from 1.
pub const SHADOW_ID: BanditId = 0;

/// Log-weight gap below which a member is treated as having zero weight.
const UNDERFLOW_LOG_GAP: f64 = 700.0;

/// Short-term memory of the shadow bandit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowMemory {
    /// Rebuilt on the last `n` observations of the global stream.
    Window(usize),
    /// Persistent discounted bandit with factor `γ`.
    Discount(f64),
}

impl ShadowMemory {
    fn policy_kind(self) -> PolicyKind {
        match self {
            ShadowMemory::Window(window) => PolicyKind::SlidingWindow { window },
            ShadowMemory::Discount(gamma) => PolicyKind::Discounted { gamma },
        }
    }
}

/// How the closest pair of base bandits is found.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairDistance {
    #[default]
    SymmetricKl,
    MeanDistance,
}

/// Which member of the closest pair is discarded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneVictim {
    /// Larger posterior covariance trace.
    #[default]
    LessCertain,
    /// Smaller posterior covariance trace (ablation).
    MoreCertain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub dim: usize,
    pub regularizer: f64,
    pub noise_variance: f64,
    pub max_bases: usize,
    pub shadow: ShadowMemory,
    pub distance: PairDistance,
    pub victim: PruneVictim,
    /// When false the shadow keeps zero weight and is never promoted,
    /// leaving a fixed set of base bandits.
    pub shadow_enabled: bool,
}

impl PoolConfig {
    pub fn new(dim: usize, max_bases: usize, shadow: ShadowMemory) -> Self {
        Self {
            dim,
            regularizer: 1.0,
            noise_variance: 1.0,
            max_bases,
            shadow,
            distance: PairDistance::default(),
            victim: PruneVictim::default(),
            shadow_enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoolEvent {
    Promoted(BanditId),
    Pruned(BanditId),
    DegenerateWeights,
}

#[derive(Debug, Clone)]
pub struct BanditPool {
    config: PoolConfig,
    bases: Vec<BanditPolicy>,
    base_weights: Vec<f64>,
    shadow: BanditPolicy,
    shadow_weight: f64,
    next_id: BanditId,
    events: Vec<PoolEvent>,
}

impl BanditPool {
    pub fn new(config: PoolConfig) -> Result<Self> {
        if config.max_bases == 0 {
            return Err(Error::invalid("max_bases must be at least 1"));
        }
        let shadow = BanditPolicy::new(
            SHADOW_ID,
            config.shadow.policy_kind(),
            config.dim,
            config.regularizer,
            config.noise_variance,
        )?;
        let first = BanditPolicy::new(
            1,
            PolicyKind::LinTs,
            config.dim,
            config.regularizer,
            config.noise_variance,
        )?;
        let (base_weight, shadow_weight) = if config.shadow_enabled {
            (0.5, 0.5)
        } else {
            (1.0, 0.0)
        };
        Ok(Self {
            config,
            bases: vec![first],
            base_weights: vec![base_weight],
            shadow,
            shadow_weight,
            next_id: 2,
            events: Vec::new(),
        })
    }

    /// A pool seeded with existing base bandits and a fresh shadow. Weights
    /// start uniform over all members. The bound is not enforced until the
    /// next prune.
    pub fn with_bases(config: PoolConfig, bases: Vec<BanditPolicy>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::invalid("a pool needs at least one base bandit"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for b in &bases {
            check_dim(config.dim, b.dim())?;
            if b.id() == SHADOW_ID || !ids.insert(b.id()) {
                return Err(Error::invalid(format!("base bandit id {} is reserved or repeated", b.id())));
            }
        }
        let mut pool = Self::new(config)?;
        let members = bases.len() + usize::from(pool.config.shadow_enabled);
        let w = 1.0 / members as f64;
        pool.base_weights = vec![w; bases.len()];
        pool.shadow_weight = if pool.config.shadow_enabled { w } else { 0.0 };
        pool.next_id = ids.last().expect("non-empty") + 1;
        pool.bases = bases;
        Ok(pool)
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    pub fn bases(&self) -> &[BanditPolicy] {
        &self.bases
    }

    pub fn shadow(&self) -> &BanditPolicy {
        &self.shadow
    }

    pub fn base_count(&self) -> usize {
        self.bases.len()
    }

    pub fn shadow_weight(&self) -> f64 {
        self.shadow_weight
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base_weights
    }

    /// `(id, weight)` for every base followed by the shadow.
    pub fn weights(&self) -> Vec<(BanditId, f64)> {
        self.bases
            .iter()
            .map(|b| b.id())
            .zip(self.base_weights.iter().copied())
            .chain(std::iter::once((SHADOW_ID, self.shadow_weight)))
            .collect()
    }

    pub fn weight_of(&self, id: BanditId) -> Option<f64> {
        if id == SHADOW_ID {
            return Some(self.shadow_weight);
        }
        self.base_index(id).map(|i| self.base_weights[i])
    }

    pub fn member(&self, id: BanditId) -> Option<&BanditPolicy> {
        if id == SHADOW_ID {
            Some(&self.shadow)
        } else {
            self.base_index(id).map(|i| &self.bases[i])
        }
    }

    pub fn events(&self) -> &[PoolEvent] {
        &self.events
    }

    pub fn drain_events(&mut self) -> Vec<PoolEvent> {
        std::mem::take(&mut self.events)
    }

    fn base_index(&self, id: BanditId) -> Option<usize> {
        self.bases.iter().position(|b| b.id() == id)
    }

    /// Samples the acting bandit with probability proportional to its
    /// weight. Degenerate weights fall back to a uniform draw.
    pub fn select_bandit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> BanditId {
        let total: f64 = self.base_weights.iter().sum::<f64>() + self.shadow_weight;
        let valid = total.is_finite()
            && total > 0.0
            && self
                .base_weights
                .iter()
                .chain(std::iter::once(&self.shadow_weight))
                .all(|w| w.is_finite() && *w >= 0.0);
        if !valid {
            self.note_degenerate();
            let members = self.bases.len() + usize::from(self.config.shadow_enabled);
            let pick = rng.random_range(0..members);
            return self.bases.get(pick).map_or(SHADOW_ID, |b| b.id());
        }
        let mut u = rng.random::<f64>() * total;
        let mut last_positive = None;
        for (base, &w) in self.bases.iter().zip(&self.base_weights) {
            if w > 0.0 {
                if u < w {
                    return base.id();
                }
                u -= w;
                last_positive = Some(base.id());
            }
        }
        if self.shadow_weight > 0.0 {
            return SHADOW_ID;
        }
        last_positive.expect("positive total weight")
    }

    /// Runs one batch. `feedback(step, arm)` returns the reward observed
    /// when `arm` is played at position `step` of the batch. Thompson
    /// samples come from `policy_rng`, bandit selection from
    /// `selection_rng`.
    pub fn run_batch<F, R1, R2>(
        &mut self,
        batch: &[ActionSet],
        mut feedback: F,
        policy_rng: &mut R1,
        selection_rng: &mut R2,
    ) -> Result<Vec<StepOutcome>>
    where
        F: FnMut(usize, usize) -> Result<f64>,
        R1: Rng + ?Sized,
        R2: Rng + ?Sized,
    {
        if batch.is_empty() {
            return Err(Error::invalid("batch is empty"));
        }
        let mut assigned: Vec<Vec<Observation>> = vec![Vec::new(); self.bases.len()];
        let mut shadow_assigned = Vec::new();
        let mut observations = Vec::with_capacity(batch.len());
        let mut outcomes = Vec::with_capacity(batch.len());

        for (step, actions) in batch.iter().enumerate() {
            let id = self.select_bandit(selection_rng);
            let slot = if id == SHADOW_ID {
                None
            } else {
                Some(self.base_index(id).expect("selected base exists"))
            };
            let policy = slot.map_or(&self.shadow, |i| &self.bases[i]);
            let arm = policy.play(actions, policy_rng)?;
            let reward = feedback(step, arm)?;
            let obs = Observation::new(actions[arm].clone(), reward);
            match slot {
                Some(i) => assigned[i].push(obs.clone()),
                None => shadow_assigned.push(obs.clone()),
            }
            observations.push(obs);
            outcomes.push(StepOutcome {
                arm,
                reward,
                bandit_id: id,
                pool_size: self.bases.len(),
            });
        }

        // Beliefs have not changed during the batch, so these are the
        // pre-batch predictive scores.
        let (mut scores, shadow_score) = self.log_scores(&observations)?;
        if !shadow_assigned.is_empty() {
            self.promote_shadow()?;
            scores.push(shadow_score);
            assigned.push(Vec::new());
        }
        self.refresh_shadow(&observations)?;
        for (base, obs) in self.bases.iter_mut().zip(&assigned) {
            if !obs.is_empty() {
                base.update(obs)?;
            }
        }
        self.prune_aligned(&mut scores)?;
        self.set_log_weights(&scores, shadow_score);
        Ok(outcomes)
    }

    /// Appends a new LinTS base bandit whose belief is a copy of the
    /// shadow's current belief. The new bandit has zero weight until the
    /// next weight update.
    pub fn promote_shadow(&mut self) -> Result<BanditId> {
        let id = self.next_id;
        self.next_id += 1;
        self.bases
            .push(BanditPolicy::from_belief(id, self.shadow.belief().clone())?);
        self.base_weights.push(0.0);
        self.events.push(PoolEvent::Promoted(id));
        Ok(id)
    }

    /// Feeds the batch to the shadow. A sliding-window shadow ends up
    /// rebuilt on the most recent observations of the global stream; a
    /// discounted shadow keeps its state and discounts.
    pub fn refresh_shadow(&mut self, batch: &[Observation]) -> Result<()> {
        self.shadow.update(batch)
    }

    /// Summed predictive log-densities of the batch under each base
    /// bandit's current belief, and under the shadow's.
    pub fn log_scores(&self, batch: &[Observation]) -> Result<(Vec<f64>, f64)> {
        let score = |belief: &GaussianBelief| -> Result<f64> {
            batch.iter().try_fold(0.0, |acc, o| {
                Ok(acc + belief.predictive_log_density(&o.action, o.reward)?)
            })
        };
        let bases = self
            .bases
            .iter()
            .map(|b| score(b.belief()))
            .collect::<Result<Vec<_>>>()?;
        let shadow = if self.config.shadow_enabled {
            score(self.shadow.belief())?
        } else {
            f64::NEG_INFINITY
        };
        Ok((bases, shadow))
    }

    /// Sets each member's weight to the product of its predictive densities
    /// over `batch`, normalized. An empty batch leaves weights unchanged.
    pub fn update_weights(&mut self, batch: &[Observation]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let (bases, shadow) = self.log_scores(batch)?;
        self.set_log_weights(&bases, shadow);
        Ok(())
    }

    /// Normalizes log-weights with max-subtraction. Falls back to uniform
    /// weights when no member has a finite score.
    pub fn set_log_weights(&mut self, base_scores: &[f64], shadow_score: f64) {
        assert_eq!(base_scores.len(), self.bases.len(), "one score per base bandit");
        let shadow_score = if self.config.shadow_enabled {
            shadow_score
        } else {
            f64::NEG_INFINITY
        };
        let max = base_scores
            .iter()
            .copied()
            .chain(std::iter::once(shadow_score))
            .filter(|s| !s.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            self.note_degenerate();
            let members = self.bases.len() + usize::from(self.config.shadow_enabled);
            let w = 1.0 / members as f64;
            self.base_weights = vec![w; self.bases.len()];
            self.shadow_weight = if self.config.shadow_enabled { w } else { 0.0 };
            return;
        }
        let lift = |s: f64| {
            let gap = s - max;
            if gap.is_nan() || gap < -UNDERFLOW_LOG_GAP {
                0.0
            } else {
                gap.exp()
            }
        };
        let raw: Vec<f64> = base_scores.iter().map(|&s| lift(s)).collect();
        let raw_shadow = lift(shadow_score);
        let total = raw.iter().sum::<f64>() + raw_shadow;
        self.base_weights = raw.into_iter().map(|w| w / total).collect();
        self.shadow_weight = raw_shadow / total;
    }

    /// Removes base bandits until at most `max_bases` remain. Each round
    /// finds the closest pair and discards one member according to the
    /// configured victim rule. Returns the removed ids in removal order.
    pub fn prune(&mut self) -> Result<Vec<BanditId>> {
        let mut scratch = vec![0.0; self.bases.len()];
        self.prune_aligned(&mut scratch)
    }

    fn prune_aligned(&mut self, aligned: &mut Vec<f64>) -> Result<Vec<BanditId>> {
        let mut removed = Vec::new();
        while self.bases.len() > self.config.max_bases && self.bases.len() >= 2 {
            let (i, j) = self.closest_pair()?;
            let ti = self.bases[i].belief().covariance_trace();
            let tj = self.bases[j].belief().covariance_trace();
            // Equal traces discard the newer member, j.
            let victim = match self.config.victim {
                PruneVictim::LessCertain => {
                    if ti > tj {
                        i
                    } else {
                        j
                    }
                }
                PruneVictim::MoreCertain => {
                    if ti < tj {
                        i
                    } else {
                        j
                    }
                }
            };
            let gone = self.bases.remove(victim);
            self.base_weights.remove(victim);
            aligned.remove(victim);
            self.events.push(PoolEvent::Pruned(gone.id()));
            removed.push(gone.id());
        }
        Ok(removed)
    }

    /// Indices `(i, j)`, `i < j`, of the closest pair of base bandits. The
    /// first pair in lexicographic order wins ties.
    pub fn closest_pair(&self) -> Result<(usize, usize)> {
        let n = self.bases.len();
        if n < 2 {
            return Err(Error::invalid("need at least two base bandits"));
        }
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (self.bases[i].belief(), self.bases[j].belief());
                let d = match self.config.distance {
                    PairDistance::SymmetricKl => symmetric_kl(a, b)?,
                    PairDistance::MeanDistance => mean_distance(a, b)?,
                };
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        Ok((best.0, best.1))
    }

    fn note_degenerate(&mut self) {
        warn!("all bandit weights are degenerate; falling back to uniform selection");
        self.events.push(PoolEvent::DegenerateWeights);
    }

    /// Serializable dump of every member's belief and weight.
    pub fn snapshot(&self) -> PoolSnapshot {
        let member = |p: &BanditPolicy, role: &str, weight: f64| {
            let belief = p.belief();
            let d = belief.dim();
            let m = belief.precision();
            MemberSnapshot {
                id: p.id(),
                role: role.to_string(),
                weight,
                precision: (0..d).flat_map(|i| (0..d).map(move |j| m[(i, j)])).collect(),
                information: belief.information().iter().copied().collect(),
            }
        };
        let mut members: Vec<MemberSnapshot> = self
            .bases
            .iter()
            .zip(&self.base_weights)
            .map(|(b, &w)| member(b, "base", w))
            .collect();
        members.push(member(&self.shadow, "shadow", self.shadow_weight));
        PoolSnapshot {
            version: PoolSnapshot::VERSION,
            dim: self.config.dim,
            regularizer: self.config.regularizer,
            noise_variance: self.config.noise_variance,
            member_count: members.len(),
            members,
        }
    }
}

/// Text-serializable pool state. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSnapshot {
    pub version: u32,
    pub dim: usize,
    pub regularizer: f64,
    pub noise_variance: f64,
    pub member_count: usize,
    pub members: Vec<MemberSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSnapshot {
    pub id: BanditId,
    pub role: String,
    pub weight: f64,
    pub precision: Vec<f64>,
    pub information: Vec<f64>,
}

impl PoolSnapshot {
    pub const VERSION: u32 = 1;

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let snap: Self = serde_json::from_str(text)
            .map_err(|e| Error::format(format!("line {}", e.line()), e.to_string()))?;
        if snap.version != Self::VERSION {
            return Err(Error::format(
                "version",
                format!("unsupported snapshot version {}", snap.version),
            ));
        }
        Ok(snap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pool(max_bases: usize) -> BanditPool {
        BanditPool::new(PoolConfig::new(2, max_bases, ShadowMemory::Window(5))).unwrap()
    }

    fn obs(xs: &[f64], r: f64) -> Observation {
        Observation::new(DVector::from_column_slice(xs), r)
    }

    fn trained(id: BanditId, theta: &[f64], n: usize, seed: u64) -> BanditPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = BanditPolicy::new(id, PolicyKind::LinTs, theta.len(), 1.0, 1.0).unwrap();
        let batch: Vec<Observation> = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..theta.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
                obs(&x, r)
            })
            .collect();
        p.update(&batch).unwrap();
        p
    }

    #[test]
    fn fresh_pool_splits_weight_evenly() {
        let mut p = pool(3);
        assert_eq!(p.weights(), vec![(1, 0.5), (SHADOW_ID, 0.5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 20_000;
        let shadow = (0..n).filter(|_| p.select_bandit(&mut rng) == SHADOW_ID).count();
        let f = shadow as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.02, "shadow frequency {f}");
    }

    #[test]
    fn point_mass_always_selects() {
        let mut p = pool(3);
        p.set_log_weights(&[0.0], f64::NEG_INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(p.select_bandit(&mut rng), 1);
        }
    }

    #[test]
    fn all_zero_weights_fall_back_to_uniform() {
        let mut p = pool(3);
        p.promote_shadow().unwrap();
        p.base_weights = vec![0.0, 0.0];
        p.shadow_weight = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = std::collections::BTreeMap::new();
        for _ in 0..3000 {
            *seen.entry(p.select_bandit(&mut rng)).or_insert(0) += 1;
        }
        assert_eq!(seen.len(), 3);
        for &c in seen.values() {
            assert!((800..1200).contains(&c), "{seen:?}");
        }
        assert!(p.events().contains(&PoolEvent::DegenerateWeights));
    }

    #[test]
    fn non_finite_scores_fall_back_to_uniform() {
        let mut p = pool(3);
        p.set_log_weights(&[f64::NEG_INFINITY], f64::NAN);
        assert_eq!(p.weights(), vec![(1, 0.5), (SHADOW_ID, 0.5)]);
    }

    #[test]
    fn identical_beliefs_get_equal_weights() {
        let mut p = pool(3);
        p.update_weights(&[obs(&[1.0, 0.0], 0.3), obs(&[0.2, 0.9], -0.4)]).unwrap();
        assert_abs_diff_eq!(p.base_weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.shadow_weight(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn log_score_gap_sets_weight_ratio() {
        let mut p = pool(3);
        // Ten observations at -1 versus -3 per observation.
        p.set_log_weights(&[-10.0], -30.0);
        let ratio = p.base_weights()[0] / p.shadow_weight();
        assert_abs_diff_eq!(ratio.ln(), 20.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.base_weights()[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn weights_are_shift_invariant() {
        let mut a = pool(3);
        let mut b = pool(3);
        a.promote_shadow().unwrap();
        b.promote_shadow().unwrap();
        a.set_log_weights(&[-3.0, -1.5], -2.0);
        let c = 7.25f64;
        b.set_log_weights(&[-3.0 + c, -1.5 + c], -2.0 + c);
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert_abs_diff_eq!(x.1, y.1, epsilon = 1e-15);
        }
        let total: f64 = a.weights().iter().map(|w| w.1).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn promotion_copies_shadow_belief() {
        let mut p = pool(3);
        let prior_copy = p.promote_shadow().unwrap();
        let fresh = GaussianBelief::new(2, 1.0, 1.0).unwrap();
        let copy = p.member(prior_copy).unwrap();
        assert_eq!(copy.kind(), PolicyKind::LinTs);
        assert_eq!(copy.belief().precision(), fresh.precision());
        assert_eq!(copy.belief().mean(), fresh.mean());

        p.refresh_shadow(&[obs(&[1.0, 2.0], 0.5), obs(&[0.0, 1.0], -1.0)]).unwrap();
        let id = p.promote_shadow().unwrap();
        let (s, c) = (p.shadow().belief(), p.member(id).unwrap().belief());
        assert_eq!(s.precision(), c.precision());
        assert_eq!(s.information(), c.information());
        assert_eq!(s.mean(), c.mean());
        assert_eq!(id, prior_copy + 1);
        assert_eq!(p.base_count(), 3);
    }

    #[test]
    fn shadow_window_truncates_to_recent_stream() {
        let mut p = pool(3);
        let stream: Vec<Observation> = (0..8).map(|i| obs(&[1.0, i as f64], i as f64)).collect();
        p.refresh_shadow(&stream[..3]).unwrap();
        assert_eq!(p.shadow().window().len(), 3);
        p.refresh_shadow(&stream[3..]).unwrap();
        let window: Vec<_> = p.shadow().window().iter().cloned().collect();
        assert_eq!(window, stream[3..].to_vec());
    }

    #[test]
    fn pruning_keeps_the_better_estimated_duplicate() {
        let mut p = pool(2);
        p.bases = vec![
            trained(1, &[1.0, 0.0], 100, 1),
            trained(2, &[-1.0, 1.0], 100, 2),
            trained(3, &[1.0, 0.0], 10, 3),
        ];
        p.base_weights = vec![0.3, 0.3, 0.4];
        let removed = p.prune().unwrap();
        assert_eq!(removed, vec![3]);
        assert_eq!(p.base_count(), 2);

        let mut q = pool(2);
        q.config.victim = PruneVictim::MoreCertain;
        q.bases = vec![
            trained(1, &[1.0, 0.0], 100, 1),
            trained(2, &[-1.0, 1.0], 100, 2),
            trained(3, &[1.0, 0.0], 10, 3),
        ];
        q.base_weights = vec![0.3, 0.3, 0.4];
        assert_eq!(q.prune().unwrap(), vec![1]);
    }

    #[test]
    fn pruning_is_a_no_op_within_budget() {
        let mut p = pool(2);
        p.promote_shadow().unwrap();
        assert!(p.prune().unwrap().is_empty());
        assert_eq!(p.base_count(), 2);
    }

    #[test]
    fn equal_distances_remove_exactly_one() {
        let mut p = pool(2);
        p.promote_shadow().unwrap();
        p.promote_shadow().unwrap();
        assert_eq!(p.prune().unwrap().len(), 1);
        assert_eq!(p.base_count(), 2);
    }

    #[test]
    fn mean_distance_variant_finds_closest_means() {
        let mut p = pool(2);
        p.config.distance = PairDistance::MeanDistance;
        let at = |id, m: [f64; 2]| {
            BanditPolicy::from_belief(
                id,
                GaussianBelief::from_parts(1.0, 1.0, DMatrix::identity(2, 2), DVector::from_column_slice(&m))
                    .unwrap(),
            )
            .unwrap()
        };
        p.bases = vec![at(1, [0.0, 0.0]), at(2, [5.0, 5.0]), at(3, [5.1, 5.0])];
        p.base_weights = vec![0.3; 3];
        assert_eq!(p.closest_pair().unwrap(), (1, 2));
    }

    #[test]
    fn snapshot_round_trips_through_text() {
        let mut p = pool(3);
        p.refresh_shadow(&[obs(&[1.0, 2.0], 0.5)]).unwrap();
        p.promote_shadow().unwrap();
        let snap = p.snapshot();
        assert_eq!(snap.member_count, 3);
        assert_eq!(snap.members[1].precision, vec![2.0, 2.0, 2.0, 5.0]);
        let back = PoolSnapshot::from_text(&snap.to_text()).unwrap();
        assert_eq!(back, snap);
    }

    #[test]
    fn run_batch_rejects_empty_batch() {
        let mut p = pool(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut sel = ChaCha8Rng::seed_from_u64(1);
        assert!(p.run_batch(&[], |_, _| Ok(0.0), &mut rng, &mut sel).is_err());
    }
}
