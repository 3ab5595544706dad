//! Conjugate Gaussian linear-model beliefs.
//!
//! A belief over a reward parameter `θ` under the model
//!
//! ```text
//!   θ ~ N(0, λ⁻¹ I)
//!   r | θ, x ~ N(<θ, x>, σ²)
//! ```
//!
//! is stored in information form: precision `M = λI + Σ x xᵀ`, information
//! vector `b = Σ r x`, and the derived mean `μ = M⁻¹ b`. The lower Cholesky
//! factor of `M` is cached after every update and drives sampling,
//! predictive densities, traces and divergences.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

/// Largest accepted relative residual `‖Mμ − b‖ / ‖b‖` of the mean solve.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

/// A contextualized action together with the reward observed for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub action: DVector<f64>,
    pub reward: f64,
}

impl Observation {
    pub fn new(action: DVector<f64>, reward: f64) -> Self {
        Self { action, reward }
    }

    pub fn dim(&self) -> usize {
        self.action.len()
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        check_dim(dim, self.action.len())?;
        if !self.reward.is_finite() || self.action.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observation has non-finite entries"));
        }
        Ok(())
    }
}

/// Gaussian posterior over a linear reward parameter.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    regularizer: f64,
    noise_variance: f64,
    precision: DMatrix<f64>,
    information: DVector<f64>,
    mean: DVector<f64>,
    /// Lower Cholesky factor of `precision`.
    factor: DMatrix<f64>,
    /// `M⁻¹`, computed on first use after each refresh.
    covariance: OnceLock<DMatrix<f64>>,
}

impl GaussianBelief {
    /// Prior belief: `M = λI`, `b = 0`, `μ = 0`.
    pub fn new(dim: usize, regularizer: f64, noise_variance: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("belief dimension must be at least 1"));
        }
        check_hyper(regularizer, noise_variance)?;
        let precision = DMatrix::from_diagonal_element(dim, dim, regularizer);
        let factor = DMatrix::from_diagonal_element(dim, dim, regularizer.sqrt());
        Ok(Self {
            regularizer,
            noise_variance,
            precision,
            information: DVector::zeros(dim),
            mean: DVector::zeros(dim),
            factor,
            covariance: OnceLock::new(),
        })
    }

    /// Builds a belief from an explicit precision matrix and information
    /// vector. The precision must be symmetric positive definite.
    pub fn from_parts(
        regularizer: f64,
        noise_variance: f64,
        precision: DMatrix<f64>,
        information: DVector<f64>,
    ) -> Result<Self> {
        check_hyper(regularizer, noise_variance)?;
        let dim = information.len();
        if dim == 0 {
            return Err(Error::invalid("belief dimension must be at least 1"));
        }
        if precision.nrows() != dim || precision.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: precision.nrows(),
            });
        }
        let scale = precision.amax().max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in 0..i {
                if (precision[(i, j)] - precision[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid("precision matrix is not symmetric"));
                }
            }
        }
        let mut belief = Self {
            regularizer,
            noise_variance,
            precision,
            information,
            mean: DVector::zeros(dim),
            factor: DMatrix::zeros(dim, dim),
            covariance: OnceLock::new(),
        };
        belief.refresh()?;
        Ok(belief)
    }

    pub fn dim(&self) -> usize {
        self.information.len()
    }

    pub fn regularizer(&self) -> f64 {
        self.regularizer
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn information(&self) -> &DVector<f64> {
        &self.information
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = M`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Adds the observations one at a time to `M` and `b`, then re-solves
    /// for the mean. An empty batch leaves the belief untouched.
    pub fn update<'a, I>(&mut self, batch: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a Observation>,
        I::IntoIter: Clone,
    {
        let iter = batch.into_iter();
        let dim = self.dim();
        let mut any = false;
        for obs in iter.clone() {
            obs.check(dim)?;
            any = true;
        }
        if !any {
            return Ok(());
        }
        for obs in iter {
            add_outer(&mut self.precision, &obs.action);
            add_scaled(&mut self.information, obs.reward, &obs.action);
        }
        self.refresh()
    }

    /// Exponentially discounted update. For each observation in order:
    /// `M ← γM + x xᵀ + (1 − γ)λI` and `b ← γb + r x`. With `γ = 1` the
    /// arithmetic is identical to [`GaussianBelief::update`].
    pub fn discounted_update<'a, I>(&mut self, batch: I, gamma: f64) -> Result<()>
    where
        I: IntoIterator<Item = &'a Observation>,
        I::IntoIter: Clone,
    {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid(format!("discount {gamma} outside (0, 1]")));
        }
        let iter = batch.into_iter();
        let dim = self.dim();
        let mut any = false;
        for obs in iter.clone() {
            obs.check(dim)?;
            any = true;
        }
        if !any {
            return Ok(());
        }
        let injection = (1.0 - gamma) * self.regularizer;
        for obs in iter {
            self.precision.iter_mut().for_each(|v| *v *= gamma);
            add_outer(&mut self.precision, &obs.action);
            for i in 0..dim {
                self.precision[(i, i)] += injection;
            }
            self.information.iter_mut().for_each(|v| *v *= gamma);
            add_scaled(&mut self.information, obs.reward, &obs.action);
        }
        self.refresh()
    }

    /// Draws `θ = μ + L⁻ᵀ z` with `z ~ N(0, I)`, a sample from `N(μ, M⁻¹)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let offset = self
            .factor
            .tr_solve_lower_triangular(&z)
            .ok_or_else(|| Error::Numeric("singular Cholesky factor while sampling".into()))?;
        Ok(&self.mean + offset)
    }

    /// Predictive mean `<μ, x>` and variance `σ² + xᵀM⁻¹x` of a reward.
    pub fn predictive(&self, action: &DVector<f64>) -> Result<(f64, f64)> {
        check_dim(self.dim(), action.len())?;
        let mean = self.mean.dot(action);
        let whitened = self
            .factor
            .solve_lower_triangular(action)
            .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
        Ok((mean, self.noise_variance + whitened.norm_squared()))
    }

    /// Log posterior-predictive density of reward `r` for action `x`.
    pub fn predictive_log_density(&self, action: &DVector<f64>, reward: f64) -> Result<f64> {
        let (mean, variance) = self.predictive(action)?;
        Ok(log_normal_pdf(reward, mean, variance))
    }

    /// Posterior covariance `M⁻¹ = L⁻ᵀ L⁻¹`, cached until the next update.
    pub fn covariance(&self) -> &DMatrix<f64> {
        self.covariance.get_or_init(|| inverse_from_factor(&self.factor))
    }

    /// `tr(M⁻¹)`.
    pub fn covariance_trace(&self) -> f64 {
        self.covariance().trace()
    }

    fn refresh(&mut self) -> Result<()> {
        let chol = nalgebra::Cholesky::new(self.precision.clone()).ok_or_else(|| {
            Error::Numeric("precision matrix is not positive definite".into())
        })?;
        let mean = chol.solve(&self.information);
        let rhs_norm = self.information.norm();
        if rhs_norm > 0.0 {
            let residual = (&self.precision * &mean - &self.information).norm() / rhs_norm;
            // NaN residuals fail too.
            if residual.is_nan() || residual > SOLVE_TOLERANCE {
                return Err(Error::Numeric(format!(
                    "mean solve residual {residual:e} exceeds {SOLVE_TOLERANCE:e}"
                )));
            }
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite posterior mean".into()));
        }
        self.factor = chol.unpack();
        self.mean = mean;
        self.covariance = OnceLock::new();
        Ok(())
    }
}

/// `(L Lᵀ)⁻¹ = WᵀW` with `W = L⁻¹`. Zeros in `L` are skipped, so
/// block-diagonal precisions (contextualized actions) cost per block.
fn inverse_from_factor(factor: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = factor.nrows();
    let mut w = DMatrix::zeros(dim, dim);
    // Row range [lo, hi) of the nonzeros of each column of W.
    let mut ranges = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut col = vec![0.0; dim];
        col[j] = 1.0;
        let mut hi = j + 1;
        for k in j..dim {
            if col[k] == 0.0 {
                continue;
            }
            col[k] /= factor[(k, k)];
            hi = k + 1;
            let ck = col[k];
            for i in k + 1..dim {
                let l = factor[(i, k)];
                if l != 0.0 {
                    col[i] -= l * ck;
                }
            }
        }
        w.column_mut(j).copy_from_slice(&col);
        ranges.push((j, hi));
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let (lo_j, hi_j) = ranges[j];
        for i in j..dim {
            let (lo_i, hi_i) = ranges[i];
            let (lo, hi) = (lo_i.max(lo_j), hi_i.min(hi_j));
            let mut sum = 0.0;
            for k in lo..hi {
                sum += w[(k, i)] * w[(k, j)];
            }
            cov[(i, j)] = sum;
            cov[(j, i)] = sum;
        }
    }
    cov
}

fn check_hyper(regularizer: f64, noise_variance: f64) -> Result<()> {
    if !(regularizer > 0.0 && regularizer.is_finite()) {
        return Err(Error::invalid(format!("regularizer must be positive, got {regularizer}")));
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::invalid(format!(
            "noise variance must be positive, got {noise_variance}"
        )));
    }
    Ok(())
}

/// `M += x xᵀ`, touching only the nonzero support of `x`.
fn add_outer(matrix: &mut DMatrix<f64>, x: &DVector<f64>) {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    for &j in &support {
        let xj = x[j];
        for &i in &support {
            matrix[(i, j)] += x[i] * xj;
        }
    }
}

fn add_scaled(target: &mut DVector<f64>, scale: f64, x: &DVector<f64>) {
    for (t, &v) in target.iter_mut().zip(x.iter()) {
        if v != 0.0 {
            *t += scale * v;
        }
    }
}

pub fn log_normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let diff = x - mean;
    -0.5 * (2.0 * PI * variance).ln() - diff * diff / (2.0 * variance)
}

/// Symmetric Kullback-Leibler divergence `KL(p‖q) + KL(q‖p)` between the two
/// posteriors:
///
/// ```text
///   ½ tr(Σ₂⁻¹Σ₁ + Σ₁⁻¹Σ₂) − d + ½ (μ₂ − μ₁)ᵀ(Σ₁⁻¹ + Σ₂⁻¹)(μ₂ − μ₁)
/// ```
///
/// with `Σᵢ = Mᵢ⁻¹`. The expression is evaluated so that swapping the
/// arguments gives a bitwise-identical result.
pub fn symmetric_kl(a: &GaussianBelief, b: &GaussianBelief) -> Result<f64> {
    let dim = a.dim();
    check_dim(dim, b.dim())?;
    // Both matrices are symmetric, so tr(M_q Σ_p) is an elementwise sum.
    let cross = |p: &GaussianBelief, q: &GaussianBelief| p.covariance().dot(&q.precision);
    let traces = cross(a, b) + cross(b, a);
    let mut quad = 0.0;
    for j in 0..dim {
        let dj = b.mean[j] - a.mean[j];
        for i in 0..dim {
            let di = b.mean[i] - a.mean[i];
            quad += di * (a.precision[(i, j)] + b.precision[(i, j)]) * dj;
        }
    }
    Ok(0.5 * traces - dim as f64 + 0.5 * quad)
}

/// Euclidean distance between posterior means.
pub fn mean_distance(a: &GaussianBelief, b: &GaussianBelief) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok((&a.mean - &b.mean).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(action: &[f64], reward: f64) -> Observation {
        Observation::new(DVector::from_column_slice(action), reward)
    }

    fn one_dim(mean: f64, variance: f64) -> GaussianBelief {
        let precision = 1.0 / variance;
        GaussianBelief::from_parts(
            1.0,
            1.0,
            DMatrix::from_element(1, 1, precision),
            DVector::from_element(1, precision * mean),
        )
        .unwrap()
    }

    #[test]
    fn prior_is_scaled_identity() {
        let b = GaussianBelief::new(2, 1.0, 1.0).unwrap();
        assert_eq!(b.precision(), &DMatrix::identity(2, 2));
        assert_eq!(b.information(), &DVector::zeros(2));
        assert_eq!(b.mean(), &DVector::zeros(2));

        let b = GaussianBelief::new(1, 5.0, 1.0).unwrap();
        assert_eq!(b.precision()[(0, 0)], 5.0);
        assert_eq!(b.mean()[0], 0.0);
    }

    #[test]
    fn rejects_degenerate_hyperparameters() {
        assert!(matches!(GaussianBelief::new(0, 1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(GaussianBelief::new(2, 0.0, 1.0).is_err());
        assert!(GaussianBelief::new(2, 1.0, -1.0).is_err());
        assert!(GaussianBelief::new(2, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn single_observation_ridge_solution() {
        let mut b = GaussianBelief::new(1, 1.0, 1.0).unwrap();
        b.update(&[obs(&[1.0], 1.0)]).unwrap();
        assert_eq!(b.precision()[(0, 0)], 2.0);
        assert_eq!(b.information()[0], 1.0);
        assert_abs_diff_eq!(b.mean()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.covariance_trace(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn coordinatewise_ridge_solution() {
        let mut b = GaussianBelief::new(2, 1.0, 1.0).unwrap();
        b.update(&[obs(&[1.0, 0.0], 1.0), obs(&[0.0, 1.0], 2.0)]).unwrap();
        assert_abs_diff_eq!(b.mean()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.mean()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_batch_is_identity() {
        let mut b = GaussianBelief::new(3, 2.0, 1.0).unwrap();
        b.update(&[obs(&[1.0, 2.0, 3.0], 0.3)]).unwrap();
        let before = b.clone();
        b.update(&[]).unwrap();
        assert_eq!(b.precision(), before.precision());
        assert_eq!(b.information(), before.information());
        assert_eq!(b.mean(), before.mean());
    }

    #[test]
    fn dimension_mismatch_leaves_belief_untouched() {
        let mut b = GaussianBelief::new(2, 1.0, 1.0).unwrap();
        let err = b.update(&[obs(&[1.0, 0.0], 1.0), obs(&[1.0], 1.0)]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, actual: 1 }));
        assert_eq!(b.precision(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn near_zero_covariance_samples_the_mean() {
        let b = GaussianBelief::from_parts(
            1.0,
            1.0,
            DMatrix::from_diagonal_element(3, 3, 1e9),
            DVector::zeros(3),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = b.sample(&mut rng).unwrap();
        assert!(s.amax() < 1e-3);
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let mut b = GaussianBelief::new(4, 1.0, 1.0).unwrap();
        b.update(&[obs(&[1.0, 0.5, 0.0, -1.0], 0.2)]).unwrap();
        let s1 = b.sample(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let s2 = b.sample(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn unit_precision_samples_have_unit_variance() {
        let b = GaussianBelief::new(1, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| b.sample(&mut rng).unwrap()[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((0.97..=1.03).contains(&var), "variance {var}");
    }

    #[test]
    fn predictive_density_of_prior() {
        let b = GaussianBelief::new(1, 1.0, 1.0).unwrap();
        let x = DVector::from_element(1, 1.0);
        // N(0; 0, 2)
        let expected = -0.5 * (4.0 * PI).ln();
        assert_abs_diff_eq!(b.predictive_log_density(&x, 0.0).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, -1.265_512_123_484_645, epsilon = 1e-12);
    }

    #[test]
    fn zero_action_has_noise_variance_only() {
        let mut b = GaussianBelief::new(3, 1.0, 0.3).unwrap();
        b.update(&[obs(&[1.0, 2.0, 0.0], 1.0)]).unwrap();
        let (mean, var) = b.predictive(&DVector::zeros(3)).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(var, 0.3);
    }

    #[test]
    fn predictive_mode_is_at_the_mean() {
        let mut b = GaussianBelief::new(2, 1.0, 1.0).unwrap();
        b.update(&[obs(&[1.0, 0.5], 0.7)]).unwrap();
        let x = DVector::from_column_slice(&[0.3, -1.0]);
        let m = b.mean().dot(&x);
        let at_mode = b.predictive_log_density(&x, m).unwrap();
        for delta in [-1.0, -1e-3, 1e-3, 0.5] {
            assert!(b.predictive_log_density(&x, m + delta).unwrap() < at_mode);
        }
    }

    #[test]
    fn kl_closed_form_values() {
        let a = one_dim(0.0, 1.0);
        assert_abs_diff_eq!(symmetric_kl(&a, &a).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(symmetric_kl(&a, &one_dim(1.0, 1.0)).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(symmetric_kl(&a, &one_dim(0.0, 2.0)).unwrap(), 0.25, epsilon = 1e-10);
    }

    #[test]
    fn kl_dimension_mismatch() {
        let a = GaussianBelief::new(2, 1.0, 1.0).unwrap();
        let b = GaussianBelief::new(3, 1.0, 1.0).unwrap();
        assert!(matches!(symmetric_kl(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn covariance_inverts_precision() {
        let mut b = GaussianBelief::new(6, 0.5, 1.0).unwrap();
        b.update(&[
            obs(&[1.0, 2.0, 0.0, 0.0, 0.0, 0.0], 0.3),
            obs(&[0.0, 0.0, 0.0, 1.0, -1.0, 0.5], 1.0),
            obs(&[0.2, 0.0, 0.0, 0.0, 3.0, 0.0], -0.4),
        ])
        .unwrap();
        let product = b.precision() * b.covariance();
        assert!((product - DMatrix::<f64>::identity(6, 6)).amax() < 1e-12);
        assert_eq!(b.covariance(), &b.covariance().transpose());
    }

    #[test]
    fn covariance_trace_of_priors() {
        assert_abs_diff_eq!(
            GaussianBelief::new(5, 1.0, 1.0).unwrap().covariance_trace(),
            5.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            GaussianBelief::new(4, 2.0, 1.0).unwrap().covariance_trace(),
            2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn discount_of_one_matches_plain_update() {
        let batch = [obs(&[1.0, -0.5, 0.0], 0.4), obs(&[0.2, 0.1, 0.9], -1.0)];
        let mut plain = GaussianBelief::new(3, 1.0, 1.0).unwrap();
        let mut disc = plain.clone();
        plain.update(&batch).unwrap();
        disc.discounted_update(&batch, 1.0).unwrap();
        assert_eq!(plain.precision(), disc.precision());
        assert_eq!(plain.information(), disc.information());
        assert_eq!(plain.mean(), disc.mean());
    }

    #[test]
    fn from_parts_rejects_indefinite_precision() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianBelief::from_parts(1.0, 1.0, m, DVector::zeros(2)),
            Err(Error::Numeric(_))
        ));
    }
}
