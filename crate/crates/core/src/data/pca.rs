//! Principal component analysis by eigendecomposition of the sample
//! covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaTarget {
    Components(usize),
    /// Smallest number of components whose ratios sum to at least this.
    VarianceFraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    /// `q × p`, one unit component per row.
    components: DMatrix<f64>,
    explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    /// Fit on the rows of `data` (`n × p`, `n > 1`).
    pub fn fit(data: &DMatrix<f64>, target: PcaTarget) -> Result<Self> {
        let (n, p) = data.shape();
        if n < 2 || p == 0 {
            return Err(Error::invalid(format!("need at least two rows, got {n}")));
        }
        match target {
            PcaTarget::Components(q) if q == 0 || q > p => {
                return Err(Error::invalid(format!(
                    "cannot keep {q} components of {p}-dimensional data"
                )))
            }
            PcaTarget::VarianceFraction(v) if !(v > 0.0 && v <= 1.0) => {
                return Err(Error::invalid(format!("variance fraction {v} outside (0, 1]")))
            }
            _ => {}
        }

        let mean = DVector::from_fn(p, |j, _| data.column(j).mean());
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = (centered.transpose() * &centered) / (n - 1) as f64;
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let values: Vec<f64> = order
            .iter()
            .map(|&i| {
                let v = eig.eigenvalues[i];
                if v < EIGEN_TOLERANCE * top {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        let total: f64 = values.iter().sum();
        let ratios: Vec<f64> = values
            .iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect();

        let q = match target {
            PcaTarget::Components(q) => q,
            PcaTarget::VarianceFraction(v) => {
                let mut acc = 0.0;
                let mut q = p;
                for (i, r) in ratios.iter().enumerate() {
                    acc += r;
                    if acc >= v {
                        q = i + 1;
                        break;
                    }
                }
                q
            }
        };

        let mut components = DMatrix::zeros(q, p);
        for (row, &i) in order.iter().take(q).enumerate() {
            let mut c = eig.eigenvectors.column(i).into_owned();
            let pivot = c.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                c.neg_mut();
            }
            components.row_mut(row).copy_from(&c.transpose());
        }

        Ok(Self {
            mean,
            components,
            explained_variance_ratio: ratios[..q].to_vec(),
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    /// `(x − mean) · Cᵀ`.
    pub fn transform_row(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.input_dim(), x.len())?;
        Ok(&self.components * (x - &self.mean))
    }

    pub fn transform(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.input_dim(), rows.ncols())?;
        let mut centered = rows.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.components.transpose())
    }

    pub fn inverse_transform_row(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.n_components(), z.len())?;
        Ok(self.components.transpose() * z + &self.mean)
    }
}
