//! Dimensionality reduction behind a small trait, with PCA as the default.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};

use crate::error::{GenexError, Result};

pub trait Reducer: Send + Sync {
    fn reduce(&self, points: &Array2<f64>, target_dim: usize) -> Result<Array2<f64>>;
}

/// Principal component analysis.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pca;

impl Reducer for Pca {
    fn reduce(&self, points: &Array2<f64>, target_dim: usize) -> Result<Array2<f64>> {
        Ok(PcaFit::fit(points, target_dim)?.transform(points))
    }
}

#[derive(Debug, Clone)]
pub struct PcaFit {
    pub mean: Array1<f64>,
    /// target x d, orthonormal rows (zero rows where the data has no more rank).
    pub components: Array2<f64>,
    /// Eigenvalues of the (1/n) covariance, descending, `min(n, d)` of them.
    pub eigenvalues: Vec<f64>,
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

impl PcaFit {
    pub fn fit(points: &Array2<f64>, target_dim: usize) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 {
            return Err(GenexError::invalid("no points to reduce"));
        }
        if target_dim > d {
            return Err(GenexError::invalid(format!("target dimension {target_dim} exceeds {d}")));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(GenexError::invalid("non-finite point coordinate"));
        }
        let mean = points.mean_axis(Axis(0)).expect("n > 0");
        let centered = points - &mean;
        let mut components = Array2::zeros((target_dim, d));
        let eigenvalues;
        if d <= n {
            let cov = centered.t().dot(&centered) / n as f64;
            let (values, vectors) = sorted_eigen(DMatrix::from_fn(d, d, |r, c| cov[[r, c]]));
            for k in 0..target_dim {
                for j in 0..d {
                    components[[k, j]] = vectors[(j, k)];
                }
            }
            eigenvalues = values;
        } else {
            // n < d: eigen-decompose the Gram matrix instead.
            let gram = centered.dot(&centered.t()) / n as f64;
            let (values, vectors) = sorted_eigen(DMatrix::from_fn(n, n, |r, c| gram[[r, c]]));
            let scale = values.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
            for k in 0..target_dim.min(n) {
                if values[k] <= 1e-12 * scale || values[k] <= 0.0 {
                    continue;
                }
                let u = Array1::from_iter((0..n).map(|i| vectors[(i, k)]));
                let v = centered.t().dot(&u);
                let norm = v.dot(&v).sqrt();
                if norm > 0.0 {
                    components.row_mut(k).assign(&(v / norm));
                }
            }
            eigenvalues = values;
        }
        // sign convention: largest-magnitude loading is positive
        for mut row in components.rows_mut() {
            let mut pivot = 0;
            for j in 0..row.len() {
                if row[j].abs() > row[pivot].abs() {
                    pivot = j;
                }
            }
            if row[pivot] < 0.0 {
                row.mapv_inplace(|v| -v);
            }
        }
        Ok(Self {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn transform(&self, points: &Array2<f64>) -> Array2<f64> {
        (points - &self.mean).dot(&self.components.t())
    }

    pub fn inverse_transform(&self, scores: &Array2<f64>) -> Array2<f64> {
        scores.dot(&self.components) + &self.mean
    }

    pub fn captured_variance_ratio(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.eigenvalues.iter().take(self.components.nrows()).sum::<f64>() / total
    }
}

/// PCA projection to `target_dim` coordinates.
pub fn reduce_dim(points: &Array2<f64>, target_dim: usize) -> Result<Array2<f64>> {
    Pca.reduce(points, target_dim)
}
