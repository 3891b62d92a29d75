//! Diagonal-covariance Gaussian mixture fitted by expectation-maximisation.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GenexError, Result};
use crate::seed;

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the mean log-likelihood improves by less than this.
    pub tol: f64,
    pub variance_floor: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iter: 200,
            tol: 1e-6,
            variance_floor: VARIANCE_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    /// K x d
    pub means: Array2<f64>,
    /// K x d diagonal covariances, every entry at least the floor.
    pub variances: Array2<f64>,
    pub weights: Array1<f64>,
    /// Mean per-point log-likelihood of the returned parameters.
    pub log_likelihood: f64,
    /// Mean log-likelihood after every E-step of the winning restart.
    pub log_likelihood_trace: Vec<f64>,
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// `ln w_k + ln N(x; mu_k, Sigma_k)` for component `k`.
    pub fn weighted_log_density(&self, k: usize, x: ArrayView1<'_, f64>) -> f64 {
        self.weights[k].ln() + log_gaussian(x, self.means.row(k), self.variances.row(k))
    }
}

fn log_gaussian(x: ArrayView1<'_, f64>, mean: ArrayView1<'_, f64>, var: ArrayView1<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..x.len() {
        let diff = x[j] - mean[j];
        acc += (2.0 * std::f64::consts::PI * var[j]).ln() + diff * diff / var[j];
    }
    -0.5 * acc
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_points(points: &Array2<f64>) -> Result<()> {
    if points.iter().any(|v| !v.is_finite()) {
        return Err(GenexError::invalid("non-finite point coordinate"));
    }
    Ok(())
}

fn kmeans_pp(points: &Array2<f64>, k: usize, rng: &mut seed::Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centers = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|p| (&p - &centers.row(0)).mapv(|v| v * v).sum())
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for (i, p) in points.rows().into_iter().enumerate() {
            let d = (&p - &centers.row(c)).mapv(|v| v * v).sum();
            d2[i] = d2[i].min(d);
        }
    }
    centers
}

/// Responsibilities (n x K) and the mean log-likelihood.
fn e_step(model: &GmmModel, points: &Array2<f64>) -> (Array2<f64>, f64) {
    let k = model.k();
    let mut resp = Array2::zeros((points.nrows(), k));
    let mut total = 0.0;
    let mut buf = vec![0.0; k];
    for (i, x) in points.rows().into_iter().enumerate() {
        for (c, slot) in buf.iter_mut().enumerate() {
            *slot = model.weighted_log_density(c, x);
        }
        let lse = log_sum_exp(&buf);
        total += lse;
        for c in 0..k {
            resp[[i, c]] = (buf[c] - lse).exp();
        }
    }
    (resp, total / points.nrows() as f64)
}

fn m_step(model: &mut GmmModel, points: &Array2<f64>, resp: &Array2<f64>, floor: f64) {
    let n = points.nrows() as f64;
    for c in 0..model.k() {
        let r = resp.column(c);
        let nk = r.sum();
        model.weights[c] = nk / n;
        if nk <= 0.0 {
            continue;
        }
        let mean = r.dot(points) / nk;
        let mut var = Array1::<f64>::zeros(points.ncols());
        for (i, x) in points.rows().into_iter().enumerate() {
            if r[i] > 0.0 {
                for j in 0..x.len() {
                    let diff = x[j] - mean[j];
                    var[j] += r[i] * diff * diff;
                }
            }
        }
        var.mapv_inplace(|v| (v / nk).max(floor));
        model.means.row_mut(c).assign(&mean);
        model.variances.row_mut(c).assign(&var);
    }
}

fn fit_once(points: &Array2<f64>, k: usize, seed: u64, opts: &GmmOptions) -> GmmModel {
    let mut rng = seed::rng(seed);
    let means = kmeans_pp(points, k, &mut rng);
    let global_var = points.var_axis(Axis(0), 0.0).mapv(|v| v.max(opts.variance_floor));
    let mut variances = Array2::zeros((k, points.ncols()));
    for mut row in variances.rows_mut() {
        row.assign(&global_var);
    }
    let mut model = GmmModel {
        means,
        variances,
        weights: Array1::from_elem(k, 1.0 / k as f64),
        log_likelihood: f64::NEG_INFINITY,
        log_likelihood_trace: Vec::new(),
    };
    let mut prev = f64::NEG_INFINITY;
    for iter in 0..=opts.max_iter {
        let (resp, ll) = e_step(&model, points);
        model.log_likelihood_trace.push(ll);
        model.log_likelihood = ll;
        if ll - prev < opts.tol || iter == opts.max_iter {
            break;
        }
        prev = ll;
        m_step(&mut model, points, &resp, opts.variance_floor);
    }
    model
}

/// Fit a K-component diagonal GMM; best of `restarts` seeded k-means++
/// initialisations by log-likelihood, ties to the earliest restart.
pub fn gmm_fit_with(points: &Array2<f64>, k: usize, seed: u64, opts: &GmmOptions) -> Result<GmmModel> {
    if k == 0 {
        return Err(GenexError::invalid("K must be at least 1"));
    }
    if points.nrows() < k {
        return Err(GenexError::Infeasible(format!(
            "{} points cannot support {k} components",
            points.nrows()
        )));
    }
    check_points(points)?;
    let fits: Vec<GmmModel> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| fit_once(points, k, seed::derive(seed, "gmm-restart", r as u64), opts))
        .collect();
    let mut best = 0;
    for (i, f) in fits.iter().enumerate() {
        if f.log_likelihood > fits[best].log_likelihood {
            best = i;
        }
    }
    Ok(fits.into_iter().nth(best).expect("at least one restart"))
}

pub fn gmm_fit(points: &Array2<f64>, k: usize, seed: u64) -> Result<GmmModel> {
    gmm_fit_with(points, k, seed, &GmmOptions::default())
}

/// Hard assignment to the component with the highest weighted density; ties
/// go to the lowest component index.
pub fn gmm_assign(model: &GmmModel, points: &Array2<f64>) -> Result<Vec<usize>> {
    if points.ncols() != model.dim() {
        return Err(GenexError::DimensionMismatch {
            expected: model.dim(),
            got: points.ncols(),
        });
    }
    Ok(points
        .rows()
        .into_iter()
        .map(|x| {
            let mut best = 0;
            let mut best_score = model.weighted_log_density(0, x);
            for c in 1..model.k() {
                let s = model.weighted_log_density(c, x);
                if s > best_score {
                    best = c;
                    best_score = s;
                }
            }
            best
        })
        .collect())
}
