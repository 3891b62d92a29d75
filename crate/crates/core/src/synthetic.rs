//! Synthetic datasets used by the tests, benchmarks and the `generate` command.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::learner::Dataset;
use crate::seed;

/// Isotropic Gaussian blobs with standard deviation `std` around `centers`,
/// `n_per` points each. Labels are the blob indices.
pub fn gaussian_blobs(n_per: usize, centers: &[Vec<f64>], std: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let d = centers.first().map_or(0, Vec::len);
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, std).expect("valid std");
    let mut x = Array2::zeros((n_per * centers.len(), d));
    let mut labels = Vec::with_capacity(n_per * centers.len());
    for (k, c) in centers.iter().enumerate() {
        for i in 0..n_per {
            let row = k * n_per + i;
            for j in 0..d {
                x[[row, j]] = c[j] + noise.sample(&mut rng);
            }
            labels.push(k);
        }
    }
    (x, labels)
}

/// Two unit-variance 2D blobs centred at `(±separation, 0)`, `n` points total.
pub fn two_blobs(n: usize, separation: f64, seed: u64) -> Dataset {
    let half = n / 2;
    let (x, y) = gaussian_blobs(half, &[vec![-separation, 0.0], vec![separation, 0.0]], 1.0, seed);
    Dataset::new(x, y, 2).expect("both classes present")
}

/// Softmax of `logits / temperature`, row by row.
pub fn softmax_rows(logits: &Array2<f64>, temperature: f64) -> Array2<f64> {
    let mut out = logits / temperature;
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

/// Class-conditional embedding vectors on a `dim`-simplex. Each class `c`
/// owns `modes` embedding directions; every sample picks one mode uniformly
/// and gets a softmax vector peaked on that mode's coordinate with noisy
/// logits. With `modes == 1` all samples of a class are identically
/// distributed.
pub fn mode_embeddings(
    n_per_class: usize,
    classes: usize,
    modes: usize,
    peak: f64,
    seed: u64,
) -> (Array2<f64>, Vec<usize>, Vec<usize>) {
    let dim = classes * modes;
    let mut rng = seed::rng(seed);
    let mut logits = Array2::zeros((n_per_class * classes, dim));
    let mut labels = Vec::new();
    let mut mode_of = Vec::new();
    for c in 0..classes {
        for i in 0..n_per_class {
            let row = c * n_per_class + i;
            let mode = rng.random_range(0..modes);
            for j in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                logits[[row, j]] = 0.5 * z;
            }
            logits[[row, c * modes + mode]] += peak;
            labels.push(c);
            mode_of.push(mode);
        }
    }
    (softmax_rows(&logits, 1.0), labels, mode_of)
}

/// Shape of the shifted benchmark.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct ShiftedSpec {
    pub n_per_class: usize,
    pub dim: usize,
    /// Class means sit at `±class_separation` on feature 0.
    pub class_separation: f64,
    /// Mode means sit at `±mode_offset` on feature 1.
    pub mode_offset: f64,
    /// Peak logit of the mode embeddings.
    pub embedding_peak: f64,
}

impl Default for ShiftedSpec {
    fn default() -> Self {
        Self {
            n_per_class: 100,
            dim: 8,
            class_separation: 1.0,
            mode_offset: 0.5,
            embedding_peak: 4.0,
        }
    }
}

/// Two classes, each a mixture of two latent modes. Features are unit
/// Gaussians shifted by the class on one axis and by the mode on another;
/// the returned embeddings are [`mode_embeddings`] for the same modes, so a
/// divergence-guided split separates the modes between train and test.
pub fn shifted_benchmark(spec: &ShiftedSpec, seed: u64) -> (Dataset, Array2<f64>) {
    assert!(spec.dim >= 2, "shifted benchmark needs at least two features");
    let (emb, labels, mode_of) = mode_embeddings(spec.n_per_class, 2, 2, spec.embedding_peak, seed);
    let mut rng = seed::rng(seed::derive(seed, "shifted-features", 0));
    let mut x = Array2::zeros((labels.len(), spec.dim));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let sign = |b: bool| if b { 1.0 } else { -1.0 };
        row[0] += spec.class_separation * sign(labels[i] == 1);
        row[1] += spec.mode_offset * sign(mode_of[i] == 1);
    }
    (Dataset::new(x, labels, 2).expect("both classes present"), emb)
}
