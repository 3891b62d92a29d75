//! Additive Gaussian input noise.

use ndarray::Array2;
use rand_distr::{Distribution, Normal};

use crate::seed;

/// Adds i.i.d. `N(0, std²)` noise to every entry. `std = 0` returns the input unchanged.
pub fn perturb_inputs(features: &Array2<f64>, std: f64, seed: u64) -> Array2<f64> {
    assert!(std >= 0.0 && std.is_finite(), "noise std must be nonnegative");
    if std == 0.0 {
        return features.clone();
    }
    let mut rng = seed::rng(seed);
    let normal = Normal::new(0.0, std).expect("valid std");
    features.mapv(|v| v + normal.sample(&mut rng))
}
