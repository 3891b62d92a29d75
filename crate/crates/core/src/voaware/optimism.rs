//! Optimism of the best observed validation loss, and the label-shift risk bound.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GenexError, Result};
use crate::seed;

const CHUNK: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct OptimismSimConfig {
    pub runs: usize,
    pub checkpoints: usize,
    /// Noise scale s_m.
    pub noise_scale: f64,
    /// Expected losses ν, row-major `runs × checkpoints`; empty means all zero.
    pub true_loss: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for OptimismSimConfig {
    fn default() -> Self {
        Self {
            runs: 10,
            checkpoints: 10,
            noise_scale: 1.0,
            true_loss: Vec::new(),
            trials: 10_000,
            seed: 0,
        }
    }
}

impl OptimismSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.checkpoints == 0 || self.trials == 0 {
            return Err(GenexError::config("runs, checkpoints and trials must be positive"));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(GenexError::config("noise scale must be positive"));
        }
        if !self.true_loss.is_empty() && self.true_loss.len() != self.runs * self.checkpoints {
            return Err(GenexError::config(format!(
                "true-loss has {} entries, expected {}",
                self.true_loss.len(),
                self.runs * self.checkpoints
            )));
        }
        if self.true_loss.iter().any(|v| !v.is_finite()) {
            return Err(GenexError::config("true-loss entries must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimismEstimate {
    /// Monte Carlo mean of `min_{i,t} L_{i,t}`.
    pub mean_min_loss: f64,
    /// `ν_⋆ − E[min L]`.
    pub optimism: f64,
    pub std_error: f64,
}

/// Draw `L_{i,t} = ν_{i,t} + s_m·Z` for every trial and average the minimum.
pub fn simulate_optimism(config: &OptimismSimConfig) -> Result<OptimismEstimate> {
    config.validate()?;
    let m = config.runs * config.checkpoints;
    let nu: Vec<f64> = if config.true_loss.is_empty() {
        vec![0.0; m]
    } else {
        config.true_loss.clone()
    };
    let nu_star = nu.iter().copied().fold(f64::INFINITY, f64::min);
    let chunks = config.trials.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::rng(seed::derive(config.seed, "optimism", c as u64));
            let count = CHUNK.min(config.trials - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let min = nu
                    .iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + config.noise_scale * z
                    })
                    .fold(f64::INFINITY, f64::min);
                s += min;
                s2 += min * min;
            }
            (s, s2)
        })
        .collect();
    let (sum, sum2) = partial.iter().fold((0.0, 0.0), |(a, b), (s, s2)| (a + s, b + s2));
    let n = config.trials as f64;
    let mean = sum / n;
    let var = if config.trials > 1 {
        ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(OptimismEstimate {
        mean_min_loss: mean,
        optimism: nu_star - mean,
        std_error: (var / n).sqrt(),
    })
}

/// A class-prior vector on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassPriors(Vec<f64>);

impl ClassPriors {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() || pi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(GenexError::invalid("class priors must be finite and nonnegative"));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GenexError::invalid(format!("class priors sum to {total}")));
        }
        Ok(Self(pi))
    }

    pub fn from_labels(labels: &[usize], class_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(GenexError::invalid("no labels"));
        }
        let mut pi = vec![0.0; class_count];
        for &y in labels {
            *pi.get_mut(y).ok_or_else(|| GenexError::invalid(format!("label {y} out of range")))? += 1.0;
        }
        pi.iter_mut().for_each(|v| *v /= labels.len() as f64);
        Ok(Self(pi))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total_variation(&self, other: &ClassPriors) -> f64 {
        0.5 * self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

impl TryFrom<Vec<f64>> for ClassPriors {
    type Error = GenexError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ClassPriors> for Vec<f64> {
    fn from(p: ClassPriors) -> Self {
        p.0
    }
}

/// `(|R_E − R_V|, 2·M·δ_TV(π_V, π_E))` for per-class expected losses bounded by `m`.
pub fn label_shift_bound_check(
    per_class_loss: &[f64],
    m: f64,
    priors_v: &ClassPriors,
    priors_e: &ClassPriors,
) -> Result<(f64, f64)> {
    let c = per_class_loss.len();
    if priors_v.0.len() != c || priors_e.0.len() != c {
        return Err(GenexError::DimensionMismatch {
            expected: c,
            got: priors_v.0.len().max(priors_e.0.len()),
        });
    }
    if let Some(l) = per_class_loss.iter().find(|&&l| !(0.0..=m).contains(&l)) {
        return Err(GenexError::invalid(format!("per-class loss {l} outside [0, {m}]")));
    }
    let risk = |pi: &ClassPriors| pi.0.iter().zip(per_class_loss).map(|(p, l)| p * l).sum::<f64>();
    let gap = (risk(priors_e) - risk(priors_v)).abs();
    Ok((gap, 2.0 * m * priors_v.total_variation(priors_e)))
}
