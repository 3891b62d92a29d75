//! Base-learner contract and the reference learner: a one-hidden-layer MLP
//! classifier trained with minibatch Adam.

mod checkpoint;
mod dataset;
mod mlp;
mod params;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use dataset::Dataset;
pub use mlp::{
    cross_entropy, fine_tune_head, init_params, loss_and_gradient, predict_proba, train, Trainer,
};
pub use params::{Group, NamedParamSet, ParamTensor, Role};

use crate::error::{GenexError, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LearnerConfig {
    pub hidden_width: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: u32,
    pub dropout: f64,
    /// Std of Gaussian jitter added to inputs during training.
    pub augmentation_noise: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden_width: 32,
            activation: Activation::Relu,
            learning_rate: 1e-2,
            batch_size: 16,
            epochs: 3,
            dropout: 0.0,
            augmentation_noise: 0.0,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 {
            return Err(GenexError::config("hidden width must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GenexError::config("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(GenexError::config("batch size must be positive"));
        }
        if self.epochs == 0 {
            return Err(GenexError::config("epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GenexError::config("dropout must lie in [0,1)"));
        }
        if !(self.augmentation_noise >= 0.0 && self.augmentation_noise.is_finite()) {
            return Err(GenexError::config("augmentation noise must be nonnegative"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(GenexError::config("weight decay must be nonnegative"));
        }
        Ok(())
    }
}

/// The configuration diversity space sampled for every gradient-trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct ConfigSpace {
    pub hidden_widths: Vec<usize>,
    pub dropouts: Vec<f64>,
    pub augmentation_noises: Vec<f64>,
    pub epochs: Vec<u32>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// When set, every model trained from scratch starts from the same body
    /// tensors (drawn from this seed) with its own random head, like
    /// fine-tuning a shared backbone. `None` draws every tensor per model.
    pub shared_body_seed: Option<u64>,
}

impl Default for ConfigSpace {
    fn default() -> Self {
        Self {
            hidden_widths: vec![16, 32, 64],
            dropouts: vec![0.0, 0.1, 0.2],
            augmentation_noises: vec![0.0, 0.01, 0.05],
            epochs: vec![1, 2, 3],
            activation: Activation::Relu,
            learning_rate: 1e-2,
            batch_size: 16,
            weight_decay: 1e-4,
            shared_body_seed: None,
        }
    }
}

impl ConfigSpace {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty()
            || self.dropouts.is_empty()
            || self.augmentation_noises.is_empty()
            || self.epochs.is_empty()
        {
            return Err(GenexError::config("configuration space has an empty choice list"));
        }
        for &width in &self.hidden_widths {
            self.template(width, 0).validate()?;
        }
        for &d in &self.dropouts {
            LearnerConfig { dropout: d, ..self.template(1, 0) }.validate()?;
        }
        for &a in &self.augmentation_noises {
            LearnerConfig { augmentation_noise: a, ..self.template(1, 0) }.validate()?;
        }
        for &e in &self.epochs {
            LearnerConfig { epochs: e, ..self.template(1, 0) }.validate()?;
        }
        Ok(())
    }

    fn template(&self, hidden_width: usize, seed: u64) -> LearnerConfig {
        LearnerConfig {
            hidden_width,
            activation: self.activation,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs[0],
            dropout: self.dropouts[0],
            augmentation_noise: self.augmentation_noises[0],
            weight_decay: self.weight_decay,
            seed,
        }
    }

    /// Starting parameters for a from-scratch model, or `None` when every
    /// tensor should come from the model's own seed.
    pub fn initial_params(&self, config: &LearnerConfig, input_dim: usize, classes: usize) -> Option<NamedParamSet> {
        let shared = self.shared_body_seed?;
        let h = config.hidden_width;
        let body = init_params(input_dim, h, classes, &mut crate::seed::rng(crate::seed::derive(shared, "body", h as u64)));
        let own = init_params(input_dim, h, classes, &mut crate::seed::rng(crate::seed::derive(config.seed, "init", 0)));
        let mut params = body;
        for (t, o) in params.tensors_mut().iter_mut().zip(own.tensors()) {
            if t.group == Group::Head {
                t.values.clone_from(&o.values);
            }
        }
        Some(params)
    }

    pub fn sample_width(&self, rng: &mut Rng) -> usize {
        self.hidden_widths[rng.random_range(0..self.hidden_widths.len())]
    }

    /// Sample a configuration with a fixed hidden width (the architecture
    /// must stay constant inside one pool) and a fresh seed.
    pub fn sample(&self, hidden_width: usize, rng: &mut Rng) -> LearnerConfig {
        let pick = |rng: &mut Rng, n: usize| rng.random_range(0..n);
        let dropout = self.dropouts[pick(rng, self.dropouts.len())];
        let augmentation_noise = self.augmentation_noises[pick(rng, self.augmentation_noises.len())];
        let epochs = self.epochs[pick(rng, self.epochs.len())];
        let seed = rng.random();
        LearnerConfig {
            dropout,
            augmentation_noise,
            epochs,
            ..self.template(hidden_width, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Lineage {
    Gradient,
    Genetic { parent_a: String, parent_b: String },
    /// Layer-wise average of elected experts.
    Fused { experts: Vec<String> },
}

/// One candidate model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub id: String,
    pub params: NamedParamSet,
    pub config: LearnerConfig,
    pub lineage: Lineage,
    pub generation: u32,
}

impl ModelRecord {
    pub fn input_dim(&self) -> usize {
        self.params.tensors()[0].shape[1]
    }

    pub fn class_count(&self) -> usize {
        self.params.tensors().last().map_or(0, |t| t.shape[0])
    }

    pub fn signature(&self) -> String {
        self.params.signature()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// Anything that maps a feature matrix to row-stochastic class probabilities.
pub trait Classifier {
    fn predict_proba(&self, features: &ndarray::Array2<f64>) -> Result<ndarray::Array2<f64>>;
}

impl Classifier for ModelRecord {
    fn predict_proba(&self, features: &ndarray::Array2<f64>) -> Result<ndarray::Array2<f64>> {
        predict_proba(self, features)
    }
}

/// Argmax per row; ties go to the lowest class index.
pub fn argmax_rows(probs: &ndarray::Array2<f64>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
