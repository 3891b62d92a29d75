use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::params::{Group, NamedParamSet, ParamTensor, Role};
use super::{Activation, Dataset, LearnerConfig, Lineage, ModelRecord};
use crate::error::{GenexError, Result};
use crate::seed::{self, Rng};

const HIDDEN_W: &str = "hidden.weight";
const HIDDEN_B: &str = "hidden.bias";
const OUTPUT_W: &str = "output.weight";
const OUTPUT_B: &str = "output.bias";

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const PROB_FLOOR: f64 = 1e-12;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every tensor.
pub fn init_params(input_dim: usize, hidden: usize, classes: usize, rng: &mut Rng) -> NamedParamSet {
    let mut draw = |name: &str, shape: Vec<usize>, fan_in: usize, role: Role, group: Group| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        ParamTensor::new(name, shape, values, role, group)
    };
    let tensors = vec![
        draw(HIDDEN_W, vec![hidden, input_dim], input_dim, Role::TrainableWeight, Group::Body),
        draw(HIDDEN_B, vec![hidden], input_dim, Role::TrainableBias, Group::Body),
        draw(OUTPUT_W, vec![classes, hidden], hidden, Role::TrainableWeight, Group::Head),
        draw(OUTPUT_B, vec![classes], hidden, Role::TrainableBias, Group::Head),
    ];
    NamedParamSet::new(tensors).expect("reference layout is valid")
}

fn layout_signature(input_dim: usize, hidden: usize, classes: usize) -> String {
    NamedParamSet::new(vec![
        ParamTensor::zeros(HIDDEN_W, vec![hidden, input_dim], Role::TrainableWeight, Group::Body),
        ParamTensor::zeros(HIDDEN_B, vec![hidden], Role::TrainableBias, Group::Body),
        ParamTensor::zeros(OUTPUT_W, vec![classes, hidden], Role::TrainableWeight, Group::Head),
        ParamTensor::zeros(OUTPUT_B, vec![classes], Role::TrainableBias, Group::Head),
    ])
    .expect("reference layout is valid")
    .signature()
}

struct Views<'a> {
    w1: ArrayView2<'a, f64>,
    b1: ArrayView1<'a, f64>,
    w2: ArrayView2<'a, f64>,
    b2: ArrayView1<'a, f64>,
}

fn views(params: &NamedParamSet) -> Result<Views<'_>> {
    let t = params.tensors();
    let ok = t.len() == 4
        && t[0].name == HIDDEN_W
        && t[1].name == HIDDEN_B
        && t[2].name == OUTPUT_W
        && t[3].name == OUTPUT_B
        && t[0].shape.len() == 2
        && t[2].shape.len() == 2
        && t[1].shape == [t[0].shape[0]]
        && t[2].shape[1] == t[0].shape[0]
        && t[3].shape == [t[2].shape[0]];
    if !ok {
        return Err(GenexError::ArchitectureMismatch {
            expected: "reference MLP (hidden.weight, hidden.bias, output.weight, output.bias)".into(),
            got: params.signature(),
        });
    }
    Ok(Views {
        w1: two(&t[0]),
        b1: ArrayView1::from(&t[1].values),
        w2: two(&t[2]),
        b2: ArrayView1::from(&t[3].values),
    })
}

fn two(p: &ParamTensor) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((p.shape[0], p.shape[1]), &p.values).expect("shape checked")
}

fn activate(act: Activation, z: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Relu => z.mapv(|v| v.max(0.0)),
        Activation::Tanh => z.mapv(f64::tanh),
    }
}

fn activation_grad(act: Activation, z: &Array2<f64>, a: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Relu => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        Activation::Tanh => a.mapv(|v| 1.0 - v * v),
    }
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    logits
}

fn hidden_pre(v: &Views<'_>, x: &ArrayView2<'_, f64>) -> Array2<f64> {
    x.dot(&v.w1.t()) + v.b1
}

fn head_proba(v: &Views<'_>, hidden: &Array2<f64>) -> Array2<f64> {
    softmax_rows(hidden.dot(&v.w2.t()) + v.b2)
}

fn proba(params: &NamedParamSet, act: Activation, x: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let v = views(params)?;
    if x.ncols() != v.w1.ncols() {
        return Err(GenexError::DimensionMismatch {
            expected: v.w1.ncols(),
            got: x.ncols(),
        });
    }
    Ok(head_proba(&v, &activate(act, &hidden_pre(&v, x))))
}

/// Row-stochastic class probabilities (inference mode: no dropout, no jitter).
pub fn predict_proba(model: &ModelRecord, features: &Array2<f64>) -> Result<Array2<f64>> {
    proba(&model.params, model.config.activation, &features.view())
}

/// Mean negative log-likelihood of `labels` under `probs`.
pub fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[[i, y]].max(PROB_FLOOR).ln())
        .sum();
    total / labels.len() as f64
}

struct Gradients {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

/// Forward and backward pass of mean cross-entropy. `mask` is an inverted
/// dropout mask on the hidden activations.
fn forward_backward(
    v: &Views<'_>,
    act: Activation,
    x: &ArrayView2<'_, f64>,
    labels: &[usize],
    mask: Option<&Array2<f64>>,
) -> (f64, Gradients) {
    let n = labels.len() as f64;
    let z1 = hidden_pre(v, x);
    let a1 = activate(act, &z1);
    let h = match mask {
        Some(m) => &a1 * m,
        None => a1.clone(),
    };
    let probs = head_proba(v, &h);
    let loss = cross_entropy(&probs, labels);

    let mut dlogits = probs;
    for (i, &y) in labels.iter().enumerate() {
        dlogits[[i, y]] -= 1.0;
    }
    dlogits /= n;
    let gw2 = dlogits.t().dot(&h);
    let gb2 = dlogits.sum_axis(Axis(0));
    let mut dh = dlogits.dot(&v.w2);
    if let Some(m) = mask {
        dh *= m;
    }
    let dz1 = dh * activation_grad(act, &z1, &a1);
    let gw1 = dz1.t().dot(x);
    let gb1 = dz1.sum_axis(Axis(0));
    (loss, Gradients { w1: gw1, b1: gb1, w2: gw2, b2: gb2 })
}

/// Mean cross-entropy and its exact gradient, with dropout and weight decay
/// disabled. Gradient tensors mirror the layout of `params`.
pub fn loss_and_gradient(
    params: &NamedParamSet,
    activation: Activation,
    features: &Array2<f64>,
    labels: &[usize],
) -> Result<(f64, NamedParamSet)> {
    let v = views(params)?;
    if features.ncols() != v.w1.ncols() {
        return Err(GenexError::DimensionMismatch {
            expected: v.w1.ncols(),
            got: features.ncols(),
        });
    }
    let (loss, g) = forward_backward(&v, activation, &features.view(), labels, None);
    let mut grads = params.clone();
    let flat = [g.w1.into_raw_vec_and_offset().0, g.b1.to_vec(), g.w2.into_raw_vec_and_offset().0, g.b2.to_vec()];
    for (t, values) in grads.tensors_mut().iter_mut().zip(flat) {
        t.values = values;
    }
    Ok((loss, grads))
}

struct Adam {
    lr: f64,
    weight_decay: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(params: &NamedParamSet, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.numel()]).collect();
        Self {
            lr,
            weight_decay,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update of the tensors whose index is in `which`.
    fn update(&mut self, params: &mut NamedParamSet, grads: &[(usize, &[f64])]) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let tensors = params.tensors_mut();
        for &(k, g) in grads {
            let t = &mut tensors[k];
            if !t.role.is_trainable() {
                continue;
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..g.len() {
                let gi = g[i] + self.weight_decay * t.values[i];
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                t.values[i] -= self.lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

fn check_data(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(GenexError::invalid("training data is empty"));
    }
    Ok(())
}

/// Epoch-by-epoch trainer over the full network. Used directly by baselines
/// that inspect intermediate checkpoints.
pub struct Trainer<'a> {
    config: LearnerConfig,
    data: &'a Dataset,
    params: NamedParamSet,
    adam: Adam,
    rng: Rng,
    epochs_done: u32,
}

impl<'a> Trainer<'a> {
    pub fn new(config: &LearnerConfig, data: &'a Dataset, init: Option<&NamedParamSet>) -> Result<Self> {
        config.validate()?;
        check_data(data)?;
        let expected = layout_signature(data.dim(), config.hidden_width, data.class_count());
        let params = match init {
            Some(p) => {
                if p.signature() != expected {
                    return Err(GenexError::ArchitectureMismatch {
                        expected,
                        got: p.signature(),
                    });
                }
                p.clone()
            }
            None => {
                let mut rng = seed::rng(seed::derive(config.seed, "init", 0));
                init_params(data.dim(), config.hidden_width, data.class_count(), &mut rng)
            }
        };
        let adam = Adam::new(&params, config.learning_rate, config.weight_decay);
        Ok(Self {
            config: config.clone(),
            data,
            params,
            adam,
            rng: seed::rng(seed::derive(config.seed, "train", 0)),
            epochs_done: 0,
        })
    }

    pub fn run_epoch(&mut self) {
        let n = self.data.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let keep = 1.0 - self.config.dropout;
        for batch in order.chunks(self.config.batch_size) {
            let mut x = self.data.features().select(Axis(0), batch);
            if self.config.augmentation_noise > 0.0 {
                let std = self.config.augmentation_noise;
                x.mapv_inplace(|v| {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    v + std * z
                });
            }
            let labels: Vec<usize> = batch.iter().map(|&i| self.data.labels()[i]).collect();
            let mask = (self.config.dropout > 0.0).then(|| {
                Array2::from_shape_fn((batch.len(), self.config.hidden_width), |_| {
                    if self.rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
            });
            let v = views(&self.params).expect("layout checked at construction");
            let (_, g) = forward_backward(&v, self.config.activation, &x.view(), &labels, mask.as_ref());
            let grads = [
                (0, g.w1.as_slice().expect("standard layout")),
                (1, g.b1.as_slice().expect("standard layout")),
                (2, g.w2.as_slice().expect("standard layout")),
                (3, g.b2.as_slice().expect("standard layout")),
            ];
            self.adam.update(&mut self.params, &grads);
        }
        self.epochs_done += 1;
    }

    pub fn epochs_done(&self) -> u32 {
        self.epochs_done
    }

    pub fn params(&self) -> &NamedParamSet {
        &self.params
    }

    pub fn into_params(self) -> NamedParamSet {
        self.params
    }
}

/// Train for exactly `config.epochs` epochs. No validation data is involved.
pub fn train(config: &LearnerConfig, data: &Dataset, init: Option<&NamedParamSet>) -> Result<ModelRecord> {
    let mut trainer = Trainer::new(config, data, init)?;
    for _ in 0..config.epochs {
        trainer.run_epoch();
    }
    Ok(ModelRecord {
        id: format!("model-{:016x}", config.seed),
        params: trainer.into_params(),
        config: config.clone(),
        lineage: Lineage::Gradient,
        generation: 0,
    })
}

/// Train only the head tensors for `epochs` epochs on frozen body features.
/// Every body tensor is left bitwise unchanged.
pub fn fine_tune_head(model: &ModelRecord, data: &Dataset, epochs: u32) -> Result<ModelRecord> {
    if epochs == 0 {
        return Err(GenexError::config("fine-tune epochs must be at least 1"));
    }
    model.config.validate()?;
    check_data(data)?;
    let config = &model.config;
    let hidden = {
        let v = views(&model.params)?;
        if data.dim() != v.w1.ncols() {
            return Err(GenexError::DimensionMismatch {
                expected: v.w1.ncols(),
                got: data.dim(),
            });
        }
        if data.class_count() != v.w2.nrows() {
            return Err(GenexError::DimensionMismatch {
                expected: v.w2.nrows(),
                got: data.class_count(),
            });
        }
        activate(config.activation, &hidden_pre(&v, &data.features().view()))
    };

    let mut params = model.params.clone();
    let mut adam = Adam::new(&params, config.learning_rate, config.weight_decay);
    let mut rng = seed::rng(seed::derive(config.seed, "fine-tune", 0));
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let h = hidden.select(Axis(0), batch);
            let v = views(&params)?;
            let mut dlogits = head_proba(&v, &h);
            for (r, &i) in batch.iter().enumerate() {
                dlogits[[r, data.labels()[i]]] -= 1.0;
            }
            dlogits /= batch.len() as f64;
            let gw2 = dlogits.t().dot(&h);
            let gb2 = dlogits.sum_axis(Axis(0));
            adam.update(
                &mut params,
                &[
                    (2, gw2.as_slice().expect("standard layout")),
                    (3, gb2.as_slice().expect("standard layout")),
                ],
            );
        }
    }
    Ok(ModelRecord {
        params,
        ..model.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn blobs() -> Dataset {
        synthetic::two_blobs(400, 3.0, 11)
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let data = blobs();
        let cfg = LearnerConfig { seed: 7, dropout: 0.1, augmentation_noise: 0.05, ..Default::default() };
        let a = train(&cfg, &data, None).unwrap();
        let b = train(&cfg, &data, None).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn zero_epochs_is_a_config_error() {
        let cfg = LearnerConfig { epochs: 0, ..Default::default() };
        assert!(matches!(train(&cfg, &blobs(), None), Err(GenexError::Config(_))));
    }

    #[test]
    fn init_must_match_config() {
        let data = blobs();
        let mut rng = seed::rng(1);
        let wrong = init_params(data.dim(), 8, 2, &mut rng);
        let cfg = LearnerConfig { hidden_width: 16, ..Default::default() };
        assert!(matches!(train(&cfg, &data, Some(&wrong)), Err(GenexError::ArchitectureMismatch { .. })));
    }

    #[test]
    fn separable_blobs_train_well() {
        let data = blobs();
        let model = train(&LearnerConfig { seed: 3, ..Default::default() }, &data, None).unwrap();
        let pred = crate::learner::argmax_rows(&predict_proba(&model, data.features()).unwrap());
        let acc = pred.iter().zip(data.labels()).filter(|(p, y)| p == y).count() as f64 / data.len() as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn rows_are_probability_vectors() {
        let data = blobs();
        let model = train(&LearnerConfig::default(), &data, None).unwrap();
        let p = predict_proba(&model, data.features()).unwrap();
        for row in p.rows() {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!((row.sum() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let data = blobs();
        let mut model = train(&LearnerConfig::default(), &data, None).unwrap();
        for t in model.params.tensors_mut() {
            t.values.iter_mut().for_each(|v| *v = 0.0);
        }
        let p = predict_proba(&model, data.features()).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn duplicate_rows_give_identical_outputs() {
        let data = blobs();
        let model = train(&LearnerConfig::default(), &data, None).unwrap();
        let x = ndarray::array![[0.3, -1.2], [0.3, -1.2]];
        let p = predict_proba(&model, &x).unwrap();
        assert_eq!(p.row(0), p.row(1));
    }

    #[test]
    fn predict_rejects_wrong_dimension() {
        let model = train(&LearnerConfig::default(), &blobs(), None).unwrap();
        let x = Array2::zeros((3, 5));
        assert!(matches!(predict_proba(&model, &x), Err(GenexError::DimensionMismatch { .. })));
    }

    #[test]
    fn fine_tune_freezes_body_and_reduces_loss() {
        let data = blobs();
        let mut model = train(&LearnerConfig { seed: 5, ..Default::default() }, &data, None).unwrap();
        let mut rng = seed::rng(99);
        for t in model.params.tensors_mut().iter_mut().filter(|t| t.group == Group::Head) {
            t.values.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let before = cross_entropy(&predict_proba(&model, data.features()).unwrap(), data.labels());
        let tuned = fine_tune_head(&model, &data, 1).unwrap();
        let after = cross_entropy(&predict_proba(&tuned, data.features()).unwrap(), data.labels());
        assert!(after < before, "{after} !< {before}");
        for (a, b) in model.params.tensors().iter().zip(tuned.params.tensors()) {
            if a.group == Group::Body {
                assert_eq!(a.values, b.values);
            }
        }
        assert!(fine_tune_head(&model, &data, 0).is_err());
    }

    fn check_gradients(act: Activation, seed: u64) {
        let mut rng = seed::rng(seed);
        let params = init_params(3, 5, 3, &mut rng);
        let x = Array2::from_shape_fn((3, 3), |_| rng.random_range(-2.0..2.0));
        let labels = [0, 2, 1];
        let (_, grads) = loss_and_gradient(&params, act, &x, &labels).unwrap();
        let h = 1e-5;
        for (k, t) in params.tensors().iter().enumerate() {
            for i in 0..t.values.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[k].values[i] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[k].values[i] -= h;
                let lp = loss_and_gradient(&plus, act, &x, &labels).unwrap().0;
                let lm = loss_and_gradient(&minus, act, &x, &labels).unwrap().0;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grads.tensors()[k].values[i];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(rel <= 1e-4, "{} [{i}]: analytic {analytic} numeric {numeric}", t.name);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_gradients(Activation::Tanh, 1);
        check_gradients(Activation::Relu, 2);
    }
}
