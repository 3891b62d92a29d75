//! Behavioural clustering of a pool, per-cluster expert election, prototype
//! fusion by layer-wise averaging, and convex ensemble weighting.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GenexError, Result};
use crate::gene::{blend, ModelPool};
use crate::learner::{
    argmax_rows, fine_tune_head, load_checkpoint, predict_proba, save_checkpoint, Classifier, Dataset, Lineage,
    ModelRecord, NamedParamSet,
};
use crate::numerics::{
    convex_combination, js_unchecked, optimize_simplex_weights, perturb_inputs, reduce_dim, select_k_by_silhouette,
    gmm_assign, KCandidate, SimplexWeights,
};
use crate::seed;
use crate::trace::{DataSplit, Stage, Trace, TraceEvent};
use crate::voaware::geometric_mean_score;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct PerturbationSpec {
    pub std: f64,
    pub seeds: u32,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self { std: 0.05, seeds: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct ProtonexConfig {
    /// Experts elected per cluster, 1 to 5.
    pub experts: usize,
    pub perturbation: PerturbationSpec,
    /// Inclusive K range; defaults to `[2, min(8, n/3)]`.
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    /// Reduced dimension; defaults to `min(8, n − 1)`.
    pub target_dim: Option<usize>,
    pub fine_tune_epochs: u32,
    pub seed: u64,
}

impl Default for ProtonexConfig {
    fn default() -> Self {
        Self {
            experts: 5,
            perturbation: PerturbationSpec::default(),
            k_min: None,
            k_max: None,
            target_dim: None,
            fine_tune_epochs: 1,
            seed: 0,
        }
    }
}

impl ProtonexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.experts) {
            return Err(GenexError::config("experts per cluster must lie in [1, 5]"));
        }
        if !(self.perturbation.std >= 0.0 && self.perturbation.std.is_finite()) || self.perturbation.seeds == 0 {
            return Err(GenexError::config("perturbation needs std ≥ 0 and at least one seed"));
        }
        if self.k_min.is_some_and(|k| k < 2) {
            return Err(GenexError::config("k-min must be at least 2"));
        }
        if let (Some(lo), Some(hi)) = (self.k_min, self.k_max) {
            if lo > hi {
                return Err(GenexError::config("k-min exceeds k-max"));
            }
        }
        if self.target_dim == Some(0) {
            return Err(GenexError::config("target-dim must be positive"));
        }
        if self.fine_tune_epochs == 0 {
            return Err(GenexError::config("fine-tune epochs must be at least 1"));
        }
        Ok(())
    }

    fn cluster_options(&self) -> ClusterOptions {
        ClusterOptions {
            k_min: self.k_min,
            k_max: self.k_max,
            target_dim: self.target_dim,
            seed: seed::derive(self.seed, "cluster", 0),
        }
    }
}

/// Flattened softmax outputs of one model over the probe set.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSignature {
    pub model_id: String,
    pub vector: Vec<f64>,
}

/// One signature per model, ordered by model id. Each model's pass over the
/// probe set counts as one validation query.
pub fn extract_signatures(pool: &ModelPool, probe: &Dataset, trace: &Trace) -> Result<Vec<PredictionSignature>> {
    let mut records: Vec<&ModelRecord> = pool.records().iter().collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let sigs: Vec<PredictionSignature> = records
        .par_iter()
        .map(|m| {
            let p = predict_proba(m, probe.features())?;
            Ok(PredictionSignature {
                model_id: m.id.clone(),
                vector: p.iter().copied().collect(),
            })
        })
        .collect::<Result<_>>()?;
    for s in &sigs {
        trace.read(DataSplit::Validation, Stage::Election, format!("signature {}", s.model_id));
    }
    Ok(sigs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    TopVal,
    MostRobust,
    Representative,
    IntraAnomalous,
    OuterAnomalous,
}

impl Criterion {
    pub const ORDER: [Criterion; 5] = [
        Criterion::TopVal,
        Criterion::MostRobust,
        Criterion::Representative,
        Criterion::IntraAnomalous,
        Criterion::OuterAnomalous,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Election {
    pub criterion: Criterion,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    /// Set when no K in range produced two clusters and everything fell into one.
    pub degenerate: bool,
    pub silhouettes: Vec<(usize, Option<f64>)>,
    /// Model ids in sorted order; `reduced` rows follow the same order.
    pub model_ids: Vec<String>,
    pub assignments: BTreeMap<String, usize>,
    pub reduced: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    #[serde(default)]
    pub elected: Vec<Vec<Election>>,
}

impl ClusterReport {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.model_ids
            .iter()
            .enumerate()
            .filter(|(_, id)| self.assignments[*id] == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClusterOptions {
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub target_dim: Option<usize>,
    pub seed: u64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Reduce, pick K by silhouette, assign by GMM. Falls back to a single
/// flagged cluster when no K in range separates the signatures.
pub fn cluster_models(signatures: &[PredictionSignature], opts: &ClusterOptions) -> Result<ClusterReport> {
    let n = signatures.len();
    if n < 4 {
        return Err(GenexError::Infeasible(format!("clustering needs at least 4 models, got {n}")));
    }
    let mut sigs: Vec<&PredictionSignature> = signatures.iter().collect();
    sigs.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    let len = sigs[0].vector.len();
    if len == 0 {
        return Err(GenexError::invalid("empty prediction signature"));
    }
    let mut matrix = Array2::zeros((n, len));
    for (i, s) in sigs.iter().enumerate() {
        if s.vector.len() != len {
            return Err(GenexError::DimensionMismatch {
                expected: len,
                got: s.vector.len(),
            });
        }
        matrix.row_mut(i).assign(&ndarray::ArrayView1::from(&s.vector));
    }
    let target = opts.target_dim.unwrap_or(8.min(n - 1)).min(len);
    let reduced = reduce_dim(&matrix, target)?;

    let k_lo = opts.k_min.unwrap_or(2);
    let k_hi = opts.k_max.unwrap_or((n / 3).min(8)).max(k_lo).min(n - 1);
    let picked = if k_lo <= k_hi {
        select_k_by_silhouette(&reduced, k_lo, k_hi, opts.seed).ok()
    } else {
        None
    };
    let (raw, degenerate, silhouettes) = match picked {
        Some((_, model, cands)) => (
            gmm_assign(&model, &reduced)?,
            false,
            cands.into_iter().map(|KCandidate { k, silhouette }| (k, silhouette)).collect(),
        ),
        None => (vec![0; n], true, Vec::new()),
    };

    // relabel by first appearance so labels do not depend on component order
    let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
    let mut order = Vec::new();
    for &c in &raw {
        if let std::collections::btree_map::Entry::Vacant(e) = relabel.entry(c) {
            e.insert(order.len());
            order.push(c);
        }
    }
    let labels: Vec<usize> = raw.iter().map(|c| relabel[c]).collect();
    let k = order.len();
    let mut centroids = vec![vec![0.0; target]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (acc, v) in centroids[c].iter_mut().zip(reduced.row(i)) {
            *acc += v;
        }
    }
    for (cent, &cnt) in centroids.iter_mut().zip(&counts) {
        cent.iter_mut().for_each(|v| *v /= cnt as f64);
    }
    Ok(ClusterReport {
        k,
        degenerate,
        silhouettes,
        model_ids: sigs.iter().map(|s| s.model_id.clone()).collect(),
        assignments: sigs.iter().map(|s| s.model_id.clone()).zip(labels.iter().copied()).collect(),
        reduced: reduced.rows().into_iter().map(|r| r.to_vec()).collect(),
        centroids,
        elected: Vec::new(),
    })
}

/// Validation GM and perturbation robustness (mean clean-vs-perturbed JSD) per model.
struct Scores {
    gm: f64,
    robustness: f64,
}

fn score_models(
    ids: &[String],
    pool: &ModelPool,
    validation: &Dataset,
    spec: &PerturbationSpec,
    seed: u64,
) -> Result<Vec<Scores>> {
    let perturbed: Vec<Array2<f64>> = (0..spec.seeds)
        .map(|s| perturb_inputs(validation.features(), spec.std, seed::derive(seed, "perturb", s as u64)))
        .collect();
    ids.par_iter()
        .map(|id| {
            let model = pool
                .get(id)
                .ok_or_else(|| GenexError::invalid(format!("model `{id}` not in pool")))?;
            let clean = predict_proba(model, validation.features())?;
            let gm = geometric_mean_score(&argmax_rows(&clean), validation.labels(), validation.class_count())?;
            let mut robustness = 0.0;
            for x in &perturbed {
                let noisy = predict_proba(model, x)?;
                let total: f64 = clean
                    .rows()
                    .into_iter()
                    .zip(noisy.rows())
                    .map(|(a, b)| js_unchecked(a.as_slice().expect("row"), b.as_slice().expect("row")))
                    .sum();
                robustness += total / clean.nrows() as f64;
            }
            Ok(Scores {
                gm,
                robustness: robustness / perturbed.len() as f64,
            })
        })
        .collect()
}

/// Index of the best member; `better(a, b)` is strict, so ties keep the
/// earlier (lower id) member.
fn pick(members: &[usize], score: impl Fn(usize) -> f64, maximise: bool) -> usize {
    let mut best = members[0];
    for &i in &members[1..] {
        let (s, b) = (score(i), score(best));
        if (maximise && s > b) || (!maximise && s < b) {
            best = i;
        }
    }
    best
}

/// Elect `m` experts per cluster by the fixed criterion order.
pub fn elect_experts(
    report: &ClusterReport,
    pool: &ModelPool,
    validation: &Dataset,
    m: usize,
    spec: &PerturbationSpec,
    seed: u64,
    trace: &Trace,
) -> Result<ClusterReport> {
    if !(1..=5).contains(&m) {
        return Err(GenexError::config("experts per cluster must lie in [1, 5]"));
    }
    if validation.is_empty() {
        return Err(GenexError::invalid("empty validation data"));
    }
    let scores = score_models(&report.model_ids, pool, validation, spec, seed)?;
    for id in &report.model_ids {
        trace.read(DataSplit::Validation, Stage::Election, format!("election score {id}"));
    }
    let mut out = report.clone();
    out.elected = Vec::with_capacity(report.k);
    for c in 0..report.k {
        let members = report.members(c);
        if members.is_empty() {
            return Err(GenexError::invalid(format!("cluster {c} is empty")));
        }
        let own = &report.centroids[c];
        let to_own = |i: usize| distance(&report.reduced[i], own);
        let to_others = |i: usize| {
            (0..report.k)
                .filter(|&o| o != c)
                .map(|o| distance(&report.reduced[i], &report.centroids[o]))
                .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
                .unwrap_or(0.0)
        };
        let elections = Criterion::ORDER[..m]
            .iter()
            .map(|&criterion| {
                let i = match criterion {
                    Criterion::TopVal => pick(&members, |i| scores[i].gm, true),
                    Criterion::MostRobust => pick(&members, |i| scores[i].robustness, false),
                    Criterion::Representative => pick(&members, to_own, false),
                    Criterion::IntraAnomalous => pick(&members, to_own, true),
                    Criterion::OuterAnomalous => pick(&members, to_others, true),
                };
                Election {
                    criterion,
                    model_id: report.model_ids[i].clone(),
                }
            })
            .collect();
        out.elected.push(elections);
    }
    trace.record(TraceEvent::Select {
        stage: Stage::Election,
        model_ids: out.elected.iter().flatten().map(|e| e.model_id.clone()).collect(),
    });
    Ok(out)
}

/// Layer-wise arithmetic mean of the experts' tensors, including head and buffers.
pub fn fuse_prototype(experts: &[&NamedParamSet]) -> Result<NamedParamSet> {
    let first = *experts
        .first()
        .ok_or_else(|| GenexError::invalid("fusion needs at least one expert"))?;
    for e in &experts[1..] {
        first.ensure_compatible(e)?;
    }
    let m = experts.len();
    let mut out = first.clone();
    for (t, tensor) in out.tensors_mut().iter_mut().enumerate() {
        for (j, v) in tensor.values.iter_mut().enumerate() {
            let x0 = *v;
            *v = if m == 1 || experts.iter().all(|e| e.tensors()[t].values[j] == x0) {
                x0
            } else if m == 2 {
                blend(x0, experts[1].tensors()[t].values[j], 0.5)
            } else {
                experts.iter().map(|e| e.tensors()[t].values[j]).sum::<f64>() / m as f64
            };
        }
    }
    Ok(out)
}

/// K prototypes plus convex weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePredictor {
    prototypes: Vec<ModelRecord>,
    weights: SimplexWeights,
}

impl EnsemblePredictor {
    pub fn new(prototypes: Vec<ModelRecord>, weights: SimplexWeights) -> Result<Self> {
        if prototypes.is_empty() || prototypes.len() != weights.len() {
            return Err(GenexError::DimensionMismatch {
                expected: prototypes.len(),
                got: weights.len(),
            });
        }
        let sig = prototypes[0].signature();
        if let Some(bad) = prototypes.iter().find(|p| p.signature() != sig) {
            return Err(GenexError::ArchitectureMismatch {
                expected: sig,
                got: bad.signature(),
            });
        }
        Ok(Self { prototypes, weights })
    }

    pub fn prototypes(&self) -> &[ModelRecord] {
        &self.prototypes
    }

    pub fn weights(&self) -> &SimplexWeights {
        &self.weights
    }

    /// Save prototypes as a checkpoint plus a JSON weights record.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        save_checkpoint(&self.prototypes, dir.join("prototypes.ckpt"))?;
        let tmp = dir.join("weights.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&self.weights)?)?;
        std::fs::rename(tmp, dir.join("weights.json"))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let prototypes = load_checkpoint(dir.join("prototypes.ckpt"))?;
        let weights: SimplexWeights = serde_json::from_str(&std::fs::read_to_string(dir.join("weights.json"))?)?;
        Self::new(prototypes, weights)
    }
}

/// `Σ_k w_k · predict_proba(prototype_k)`.
pub fn predict_ensemble(ensemble: &EnsemblePredictor, features: &Array2<f64>) -> Result<Array2<f64>> {
    let sets = ensemble
        .prototypes
        .iter()
        .map(|p| predict_proba(p, features))
        .collect::<Result<Vec<_>>>()?;
    Ok(convex_combination(&sets, ensemble.weights.as_slice()))
}

impl Classifier for EnsemblePredictor {
    fn predict_proba(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        predict_ensemble(self, features)
    }
}

/// Fuse each cluster's electees into a prototype and fine-tune its head on `train`.
pub fn build_prototypes(
    report: &ClusterReport,
    pool: &ModelPool,
    train: &Dataset,
    config: &ProtonexConfig,
    trace: &Trace,
) -> Result<Vec<ModelRecord>> {
    let prototypes: Vec<ModelRecord> = report
        .elected
        .par_iter()
        .enumerate()
        .map(|(k, elected)| {
            let experts: Vec<&ModelRecord> = elected
                .iter()
                .map(|e| {
                    pool.get(&e.model_id)
                        .ok_or_else(|| GenexError::invalid(format!("model `{}` not in pool", e.model_id)))
                })
                .collect::<Result<_>>()?;
            let params: Vec<&NamedParamSet> = experts.iter().map(|m| &m.params).collect();
            let mut cfg = experts[0].config.clone();
            cfg.seed = seed::derive(config.seed, "prototype", k as u64);
            let proto = ModelRecord {
                id: format!("proto-{k}"),
                params: fuse_prototype(&params)?,
                config: cfg,
                lineage: Lineage::Fused {
                    experts: elected.iter().map(|e| e.model_id.clone()).collect(),
                },
                generation: experts.iter().map(|m| m.generation).max().unwrap_or(0),
            };
            fine_tune_head(&proto, train, config.fine_tune_epochs)
        })
        .collect::<Result<_>>()?;
    for p in &prototypes {
        trace.record(TraceEvent::FineTune {
            model_id: p.id.clone(),
            epochs: config.fine_tune_epochs,
        });
    }
    Ok(prototypes)
}

/// Convex weights for `prototypes` fitted on validation cross-entropy.
pub fn weight_prototypes(prototypes: Vec<ModelRecord>, validation: &Dataset, trace: &Trace) -> Result<EnsemblePredictor> {
    let sets = prototypes
        .iter()
        .map(|p| predict_proba(p, validation.features()))
        .collect::<Result<Vec<_>>>()?;
    for p in &prototypes {
        trace.read(DataSplit::Validation, Stage::WeightOptimization, format!("weights {}", p.id));
    }
    let fit = optimize_simplex_weights(&sets, validation.labels())?;
    EnsemblePredictor::new(prototypes, fit.weights)
}

/// Full pipeline: signatures, clustering, election, fusion, head fine-tune,
/// simplex weighting. Validation is read only for signatures, election and weights.
pub fn build_ensemble(
    pool: &ModelPool,
    train: &Dataset,
    validation: &Dataset,
    config: &ProtonexConfig,
    trace: &Trace,
) -> Result<(EnsemblePredictor, ClusterReport)> {
    config.validate()?;
    if pool.is_empty() {
        return Err(GenexError::invalid("empty model pool"));
    }
    let signatures = extract_signatures(pool, validation, trace)?;
    let clusters = cluster_models(&signatures, &config.cluster_options())?;
    let report = elect_experts(
        &clusters,
        pool,
        validation,
        config.experts,
        &config.perturbation,
        seed::derive(config.seed, "election", 0),
        trace,
    )?;
    let prototypes = build_prototypes(&report, pool, train, config, trace)?;
    let ensemble = weight_prototypes(prototypes, validation, trace)?;
    Ok((ensemble, report))
}
