//! Single(N, q) and Inc-Ens(N, K) baselines.

use rayon::prelude::*;

use crate::error::{GenexError, Result};
use crate::learner::{argmax_rows, cross_entropy, predict_proba, ConfigSpace, Dataset, Lineage, ModelRecord, Trainer};
use crate::numerics::{convex_combination, SimplexWeights};
use crate::protonex::EnsemblePredictor;
use crate::seed;
use crate::trace::{DataSplit, Stage, Trace, TraceEvent};
use crate::voaware::geometric_mean_score;

#[derive(Debug, Clone)]
pub struct SingleOutcome {
    /// Global best-validation checkpoint.
    pub best: ModelRecord,
    pub best_val_gm: f64,
    /// Validation GM per run per epoch.
    pub val_gm: Vec<Vec<f64>>,
    /// Every checkpoint, `runs × q`.
    pub checkpoints: Vec<Vec<ModelRecord>>,
    /// Best checkpoint of each run (ties to the earliest epoch).
    pub run_best: Vec<ModelRecord>,
}

/// Train `runs` models for `q` epochs each, score validation GM after every
/// epoch, and keep the best checkpoint overall. Ties go to the earliest
/// (run, epoch). Logs exactly `runs × q` validation queries.
pub fn baseline_single(
    runs: usize,
    q: u32,
    space: &ConfigSpace,
    train: &Dataset,
    validation: &Dataset,
    seed: u64,
    trace: &Trace,
) -> Result<SingleOutcome> {
    if runs == 0 || q == 0 {
        return Err(GenexError::config("single baseline needs N ≥ 1 and q ≥ 1"));
    }
    space.validate()?;
    let mut rng = seed::rng(seed::derive(seed, "single", 0));
    let width = space.sample_width(&mut rng);
    let configs: Vec<_> = (0..runs)
        .map(|_| {
            let mut c = space.sample(width, &mut rng);
            c.epochs = q;
            c
        })
        .collect();
    let runs_out: Vec<(Vec<ModelRecord>, Vec<f64>)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, config)| {
            let init = space.initial_params(config, train.dim(), train.class_count());
            let mut trainer = Trainer::new(config, train, init.as_ref())?;
            let mut models = Vec::with_capacity(q as usize);
            let mut gms = Vec::with_capacity(q as usize);
            for t in 1..=q {
                trainer.run_epoch();
                let m = ModelRecord {
                    id: format!("single-{i:03}-ep{t}"),
                    params: trainer.params().clone(),
                    config: crate::learner::LearnerConfig { epochs: t, ..config.clone() },
                    lineage: Lineage::Gradient,
                    generation: 0,
                };
                let pred = argmax_rows(&predict_proba(&m, validation.features())?);
                gms.push(geometric_mean_score(&pred, validation.labels(), validation.class_count())?);
                models.push(m);
            }
            Ok((models, gms))
        })
        .collect::<Result<_>>()?;

    let mut best = (0, 0);
    let mut run_best = Vec::with_capacity(runs);
    for (i, (models, gms)) in runs_out.iter().enumerate() {
        trace.record(TraceEvent::Train {
            model_id: format!("single-{i:03}"),
            generation: 0,
            epochs: q,
        });
        let mut rb = 0;
        for (t, gm) in gms.iter().enumerate() {
            trace.read(DataSplit::Validation, Stage::Selection, format!("checkpoint {}", models[t].id));
            if *gm > gms[rb] {
                rb = t;
            }
            if *gm > runs_out[best.0].1[best.1] {
                best = (i, t);
            }
        }
        run_best.push(models[rb].clone());
    }
    let best_model = runs_out[best.0].0[best.1].clone();
    trace.record(TraceEvent::Select {
        stage: Stage::Selection,
        model_ids: vec![best_model.id.clone()],
    });
    let best_val_gm = runs_out[best.0].1[best.1];
    let (checkpoints, val_gm) = runs_out.into_iter().unzip();
    Ok(SingleOutcome {
        best: best_model,
        best_val_gm,
        val_gm,
        checkpoints,
        run_best,
    })
}

#[derive(Debug, Clone)]
pub struct IncEnsOutcome {
    pub ensemble: EnsemblePredictor,
    /// Member ids in the order they were added.
    pub order: Vec<String>,
    /// Validation cross-entropy of the running average after each step.
    pub step_loss: Vec<f64>,
}

/// Greedy forward selection of `k` distinct members, each step adding the
/// candidate whose inclusion minimises the validation cross-entropy of the
/// uniform average. Ties go to the lowest model id. One validation query is
/// logged per (step, candidate).
pub fn baseline_inc_ens(pool: &[ModelRecord], k: usize, validation: &Dataset, trace: &Trace) -> Result<IncEnsOutcome> {
    if k == 0 || k > pool.len() {
        return Err(GenexError::config(format!("Inc-Ens K={k} must lie in [1, {}]", pool.len())));
    }
    let mut candidates: Vec<&ModelRecord> = pool.iter().collect();
    candidates.sort_by(|a, b| a.id.cmp(&b.id));
    let preds = candidates
        .par_iter()
        .map(|m| predict_proba(m, validation.features()))
        .collect::<Result<Vec<_>>>()?;
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut step_loss = Vec::with_capacity(k);
    for step in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (j, candidate) in candidates.iter().enumerate() {
            if chosen.contains(&j) {
                continue;
            }
            trace.read(DataSplit::Validation, Stage::Selection, format!("inc-ens step {step} {}", candidate.id));
            let members: Vec<_> = chosen.iter().chain(std::iter::once(&j)).map(|&i| preds[i].clone()).collect();
            let avg = convex_combination(&members, SimplexWeights::uniform(members.len()).as_slice());
            let loss = cross_entropy(&avg, validation.labels());
            if best.is_none_or(|(_, b)| loss < b) {
                best = Some((j, loss));
            }
        }
        let (j, loss) = best.expect("K ≤ pool size leaves a candidate");
        chosen.push(j);
        step_loss.push(loss);
    }
    let order: Vec<String> = chosen.iter().map(|&i| candidates[i].id.clone()).collect();
    trace.record(TraceEvent::Select {
        stage: Stage::Selection,
        model_ids: order.clone(),
    });
    let members = chosen.iter().map(|&i| candidates[i].clone()).collect();
    Ok(IncEnsOutcome {
        ensemble: EnsemblePredictor::new(members, SimplexWeights::uniform(k))?,
        order,
        step_loss,
    })
}
