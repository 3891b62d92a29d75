//! GM, VO and TO metrics.

use crate::error::{GenexError, Result};
use crate::learner::{argmax_rows, Classifier, Dataset};
use crate::trace::{DataSplit, Stage, Trace};

/// Geometric mean of per-class recalls. For two classes this is
/// `√(sensitivity · specificity)`. Every class must occur in `labels`.
pub fn geometric_mean_score(predictions: &[usize], labels: &[usize], class_count: usize) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(GenexError::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    let mut hits = vec![0usize; class_count];
    let mut totals = vec![0usize; class_count];
    for (&p, &y) in predictions.iter().zip(labels) {
        if y >= class_count {
            return Err(GenexError::invalid(format!("label {y} out of range")));
        }
        totals[y] += 1;
        if p == y {
            hits[y] += 1;
        }
    }
    if let Some(c) = totals.iter().position(|&t| t == 0) {
        return Err(GenexError::invalid(format!("class {c} is absent from the labels")));
    }
    let product: f64 = hits.iter().zip(&totals).map(|(&h, &t)| h as f64 / t as f64).product();
    Ok(product.powf(1.0 / class_count as f64))
}

/// GM of a classifier on `data`, recording the read on `trace`.
pub fn evaluate_gm(
    model: &dyn Classifier,
    data: &Dataset,
    split: DataSplit,
    stage: Stage,
    trace: &Trace,
) -> Result<f64> {
    trace.read(split, stage, "gm");
    let pred = argmax_rows(&model.predict_proba(data.features())?);
    geometric_mean_score(&pred, data.labels(), data.class_count())
}

/// `(GM(validation) − GM(test)) × 10³`.
pub fn vo_gap(model: &dyn Classifier, validation: &Dataset, test: &Dataset, trace: &Trace) -> Result<f64> {
    let v = evaluate_gm(model, validation, DataSplit::Validation, Stage::Evaluation, trace)?;
    let t = evaluate_gm(model, test, DataSplit::Test, Stage::Evaluation, trace)?;
    Ok((v - t) * 1e3)
}

/// `(GM(train) − GM(validation)) × 10³`.
pub fn to_gap(model: &dyn Classifier, train: &Dataset, validation: &Dataset, trace: &Trace) -> Result<f64> {
    let t = evaluate_gm(model, train, DataSplit::Train, Stage::Evaluation, trace)?;
    let v = evaluate_gm(model, validation, DataSplit::Validation, Stage::Evaluation, trace)?;
    Ok((t - v) * 1e3)
}
