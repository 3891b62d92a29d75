use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::error::{GenexError, Result};
use crate::seed;

/// Features plus integer labels in `[0, class_count)`. Every class is present.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(GenexError::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(GenexError::invalid("dataset is empty"));
        }
        if class_count < 2 {
            return Err(GenexError::invalid("need at least two classes"));
        }
        let mut counts = vec![0usize; class_count];
        for &y in &labels {
            if y >= class_count {
                return Err(GenexError::invalid(format!(
                    "label {y} out of range for {class_count} classes"
                )));
            }
            counts[y] += 1;
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(GenexError::invalid(format!("class {c} has no samples")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(GenexError::invalid("non-finite feature value"));
        }
        Ok(Self {
            features,
            labels,
            class_count,
        })
    }

    /// CSV with a header row; every column is a numeric feature except the
    /// last, which holds the integer class label.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let width = reader.headers()?.len();
        if width < 2 {
            return Err(GenexError::invalid(format!(
                "{}: need at least one feature column and a label column",
                path.display()
            )));
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != width {
                return Err(GenexError::invalid(format!(
                    "{}: row {} has {} columns, expected {width}",
                    path.display(),
                    row + 1,
                    record.len()
                )));
            }
            for field in record.iter().take(width - 1) {
                let v: f64 = field.trim().parse().map_err(|_| {
                    GenexError::invalid(format!("{}: row {}: bad number `{field}`", path.display(), row + 1))
                })?;
                values.push(v);
            }
            let label = record[width - 1].trim();
            let y: usize = label.parse().map_err(|_| {
                GenexError::invalid(format!("{}: row {}: bad label `{label}`", path.display(), row + 1))
            })?;
            labels.push(y);
        }
        let n = labels.len();
        let class_count = labels.iter().max().map_or(0, |m| m + 1);
        let features = Array2::from_shape_vec((n, width - 1), values)
            .map_err(|e| GenexError::invalid(e.to_string()))?;
        Self::new(features, labels, class_count)
    }

    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        writer.write_record(&header)?;
        for (row, &y) in self.features.rows().into_iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            fields.push(y.to_string());
            writer.write_record(&fields)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Sample indices of each class, in ascending order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }

    /// Rows at `indices`, keeping the class count of the parent.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(GenexError::invalid(format!("index {bad} out of range")));
        }
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels, self.class_count)
    }

    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        Self::new(features, self.labels.clone(), self.class_count)
    }

    /// Stratified split: per class, `round(fraction * n_c)` samples go to the
    /// second set. Returns `(kept, held_out)` index lists, each sorted.
    pub fn stratified_indices(&self, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
            return Err(GenexError::config(format!("split fraction {fraction} not in (0,1)")));
        }
        let mut kept = Vec::new();
        let mut held = Vec::new();
        for (c, mut idx) in self.class_indices().into_iter().enumerate() {
            let take = (fraction * idx.len() as f64).round() as usize;
            if take == 0 || take == idx.len() {
                return Err(GenexError::Infeasible(format!(
                    "class {c} with {} samples cannot be split at fraction {fraction}",
                    idx.len()
                )));
            }
            idx.shuffle(&mut seed::rng(seed::derive(seed, "stratified", c as u64)));
            held.extend_from_slice(&idx[..take]);
            kept.extend_from_slice(&idx[take..]);
        }
        kept.sort_unstable();
        held.sort_unstable();
        Ok((kept, held))
    }
}
