//! Split embeddings: read from a file or computed from the features.

use std::path::Path;

use genex_core::learner::{init_params, predict_proba, Activation, LearnerConfig, Lineage, ModelRecord};
use genex_core::synthetic::softmax_rows;
use genex_core::{seed, Dataset};
use ndarray::Array2;

use crate::config::{DatasetSection, Encoder};
use crate::error::CliError;

const ENCODER_WIDTH: usize = 32;

/// Numeric CSV with a header row.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>, CliError> {
    let err = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let width = reader.headers().map_err(|e| err(e.to_string()))?.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        for field in &record {
            values.push(field.trim().parse::<f64>().map_err(|_| err(format!("row {}: bad number `{field}`", i + 1)))?);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, width), values).map_err(|e| err(e.to_string()))
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>, prefix: &str) -> Result<(), CliError> {
    let mut out = (0..m.ncols()).map(|j| format!("{prefix}{j}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in m.rows() {
        out.push_str(&row.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    crate::fsutil::write_atomic(path, out)?;
    Ok(())
}

/// Embeddings used by the splitter, one row per sample.
pub fn embeddings(section: &DatasetSection, data: &Dataset, split_seed: u64) -> Result<Array2<f64>, CliError> {
    if let Some(path) = &section.embeddings {
        let emb = read_matrix_csv(path)?;
        if emb.nrows() != data.len() {
            return Err(CliError::Config(format!(
                "{} has {} rows but the dataset has {}",
                path.display(),
                emb.nrows(),
                data.len()
            )));
        }
        return Ok(emb);
    }
    match section.encoder {
        Encoder::SoftmaxFeatures => Ok(softmax_rows(data.features(), 1.0)),
        Encoder::RandomMlp => {
            let mut rng = seed::rng(seed::derive(split_seed, "encoder", 0));
            let classes = data.class_count();
            let model = ModelRecord {
                id: "encoder".into(),
                params: init_params(data.dim(), ENCODER_WIDTH, classes, &mut rng),
                config: LearnerConfig {
                    hidden_width: ENCODER_WIDTH,
                    activation: Activation::Relu,
                    ..LearnerConfig::default()
                },
                lineage: Lineage::Gradient,
                generation: 0,
            };
            Ok(predict_proba(&model, data.features())?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use genex_core::synthetic::two_blobs;

    #[test]
    fn encoders_give_stochastic_rows() {
        let data = two_blobs(20, 2.0, 1);
        for encoder in [Encoder::SoftmaxFeatures, Encoder::RandomMlp] {
            let section = DatasetSection {
                path: "unused".into(),
                embeddings: None,
                encoder,
            };
            let emb = embeddings(&section, &data, 3).unwrap();
            assert_eq!(emb.nrows(), 20);
            assert!(emb.rows().into_iter().all(|r| (r.sum() - 1.0).abs() < 1e-12));
            assert_eq!(emb, embeddings(&section, &data, 3).unwrap());
        }
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = ndarray::array![[0.1, 0.9], [1.0 / 3.0, 2.0 / 3.0]];
        write_matrix_csv(&path, &m, "e").unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), m);
    }
}
