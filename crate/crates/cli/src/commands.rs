//! Subcommand bodies. Each returns text for stdout or a [`CliError`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use genex_core::gene::ModelPool;
use genex_core::learner::load_checkpoint;
use genex_core::protonex::EnsemblePredictor;
use genex_core::synthetic::{shifted_benchmark, ShiftedSpec};
use genex_core::voaware::{simulate_optimism, OptimismSimConfig, SplitIndices};
use genex_core::{Lineage, ModelRecord};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SplitMode};
use crate::error::CliError;
use crate::fsutil::{remove_temp_files, write_atomic};
use crate::pipeline::{prepare, run_seed, tsv, write_seed_files, Prepared, SeedStore};
use crate::report::{REPORT_HEADER, TRAJECTORY_HEADER};

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
struct SplitMeta<'a> {
    mode: SplitMode,
    ratio: f64,
    zeta: f64,
    seed: u64,
    train_size: usize,
    test_size: usize,
    global_jsd_nats: f64,
    global_jsd_bits: f64,
    per_class_jsd_nats: &'a [f64],
    iterations: &'a [usize],
    jsd_trace: &'a [f64],
}

fn index_file(indices: &[usize]) -> String {
    indices.iter().map(|i| format!("{i}\n")).collect()
}

fn write_split(config: &RunConfig, split: &SplitIndices, out: &Path) -> Result<(), CliError> {
    let dir = out.join("split");
    write_atomic(&dir.join("train.idx"), index_file(&split.train))?;
    write_atomic(&dir.join("test.idx"), index_file(&split.test))?;
    let meta = SplitMeta {
        mode: config.split.mode,
        ratio: config.split.ratio,
        zeta: config.split.zeta,
        seed: config.split.seed,
        train_size: split.train.len(),
        test_size: split.test.len(),
        global_jsd_nats: split.global_jsd,
        global_jsd_bits: split.global_jsd_bits(),
        per_class_jsd_nats: &split.per_class_jsd,
        iterations: &split.iterations,
        jsd_trace: &split.jsd_trace,
    };
    write_atomic(&dir.join("split.json"), serde_json::to_string_pretty(&meta).map_err(CliError::runtime)? + "\n")?;
    Ok(())
}

/// Compute the split and write `split/{train.idx, test.idx, split.json}`.
pub fn cmd_split(config: &RunConfig) -> Result<String, CliError> {
    let Prepared { split, .. } = prepare(config)?;
    write_split(config, &split, &config.out)?;
    Ok(format!(
        "split: {} train, {} test, global JSD {:.6} nats ({:.6} bits)\n",
        split.train.len(),
        split.test.len(),
        split.global_jsd,
        split.global_jsd_bits()
    ))
}

/// Per-seed tables as text, either freshly computed or read back on resume.
struct SeedTables {
    rows: Vec<String>,
    trajectory: Vec<String>,
    timing: Vec<String>,
    test_reads_outside_evaluation: usize,
}

fn body_lines(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(std::fs::read_to_string(path)?.lines().skip(1).map(String::from).collect())
}

fn load_seed(dir: &Path) -> Result<SeedTables, CliError> {
    let audit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("audit.json"))?).map_err(CliError::runtime)?;
    Ok(SeedTables {
        rows: body_lines(&dir.join("rows.tsv"))?,
        trajectory: body_lines(&dir.join("trajectory.tsv"))?,
        timing: body_lines(&dir.join("timing.tsv"))?,
        test_reads_outside_evaluation: audit["test-reads-outside-evaluation"].as_u64().unwrap_or(u64::MAX) as usize,
    })
}

fn run_one(config: &RunConfig, prepared: &Prepared, seed: u64, resume: bool) -> Result<SeedTables, CliError> {
    let dir = config.out.join("seeds").join(seed.to_string());
    if resume && dir.join("rows.tsv").is_file() {
        return load_seed(&dir);
    }
    if !resume && dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    let store = SeedStore { dir, resume };
    let outcome = run_seed(config, prepared, seed, Some(&store));
    write_seed_files(&store, &outcome)?;
    Ok(SeedTables {
        rows: outcome.rows.iter().map(|r| r.to_tsv()).collect(),
        trajectory: outcome.trajectory.iter().map(|t| t.to_tsv()).collect(),
        timing: outcome.timings.iter().map(|(m, s)| format!("{m}\t{s:.3}")).collect(),
        test_reads_outside_evaluation: outcome.test_reads_outside_evaluation(),
    })
}

/// Run every seed and write `report.tsv`, `trajectories.tsv` and
/// `timings.tsv` under the output directory. Seeds with failed methods still
/// produce rows; the command then reports a runtime failure.
pub fn cmd_run(config: &RunConfig, resume: bool) -> Result<String, CliError> {
    let prepared = prepare(config)?;
    let out = &config.out;
    std::fs::create_dir_all(out)?;
    remove_temp_files(out)?;
    write_split(config, &prepared.split, out)?;

    let seeds: Vec<SeedTables> = config
        .seeds
        .par_iter()
        .map(|&s| run_one(config, &prepared, s, resume))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut trajectory = Vec::new();
    let mut timing = Vec::new();
    let mut leaks = 0;
    for (s, t) in config.seeds.iter().zip(seeds) {
        rows.extend(t.rows);
        trajectory.extend(t.trajectory);
        timing.extend(t.timing.into_iter().map(|l| format!("{s}\t{l}")));
        leaks += t.test_reads_outside_evaluation;
    }
    let failed = rows.iter().filter(|r| r.contains("\tfailed: ")).count();
    let report = tsv(REPORT_HEADER, rows.into_iter());
    write_atomic(&out.join("report.tsv"), &report)?;
    write_atomic(&out.join("trajectories.tsv"), tsv(TRAJECTORY_HEADER, trajectory.into_iter()))?;
    write_atomic(&out.join("timings.tsv"), tsv("seed\tmethod\twall-seconds", timing.into_iter()))?;
    if leaks > 0 {
        return Err(CliError::Runtime(format!("test data was read outside evaluation {leaks} times")));
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} report rows failed; see {}", out.join("report.tsv").display())));
    }
    Ok(report)
}

pub fn cmd_simulate_optimism(config: &OptimismSimConfig) -> Result<String, CliError> {
    config.validate()?;
    let est = simulate_optimism(config)?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "queries": config.runs * config.checkpoints,
        "trials": config.trials,
        "mean-min-loss": est.mean_min_loss,
        "optimism": est.optimism,
        "std-error": est.std_error,
    }))
    .map_err(CliError::runtime)?
        + "\n")
}

fn lineage_text(l: &Lineage) -> String {
    match l {
        Lineage::Gradient => "gradient".into(),
        Lineage::Genetic { parent_a, parent_b } => format!("genetic({parent_a},{parent_b})"),
        Lineage::Fused { experts } => format!("fused({})", experts.join(",")),
    }
}

fn model_line(m: &ModelRecord, weight: Option<f64>) -> String {
    let c = &m.config;
    let mut line = format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        m.id,
        m.generation,
        lineage_text(&m.lineage),
        c.hidden_width,
        c.epochs,
        c.dropout,
        c.augmentation_noise,
        m.params.numel()
    );
    if let Some(w) = weight {
        let _ = write!(line, "\t{w:.6}");
    }
    line
}

/// Describe a pool checkpoint, or an ensemble directory holding
/// `prototypes.ckpt` and `weights.json`.
pub fn cmd_inspect_pool(path: &Path) -> Result<String, CliError> {
    let header = "id\tgeneration\tlineage\thidden-width\tepochs\tdropout\tinput-noise\tparameters";
    if path.is_dir() {
        let ens = EnsemblePredictor::load(path)?;
        let weights = ens.weights().as_slice();
        let mut out = format!("signature\t{}\n", ens.prototypes()[0].signature());
        out.push_str(&tsv(
            &format!("{header}\tweight"),
            ens.prototypes().iter().zip(weights).map(|(m, &w)| model_line(m, Some(w))),
        ));
        return Ok(out);
    }
    let pool = ModelPool::new(load_checkpoint(path)?)?;
    let mut out = format!("signature\t{}\n", pool.signature());
    out.push_str(&tsv(header, pool.records().iter().map(|m| model_line(m, None))));
    Ok(out)
}

/// Write the shifted benchmark (`data.csv`, `embeddings.csv`) and a starter
/// config `genex.toml` into `dir`.
pub fn cmd_generate(dir: &Path, spec: &ShiftedSpec, seed: u64) -> Result<String, CliError> {
    if spec.dim < 2 || spec.n_per_class < 2 {
        return Err(CliError::Config("generate needs dim ≥ 2 and at least 2 samples per class".into()));
    }
    let (data, emb) = shifted_benchmark(spec, seed);
    std::fs::create_dir_all(dir)?;
    data.to_csv(dir.join("data.csv"))?;
    crate::encode::write_matrix_csv(&dir.join("embeddings.csv"), &emb, "e")?;
    write_atomic(&dir.join("genex.toml"), STARTER_CONFIG)?;
    Ok(format!(
        "wrote {} samples with {} features to {}\n",
        data.len(),
        data.dim(),
        dir.display()
    ))
}

const STARTER_CONFIG: &str = r#"seeds = [0, 1, 2]
out = "run"
methods = ["genex", "single", "inc-ens"]
validation-fraction = 0.3
shared-body = true

[dataset]
path = "data.csv"
embeddings = "embeddings.csv"

[split]
mode = "guided"
ratio = 0.3
zeta = 0.0
seed = 0

[gene]
pool-size = 20
generations = 4
offspring = 10
fresh = 5

[protonex]
experts = 5

[baselines]
runs = [20]
epochs = [3]
ensemble-sizes = [3]
"#;

/// The output directory a config resolves to after `--out`.
pub fn with_out(mut config: RunConfig, out: Option<PathBuf>, seed_override: Option<u64>) -> RunConfig {
    if let Some(o) = out {
        config.out = o;
    }
    if let Some(s) = seed_override {
        config.seeds = vec![s];
    }
    config
}
