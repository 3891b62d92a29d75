//! One seed of a run: data preparation, every configured method, evaluation
//! and (optionally) persistence of the seed's artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use genex_core::gene::{run_gene, GeneConfig, ModelPool};
use genex_core::learner::{load_checkpoint, save_checkpoint};
use genex_core::numerics::SimplexWeights;
use genex_core::protonex::{build_ensemble, EnsemblePredictor, ProtonexConfig};
use genex_core::trace::{count_validation_queries, test_reads_outside_evaluation};
use genex_core::voaware::{
    baseline_inc_ens, baseline_single, evaluate_gm, jsd_guided_split, random_split, SingleOutcome, SplitIndices,
};
use genex_core::{Classifier, Dataset, DataSplit, Stage, Trace, TraceEvent};

use crate::config::{MethodSpec, RunConfig, SplitMode};
use crate::error::CliError;
use crate::fsutil::write_atomic;
use crate::report::{Metrics, Row, TrajPoint, REPORT_HEADER, TRAJECTORY_HEADER};

/// The dataset and its shared train/test split.
pub struct Prepared {
    pub data: Dataset,
    pub split: SplitIndices,
}

/// Load the dataset and compute the split. Every failure here is a config
/// error: nothing has been written yet.
pub fn prepare(config: &RunConfig) -> Result<Prepared, CliError> {
    let data = Dataset::from_csv(&config.dataset.path)
        .map_err(|e| CliError::Config(format!("cannot load dataset {}: {e}", config.dataset.path.display())))?;
    let emb = crate::encode::embeddings(&config.dataset, &data, config.split.seed)?;
    let split = compute_split(config, &data, &emb).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Prepared { data, split })
}

pub fn compute_split(config: &RunConfig, data: &Dataset, emb: &ndarray::Array2<f64>) -> genex_core::Result<SplitIndices> {
    match config.split.mode {
        SplitMode::Guided => jsd_guided_split(emb, data.labels(), &config.split.split_config()),
        SplitMode::Random => random_split(emb, data.labels(), config.split.ratio, config.split.seed),
    }
}

/// Train, validation and test data of one seed.
pub struct SeedData {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl SeedData {
    /// The test set is the split's test side for every seed; the train side is
    /// divided per class into train and validation with the seed.
    pub fn new(data: &Dataset, split: &SplitIndices, validation_fraction: f64, seed: u64) -> genex_core::Result<Self> {
        let side = data.subset(&split.train)?;
        let test = data.subset(&split.test)?;
        let (train, validation) = side.stratified_indices(validation_fraction, seed)?;
        Ok(Self {
            train: side.subset(&train)?,
            validation: side.subset(&validation)?,
            test,
        })
    }
}

/// Where a seed's artifacts go.
pub struct SeedStore {
    pub dir: PathBuf,
    /// Reuse a persisted generation pool instead of regenerating it.
    pub resume: bool,
}

impl SeedStore {
    fn path(&self, parts: &[&str]) -> PathBuf {
        parts.iter().fold(self.dir.clone(), |p, s| p.join(s))
    }
}

pub struct SeedOutcome {
    pub rows: Vec<Row>,
    pub trajectory: Vec<TrajPoint>,
    pub events: Vec<TraceEvent>,
    /// Wall seconds per method.
    pub timings: Vec<(String, f64)>,
    /// Validation queries per method, as counted from the method's own trace.
    pub queries: BTreeMap<String, usize>,
}

impl SeedOutcome {
    pub fn test_reads_outside_evaluation(&self) -> usize {
        test_reads_outside_evaluation(&self.events)
    }
}

struct MethodDone {
    metrics: Metrics,
    queries: usize,
    trajectory: Vec<TrajPoint>,
}

struct Context<'a> {
    config: &'a RunConfig,
    seed: u64,
    data: &'a SeedData,
    store: Option<&'a SeedStore>,
    /// Single(N, q) outcomes and their query counts, shared with Inc-Ens.
    singles: BTreeMap<(usize, u32), (SingleOutcome, usize)>,
}

fn metrics(model: &dyn Classifier, d: &SeedData, trace: &Trace) -> genex_core::Result<Metrics> {
    Ok(Metrics {
        train_gm: evaluate_gm(model, &d.train, DataSplit::Train, Stage::Evaluation, trace)?,
        val_gm: evaluate_gm(model, &d.validation, DataSplit::Validation, Stage::Evaluation, trace)?,
        test_gm: evaluate_gm(model, &d.test, DataSplit::Test, Stage::Evaluation, trace)?,
    })
}

fn save_pool(records: &[genex_core::ModelRecord], path: &Path) -> genex_core::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_checkpoint(records, path)
}

fn replay(events: Vec<TraceEvent>, into: &Trace) {
    events.into_iter().for_each(|e| into.record(e));
}

fn read_events(path: &Path) -> genex_core::Result<Vec<TraceEvent>> {
    std::fs::read_to_string(path)?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(Into::into))
        .collect()
}

impl Context<'_> {
    fn run(&mut self, spec: MethodSpec, trace: &Trace) -> genex_core::Result<MethodDone> {
        match spec {
            MethodSpec::Genex => self.genex(trace),
            MethodSpec::Single { runs, epochs } => self.single(runs, epochs, &spec.label(), trace),
            MethodSpec::IncEns { runs, epochs, k } => self.inc_ens(runs, epochs, k, &spec.label(), trace),
        }
    }

    fn pool(&self, method_trace: &Trace) -> genex_core::Result<ModelPool> {
        let store = self.store;
        let paths = store.map(|s| (s.path(&["genex", "pool.ckpt"]), s.path(&["genex", "gene-trace.jsonl"])));
        if let (Some(s), Some((pool_path, trace_path))) = (store, &paths) {
            if s.resume && pool_path.is_file() && trace_path.is_file() {
                replay(read_events(trace_path)?, method_trace);
                return ModelPool::new(load_checkpoint(pool_path)?);
            }
        }
        let gene = GeneConfig {
            seed: self.seed,
            ..self.config.gene.clone()
        };
        let gene_trace = Trace::new();
        let pool = run_gene(&gene, &self.data.train, &self.config.space_for(self.seed), &gene_trace)?;
        if let Some((pool_path, trace_path)) = &paths {
            // The pool file marks the pair as complete, so it goes last.
            write_atomic(trace_path, gene_trace.to_jsonl()?)?;
            save_pool(pool.records(), pool_path)?;
        }
        replay(gene_trace.events(), method_trace);
        Ok(pool)
    }

    fn genex(&mut self, trace: &Trace) -> genex_core::Result<MethodDone> {
        let method_trace = Trace::new();
        let pool = self.pool(&method_trace)?;
        let protonex = ProtonexConfig {
            seed: self.seed,
            ..self.config.protonex.clone()
        };
        let (ensemble, clusters) = build_ensemble(&pool, &self.data.train, &self.data.validation, &protonex, &method_trace)?;
        let queries = count_validation_queries(&method_trace.events());
        replay(method_trace.events(), trace);
        if let Some(s) = self.store {
            ensemble.save(s.path(&["genex", "ensemble"]))?;
            write_atomic(&s.path(&["genex", "clusters.json"]), clusters.to_json()?)?;
        }
        let metrics = metrics(&ensemble, self.data, trace)?;

        // Mean member GMs of each generation's survivors.
        let mut by_generation: BTreeMap<u32, Vec<Metrics>> = BTreeMap::new();
        for m in pool.records() {
            by_generation.entry(m.generation).or_default().push(self::metrics(m, self.data, trace)?);
        }
        let trajectory = by_generation
            .into_iter()
            .map(|(g, ms)| {
                let n = ms.len() as f64;
                let mean = |f: fn(&Metrics) -> f64| ms.iter().map(f).sum::<f64>() / n;
                TrajPoint {
                    method: "genex".into(),
                    seed: self.seed,
                    step: g as usize,
                    metrics: Metrics {
                        train_gm: mean(|m| m.train_gm),
                        val_gm: mean(|m| m.val_gm),
                        test_gm: mean(|m| m.test_gm),
                    },
                }
            })
            .collect();
        Ok(MethodDone {
            metrics,
            queries,
            trajectory,
        })
    }

    /// Run Single(N, q) once per seed, recording its events on `trace` the
    /// first time.
    fn single_outcome(&mut self, runs: usize, epochs: u32, trace: &Trace) -> genex_core::Result<(SingleOutcome, usize)> {
        if let Some(hit) = self.singles.get(&(runs, epochs)) {
            return Ok(hit.clone());
        }
        let own = Trace::new();
        let space = self.config.space_for(self.seed);
        let out = baseline_single(runs, epochs, &space, &self.data.train, &self.data.validation, self.seed, &own)?;
        let queries = count_validation_queries(&own.events());
        replay(own.events(), trace);
        self.singles.insert((runs, epochs), (out.clone(), queries));
        Ok((out, queries))
    }

    fn single(&mut self, runs: usize, epochs: u32, label: &str, trace: &Trace) -> genex_core::Result<MethodDone> {
        let (out, queries) = self.single_outcome(runs, epochs, trace)?;
        if let Some(s) = self.store {
            save_pool(std::slice::from_ref(&out.best), &s.path(&[label, "best.ckpt"]))?;
        }
        let metrics = metrics(&out.best, self.data, trace)?;
        let run = out
            .checkpoints
            .iter()
            .position(|run| run.iter().any(|m| m.id == out.best.id))
            .expect("best checkpoint belongs to a run");
        let trajectory = out.checkpoints[run]
            .iter()
            .enumerate()
            .map(|(t, m)| {
                Ok(TrajPoint {
                    method: label.into(),
                    seed: self.seed,
                    step: t + 1,
                    metrics: metrics_of(m, self.data, trace)?,
                })
            })
            .collect::<genex_core::Result<_>>()?;
        Ok(MethodDone {
            metrics,
            queries,
            trajectory,
        })
    }

    fn inc_ens(&mut self, runs: usize, epochs: u32, k: usize, label: &str, trace: &Trace) -> genex_core::Result<MethodDone> {
        let (single, single_queries) = self.single_outcome(runs, epochs, trace)?;
        let own = Trace::new();
        let out = baseline_inc_ens(&single.run_best, k, &self.data.validation, &own)?;
        let queries = single_queries + count_validation_queries(&own.events());
        replay(own.events(), trace);
        if let Some(s) = self.store {
            out.ensemble.save(s.path(&[label, "ensemble"]))?;
        }
        let metrics = metrics(&out.ensemble, self.data, trace)?;
        let members = out.ensemble.prototypes();
        let trajectory = (1..=members.len())
            .map(|t| {
                let prefix = EnsemblePredictor::new(members[..t].to_vec(), SimplexWeights::uniform(t))?;
                Ok(TrajPoint {
                    method: label.into(),
                    seed: self.seed,
                    step: t,
                    metrics: metrics_of(&prefix, self.data, trace)?,
                })
            })
            .collect::<genex_core::Result<_>>()?;
        Ok(MethodDone {
            metrics,
            queries,
            trajectory,
        })
    }
}

fn metrics_of(model: &dyn Classifier, d: &SeedData, trace: &Trace) -> genex_core::Result<Metrics> {
    metrics(model, d, trace)
}

/// Run every configured method for `seed`. A failing method aborts the seed:
/// it gets a failure row and the remaining methods get skip rows.
pub fn run_seed(config: &RunConfig, prepared: &Prepared, seed: u64, store: Option<&SeedStore>) -> SeedOutcome {
    let specs = config.method_specs();
    let mut outcome = SeedOutcome {
        rows: Vec::new(),
        trajectory: Vec::new(),
        events: Vec::new(),
        timings: Vec::new(),
        queries: BTreeMap::new(),
    };
    let data = match SeedData::new(&prepared.data, &prepared.split, config.validation_fraction, seed) {
        Ok(d) => d,
        Err(e) => {
            for spec in &specs {
                outcome.rows.push(Row::failed(spec.label(), seed, format!("data preparation: {e}")));
            }
            return outcome;
        }
    };
    let trace = Trace::new();
    let mut ctx = Context {
        config,
        seed,
        data: &data,
        store,
        singles: BTreeMap::new(),
    };
    let mut aborted: Option<String> = None;
    for spec in specs {
        let label = spec.label();
        if let Some(cause) = &aborted {
            outcome.rows.push(Row::failed(label, seed, format!("skipped after {cause}")));
            continue;
        }
        let start = Instant::now();
        match ctx.run(spec, &trace) {
            Ok(done) => {
                outcome.rows.push(Row::ok(label.clone(), seed, done.metrics, done.queries));
                outcome.queries.insert(label.clone(), done.queries);
                outcome.trajectory.extend(done.trajectory);
            }
            Err(e) => {
                aborted = Some(format!("{label} failed"));
                outcome.rows.push(Row::failed(label.clone(), seed, e.to_string()));
            }
        }
        outcome.timings.push((label, start.elapsed().as_secs_f64()));
    }
    outcome.events = trace.events();
    outcome
}

/// Persist the per-seed tables. `rows.tsv` is written last and marks the
/// seed as complete.
pub fn write_seed_files(store: &SeedStore, outcome: &SeedOutcome) -> Result<(), CliError> {
    let mut jsonl = String::new();
    for e in &outcome.events {
        jsonl.push_str(&serde_json::to_string(e).map_err(CliError::runtime)?);
        jsonl.push('\n');
    }
    write_atomic(&store.path(&["trace.jsonl"]), jsonl)?;
    let audit = serde_json::json!({
        "test-reads-outside-evaluation": outcome.test_reads_outside_evaluation(),
        "validation-queries": outcome.queries,
    });
    write_atomic(&store.path(&["audit.json"]), serde_json::to_string_pretty(&audit).map_err(CliError::runtime)? + "\n")?;
    write_atomic(&store.path(&["trajectory.tsv"]), tsv(TRAJECTORY_HEADER, outcome.trajectory.iter().map(TrajPoint::to_tsv)))?;
    write_atomic(
        &store.path(&["timing.tsv"]),
        tsv("method\twall-seconds", outcome.timings.iter().map(|(m, s)| format!("{m}\t{s:.3}"))),
    )?;
    write_atomic(&store.path(&["rows.tsv"]), tsv(REPORT_HEADER, outcome.rows.iter().map(Row::to_tsv)))?;
    Ok(())
}

pub fn tsv(header: &str, lines: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}
