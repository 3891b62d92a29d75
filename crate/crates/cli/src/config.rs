//! Run configuration: one TOML file with top-level run keys and one table per
//! component. See the README for the full grammar.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use genex_core::gene::GeneConfig;
use genex_core::protonex::ProtonexConfig;
use genex_core::voaware::SplitConfig;
use genex_core::ConfigSpace;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Genex,
    Single,
    IncEns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoder {
    /// Softmax of the raw features, read as logits.
    SoftmaxFeatures,
    /// Softmax output of a randomly initialised MLP seeded from the split seed.
    RandomMlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DatasetSection {
    /// CSV with a header; numeric feature columns, integer label last.
    pub path: PathBuf,
    /// Optional CSV of row-stochastic split embeddings, one row per sample.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    /// Used when `embeddings` is absent.
    #[serde(default = "default_encoder")]
    pub encoder: Encoder,
}

fn default_encoder() -> Encoder {
    Encoder::SoftmaxFeatures
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    Guided,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct SplitSection {
    pub mode: SplitMode,
    pub ratio: f64,
    pub max_iter: usize,
    pub epsilon: f64,
    pub zeta: f64,
    /// The split is shared by every run seed, so it has its own seed.
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let c = SplitConfig::default();
        Self {
            mode: SplitMode::Guided,
            ratio: c.ratio,
            max_iter: c.max_iter,
            epsilon: c.epsilon,
            zeta: c.zeta,
            seed: c.seed,
        }
    }
}

impl SplitSection {
    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            ratio: self.ratio,
            max_iter: self.max_iter,
            epsilon: self.epsilon,
            zeta: self.zeta,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct BaselineSection {
    /// N values for Single and Inc-Ens.
    pub runs: Vec<usize>,
    /// q values (epochs per Single run).
    pub epochs: Vec<u32>,
    /// K values for Inc-Ens.
    pub ensemble_sizes: Vec<usize>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            runs: vec![20],
            epochs: vec![3],
            ensemble_sizes: vec![3],
        }
    }
}

/// One report row family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    Genex,
    Single { runs: usize, epochs: u32 },
    IncEns { runs: usize, epochs: u32, k: usize },
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match *self {
            MethodSpec::Genex => "genex".into(),
            MethodSpec::Single { runs, epochs } => format!("single-n{runs}-q{epochs}"),
            MethodSpec::IncEns { runs, epochs, k } => format!("inc-ens-n{runs}-q{epochs}-k{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Fraction of the train side held out for validation, per class.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    /// Start every from-scratch model from one body initialisation per seed.
    #[serde(default)]
    pub shared_body: bool,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub gene: GeneConfig,
    #[serde(default)]
    pub protonex: ProtonexConfig,
    #[serde(default)]
    pub baselines: BaselineSection,
    #[serde(default)]
    pub space: ConfigSpace,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out() -> PathBuf {
    PathBuf::from("genex-out")
}

fn default_methods() -> Vec<Method> {
    vec![Method::Genex, Method::Single, Method::IncEns]
}

fn default_validation_fraction() -> f64 {
    0.3
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parse and validate a config file. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.dataset.path = base.join(&config.dataset.path);
        config.dataset.embeddings = config.dataset.embeddings.map(|p| base.join(p));
        config.out = base.join(&config.out);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
            return bad("methods must be distinct".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation-fraction must lie in (0, 1)".into());
        }
        if self.shared_body && self.space.shared_body_seed.is_some() {
            return bad("set either shared-body or space.shared-body-seed, not both".into());
        }
        self.split.split_config().validate()?;
        self.space.validate()?;
        if self.methods.contains(&Method::Genex) {
            self.gene.validate()?;
            self.protonex.validate()?;
            if self.space.epochs.iter().any(|e| !(1..=3).contains(e)) {
                return bad("space.epochs must lie in [1, 3] for generation".into());
            }
        }
        let b = &self.baselines;
        if self.methods.iter().any(|m| *m != Method::Genex) {
            if b.runs.is_empty() || b.epochs.is_empty() {
                return bad("baselines.runs and baselines.epochs must not be empty".into());
            }
            if b.runs.contains(&0) || b.epochs.contains(&0) {
                return bad("baselines.runs and baselines.epochs must be positive".into());
            }
        }
        if self.methods.contains(&Method::IncEns) {
            if b.ensemble_sizes.is_empty() || b.ensemble_sizes.contains(&0) {
                return bad("baselines.ensemble-sizes must be positive and not empty".into());
            }
            let smallest = b.runs.iter().min().copied().unwrap_or(0);
            if let Some(k) = b.ensemble_sizes.iter().find(|&&k| k > smallest) {
                return bad(format!("Inc-Ens K={k} exceeds the smallest N={smallest}"));
            }
        }
        Ok(())
    }

    /// Report row families in report order.
    pub fn method_specs(&self) -> Vec<MethodSpec> {
        let mut methods = self.methods.clone();
        methods.sort();
        let b = &self.baselines;
        let mut out = Vec::new();
        for m in methods {
            match m {
                Method::Genex => out.push(MethodSpec::Genex),
                Method::Single => {
                    for &runs in &b.runs {
                        for &epochs in &b.epochs {
                            out.push(MethodSpec::Single { runs, epochs });
                        }
                    }
                }
                Method::IncEns => {
                    for &runs in &b.runs {
                        for &epochs in &b.epochs {
                            for &k in &b.ensemble_sizes {
                                out.push(MethodSpec::IncEns { runs, epochs, k });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// The configuration space as seen by run `seed`.
    pub fn space_for(&self, seed: u64) -> ConfigSpace {
        let mut space = self.space.clone();
        if self.shared_body {
            space.shared_body_seed = Some(seed);
        }
        space
    }
}
