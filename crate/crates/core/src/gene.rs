//! Genetic pool generation: gradient-trained seeds, crossover children with a
//! fine-tuned head, random per-generation selection. Never touches validation data.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GenexError, Result};
use crate::learner::{fine_tune_head, train, ConfigSpace, Dataset, Lineage, ModelRecord, NamedParamSet};
use crate::seed;
use crate::trace::{Stage, Trace, TraceEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct GeneConfig {
    /// Output pool size N.
    pub pool_size: usize,
    /// Generations G; must divide N.
    pub generations: usize,
    /// Children per generation N_g.
    pub offspring: usize,
    /// Fresh initialisations per generation N_new.
    pub fresh: usize,
    pub alpha: f64,
    pub rho: f64,
    pub sigma: f64,
    pub fine_tune_epochs: u32,
    pub seed: u64,
}

impl Default for GeneConfig {
    fn default() -> Self {
        Self {
            pool_size: 20,
            generations: 4,
            offspring: 10,
            fresh: 5,
            alpha: 0.5,
            rho: 0.05,
            sigma: 0.01,
            fine_tune_epochs: 1,
            seed: 0,
        }
    }
}

impl GeneConfig {
    /// Per-generation selection quota s = N / G.
    pub fn quota(&self) -> usize {
        self.pool_size / self.generations.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 || self.pool_size == 0 {
            return Err(GenexError::config("pool size and generations must be positive"));
        }
        if !self.pool_size.is_multiple_of(self.generations) {
            return Err(GenexError::config(format!(
                "generations ({}) must divide pool size ({})",
                self.generations, self.pool_size
            )));
        }
        if self.offspring < self.quota() {
            return Err(GenexError::config(format!(
                "offspring per generation ({}) is below the selection quota ({})",
                self.offspring,
                self.quota()
            )));
        }
        if self.pool_size < 2 {
            return Err(GenexError::config("the generation-0 pool needs at least 2 parents"));
        }
        if self.generations > 1 && self.offspring - self.quota() + self.fresh < 2 {
            return Err(GenexError::config(
                "unselected children plus fresh models must leave at least 2 parents",
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(GenexError::config("alpha must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(GenexError::config("rho must lie in [0, 1]"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(GenexError::config("sigma must be nonnegative"));
        }
        if self.fine_tune_epochs == 0 {
            return Err(GenexError::config("fine-tune epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Models sharing one architecture, with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPool {
    records: Vec<ModelRecord>,
    signature: String,
}

impl ModelPool {
    pub fn new(records: Vec<ModelRecord>) -> Result<Self> {
        let signature = records.first().map(|r| r.signature()).unwrap_or_default();
        let mut ids = std::collections::HashSet::new();
        for r in &records {
            if r.signature() != signature {
                return Err(GenexError::ArchitectureMismatch {
                    expected: signature,
                    got: r.signature(),
                });
            }
            if !ids.insert(r.id.as_str()) {
                return Err(GenexError::invalid(format!("duplicate model id `{}`", r.id)));
            }
        }
        Ok(Self { records, signature })
    }

    pub fn records(&self) -> &[ModelRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ModelRecord> {
        self.records
    }

    pub fn signature(&self) -> &str {
        &self.signature
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ModelRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// `α·a + (1−α)·b`, returning an endpoint exactly when α is 0 or 1 or a == b.
#[inline]
pub fn blend(a: f64, b: f64, alpha: f64) -> f64 {
    if alpha == 1.0 || a == b {
        a
    } else if alpha == 0.0 {
        b
    } else {
        alpha * a + (1.0 - alpha) * b
    }
}

/// Blend two parents tensor by tensor, then add `N(0, σ²)` noise to each
/// trainable tensor with probability ρ. Statistics and buffers are blended
/// but never mutated.
pub fn crossover_mutate(
    a: &NamedParamSet,
    b: &NamedParamSet,
    alpha: f64,
    rho: f64,
    sigma: f64,
    seed: u64,
) -> Result<NamedParamSet> {
    a.ensure_compatible(b)?;
    let mut rng = seed::rng(seed);
    let mut child = a.clone();
    for (t, tb) in child.tensors_mut().iter_mut().zip(b.tensors()) {
        for (x, &y) in t.values.iter_mut().zip(&tb.values) {
            *x = blend(*x, y, alpha);
        }
        let mutate = rng.random::<f64>() < rho;
        if mutate && t.role.is_trainable() && sigma > 0.0 {
            for x in &mut t.values {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x += sigma * z;
            }
        }
    }
    Ok(child)
}

struct Job {
    id: String,
    config: crate::learner::LearnerConfig,
    init: Option<NamedParamSet>,
    generation: u32,
}

fn train_all(jobs: Vec<Job>, data: &Dataset, trace: &Trace) -> Result<Vec<ModelRecord>> {
    let models: Vec<ModelRecord> = jobs
        .into_par_iter()
        .map(|job| {
            let mut m = train(&job.config, data, job.init.as_ref())?.with_id(job.id);
            m.generation = job.generation;
            Ok(m)
        })
        .collect::<Result<_>>()?;
    for m in &models {
        trace.record(TraceEvent::Train {
            model_id: m.id.clone(),
            generation: m.generation,
            epochs: m.config.epochs,
        });
    }
    Ok(models)
}

/// Generate a pool of `pool_size` models. The signature deliberately has no
/// validation argument.
pub fn run_gene(config: &GeneConfig, train_data: &Dataset, space: &ConfigSpace, trace: &Trace) -> Result<ModelPool> {
    config.validate()?;
    space.validate()?;
    if space.epochs.iter().any(|e| !(1..=3).contains(e)) {
        return Err(GenexError::config("generation epochs must lie in [1, 3]"));
    }
    if train_data.is_empty() {
        return Err(GenexError::invalid("empty training data"));
    }
    let mut rng = seed::rng(seed::derive(config.seed, "gene", 0));
    let width = space.sample_width(&mut rng);
    let s = config.quota();

    let jobs = (0..config.pool_size)
        .map(|i| {
            let config = space.sample(width, &mut rng);
            Job {
                id: format!("e00-{i:03}"),
                init: space.initial_params(&config, train_data.dim(), train_data.class_count()),
                config,
                generation: 0,
            }
        })
        .collect();
    let mut evol = train_all(jobs, train_data, trace)?;
    let mut output = Vec::with_capacity(config.pool_size);

    for g in 1..=config.generations {
        let plans: Vec<(usize, usize, u64)> = (0..config.offspring)
            .map(|_| {
                let pair = index::sample(&mut rng, evol.len(), 2);
                (pair.index(0), pair.index(1), rng.random())
            })
            .collect();
        let children: Vec<ModelRecord> = plans
            .par_iter()
            .enumerate()
            .map(|(j, &(ia, ib, child_seed))| {
                let (pa, pb) = (&evol[ia], &evol[ib]);
                let params = crossover_mutate(&pa.params, &pb.params, config.alpha, config.rho, config.sigma, child_seed)?;
                let mut child_config = pa.config.clone();
                child_config.seed = seed::derive(child_seed, "child", 0);
                let child = ModelRecord {
                    id: format!("g{g:02}-c{j:03}"),
                    params,
                    config: child_config,
                    lineage: Lineage::Genetic {
                        parent_a: pa.id.clone(),
                        parent_b: pb.id.clone(),
                    },
                    generation: g as u32,
                };
                fine_tune_head(&child, train_data, config.fine_tune_epochs)
            })
            .collect::<Result<_>>()?;
        for c in &children {
            trace.record(TraceEvent::FineTune {
                model_id: c.id.clone(),
                epochs: config.fine_tune_epochs,
            });
        }

        let mut picked = index::sample(&mut rng, children.len(), s).into_vec();
        picked.sort_unstable();
        trace.record(TraceEvent::Select {
            stage: Stage::Selection,
            model_ids: picked.iter().map(|&i| children[i].id.clone()).collect(),
        });
        let mut is_picked = vec![false; children.len()];
        picked.iter().for_each(|&i| is_picked[i] = true);
        let mut rest = Vec::new();
        for (i, c) in children.into_iter().enumerate() {
            if is_picked[i] {
                output.push(c);
            } else {
                rest.push(c);
            }
        }

        // The next evolutionary pool is only needed if another generation follows.
        if g == config.generations {
            break;
        }
        let mut jobs = Vec::with_capacity(rest.len() + config.fresh);
        for c in rest {
            jobs.push(Job {
                id: String::new(),
                config: space.sample(width, &mut rng),
                init: Some(c.params),
                generation: g as u32,
            });
        }
        for _ in 0..config.fresh {
            let cfg = space.sample(width, &mut rng);
            jobs.push(Job {
                id: String::new(),
                init: space.initial_params(&cfg, train_data.dim(), train_data.class_count()),
                config: cfg,
                generation: g as u32,
            });
        }
        for (i, job) in jobs.iter_mut().enumerate() {
            job.id = format!("e{g:02}-{i:03}");
        }
        evol = train_all(jobs, train_data, trace)?;
    }
    ModelPool::new(output)
}
