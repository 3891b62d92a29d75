//! Ratio-constrained JSD-guided train/test splitting.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{GenexError, Result};
use crate::numerics::js_unchecked;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Per-class train ratio r.
    pub ratio: f64,
    /// Maximum refinement iterations T per class.
    pub max_iter: usize,
    /// Stop once a reassignment raises global JSD by less than this.
    pub epsilon: f64,
    /// Overlap ζ: fraction of each class's train side swapped with the test side.
    pub zeta: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratio: 0.3,
            max_iter: 10,
            epsilon: 1e-4,
            zeta: 0.0,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(GenexError::config("split ratio must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(GenexError::config("max-iter must be positive"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(GenexError::config("epsilon must be nonnegative"));
        }
        if !(0.0..=0.5).contains(&self.zeta) {
            return Err(GenexError::config("zeta must lie in [0, 0.5]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// JSD between the class's train and test mean embeddings, nats.
    pub per_class_jsd: Vec<f64>,
    /// JSD between the overall train and test mean embeddings, nats.
    pub global_jsd: f64,
    /// Refinement iterations run per class (0 for random splits).
    pub iterations: Vec<usize>,
    /// Global JSD after every accepted reassignment, in processing order.
    pub jsd_trace: Vec<f64>,
}

impl SplitIndices {
    pub fn global_jsd_bits(&self) -> f64 {
        self.global_jsd / std::f64::consts::LN_2
    }
}

fn class_lists(labels: &[usize]) -> Vec<Vec<usize>> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut lists = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        lists[y].push(i);
    }
    lists
}

fn train_size(ratio: f64, class: usize, n: usize) -> Result<usize> {
    let k = (ratio * n as f64).round() as usize;
    if (n as f64) * ratio < 2.0 || k == 0 || k >= n {
        return Err(GenexError::Infeasible(format!(
            "class {class} has {n} samples, too few for train ratio {ratio}"
        )));
    }
    Ok(k)
}

fn check_embeddings(embeddings: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if embeddings.nrows() != labels.len() {
        return Err(GenexError::DimensionMismatch {
            expected: labels.len(),
            got: embeddings.nrows(),
        });
    }
    if labels.is_empty() {
        return Err(GenexError::invalid("no samples to split"));
    }
    for (i, row) in embeddings.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(GenexError::invalid(format!("embedding row {i} is not a probability vector")));
        }
    }
    Ok(())
}

/// Running train/test sums over all classes.
struct Sums {
    train: Array1<f64>,
    test: Array1<f64>,
    n_train: usize,
    n_test: usize,
}

impl Sums {
    fn new(embeddings: &Array2<f64>, in_train: &[bool]) -> Self {
        let dim = embeddings.ncols();
        let mut s = Sums {
            train: Array1::zeros(dim),
            test: Array1::zeros(dim),
            n_train: 0,
            n_test: 0,
        };
        for (i, row) in embeddings.rows().into_iter().enumerate() {
            if in_train[i] {
                s.train += &row;
                s.n_train += 1;
            } else {
                s.test += &row;
                s.n_test += 1;
            }
        }
        s
    }

    fn jsd(&self) -> f64 {
        mean_jsd(&self.train, self.n_train, &self.test, self.n_test)
    }
}

fn mean_jsd(a: &Array1<f64>, na: usize, b: &Array1<f64>, nb: usize) -> f64 {
    if na == 0 || nb == 0 {
        return 0.0;
    }
    let ma = a / na as f64;
    let mb = b / nb as f64;
    js_unchecked(ma.as_slice().expect("contiguous"), mb.as_slice().expect("contiguous"))
}

fn class_means(embeddings: &Array2<f64>, members: &[usize], in_train: &[bool]) -> (Array1<f64>, Array1<f64>) {
    let dim = embeddings.ncols();
    let (mut t, mut e) = (Array1::zeros(dim), Array1::zeros(dim));
    let (mut nt, mut ne) = (0usize, 0usize);
    for &i in members {
        if in_train[i] {
            t += &embeddings.row(i);
            nt += 1;
        } else {
            e += &embeddings.row(i);
            ne += 1;
        }
    }
    (t / nt as f64, e / ne as f64)
}

fn finish(embeddings: &Array2<f64>, classes: &[Vec<usize>], in_train: &[bool], iterations: Vec<usize>, jsd_trace: Vec<f64>) -> SplitIndices {
    let per_class_jsd = classes
        .iter()
        .map(|members| {
            if members.is_empty() {
                return 0.0;
            }
            let (t, e) = class_means(embeddings, members, in_train);
            js_unchecked(t.as_slice().expect("contiguous"), e.as_slice().expect("contiguous"))
        })
        .collect();
    let global_jsd = Sums::new(embeddings, in_train).jsd();
    let (train, test): (Vec<usize>, Vec<usize>) = (0..in_train.len()).partition(|&i| in_train[i]);
    SplitIndices {
        train,
        test,
        per_class_jsd,
        global_jsd,
        iterations,
        jsd_trace,
    }
}

fn random_assignment(classes: &[Vec<usize>], ratio: f64, seed: u64, n: usize) -> Result<Vec<bool>> {
    let mut in_train = vec![false; n];
    for (c, members) in classes.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let k = train_size(ratio, c, members.len())?;
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut seed::rng(seed::derive(seed, "split-init", c as u64)));
        shuffled[..k].iter().for_each(|&i| in_train[i] = true);
    }
    Ok(in_train)
}

/// Stratified random split at ratio r, scored with the same JSD measures.
pub fn random_split(embeddings: &Array2<f64>, labels: &[usize], ratio: f64, seed: u64) -> Result<SplitIndices> {
    check_embeddings(embeddings, labels)?;
    let classes = class_lists(labels);
    let in_train = random_assignment(&classes, ratio, seed, labels.len())?;
    Ok(finish(embeddings, &classes, &in_train, vec![0; classes.len()], Vec::new()))
}

/// Per class, start from a random split at ratio r, then repeatedly move the
/// `round(r·N_c)` samples with the largest `JSD(x, μ_E) − JSD(x, μ_T)` into
/// train. A reassignment is kept only when it raises the global JSD; the class
/// has converged once the gain drops below `epsilon`. An optional ζ swap then
/// mixes the sides.
pub fn jsd_guided_split(embeddings: &Array2<f64>, labels: &[usize], config: &SplitConfig) -> Result<SplitIndices> {
    config.validate()?;
    check_embeddings(embeddings, labels)?;
    let classes = class_lists(labels);
    let mut in_train = random_assignment(&classes, config.ratio, config.seed, labels.len())?;
    let mut sums = Sums::new(embeddings, &in_train);
    let mut current = sums.jsd();
    let mut iterations = vec![0; classes.len()];
    let mut jsd_trace = Vec::new();

    for (c, members) in classes.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let k = train_size(config.ratio, c, members.len())?;
        for it in 1..=config.max_iter {
            iterations[c] = it;
            let (mu_t, mu_e) = class_means(embeddings, members, &in_train);
            let (mu_t, mu_e) = (mu_t.as_slice().expect("contiguous"), mu_e.as_slice().expect("contiguous"));
            let delta: Vec<f64> = members
                .iter()
                .map(|&i| {
                    let x = embeddings.row(i);
                    let x = x.as_slice().expect("contiguous");
                    js_unchecked(x, mu_e) - js_unchecked(x, mu_t)
                })
                .collect();
            let mut order: Vec<usize> = (0..members.len()).collect();
            order.sort_by(|&a, &b| delta[b].total_cmp(&delta[a]).then(a.cmp(&b)));
            let mut proposal = vec![false; members.len()];
            order[..k].iter().for_each(|&j| proposal[j] = true);

            let mut next = Sums {
                train: sums.train.clone(),
                test: sums.test.clone(),
                n_train: sums.n_train,
                n_test: sums.n_test,
            };
            for (j, &i) in members.iter().enumerate() {
                if proposal[j] != in_train[i] {
                    let row = embeddings.row(i);
                    if proposal[j] {
                        next.train += &row;
                        next.test -= &row;
                    } else {
                        next.test += &row;
                        next.train -= &row;
                    }
                }
            }
            let candidate = next.jsd();
            let gain = candidate - current;
            if gain > 0.0 {
                for (j, &i) in members.iter().enumerate() {
                    in_train[i] = proposal[j];
                }
                sums = next;
                current = candidate;
                jsd_trace.push(current);
            }
            if gain < config.epsilon {
                break;
            }
        }

        if config.zeta > 0.0 {
            let mut train_side: Vec<usize> = members.iter().copied().filter(|&i| in_train[i]).collect();
            let mut test_side: Vec<usize> = members.iter().copied().filter(|&i| !in_train[i]).collect();
            let swaps = (config.zeta * train_side.len() as f64).floor() as usize;
            let mut rng = seed::rng(seed::derive(config.seed, "zeta", c as u64));
            train_side.shuffle(&mut rng);
            test_side.shuffle(&mut rng);
            for s in 0..swaps.min(test_side.len()) {
                in_train[train_side[s]] = false;
                in_train[test_side[s]] = true;
            }
            sums = Sums::new(embeddings, &in_train);
            current = sums.jsd();
        }
    }
    Ok(finish(embeddings, &classes, &in_train, iterations, jsd_trace))
}
