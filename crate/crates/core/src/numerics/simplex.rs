//! Convex weighting of stacked predictions by projected gradient descent.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{GenexError, Result};

const PROB_FLOOR: f64 = 1e-12;
const MAX_ITER: usize = 1000;
const STATIONARITY_TOL: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(GenexError::invalid("empty weight vector"));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(GenexError::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(GenexError::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn vertex(k: usize, i: usize) -> Self {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = GenexError;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplexFit {
    pub weights: SimplexWeights,
    pub objective: f64,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub converged: bool,
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    }
    w
}

/// Row-wise convex combination `Σ_k w_k · sets[k]`.
pub fn convex_combination(sets: &[Array2<f64>], weights: &[f64]) -> Array2<f64> {
    let mut out = Array2::zeros(sets[0].raw_dim());
    for (p, &w) in sets.iter().zip(weights) {
        if w != 0.0 {
            out.scaled_add(w, p);
        }
    }
    out
}

fn validate(sets: &[Array2<f64>], labels: &[usize]) -> Result<()> {
    if sets.is_empty() {
        return Err(GenexError::invalid("no prediction sets"));
    }
    let dim = sets[0].dim();
    if dim.0 != labels.len() || dim.0 == 0 {
        return Err(GenexError::DimensionMismatch {
            expected: labels.len(),
            got: dim.0,
        });
    }
    for p in sets {
        if p.dim() != dim {
            return Err(GenexError::invalid("prediction sets differ in shape"));
        }
        if p.iter().any(|v| v.is_nan()) {
            return Err(GenexError::invalid("NaN in predictions"));
        }
    }
    if labels.iter().any(|&y| y >= dim.1) {
        return Err(GenexError::invalid("label out of range"));
    }
    Ok(())
}

/// Per-model probability of the true label, `K × n`.
fn true_class_probs(sets: &[Array2<f64>], labels: &[usize]) -> Vec<Vec<f64>> {
    sets.iter()
        .map(|p| labels.iter().enumerate().map(|(i, &y)| p[[i, y]]).collect())
        .collect()
}

fn objective_and_grad(q: &[Vec<f64>], w: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = q[0].len();
    let mut loss = 0.0;
    let mut g = grad;
    if let Some(g) = g.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    for i in 0..n {
        let s: f64 = q.iter().zip(w).map(|(qk, wk)| wk * qk[i]).sum();
        loss -= s.max(PROB_FLOOR).ln();
        if let Some(g) = g.as_deref_mut() {
            if s > PROB_FLOOR {
                for (gk, qk) in g.iter_mut().zip(q) {
                    *gk -= qk[i] / s;
                }
            }
        }
    }
    if let Some(g) = g {
        g.iter_mut().for_each(|v| *v /= n as f64);
    }
    loss / n as f64
}

/// Mean cross-entropy of the weighted mixture on `labels`.
pub fn mixture_cross_entropy(sets: &[Array2<f64>], labels: &[usize], weights: &[f64]) -> Result<f64> {
    validate(sets, labels)?;
    if weights.len() != sets.len() {
        return Err(GenexError::DimensionMismatch {
            expected: sets.len(),
            got: weights.len(),
        });
    }
    Ok(objective_and_grad(&true_class_probs(sets, labels), weights, None))
}

fn stationarity(w: &[f64], g: &[f64]) -> f64 {
    let step: Vec<f64> = w.iter().zip(g).map(|(a, b)| a - b).collect();
    let p = project_to_simplex(&step);
    w.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Minimise validation cross-entropy of `Σ_k w_k P_k` over the simplex,
/// starting from uniform weights.
pub fn optimize_simplex_weights(sets: &[Array2<f64>], labels: &[usize]) -> Result<SimplexFit> {
    validate(sets, labels)?;
    let k = sets.len();
    let q = true_class_probs(sets, labels);
    let mut w = vec![1.0 / k as f64; k];
    let mut g = vec![0.0; k];
    let mut f = objective_and_grad(&q, &w, Some(&mut g));
    let mut step = 1.0;
    let mut iterations = 0;
    let mut pg = stationarity(&w, &g);
    while iterations < MAX_ITER && pg > STATIONARITY_TOL && k > 1 {
        iterations += 1;
        let mut accepted = false;
        while step > 1e-20 {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let cand = project_to_simplex(&trial);
            let dist2: f64 = cand.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum();
            let fc = objective_and_grad(&q, &cand, None);
            if fc <= f - ARMIJO / step * dist2 {
                w = cand;
                f = objective_and_grad(&q, &w, Some(&mut g));
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 2.0;
        pg = stationarity(&w, &g);
    }
    for i in 0..k {
        let vertex = SimplexWeights::vertex(k, i);
        let fv = objective_and_grad(&q, vertex.as_slice(), None);
        if fv < f {
            f = fv;
            w = vertex.0;
        }
    }
    objective_and_grad(&q, &w, Some(&mut g));
    let pg = if k == 1 { 0.0 } else { stationarity(&w, &g) };
    Ok(SimplexFit {
        weights: SimplexWeights::new(w)?,
        objective: f,
        iterations,
        projected_gradient_norm: pg,
        converged: pg <= STATIONARITY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perfect_and_uniform(n: usize) -> (Vec<Array2<f64>>, Vec<usize>) {
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let perfect = Array2::from_shape_fn((n, 2), |(i, c)| if c == labels[i] { 0.99 } else { 0.01 });
        let uniform = Array2::from_elem((n, 2), 0.5);
        (vec![perfect, uniform], labels)
    }

    fn grid_oracle(sets: &[Array2<f64>], labels: &[usize]) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=1000 {
            let a = i as f64 / 1000.0;
            let f = mixture_cross_entropy(sets, labels, &[a, 1.0 - a]).unwrap();
            if f < best.0 {
                best = (f, a);
            }
        }
        best
    }

    #[test]
    fn single_set_gets_unit_weight() {
        let (sets, labels) = perfect_and_uniform(10);
        let fit = optimize_simplex_weights(&sets[..1], &labels).unwrap();
        assert_eq!(fit.weights.as_slice(), &[1.0]);
    }

    #[test]
    fn dominant_prototype_matches_grid() {
        let (sets, labels) = perfect_and_uniform(40);
        let fit = optimize_simplex_weights(&sets, &labels).unwrap();
        let (f_grid, _) = grid_oracle(&sets, &labels);
        assert!(fit.weights.as_slice()[0] >= 0.9);
        assert!(fit.objective <= f_grid + 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn interior_optimum_matches_grid() {
        // two complementary experts: each right on half the rows
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let a = Array2::from_shape_fn((20, 2), |(i, c)| {
            let good = if i < 10 { 0.9 } else { 0.3 };
            if c == labels[i] { good } else { 1.0 - good }
        });
        let b = Array2::from_shape_fn((20, 2), |(i, c)| {
            let good = if i < 10 { 0.4 } else { 0.8 };
            if c == labels[i] { good } else { 1.0 - good }
        });
        let sets = vec![a, b];
        let fit = optimize_simplex_weights(&sets, &labels).unwrap();
        let (f_grid, a_grid) = grid_oracle(&sets, &labels);
        assert!(fit.objective <= f_grid + 1e-6);
        assert!((fit.weights.as_slice()[0] - a_grid).abs() < 2e-3);
        assert!(fit.projected_gradient_norm <= 1e-6);
    }

    #[test]
    fn identical_sets_keep_single_objective() {
        let (sets, labels) = perfect_and_uniform(12);
        let twin = vec![sets[0].clone(), sets[0].clone()];
        let fit = optimize_simplex_weights(&twin, &labels).unwrap();
        let single = mixture_cross_entropy(&sets[..1], &labels, &[1.0]).unwrap();
        assert!((fit.objective - single).abs() <= 1e-9);
    }

    #[test]
    fn nan_is_rejected() {
        let (mut sets, labels) = perfect_and_uniform(4);
        sets[1][[0, 0]] = f64::NAN;
        assert!(optimize_simplex_weights(&sets, &labels).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    fn random_sets(k: usize, n: usize, c: usize, raw: &[f64]) -> (Vec<Array2<f64>>, Vec<usize>) {
        let mut it = raw.iter().cycle();
        let sets = (0..k)
            .map(|_| {
                let mut m = Array2::from_shape_fn((n, c), |_| 0.01 + *it.next().unwrap());
                for mut row in m.rows_mut() {
                    let s = row.sum();
                    row /= s;
                }
                m
            })
            .collect();
        let labels = (0..n).map(|i| (i * 7 + k) % c).collect();
        (sets, labels)
    }

    proptest! {
        #[test]
        fn output_is_feasible_and_beats_uniform(
            k in 1usize..5, n in 2usize..15, c in 2usize..4,
            raw in prop::collection::vec(0.0f64..1.0, 8..64),
        ) {
            let (sets, labels) = random_sets(k, n, c, &raw);
            let fit = optimize_simplex_weights(&sets, &labels).unwrap();
            let w = fit.weights.as_slice();
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
            let uniform = mixture_cross_entropy(&sets, &labels, SimplexWeights::uniform(k).as_slice()).unwrap();
            prop_assert!(fit.objective <= uniform + 1e-9);
            for i in 0..k {
                let v = mixture_cross_entropy(&sets, &labels, SimplexWeights::vertex(k, i).as_slice()).unwrap();
                prop_assert!(fit.objective <= v + 1e-9);
            }
        }

        #[test]
        fn projection_lands_on_simplex(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = project_to_simplex(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
