//! Silhouette-based choice of K and partition agreement.

use std::collections::HashMap;

use ndarray::Array2;
use rayon::prelude::*;

use super::gmm::{gmm_assign, gmm_fit, GmmModel};
use crate::error::{GenexError, Result};
use crate::seed;

fn euclidean(points: &Array2<f64>, i: usize, j: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(points.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Mean silhouette with Euclidean distance. Points in singleton clusters
/// score 0. `None` unless there are between 2 and n-1 distinct labels.
pub fn silhouette_score(points: &Array2<f64>, labels: &[usize]) -> Option<f64> {
    let n = points.nrows();
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 || ids.len() >= n {
        return None;
    }
    let index: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut sizes = vec![0usize; ids.len()];
    for l in labels {
        sizes[index[l]] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = index[&labels[i]];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; ids.len()];
        for j in 0..n {
            if i != j {
                sums[index[&labels[j]]] += euclidean(points, i, j);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..ids.len())
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Some(total / n as f64)
}

/// Score of one candidate K.
#[derive(Debug, Clone)]
pub struct KCandidate {
    pub k: usize,
    pub silhouette: Option<f64>,
}

/// Fit a GMM for every K in `k_lo..=k_hi` and keep the one with the highest
/// mean silhouette over its hard assignments; ties go to the smaller K.
pub fn select_k_by_silhouette(
    points: &Array2<f64>,
    k_lo: usize,
    k_hi: usize,
    seed: u64,
) -> Result<(usize, GmmModel, Vec<KCandidate>)> {
    let n = points.nrows();
    if k_lo < 2 || k_lo > k_hi || k_hi > n.saturating_sub(1) {
        return Err(GenexError::Infeasible(format!(
            "K range [{k_lo}, {k_hi}] is not within [2, {}]",
            n.saturating_sub(1)
        )));
    }
    let fits: Vec<(usize, Option<(f64, GmmModel)>)> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| {
            let scored = gmm_fit(points, k, seed::derive(seed, "select-k", k as u64))
                .ok()
                .and_then(|model| {
                    let labels = gmm_assign(&model, points).ok()?;
                    silhouette_score(points, &labels).map(|s| (s, model))
                });
            (k, scored)
        })
        .collect();
    let candidates = fits
        .iter()
        .map(|(k, s)| KCandidate {
            k: *k,
            silhouette: s.as_ref().map(|(v, _)| *v),
        })
        .collect();
    let mut best: Option<(usize, f64, GmmModel)> = None;
    for (k, scored) in fits {
        if let Some((s, model)) = scored {
            if best.as_ref().is_none_or(|(_, bs, _)| s > *bs) {
                best = Some((k, s, model));
            }
        }
    }
    best.map(|(k, _, model)| (k, model, candidates))
        .ok_or_else(|| GenexError::Infeasible("no K in range yields at least two clusters".into()))
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len() as u64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| choose2(v)).sum();
    let total = choose2(n);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::gaussian_blobs;
    use ndarray::array;

    /// Brute-force silhouette straight from the definition.
    fn oracle(points: &Array2<f64>, labels: &[usize]) -> f64 {
        let n = points.nrows();
        let mut s = 0.0;
        for i in 0..n {
            let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
            if same.is_empty() {
                continue;
            }
            let a = same.iter().map(|&j| euclidean(points, i, j)).sum::<f64>() / same.len() as f64;
            let mut others: Vec<usize> = labels.iter().copied().filter(|&l| l != labels[i]).collect();
            others.sort_unstable();
            others.dedup();
            let b = others
                .iter()
                .map(|&c| {
                    let m: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                    m.iter().map(|&j| euclidean(points, i, j)).sum::<f64>() / m.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            s += (b - a) / a.max(b);
        }
        s / n as f64
    }

    #[test]
    fn silhouette_matches_definition() {
        let (x, _) = gaussian_blobs(8, &[vec![0.0, 0.0], vec![3.0, 1.0], vec![1.0, 4.0]], 1.0, 2);
        let labels: Vec<usize> = (0..24).map(|i| (i * 7) % 3).collect();
        assert!((silhouette_score(&x, &labels).unwrap() - oracle(&x, &labels)).abs() < 1e-12);
        assert!(silhouette_score(&x, &[0; 24]).is_none());
    }

    #[test]
    fn picks_three_for_three_blobs() {
        let centers = vec![vec![0.0, 0.0], vec![12.0, 0.0], vec![0.0, 12.0]];
        let (x, _) = gaussian_blobs(20, &centers, 1.0, 4);
        let (k, _, cands) = select_k_by_silhouette(&x, 2, 6, 0).unwrap();
        // oracle: silhouette of the true partition beats every other K's
        let best = cands.iter().filter_map(|c| c.silhouette.map(|s| (c.k, s))).fold((0, f64::MIN), |b, c| if c.1 > b.1 { c } else { b });
        assert_eq!(k, best.0);
        assert_eq!(k, 3);
    }

    #[test]
    fn duplicated_blobs_give_two() {
        let (x, _) = gaussian_blobs(15, &[vec![0.0, 0.0], vec![10.0, 10.0]], 0.5, 6);
        let doubled = ndarray::concatenate(ndarray::Axis(0), &[x.view(), x.view()]).unwrap();
        let (k, _, _) = select_k_by_silhouette(&doubled, 2, 4, 1).unwrap();
        assert_eq!(k, 2);
    }

    #[test]
    fn handles_tiny_inputs() {
        let x = array![[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0], [9.0, 0.0]];
        let (k, _, _) = select_k_by_silhouette(&x, 2, 4, 3).unwrap();
        assert!((2..=4).contains(&k));
        assert!(select_k_by_silhouette(&x, 2, 5, 3).is_err());
        assert!(select_k_by_silhouette(&x, 1, 3, 3).is_err());
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
        // sklearn reference value
        let v = adjusted_rand_index(&[0, 0, 1, 2], &[0, 0, 1, 1]);
        assert!((v - 0.571_428_571_428_571_4).abs() < 1e-12);
    }
}
