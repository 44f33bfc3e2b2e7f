//! Spectral regrouping of small communities.
//!
//! Small communities become units, linked by the mean correlation between
//! their members. Units are embedded with the normalised Laplacian of that
//! similarity, grouped by k-means, and the result replaces the Leiden split
//! only when it raises the intra/inter objective.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::CorrelationMatrix;
use crate::metrics::objective_opt;
use crate::numerics::{eig_sym, kmeans, Matrix, DEFAULT_RESTARTS};
use crate::partition::Partition;

pub const DEFAULT_SMALL_N: usize = 5;
pub const MIN_CLUSTERS: usize = 5;
pub const MAX_CLUSTERS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityMatrix {
    /// Stock indices of each unit.
    pub units: Vec<Vec<usize>>,
    pub values: Matrix,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// Average-linkage similarity between disjoint units.
///
/// Off the diagonal, the mean of all cross-pair correlations; on it, the mean
/// within-unit pair correlation, or 1 for a single stock.
pub fn similarity(units: &[Vec<usize>], corr: &CorrelationMatrix) -> Result<SimilarityMatrix> {
    let mut seen = vec![false; corr.len()];
    for unit in units {
        if unit.is_empty() {
            return Err(Error::InvalidArgument("similarity unit is empty".into()));
        }
        for &s in unit {
            if s >= corr.len() || std::mem::replace(&mut seen[s], true) {
                return Err(Error::InvalidArgument(format!(
                    "stock {s} is out of range or in more than one unit"
                )));
            }
        }
    }
    let n = units.len();
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        let a = &units[i];
        values[(i, i)] = if a.len() == 1 {
            1.0
        } else {
            let mut sum = 0.0;
            for (x, &s) in a.iter().enumerate() {
                for &t in &a[x + 1..] {
                    sum += corr.get(s, t);
                }
            }
            sum / (a.len() * (a.len() - 1) / 2) as f64
        };
        for j in (i + 1)..n {
            let b = &units[j];
            let sum: f64 = a.iter().flat_map(|&s| b.iter().map(move |&t| corr.get(s, t))).sum();
            let v = sum / (a.len() * b.len()) as f64;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(SimilarityMatrix {
        units: units.to_vec(),
        values,
    })
}

/// Group units into exactly `k` clusters by normalised-Laplacian embedding.
pub fn spectral_cluster(s: &SimilarityMatrix, k: usize, seed: u64) -> Result<Partition> {
    let n = s.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    if k == 1 {
        return Ok(Partition::single(n));
    }
    if k == n {
        return Ok(Partition::singletons(n));
    }

    let mut floor = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            floor = floor.min(s.get(i, j));
        }
    }
    let shifted = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { s.get(i, j) - floor });
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = shifted.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let laplacian = Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * shifted[(i, j)] * inv_sqrt[j]
    });

    let eig = eig_sym(&laplacian)?;
    // eigenvalues are descending, so the k smallest are the trailing columns
    let mut embedding = Matrix::from_fn(n, k, |i, c| eig.eigenvectors[(i, n - 1 - c)]);
    for i in 0..n {
        let norm = embedding.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in 0..k {
                embedding[(i, c)] /= norm;
            }
        }
    }
    let fit = kmeans(&embedding, k, seed, DEFAULT_RESTARTS)?;
    Ok(Partition::from_labels(&fit.labels))
}

/// Candidate cluster counts for `n_units` small communities.
pub fn k_range(n_units: usize) -> RangeInclusive<usize> {
    let hi = if n_units > MAX_CLUSTERS { MAX_CLUSTERS } else { n_units };
    MIN_CLUSTERS.min(n_units)..=hi
}

/// Stock-level partition: `fixed` clusters as they are, plus one cluster per
/// group of units.
fn merge(n_stocks: usize, fixed: &[Vec<usize>], s: &SimilarityMatrix, grouping: &Partition) -> Partition {
    let mut clusters: Vec<Vec<usize>> = fixed.to_vec();
    let base = clusters.len();
    clusters.resize(base + grouping.n_clusters(), Vec::new());
    for (u, members) in s.units.iter().enumerate() {
        clusters[base + grouping.label(u)].extend_from_slice(members);
    }
    Partition::from_clusters(n_stocks, &clusters).expect("units and fixed clusters cover every stock once")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSearch {
    pub k: usize,
    /// Unit grouping.
    pub grouping: Partition,
    /// Stock-level partition with untouched clusters merged back in.
    pub partition: Partition,
    pub delta: Option<f64>,
}

/// Best spectral grouping over [`k_range`]; ties go to the smallest `k`.
///
/// `fixed` are the clusters left out of the regrouping. Each candidate is
/// scored on the whole stock-level partition; an undefined objective loses
/// to any defined one.
pub fn search_k(s: &SimilarityMatrix, fixed: &[Vec<usize>], corr: &CorrelationMatrix, seed: u64) -> Result<KSearch> {
    if s.len() < 2 {
        return Err(Error::InvalidArgument("k search needs at least two units".into()));
    }
    let mut best: Option<KSearch> = None;
    for k in k_range(s.len()) {
        let grouping = spectral_cluster(s, k, seed.wrapping_add(k as u64))?;
        let partition = merge(corr.len(), fixed, s, &grouping);
        let delta = objective_opt(&partition, corr);
        let better = match &best {
            None => true,
            Some(b) => match (delta, b.delta) {
                (Some(d), Some(bd)) => d > bd,
                (Some(_), None) => true,
                _ => false,
            },
        };
        if better {
            best = Some(KSearch {
                k,
                grouping,
                partition,
                delta,
            });
        }
    }
    Ok(best.expect("k range is never empty for two or more units"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Leiden,
    Spectral,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Leiden => "leiden",
            Provenance::Spectral => "spectral",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementOutcome {
    #[serde(rename = "final")]
    pub final_partition: Partition,
    /// `None` when no regrouping was attempted or its objective is undefined.
    pub delta_spectral: Option<f64>,
    pub delta_leiden: Option<f64>,
    pub chosen: Provenance,
    pub k_chosen: Option<usize>,
}

/// Regroup the communities of size `≤ small_n`, keeping whichever partition
/// scores higher; equal scores keep the Leiden result.
pub fn refine(leiden: &Partition, corr: &CorrelationMatrix, small_n: usize, seed: u64) -> Result<RefinementOutcome> {
    if leiden.len() != corr.len() {
        return Err(Error::Dimension(format!(
            "partition over {} stocks for a {}-stock matrix",
            leiden.len(),
            corr.len()
        )));
    }
    let delta_leiden = objective_opt(leiden, corr);
    let (small, large): (Vec<_>, Vec<_>) = leiden.clusters().into_iter().partition(|c| c.len() <= small_n);
    if small.len() < 2 {
        return Ok(RefinementOutcome {
            final_partition: leiden.clone(),
            delta_spectral: None,
            delta_leiden,
            chosen: Provenance::Leiden,
            k_chosen: None,
        });
    }

    let s = similarity(&small, corr)?;
    let found = search_k(&s, &large, corr, seed)?;
    let spectral_wins = match (found.delta, delta_leiden) {
        (Some(ds), Some(dl)) => ds > dl,
        (Some(_), None) => true,
        (None, _) => false,
    };
    let (final_partition, chosen) = if spectral_wins {
        (found.partition, Provenance::Spectral)
    } else {
        (leiden.clone(), Provenance::Leiden)
    };
    Ok(RefinementOutcome {
        final_partition,
        delta_spectral: found.delta,
        delta_leiden,
        chosen,
        k_chosen: Some(found.k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{inter_corr, intra_corr, objective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corr(values: Matrix) -> CorrelationMatrix {
        let n = values.rows();
        CorrelationMatrix::new((0..n).map(|i| format!("S{i}")).collect(), values, 60).unwrap()
    }

    fn random_corr(n: usize, seed: u64) -> CorrelationMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::identity(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        corr(m)
    }

    fn cluster_of(sizes: &[usize]) -> Vec<usize> {
        sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect()
    }

    #[test]
    fn similarity_small_cases() {
        let c = random_corr(4, 1);
        let s = similarity(&[vec![0], vec![3]], &c).unwrap();
        assert_eq!(s.get(0, 1), c.get(0, 3));
        assert_eq!((s.get(0, 0), s.get(1, 1)), (1.0, 1.0));

        let flat = corr(Matrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.4 }));
        let s = similarity(&[vec![0, 1], vec![2, 3]], &flat).unwrap();
        assert!((s.get(0, 1) - 0.4).abs() < 1e-15);
        assert!(similarity(&[vec![0, 1], vec![1]], &flat).is_err());
        assert!(similarity(&[vec![]], &flat).is_err());
    }

    #[test]
    fn similarity_matches_double_loop() {
        let c = random_corr(9, 3);
        let units = vec![vec![0, 4, 7], vec![1, 2], vec![3, 5, 6, 8]];
        let s = similarity(&units, &c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let mut sum = 0.0;
                let mut count = 0.0;
                for &a in &units[i] {
                    for &b in &units[j] {
                        sum += c.get(a, b);
                        count += 1.0;
                    }
                }
                assert!((s.get(i, j) - sum / count).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn similarity_agrees_with_cluster_metrics() {
        let c = random_corr(7, 11);
        let units = vec![vec![0, 2, 5], vec![1, 3, 4, 6]];
        let s = similarity(&units, &c).unwrap();
        let p = Partition::from_labels(&[0, 1, 0, 1, 1, 0, 1]);
        assert!((s.get(0, 1) - inter_corr(&p, &c).unwrap()).abs() < 1e-12);
        assert!(((s.get(0, 0) + s.get(1, 1)) / 2.0 - intra_corr(&p, &c).unwrap()).abs() < 1e-12);
    }

    fn block_similarity() -> SimilarityMatrix {
        let values = Matrix::from_fn(4, 4, |i, j| if (i < 2) == (j < 2) { 0.9 } else { 0.0 });
        SimilarityMatrix {
            units: (0..4).map(|i| vec![i]).collect(),
            values,
        }
    }

    #[test]
    fn spectral_recovers_blocks() {
        let s = block_similarity();
        let p = spectral_cluster(&s, 2, 7).unwrap();
        assert_eq!(p, Partition::from_labels(&[0, 0, 1, 1]));
        assert_eq!(spectral_cluster(&s, 4, 7).unwrap(), Partition::singletons(4));
        assert_eq!(spectral_cluster(&s, 1, 7).unwrap(), Partition::single(4));
        assert!(spectral_cluster(&s, 0, 7).is_err());
        assert!(spectral_cluster(&s, 5, 7).is_err());
    }

    #[test]
    fn spectral_is_deterministic_and_exact_k() {
        let c = random_corr(12, 21);
        let units: Vec<Vec<usize>> = (0..12).map(|i| vec![i]).collect();
        let s = similarity(&units, &c).unwrap();
        for k in 1..=12 {
            let a = spectral_cluster(&s, k, 99).unwrap();
            assert_eq!(a, spectral_cluster(&s, k, 99).unwrap());
            assert_eq!(a.n_clusters(), k);
        }
    }

    #[test]
    fn degenerate_similarity_still_yields_k_groups() {
        let s = SimilarityMatrix {
            units: (0..5).map(|i| vec![i]).collect(),
            values: Matrix::from_fn(5, 5, |_, _| 0.3),
        };
        assert_eq!(spectral_cluster(&s, 3, 0).unwrap().n_clusters(), 3);
    }

    #[test]
    fn k_ranges() {
        assert_eq!(k_range(7), 5..=7);
        assert_eq!(k_range(25), 5..=10);
        assert_eq!(k_range(3), 3..=3);
        assert_eq!(k_range(10), 5..=10);
        assert_eq!(k_range(11), 5..=10);
    }

    /// Two large blocks and six two-stock units; units 0 and 1 are
    /// correlated with each other at 0.8, everything else across is 0.
    fn refinement_fixture() -> (CorrelationMatrix, Partition) {
        let sizes = [6, 6, 2, 2, 2, 2, 2, 2];
        let labels = cluster_of(&sizes);
        let n = labels.len();
        let within = [0.6, 0.6, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8];
        let m = Matrix::from_fn(n, n, |i, j| {
            let (a, b) = (labels[i], labels[j]);
            if i == j {
                1.0
            } else if a == b {
                within[a]
            } else if (a == 2 && b == 3) || (a == 3 && b == 2) {
                0.8
            } else {
                0.0
            }
        });
        (corr(m), Partition::from_labels(&labels))
    }

    #[test]
    fn refine_merges_correlated_small_clusters() {
        let (c, p) = refinement_fixture();
        let out = refine(&p, &c, DEFAULT_SMALL_N, 3).unwrap();
        assert_eq!(out.chosen, Provenance::Spectral);
        assert_eq!(out.k_chosen, Some(5));
        assert!(objective(&out.final_partition, &c).unwrap() > objective(&p, &c).unwrap());
        assert!(out.final_partition.same_cluster(12, 14));
        assert_eq!(out.final_partition.n_clusters(), 7);
        for large in &p.clusters()[..2] {
            assert!(large.iter().all(|&s| out.final_partition.same_cluster(s, large[0])));
            assert_eq!(out.final_partition.sizes()[out.final_partition.label(large[0])], 6);
        }
    }

    #[test]
    fn refine_without_small_clusters_is_identity() {
        let c = random_corr(12, 5);
        let p = Partition::from_labels(&cluster_of(&[6, 6]));
        let out = refine(&p, &c, 5, 1).unwrap();
        assert_eq!(out.chosen, Provenance::Leiden);
        assert_eq!(out.final_partition, p);
        assert_eq!(out.k_chosen, None);
    }

    #[test]
    fn refine_tie_keeps_leiden() {
        // two small units: the only k is 2, which reproduces the input
        let c = random_corr(10, 8);
        let p = Partition::from_labels(&cluster_of(&[6, 2, 2]));
        let out = refine(&p, &c, 5, 1).unwrap();
        assert_eq!(out.delta_spectral, out.delta_leiden);
        assert_eq!(out.chosen, Provenance::Leiden);
        assert_eq!(out.final_partition, p);
    }

    #[test]
    fn refine_never_lowers_objective() {
        for seed in 0..20 {
            let c = random_corr(20, 100 + seed);
            let p = Partition::from_labels(&cluster_of(&[7, 1, 2, 3, 1, 2, 1, 3]));
            let out = refine(&p, &c, 5, seed).unwrap();
            let before = objective(&p, &c).unwrap();
            let after = objective(&out.final_partition, &c).unwrap();
            assert!(after >= before);
            assert_eq!(out.chosen == Provenance::Spectral, out.delta_spectral > out.delta_leiden);
            let large = &p.clusters()[0];
            assert!(large.iter().all(|&s| out.final_partition.same_cluster(s, large[0])));
        }
    }
}
