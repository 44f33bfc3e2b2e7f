//! Cluster quality, partition agreement, and co-clustering statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::community::{modularity, Graph};
use crate::error::{Error, Result};
use crate::ingest::{CorrelationMatrix, Sector, SectorMap};
use crate::numerics::{mean, sample_std};
use crate::partition::Partition;

fn check_cover(p: &Partition, corr: &CorrelationMatrix) -> Result<()> {
    if p.len() != corr.len() {
        return Err(Error::Dimension(format!(
            "partition over {} stocks for a {}-stock matrix",
            p.len(),
            corr.len()
        )));
    }
    Ok(())
}

/// Mean over clusters of the mean within-cluster pair correlation.
///
/// Singleton clusters have no pairs and are left out of the average.
pub fn intra_corr(p: &Partition, corr: &CorrelationMatrix) -> Result<f64> {
    check_cover(p, corr)?;
    let mut per_cluster = Vec::new();
    for members in p.clusters() {
        let n = members.len();
        if n < 2 {
            continue;
        }
        let mut sum = 0.0;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                sum += corr.get(i, j);
            }
        }
        per_cluster.push(sum / (n * (n - 1) / 2) as f64);
    }
    if per_cluster.is_empty() {
        return Err(Error::Undefined(
            "intra-cluster correlation of an all-singleton partition".into(),
        ));
    }
    Ok(mean(&per_cluster))
}

/// Mean over cluster pairs of the mean cross-pair correlation.
pub fn inter_corr(p: &Partition, corr: &CorrelationMatrix) -> Result<f64> {
    check_cover(p, corr)?;
    let k = p.n_clusters();
    if k < 2 {
        return Err(Error::Undefined(
            "inter-cluster correlation needs at least two clusters".into(),
        ));
    }
    let sizes = p.sizes();
    let mut sums = vec![0.0; k * k];
    let n = p.len();
    for i in 0..n {
        let ci = p.label(i);
        for j in (i + 1)..n {
            let cj = p.label(j);
            if ci != cj {
                let (a, b) = if ci < cj { (ci, cj) } else { (cj, ci) };
                sums[a * k + b] += corr.get(i, j);
            }
        }
    }
    let mut total = 0.0;
    for a in 0..k {
        for b in (a + 1)..k {
            total += sums[a * k + b] / (sizes[a] * sizes[b]) as f64;
        }
    }
    Ok(total / (k * (k - 1) / 2) as f64)
}

/// `intra_corr − inter_corr`.
pub fn objective(p: &Partition, corr: &CorrelationMatrix) -> Result<f64> {
    Ok(intra_corr(p, corr)? - inter_corr(p, corr)?)
}

/// Objective, or `None` where either term is undefined.
pub fn objective_opt(p: &Partition, corr: &CorrelationMatrix) -> Option<f64> {
    objective(p, corr).ok()
}

/// Quality of one partition; correlation terms are `None` where undefined
/// (one cluster, or only singletons).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterQuality {
    pub rho_intra: Option<f64>,
    pub rho_inter: Option<f64>,
    pub objective: Option<f64>,
    pub modularity: f64,
    pub n_clusters: usize,
}

pub fn cluster_quality(p: &Partition, corr: &CorrelationMatrix, graph: &Graph) -> Result<ClusterQuality> {
    check_cover(p, corr)?;
    let rho_intra = intra_corr(p, corr).ok();
    let rho_inter = inter_corr(p, corr).ok();
    Ok(ClusterQuality {
        rho_intra,
        rho_inter,
        objective: rho_intra.zip(rho_inter).map(|(a, b)| a - b),
        modularity: modularity(graph, p)?,
        n_clusters: p.n_clusters(),
    })
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index of two labelings of the same elements.
pub fn ari_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{} vs {} labels", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Undefined("ARI needs at least two common elements".into()));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_rows * sum_cols / choose2(n as u64);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        // both trivial (one cluster or all singletons): agreement is exact or undefined
        let same = Partition::from_labels(a) == Partition::from_labels(b);
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

pub fn ari(p1: &Partition, p2: &Partition) -> Result<f64> {
    ari_labels(p1.labels(), p2.labels())
}

/// ARI restricted to tickers present in both labelled partitions.
pub fn ari_common(
    tickers_a: &[String],
    p_a: &Partition,
    tickers_b: &[String],
    p_b: &Partition,
) -> Result<f64> {
    let pos_b: HashMap<&str, usize> = tickers_b.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut la = Vec::new();
    let mut lb = Vec::new();
    for (i, t) in tickers_a.iter().enumerate() {
        if let Some(&j) = pos_b.get(t.as_str()) {
            la.push(p_a.label(i));
            lb.push(p_b.label(j));
        }
    }
    ari_labels(&la, &lb)
}

/// z-scores against the full-sample mean and sample standard deviation.
pub fn zscores(series: &[f64]) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let m = mean(series);
    let s = sample_std(series);
    series
        .iter()
        .map(|x| if s > 0.0 { (x - m) / s } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_diff: f64,
    /// `None` when the differences have zero spread.
    pub t: Option<f64>,
    pub p_value: Option<f64>,
}

/// Two-sided paired t-test on `after − before`.
pub fn paired_t_test(before: &[f64], after: &[f64]) -> Result<PairedTTest> {
    if before.len() != after.len() {
        return Err(Error::Dimension(format!("{} vs {} paired samples", before.len(), after.len())));
    }
    let n = before.len();
    if n < 2 {
        return Err(Error::Undefined("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = after.iter().zip(before).map(|(a, b)| a - b).collect();
    let mean_diff = mean(&diffs);
    let sd = sample_std(&diffs);
    if sd == 0.0 {
        return Ok(PairedTTest {
            n,
            mean_diff,
            t: None,
            p_value: None,
        });
    }
    let t = mean_diff / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(PairedTTest {
        n,
        mean_diff,
        t: Some(t),
        p_value: Some(2.0 * dist.cdf(-t.abs())),
    })
}

/// Per-pair co-clustering frequency across windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoClusterMatrix {
    pub tickers: Vec<String>,
    together: Vec<u32>,
    present: Vec<u32>,
    pub window_count: usize,
}

impl CoClusterMatrix {
    pub fn len(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickers.is_empty()
    }

    /// Fraction of co-present windows in which `i` and `j` shared a cluster;
    /// `None` if the pair was never present together.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let idx = i * self.len() + j;
        match self.present[idx] {
            0 => None,
            p => Some(self.together[idx] as f64 / p as f64),
        }
    }

    pub fn co_present(&self, i: usize, j: usize) -> u32 {
        self.present[i * self.len() + j]
    }
}

/// Co-clustering frequencies over `(tickers, partition)` snapshots.
pub fn cocluster(windows: &[(Vec<String>, Partition)]) -> Result<CoClusterMatrix> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument("co-clustering needs at least one partition".into()));
    }
    let universe: BTreeSet<&String> = windows.iter().flat_map(|(t, _)| t.iter()).collect();
    let tickers: Vec<String> = universe.into_iter().cloned().collect();
    let pos: HashMap<&str, usize> = tickers.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let n = tickers.len();
    let mut together = vec![0u32; n * n];
    let mut present = vec![0u32; n * n];
    for (names, p) in windows {
        if names.len() != p.len() {
            return Err(Error::Dimension(format!(
                "{} tickers for a partition over {}",
                names.len(),
                p.len()
            )));
        }
        let idx: Vec<usize> = names.iter().map(|t| pos[t.as_str()]).collect();
        for a in 0..names.len() {
            for b in 0..names.len() {
                let cell = idx[a] * n + idx[b];
                present[cell] += 1;
                if p.same_cluster(a, b) {
                    together[cell] += 1;
                }
            }
        }
    }
    Ok(CoClusterMatrix {
        tickers,
        together,
        present,
        window_count: windows.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSectorRow {
    pub ticker: String,
    pub sector: Sector,
    pub s_cross: f64,
    pub s_same: f64,
    pub s_total: f64,
    pub s_most: f64,
    /// `None` when `s_total` is zero.
    pub p_cross: Option<f64>,
    pub p_most: Option<f64>,
    pub most_connected_sector: Option<Sector>,
}

/// Same- and cross-sector co-clustering strength per stock.
pub fn cross_sector(p: &CoClusterMatrix, sectors: &SectorMap) -> Result<Vec<CrossSectorRow>> {
    let secs: Vec<Sector> = p
        .tickers
        .iter()
        .map(|t| sectors.require(t))
        .collect::<Result<_>>()?;
    let n = p.len();
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let own = secs[s];
        let mut same = 0.0;
        let mut by_sector: BTreeMap<Sector, f64> = BTreeMap::new();
        for (t, &sec) in secs.iter().enumerate() {
            if t == s {
                continue;
            }
            let Some(prob) = p.get(s, t) else { continue };
            if sec == own {
                same += prob;
            } else {
                *by_sector.entry(sec).or_default() += prob;
            }
        }
        let cross: f64 = by_sector.values().sum();
        // ties resolve to the earliest sector in GICS order
        let most = by_sector
            .iter()
            .fold(None::<(Sector, f64)>, |best, (&sec, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((sec, v)),
            });
        let total = cross + same;
        let s_most = most.map_or(0.0, |(_, v)| v);
        let (p_cross, p_most) = if total > 0.0 {
            (Some(cross / total), Some(s_most / total))
        } else {
            (None, None)
        };
        rows.push(CrossSectorRow {
            ticker: p.tickers[s].clone(),
            sector: own,
            s_cross: cross,
            s_same: same,
            s_total: total,
            s_most,
            p_cross,
            p_most,
            most_connected_sector: most.filter(|(_, v)| *v > 0.0).map(|(sec, _)| sec),
        });
    }
    Ok(rows)
}
