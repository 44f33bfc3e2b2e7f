use serde::{Deserialize, Serialize};

/// Assignment of `n` elements to clusters `0..n_clusters`.
///
/// Labels are canonical: cluster ids are contiguous and numbered in order of
/// first appearance, so two partitions that group elements identically
/// compare equal regardless of how they were labelled.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl Partition {
    /// Build from arbitrary labels; ids are relabelled canonically.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels: Vec<usize> = raw
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            n_clusters: map.len(),
            labels,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            n_clusters: n,
        }
    }

    pub fn single(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            n_clusters: usize::from(n > 0),
        }
    }

    /// Build from explicit member lists covering `0..n` exactly once.
    pub fn from_clusters(n: usize, clusters: &[Vec<usize>]) -> Option<Self> {
        let mut raw = vec![usize::MAX; n];
        for (c, members) in clusters.iter().enumerate() {
            for &m in members {
                if m >= n || raw[m] != usize::MAX {
                    return None;
                }
                raw[m] = c;
            }
        }
        if raw.contains(&usize::MAX) {
            return None;
        }
        Some(Self::from_labels(&raw))
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Members of each cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_clusters];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }

    pub fn same_cluster(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }
}
