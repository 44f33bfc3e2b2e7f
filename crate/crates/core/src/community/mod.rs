//! Threshold graphs, modularity, and sector-seeded Leiden optimisation.

mod leiden;

pub use leiden::{leiden, leiden_traced, LeidenOutcome, DEFAULT_RESOLUTION};

use serde::Serialize;
use tracing::debug;

use crate::error::{Error, Result};
use crate::ingest::{Sector, SectorMap};
use crate::partition::Partition;
use crate::rmtclean::ThresholdGraphMatrix;

/// Undirected, unweighted, loop-free graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Graph {
    pub nodes: Vec<String>,
    /// Sorted neighbour lists.
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Graph from an undirected edge list; duplicates and self-loops are ignored.
    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize)]) -> Self {
        let n = nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && a < n && b < n {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        Self {
            nodes,
            adjacency,
            edge_count,
        }
    }

    /// Graph over anonymous nodes `0..n`.
    pub fn with_nodes(n: usize, edges: &[(usize, usize)]) -> Self {
        Self::from_edges((0..n).map(|i| i.to_string()).collect(), edges)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Total edge count `m`.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }
}

pub fn build_graph(t: &ThresholdGraphMatrix, tickers: &[String]) -> Result<Graph> {
    let n = t.len();
    if tickers.len() != n {
        return Err(Error::Dimension(format!(
            "{} tickers for a {n}-node threshold matrix",
            tickers.len()
        )));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if t.get(i, j) {
                edges.push((i, j));
            }
        }
    }
    Ok(Graph::from_edges(tickers.to_vec(), &edges))
}

/// Newman–Girvan modularity at resolution `gamma`.
pub fn modularity_with_resolution(g: &Graph, p: &Partition, gamma: f64) -> Result<f64> {
    if p.len() != g.len() {
        return Err(Error::Dimension(format!(
            "partition over {} nodes for a {}-node graph",
            p.len(),
            g.len()
        )));
    }
    let m = g.edge_count() as f64;
    if m == 0.0 {
        debug!("modularity of an edgeless graph taken as 0");
        return Ok(0.0);
    }
    let k = p.n_clusters();
    let mut internal = vec![0usize; k];
    let mut degree_sum = vec![0usize; k];
    for v in 0..g.len() {
        let c = p.label(v);
        degree_sum[c] += g.degree(v);
        internal[c] += g.neighbors(v).iter().filter(|&&u| p.label(u) == c).count();
    }
    // internal counts every intra edge twice
    Ok((0..k)
        .map(|c| {
            let kc = degree_sum[c] as f64 / (2.0 * m);
            internal[c] as f64 / (2.0 * m) - gamma * kc * kc
        })
        .sum())
}

pub fn modularity(g: &Graph, p: &Partition) -> Result<f64> {
    modularity_with_resolution(g, p, 1.0)
}

/// One cluster per sector present among `tickers`.
pub fn sector_seed(tickers: &[String], sectors: &SectorMap) -> Result<Partition> {
    let labels: Vec<Sector> = tickers
        .iter()
        .map(|t| sectors.require(t))
        .collect::<Result<_>>()?;
    let raw: Vec<usize> = labels.iter().map(|s| *s as usize).collect();
    Ok(Partition::from_labels(&raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CorrelationMatrix;
    use crate::numerics::Matrix;
    use crate::rmtclean::threshold;

    /// Direct double sum over node pairs.
    fn modularity_oracle(g: &Graph, p: &Partition) -> f64 {
        let m2 = 2.0 * g.edge_count() as f64;
        let mut q = 0.0;
        for i in 0..g.len() {
            for j in 0..g.len() {
                if p.label(i) != p.label(j) {
                    continue;
                }
                let a = if g.has_edge(i, j) { 1.0 } else { 0.0 };
                q += a - (g.degree(i) * g.degree(j)) as f64 / m2;
            }
        }
        q / m2
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("N{i}")).collect()
    }

    fn two_triangles() -> Graph {
        Graph::with_nodes(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    }

    #[test]
    fn build_graph_cases() {
        let zero = ThresholdGraphMatrix {
            adjacency: vec![vec![false; 5]; 5],
            theta: 0.0,
        };
        let g = build_graph(&zero, &names(5)).unwrap();
        assert_eq!((g.len(), g.edge_count()), (5, 0));

        let corr = CorrelationMatrix::new(names(4), Matrix::from_fn(4, 4, |_, _| 1.0), 10).unwrap();
        let g = build_graph(&threshold(&corr, 0.5), &names(4)).unwrap();
        assert_eq!(g.edge_count(), 6);

        let block = CorrelationMatrix::new(
            names(6),
            Matrix::from_fn(6, 6, |i, j| if i == j || (i < 3) == (j < 3) { 0.8 } else { 0.1 }),
            10,
        )
        .unwrap();
        let t = threshold(&block, 0.5);
        let ones = (0..6).flat_map(|i| ((i + 1)..6).map(move |j| (i, j))).filter(|&(i, j)| t.get(i, j)).count();
        assert_eq!(build_graph(&t, &names(6)).unwrap().edge_count(), ones);
        assert_eq!(ones, 6);
    }

    #[test]
    fn modularity_reference_values() {
        let g = two_triangles();
        assert!(modularity(&g, &Partition::single(6)).unwrap().abs() < 1e-15);
        let comps = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
        assert!((modularity(&g, &comps).unwrap() - 0.5).abs() < 1e-15);
        let single = Partition::singletons(6);
        let expected: f64 = -(0..6).map(|v| (g.degree(v) as f64 / 12.0).powi(2)).sum::<f64>();
        assert!((modularity(&g, &single).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn modularity_matches_pair_sum_and_relabel() {
        let g = Graph::with_nodes(7, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 6), (1, 5)]);
        let p = Partition::from_labels(&[0, 0, 1, 1, 2, 2, 0]);
        let q = modularity(&g, &p).unwrap();
        assert!((q - modularity_oracle(&g, &p)).abs() < 1e-14);
        let relabelled = Partition::from_labels(&[5, 5, 9, 9, 1, 1, 5]);
        assert_eq!(q, modularity(&g, &relabelled).unwrap());
    }

    #[test]
    fn edgeless_modularity_is_zero() {
        let g = Graph::with_nodes(3, &[]);
        assert_eq!(modularity(&g, &Partition::singletons(3)).unwrap(), 0.0);
    }

    #[test]
    fn sector_seeding() {
        let tickers = names(11);
        let all: SectorMap = tickers
            .iter()
            .zip(Sector::ALL)
            .map(|(t, s)| (t.clone(), s))
            .collect();
        assert_eq!(sector_seed(&tickers, &all).unwrap().n_clusters(), 11);

        let one: SectorMap = tickers.iter().map(|t| (t.clone(), Sector::Utilities)).collect();
        assert_eq!(sector_seed(&tickers, &one).unwrap().n_clusters(), 1);

        let three = names(3);
        let map: SectorMap = three.iter().zip(Sector::ALL).map(|(t, s)| (t.clone(), s)).collect();
        assert_eq!(sector_seed(&three, &map).unwrap(), Partition::singletons(3));

        let err = sector_seed(&names(4), &map).unwrap_err();
        assert!(matches!(err, Error::UnmappedTicker(t) if t == "N3"));
    }
}
