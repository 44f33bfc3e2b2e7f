//! Leiden modularity optimisation starting from a given partition.
//!
//! Each outer iteration runs three phases on the current (possibly
//! aggregated) network:
//!
//! 1. fast local moving: nodes are popped from a queue and moved to the
//!    neighbouring community with the largest modularity gain; only the
//!    neighbours of a moved node are re-queued;
//! 2. refinement: inside every community, singletons merge into
//!    well-connected sub-communities, which keeps every refined community
//!    connected;
//! 3. aggregation: refined communities become nodes of the next network,
//!    initially grouped by the (unrefined) community they came from.
//!
//! A pass ends once refinement no longer shrinks the network. Passes restart
//! from single nodes, seeded with the communities found so far, until a pass
//! brings no improvement.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{modularity_with_resolution, Graph};
use crate::error::{Error, Result};
use crate::partition::Partition;

pub const DEFAULT_RESOLUTION: f64 = 1.0;

/// Smallest gain (in edge-weight units) counted as an improvement.
const GAIN_TOL: f64 = 1e-10;
const MAX_OUTER_ITERATIONS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LeidenOutcome {
    pub partition: Partition,
    /// Quality of the seed followed by the quality after each outer iteration.
    pub quality_trace: Vec<f64>,
    pub iterations: usize,
}

/// Weighted network at one aggregation level.
struct Network {
    /// `(neighbour, weight)` without self-loops.
    adj: Vec<Vec<(usize, f64)>>,
    /// Node strength including twice its internal weight.
    strength: Vec<f64>,
    /// Original node ids behind each aggregate node.
    members: Vec<Vec<usize>>,
}

impl Network {
    fn from_graph(g: &Graph) -> Self {
        let adj = (0..g.len())
            .map(|v| g.neighbors(v).iter().map(|&u| (u, 1.0)).collect())
            .collect();
        Self {
            adj,
            strength: (0..g.len()).map(|v| g.degree(v) as f64).collect(),
            members: (0..g.len()).map(|v| vec![v]).collect(),
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapse each group of `labels` into one node.
    fn aggregate(&self, labels: &[usize], n_groups: usize) -> Network {
        let mut weights: Vec<std::collections::BTreeMap<usize, f64>> =
            vec![Default::default(); n_groups];
        let mut strength = vec![0.0; n_groups];
        let mut members = vec![Vec::new(); n_groups];
        for v in 0..self.len() {
            let a = labels[v];
            strength[a] += self.strength[v];
            members[a].extend_from_slice(&self.members[v]);
            for &(u, w) in &self.adj[v] {
                let b = labels[u];
                if a != b {
                    *weights[a].entry(b).or_insert(0.0) += w;
                }
            }
        }
        Network {
            adj: weights.into_iter().map(|m| m.into_iter().collect()).collect(),
            strength,
            members,
        }
    }
}

/// Community bookkeeping for the local-moving phase.
struct Communities {
    label: Vec<usize>,
    total: Vec<f64>,
    size: Vec<usize>,
    free: Vec<usize>,
}

impl Communities {
    fn new(net: &Network, labels: &[usize]) -> Self {
        let n = net.len();
        let mut total = vec![0.0; n];
        let mut size = vec![0; n];
        for v in 0..n {
            total[labels[v]] += net.strength[v];
            size[labels[v]] += 1;
        }
        let free = (0..n).rev().filter(|&c| size[c] == 0).collect();
        Self {
            label: labels.to_vec(),
            total,
            size,
            free,
        }
    }
}

/// Accumulates edge weight from one node into neighbouring groups.
struct NeighborWeights {
    weight: Vec<f64>,
    touched: Vec<usize>,
}

impl NeighborWeights {
    fn new(n: usize) -> Self {
        Self {
            weight: vec![0.0; n],
            touched: Vec::new(),
        }
    }

    fn collect(&mut self, adj: &[(usize, f64)], label: &[usize], keep: impl Fn(usize) -> bool) {
        for &(u, w) in adj {
            if !keep(u) {
                continue;
            }
            let c = label[u];
            if self.weight[c] == 0.0 && !self.touched.contains(&c) {
                self.touched.push(c);
            }
            self.weight[c] += w;
        }
    }

    fn clear(&mut self) {
        for &c in &self.touched {
            self.weight[c] = 0.0;
        }
        self.touched.clear();
    }
}

struct Optimizer<'a> {
    gamma: f64,
    two_m: f64,
    rng: &'a mut ChaCha8Rng,
}

impl Optimizer<'_> {
    /// Fast local moving; returns whether any node changed community.
    fn move_nodes(&mut self, net: &Network, comms: &mut Communities) -> bool {
        let n = net.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(self.rng);
        let mut queue: VecDeque<usize> = order.into_iter().collect();
        let mut queued = vec![true; n];
        let mut nw = NeighborWeights::new(n);
        let mut moved_any = false;

        while let Some(v) = queue.pop_front() {
            queued[v] = false;
            let k_v = net.strength[v];
            let current = comms.label[v];

            comms.total[current] -= k_v;
            comms.size[current] -= 1;
            nw.collect(&net.adj[v], &comms.label, |_| true);

            let gain = |c: usize, w: f64, totals: &[f64]| w - self.gamma * k_v * totals[c] / self.two_m;
            let mut best = current;
            let mut best_gain = gain(current, nw.weight[current], &comms.total);
            for &c in &nw.touched {
                let g = gain(c, nw.weight[c], &comms.total);
                if g > best_gain + GAIN_TOL {
                    best = c;
                    best_gain = g;
                }
            }
            // an empty community has zero weight and zero total
            if comms.size[current] > 0 && 0.0 > best_gain + GAIN_TOL {
                best = *comms.free.last().expect("a free community id exists");
            }
            nw.clear();

            if best == current {
                comms.total[current] += k_v;
                comms.size[current] += 1;
                continue;
            }
            if comms.free.last() == Some(&best) {
                comms.free.pop();
            }
            comms.total[best] += k_v;
            comms.size[best] += 1;
            comms.label[v] = best;
            if comms.size[current] == 0 {
                comms.free.push(current);
            }
            moved_any = true;
            for &(u, _) in &net.adj[v] {
                if !queued[u] && comms.label[u] != best {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
        moved_any
    }

    /// Refine each community of `labels`; returns refined labels and their count.
    fn refine(&mut self, net: &Network, labels: &[usize]) -> (Vec<usize>, usize) {
        let n = net.len();
        let mut refined: Vec<usize> = (0..n).collect();
        let mut r_total = net.strength.clone();
        let mut r_size = vec![1usize; n];

        let n_comms = labels.iter().max().map_or(0, |m| m + 1);
        let mut comm_members = vec![Vec::new(); n_comms];
        let mut comm_total = vec![0.0; n_comms];
        for v in 0..n {
            comm_members[labels[v]].push(v);
            comm_total[labels[v]] += net.strength[v];
        }

        // weight from v to the rest of its own community
        let inner: Vec<f64> = (0..n)
            .map(|v| {
                net.adj[v]
                    .iter()
                    .filter(|(u, _)| labels[*u] == labels[v])
                    .map(|(_, w)| w)
                    .sum()
            })
            .collect();
        // weight from a refined community to the rest of its parent community
        let mut r_external = inner.clone();
        let mut nw = NeighborWeights::new(n);

        for (c, members) in comm_members.iter().enumerate() {
            if members.len() < 2 {
                continue;
            }
            let k_c = comm_total[c];
            let mut order = members.clone();
            order.shuffle(self.rng);
            for v in order {
                if r_size[refined[v]] != 1 {
                    continue;
                }
                let k_v = net.strength[v];
                if inner[v] < self.gamma * k_v * (k_c - k_v) / self.two_m {
                    continue;
                }
                let own = refined[v];
                nw.collect(&net.adj[v], &refined, |u| labels[u] == c);
                let mut candidates = Vec::new();
                for &t in &nw.touched {
                    if t == own {
                        continue;
                    }
                    let well_connected =
                        r_external[t] >= self.gamma * r_total[t] * (k_c - r_total[t]) / self.two_m;
                    let delta = nw.weight[t] - self.gamma * k_v * r_total[t] / self.two_m;
                    if well_connected && delta > GAIN_TOL {
                        candidates.push((t, nw.weight[t]));
                    }
                }
                nw.clear();
                if candidates.is_empty() {
                    continue;
                }
                let (target, w_vt) = candidates[self.rng.random_range(0..candidates.len())];
                r_total[own] -= k_v;
                r_size[own] -= 1;
                r_total[target] += k_v;
                r_size[target] += 1;
                r_external[target] += inner[v] - 2.0 * w_vt;
                refined[v] = target;
            }
        }

        let canonical = Partition::from_labels(&refined);
        let count = canonical.n_clusters();
        (canonical.labels().to_vec(), count)
    }
}

fn flatten(net: &Network, labels: &[usize], n_nodes: usize) -> Partition {
    let mut raw = vec![0; n_nodes];
    for (v, members) in net.members.iter().enumerate() {
        for &orig in members {
            raw[orig] = labels[v];
        }
    }
    Partition::from_labels(&raw)
}

/// Leiden with per-iteration modularity trace.
pub fn leiden_traced(
    g: &Graph,
    seed_partition: &Partition,
    resolution: f64,
    rng_seed: u64,
) -> Result<LeidenOutcome> {
    if seed_partition.len() != g.len() {
        return Err(Error::Dimension(format!(
            "seed partition over {} nodes for a {}-node graph",
            seed_partition.len(),
            g.len()
        )));
    }
    let seed_q = modularity_with_resolution(g, seed_partition, resolution)?;
    if g.edge_count() == 0 {
        return Ok(LeidenOutcome {
            partition: seed_partition.clone(),
            quality_trace: vec![seed_q],
            iterations: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut opt = Optimizer {
        gamma: resolution,
        two_m: 2.0 * g.edge_count() as f64,
        rng: &mut rng,
    };
    let mut net = Network::from_graph(g);
    let mut labels = seed_partition.labels().to_vec();
    let mut trace = vec![seed_q];
    let mut best = seed_partition.clone();
    let mut iterations = 0;

    let mut pass_start_q = seed_q;
    while iterations < MAX_OUTER_ITERATIONS {
        iterations += 1;
        let mut comms = Communities::new(&net, &labels);
        let moved = opt.move_nodes(&net, &mut comms);
        let parent = Partition::from_labels(&comms.label);
        best = flatten(&net, parent.labels(), g.len());
        let q = modularity_with_resolution(g, &best, resolution)?;
        trace.push(q);

        let (refined, n_refined) = opt.refine(&net, parent.labels());
        // The local-moving queue only drains at a local optimum, so when
        // refinement cannot shrink the network another level changes nothing.
        if n_refined == net.len() {
            if q <= pass_start_q + GAIN_TOL / opt.two_m {
                tracing::trace!(iterations, moved, "leiden converged");
                break;
            }
            // start a new pass from single nodes, keeping the communities found
            pass_start_q = q;
            net = Network::from_graph(g);
            labels = best.labels().to_vec();
            continue;
        }
        let mut next_labels = vec![0; n_refined];
        for v in 0..net.len() {
            next_labels[refined[v]] = parent.label(v);
        }
        net = net.aggregate(&refined, n_refined);
        labels = next_labels;
    }

    Ok(LeidenOutcome {
        partition: best,
        quality_trace: trace,
        iterations,
    })
}

/// Leiden community detection seeded with `seed_partition`.
pub fn leiden(
    g: &Graph,
    seed_partition: &Partition,
    resolution: f64,
    rng_seed: u64,
) -> Result<Partition> {
    leiden_traced(g, seed_partition, resolution, rng_seed).map(|o| o.partition)
}
