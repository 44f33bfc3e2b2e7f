//! Lloyd k-means with distance-weighted ("++") seeding and restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Label per row of the input, every label in `0..k` used.
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Inertia of the seeding assignment of the winning restart.
    pub seeding_inertia: f64,
    /// Inertia after each Lloyd iteration of the winning restart.
    pub trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        // strict comparison: ties go to the lowest centroid index
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_centroids(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.rows();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // rounding can run past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            // all remaining mass is zero: duplicate points, take lowest unused index
            (0..n).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[pick] = true;
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn update_centroids(points: &Matrix, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points.cols();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            for v in s.iter_mut() {
                *v /= c as f64;
            }
        }
    }
    sums
}

fn inertia(points: &Matrix, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), &centroids[l]))
        .sum()
}

/// Fill empty labels by moving the point farthest from its centroid.
fn repair_empty(points: &Matrix, labels: &mut [usize], centroids: &mut [Vec<f64>], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &l) in labels.iter().enumerate() {
            // never empty a singleton cluster to fill another
            if counts[l] < 2 {
                continue;
            }
            let d = sq_dist(points.row(i), &centroids[l]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { return };
        labels[i] = empty;
        centroids[empty] = points.row(i).to_vec();
    }
}

fn lloyd(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let n = points.rows();
    let mut centroids = seed_centroids(points, k, rng);
    let mut labels: Vec<usize> = (0..n).map(|i| nearest(points.row(i), &centroids).0).collect();
    let seeding_inertia = inertia(points, &labels, &centroids);
    repair_empty(points, &mut labels, &mut centroids, k);

    let mut trace = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        centroids = update_centroids(points, &labels, k);
        trace.push(inertia(points, &labels, &centroids));
        let mut next: Vec<usize> = (0..n).map(|i| nearest(points.row(i), &centroids).0).collect();
        repair_empty(points, &mut next, &mut centroids, k);
        if next == labels {
            break;
        }
        labels = next;
    }
    let centroids = update_centroids(points, &labels, k);
    let final_inertia = inertia(points, &labels, &centroids);
    if trace.last() != Some(&final_inertia) {
        trace.push(final_inertia);
    }
    KMeansResult {
        labels,
        inertia: final_inertia,
        seeding_inertia,
        trace,
    }
}

/// Cluster the rows of `points` into exactly `k` nonempty groups.
///
/// Runs `restarts` independent seedings from one `seed`-derived stream and
/// keeps the lowest inertia (earliest restart on ties).
pub fn kmeans(points: &Matrix, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 {
        return Err(Error::InvalidArgument("k-means needs k >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k-means with k={k} on {n} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
