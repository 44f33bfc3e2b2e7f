//! Dense linear algebra and clustering kernels shared by the pipeline stages.

mod eigen;
mod kmeans;
mod matrix;

pub use eigen::{eig_sym, EigenDecomposition, SYMMETRY_TOL};
pub use kmeans::{kmeans, KMeansResult, DEFAULT_RESTARTS, MAX_ITERATIONS};
pub use matrix::Matrix;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}
