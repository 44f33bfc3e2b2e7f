//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Each rotation annihilates one off-diagonal pair; sweeping over all pairs
//! repeatedly drives the off-diagonal mass to zero while the accumulated
//! rotations form an orthonormal eigenvector basis. Quadratic convergence
//! sets in after a few sweeps, which keeps dense problems of a few hundred
//! rows cheap enough for per-window use.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Input symmetry tolerance (absolute, on the largest element).
pub const SYMMETRY_TOL: f64 = 1e-12;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Matrix,
    pub sweeps: usize,
}

impl EigenDecomposition {
    /// `V · diag(λ) · Vᵀ` with optionally replaced eigenvalues.
    pub fn reconstruct_with(&self, eigenvalues: &[f64]) -> Matrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let mut out = Matrix::zeros(n, n);
        for (k, &lambda) in eigenvalues.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = lambda * v[(i, k)];
                if vik == 0.0 {
                    continue;
                }
                for j in i..n {
                    out[(i, j)] += vik * v[(j, k)];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out[(i, j)] = out[(j, i)];
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(&self.eigenvalues)
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    (2.0 * s).sqrt()
}

/// Eigendecomposition of a real symmetric matrix.
///
/// Stops once the off-diagonal Frobenius norm drops below `1e-12·‖A‖_F`, or
/// after 100 sweeps.
pub fn eig_sym(input: &Matrix) -> Result<EigenDecomposition> {
    if !input.is_square() {
        return Err(Error::Dimension(format!(
            "eig_sym needs a square matrix, got {}x{}",
            input.rows(),
            input.cols()
        )));
    }
    let asym = input.max_asymmetry();
    if asym > SYMMETRY_TOL * input.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }

    let n = input.rows();
    // symmetrize so rounding noise in the input cannot bias the rotations
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (input[(i, j)] + input[(j, i)]));
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        if scale == 0.0 || off_diagonal_norm(&a) < OFF_DIAGONAL_TOL * scale {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                // signum(0.0) is 1.0, so equal diagonals rotate by 45 degrees
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);

    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}
