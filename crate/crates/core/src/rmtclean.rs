//! Marchenko–Pastur eigenvalue cleaning and threshold adjacency.
//!
//! Eigenvalues of a correlation matrix that fall inside the Marchenko–Pastur
//! band are indistinguishable from noise; they are replaced by their mean so
//! the spectrum sum (the trace) is preserved while the noisy directions lose
//! their structure.

use std::f64::consts::PI;

use serde::Serialize;
use tracing::debug;

use crate::error::{Error, Result};
use crate::ingest::CorrelationMatrix;
use crate::numerics::{eig_sym, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpBounds {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// Aspect ratio `n_assets / n_days`.
    pub q: f64,
    pub sigma2: f64,
}

impl MpBounds {
    pub fn contains(&self, x: f64) -> bool {
        self.lambda_minus <= x && x <= self.lambda_plus
    }
}

/// Band edges `σ²(1 ± √q)²` with `q = n_assets / n_days`.
pub fn mp_bounds(n_assets: usize, n_days: usize, sigma2: f64) -> Result<MpBounds> {
    if n_assets == 0 || n_days == 0 {
        return Err(Error::InvalidArgument(format!(
            "Marchenko-Pastur bounds need positive sizes, got {n_assets} assets x {n_days} days"
        )));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
    }
    let q = n_assets as f64 / n_days as f64;
    if q >= 1.0 {
        debug!(q, "more assets than observations; density outside its regime, bounds still applied");
    }
    let sq = q.sqrt();
    Ok(MpBounds {
        lambda_minus: sigma2 * (1.0 - sq) * (1.0 - sq),
        lambda_plus: sigma2 * (1.0 + sq) * (1.0 + sq),
        q,
        sigma2,
    })
}

/// Marchenko–Pastur density; zero outside `[λ−, λ+]`.
pub fn mp_density(x: f64, bounds: &MpBounds) -> f64 {
    if !bounds.contains(x) || x <= 0.0 {
        return 0.0;
    }
    let inner = (x - bounds.lambda_minus) * (bounds.lambda_plus - x);
    if inner <= 0.0 {
        return 0.0;
    }
    inner.sqrt() / (2.0 * PI * bounds.sigma2 * bounds.q * x)
}

#[derive(Debug, Clone, Serialize)]
pub struct CleanedCorrelation {
    /// Unit-diagonal cleaned correlation.
    pub matrix: CorrelationMatrix,
    /// Reconstruction before rescaling to unit diagonal.
    pub unscaled: Matrix,
    /// Eigenvalues outside the band.
    pub kept_count: usize,
    /// Replacement value for in-band eigenvalues (`None` if the band was empty).
    pub noise_mean: Option<f64>,
    pub original_eigenvalues: Vec<f64>,
    pub cleaned_eigenvalues: Vec<f64>,
    pub bounds: MpBounds,
}

impl CleanedCorrelation {
    /// Largest off-diagonal entry of the cleaned matrix.
    pub fn max_off_diagonal(&self) -> f64 {
        let m = &self.matrix.values;
        let n = m.rows();
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(m[(i, j)]);
            }
        }
        best
    }
}

fn check_correlation(corr: &CorrelationMatrix) -> Result<()> {
    let m = &corr.values;
    let asym = m.max_asymmetry();
    if asym > 1e-12 {
        return Err(Error::NotSymmetric(asym));
    }
    for i in 0..m.rows() {
        if (m[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "correlation diagonal at {i} is {}",
                m[(i, i)]
            )));
        }
    }
    Ok(())
}

/// Replace in-band eigenvalues by their mean, reconstruct, rescale to unit diagonal.
pub fn clean(corr: &CorrelationMatrix, bounds: &MpBounds) -> Result<CleanedCorrelation> {
    check_correlation(corr)?;
    let eig = eig_sym(&corr.values)?;
    let original = eig.eigenvalues.clone();
    let noisy: Vec<f64> = original.iter().copied().filter(|&l| bounds.contains(l)).collect();

    if noisy.is_empty() {
        return Ok(CleanedCorrelation {
            matrix: corr.clone(),
            unscaled: corr.values.clone(),
            kept_count: original.len(),
            noise_mean: None,
            cleaned_eigenvalues: original.clone(),
            original_eigenvalues: original,
            bounds: *bounds,
        });
    }

    let noise_mean = noisy.iter().sum::<f64>() / noisy.len() as f64;
    let cleaned_eigenvalues: Vec<f64> = original
        .iter()
        .map(|&l| if bounds.contains(l) { noise_mean } else { l })
        .collect();
    let unscaled = eig.reconstruct_with(&cleaned_eigenvalues);

    let n = unscaled.rows();
    let scale: Vec<f64> = (0..n).map(|i| unscaled[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    let mut rescaled = Matrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (unscaled[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0);
            rescaled[(i, j)] = v;
            rescaled[(j, i)] = v;
        }
    }

    Ok(CleanedCorrelation {
        matrix: corr.with_values(rescaled),
        unscaled,
        kept_count: original.len() - noisy.len(),
        noise_mean: Some(noise_mean),
        original_eigenvalues: original,
        cleaned_eigenvalues,
        bounds: *bounds,
    })
}

/// Binary adjacency from a strict threshold on the cleaned correlations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdGraphMatrix {
    pub adjacency: Vec<Vec<bool>>,
    pub theta: f64,
}

impl ThresholdGraphMatrix {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    pub fn edge_count(&self) -> usize {
        let n = self.len();
        (0..n).map(|i| ((i + 1)..n).filter(|&j| self.adjacency[i][j]).count()).sum()
    }
}

/// `T_ij = 1` iff `c_ij > θ` and `i ≠ j`.
pub fn threshold(cleaned: &CorrelationMatrix, theta: f64) -> ThresholdGraphMatrix {
    let m = &cleaned.values;
    let n = m.rows();
    let adjacency = (0..n)
        .map(|i| (0..n).map(|j| i != j && m[(i, j)] - theta > 0.0).collect())
        .collect();
    ThresholdGraphMatrix { adjacency, theta }
}
