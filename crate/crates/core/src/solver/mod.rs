//! Penalized least squares with per-predictor penalty loadings.
//!
//! All solvers minimize
//!
//! ```text
//! Q(b) = (1/N) * sum_i (y_i - x_i'b)^2 + (lambda/N) * sum_j psi_j * pen(b_j)
//! ```
//!
//! with `pen(b) = |b|` for the lasso and `pen(b) = b^2` for ridge. A loading
//! of zero leaves the coefficient unpenalized. The textbook form without the
//! 1/N factors corresponds to the same minimizer at the same `lambda`.

mod cd;
mod path;
mod ridge;

pub use cd::{fit_lasso, fit_lasso_warm, kkt_check, kkt_violation, lambda_max, objective};
pub use path::{path_for_lambdas, regularization_path, PathGrid, PathPoint, PathResult};
pub use ridge::fit_ridge;

pub(crate) use cd::LassoProblem;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};

/// Overall penalty level and per-column loadings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub loadings: Vec<f64>,
}

impl PenaltyConfig {
    pub fn new(lambda: f64, loadings: Vec<f64>) -> Result<PenaltyConfig> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        if let Some(bad) = loadings.iter().find(|&&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(format!("loadings must be >= 0, got {bad}")));
        }
        Ok(PenaltyConfig { lambda, loadings })
    }

    /// Unit loadings on every column.
    pub fn uniform(lambda: f64, p: usize) -> Result<PenaltyConfig> {
        PenaltyConfig::new(lambda, vec![1.0; p])
    }

    pub(crate) fn check_len(&self, p: usize) -> Result<()> {
        if self.loadings.len() != p {
            return Err(Error::Dimension(format!(
                "{} loadings for {} columns",
                self.loadings.len(),
                p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordinateOrder {
    #[default]
    Cyclic,
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// Covariance updates when p <= N, residual updates otherwise.
    #[default]
    Auto,
    Naive,
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop when the largest coefficient change over a full sweep is below this.
    pub tol: f64,
    /// Maximum KKT violation accepted at convergence.
    pub kkt_tol: f64,
    /// Maximum number of coordinate sweeps.
    pub max_iter: usize,
    pub order: CoordinateOrder,
    pub algorithm: Algorithm,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            kkt_tol: 1e-6,
            max_iter: 100_000,
            order: CoordinateOrder::Cyclic,
            algorithm: Algorithm::Auto,
        }
    }
}

/// Solution of one lasso problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoFit {
    pub coefficients: DVector<f64>,
    /// Indices j with a nonzero coefficient.
    pub active_set: Vec<usize>,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_violation: f64,
}

impl LassoFit {
    pub fn sparsity(&self, n: usize) -> Sparsity {
        sparsity_index(self.coefficients.as_slice(), n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Sparsity {
    /// Number of nonzero coefficients.
    pub s: usize,
    /// `s <= p/2` and `s <= N/2`.
    pub sparse: bool,
}

pub fn sparsity_index(coeffs: &[f64], n: usize) -> Sparsity {
    let s = coeffs.iter().filter(|&&b| b != 0.0).count();
    let p = coeffs.len();
    Sparsity {
        s,
        sparse: 2 * s <= p && 2 * s <= n,
    }
}

/// `sign(z) * max(|z| - t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub(crate) fn check_finite(name: &str, v: impl IntoIterator<Item = f64>) -> Result<()> {
    if v.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}
