use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::cd::{lambda_max, LassoProblem};
use super::{FitOptions, LassoFit, PenaltyConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathGrid {
    pub n_points: usize,
    /// Smallest lambda as a fraction of lambda_max.
    pub min_ratio: f64,
}

impl Default for PathGrid {
    fn default() -> Self {
        PathGrid {
            n_points: 100,
            min_ratio: 1e-4,
        }
    }
}

impl PathGrid {
    /// Log-spaced values from `lmax` down to `min_ratio * lmax`.
    pub fn lambdas(&self, lmax: f64) -> Result<Vec<f64>> {
        if self.n_points < 2 {
            return Err(Error::InvalidArgument("path needs at least two points".into()));
        }
        if !(self.min_ratio > 0.0 && self.min_ratio < 1.0) {
            return Err(Error::InvalidArgument("min_ratio must lie in (0, 1)".into()));
        }
        if !(lmax > 0.0) {
            return Err(Error::InvalidArgument(
                "lambda_max is zero: response is orthogonal to every penalized column".into(),
            ));
        }
        let step = self.min_ratio.ln() / (self.n_points - 1) as f64;
        Ok((0..self.n_points)
            .map(|k| {
                if k == 0 {
                    lmax
                } else {
                    lmax * (step * k as f64).exp()
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub fit: LassoFit,
}

/// Lasso solutions on a strictly decreasing lambda grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResult {
    pub points: Vec<PathPoint>,
    pub lambda_max: f64,
    pub loadings: Vec<f64>,
}

impl PathResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }
}

/// Lasso path from `lambda_max` down to `min_ratio * lambda_max`, each fit
/// warm-started from the previous solution.
pub fn regularization_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    loadings: &[f64],
    grid: &PathGrid,
    opts: &FitOptions,
) -> Result<PathResult> {
    let lmax = lambda_max(x, y, loadings)?;
    let lambdas = grid.lambdas(lmax)?;
    let mut path = path_for_lambdas(x, y, loadings, &lambdas, opts)?;
    path.lambda_max = lmax;
    Ok(path)
}

/// Warm-started fits on a caller-supplied grid, which must be strictly decreasing.
pub fn path_for_lambdas(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    loadings: &[f64],
    lambdas: &[f64],
    opts: &FitOptions,
) -> Result<PathResult> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("lambda grid must be strictly decreasing".into()));
    }
    let problem = LassoProblem::new(x, y, opts.algorithm)?;
    let mut points = Vec::with_capacity(lambdas.len());
    let mut warm: Option<DVector<f64>> = None;
    for &lambda in lambdas {
        let penalty = PenaltyConfig::new(lambda, loadings.to_vec())?;
        let fit = problem
            .solve(&penalty, opts, warm.as_ref())
            .map_err(|e| e.in_step(format!("path at lambda={lambda}")))?;
        warm = Some(fit.coefficients.clone());
        points.push(PathPoint { lambda, fit });
    }
    Ok(PathResult {
        points,
        lambda_max: lambdas[0],
        loadings: loadings.to_vec(),
    })
}
