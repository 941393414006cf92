//! Iterated plug-in penalty.
//!
//! The penalty level is `lambda = 2 c sqrt(N) Phi^{-1}(1 - gamma / (2p))`.
//! Loadings start from the residuals of an OLS fit on the five columns most
//! correlated with the response and are then refreshed from the post-lasso
//! residuals of each new fit until they stop moving.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{TuneMethod, TuningResult};
use crate::error::{Error, Result};
use crate::linalg::{independent_columns, ols};
use crate::solver::{FitOptions, LassoProblem, PenaltyConfig};

const INITIAL_COLUMNS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LoadingMode {
    /// Common error scale.
    Iid,
    /// Heteroskedasticity-robust, `sqrt(mean(x_j^2 e^2))`.
    #[default]
    Robust,
    /// Cluster-robust; one group label per row.
    Cluster(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigorousOptions {
    pub mode: LoadingMode,
    pub c: f64,
    /// Defaults to `0.1 / ln N`.
    pub gamma: Option<f64>,
    pub max_rounds: usize,
    /// Stop when the largest relative loading change falls below this.
    pub tol: f64,
}

impl Default for RigorousOptions {
    fn default() -> Self {
        RigorousOptions {
            mode: LoadingMode::Robust,
            c: 1.1,
            gamma: None,
            max_rounds: 15,
            tol: 1e-4,
        }
    }
}

/// `2 c sqrt(N) Phi^{-1}(1 - gamma / (2p))`.
pub fn plug_in_lambda(n: usize, p: usize, c: f64, gamma: f64) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidArgument("plug-in penalty needs p >= 1".into()));
    }
    let tail = gamma / (2.0 * p as f64);
    if !(tail > 0.0 && tail < 1.0) || !(c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "plug-in penalty needs c > 0 and 0 < gamma/(2p) < 1, got c={c}, gamma/(2p)={tail}"
        )));
    }
    let q = Normal::standard().inverse_cdf(1.0 - tail);
    Ok(2.0 * c * (n as f64).sqrt() * q)
}

fn loadings(x: &DMatrix<f64>, resid: &DVector<f64>, mode: &LoadingMode) -> Vec<f64> {
    let (n, p) = x.shape();
    let nf = n as f64;
    match mode {
        LoadingMode::Iid => {
            let sigma = (resid.norm_squared() / nf).sqrt();
            (0..p)
                .map(|j| sigma * (x.column(j).norm_squared() / nf).sqrt())
                .collect()
        }
        LoadingMode::Robust => (0..p)
            .map(|j| {
                let s: f64 = x
                    .column(j)
                    .iter()
                    .zip(resid.iter())
                    .map(|(xi, ei)| (xi * ei).powi(2))
                    .sum();
                (s / nf).sqrt()
            })
            .collect(),
        LoadingMode::Cluster(ids) => {
            let groups = ids.iter().copied().max().map_or(0, |m| m + 1);
            (0..p)
                .map(|j| {
                    let mut sums = vec![0.0; groups];
                    for i in 0..n {
                        sums[ids[i]] += x[(i, j)] * resid[i];
                    }
                    (sums.iter().map(|s| s * s).sum::<f64>() / nf).sqrt()
                })
                .collect()
        }
    }
}

fn ols_residual(x: &DMatrix<f64>, y: &DVector<f64>, cols: &[usize]) -> Result<DVector<f64>> {
    if cols.is_empty() {
        return Ok(y.clone());
    }
    let sub = x.select_columns(cols);
    let keep = independent_columns(&sub);
    let keep: Vec<usize> = keep.into_iter().take(x.nrows().saturating_sub(1)).collect();
    let sub = sub.select_columns(&keep);
    let b = ols(&sub, y)?;
    Ok(y - sub * b)
}

fn negligible(resid: &DVector<f64>, y: &DVector<f64>) -> bool {
    resid.norm() <= 1e-12 * y.norm()
}

/// Iterated plug-in penalty and loadings for a standardized design and a
/// centered response.
pub fn rigorous_lambda(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    opts: &RigorousOptions,
    fit: &FitOptions,
) -> Result<TuningResult> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension("response length".into()));
    }
    if let LoadingMode::Cluster(ids) = &opts.mode {
        if ids.len() != n {
            return Err(Error::Dimension(format!(
                "{} cluster labels for {n} rows",
                ids.len()
            )));
        }
    }
    let gamma = opts.gamma.unwrap_or(0.1 / (n as f64).ln());
    let lambda = plug_in_lambda(n, p, opts.c, gamma)?;

    // round 0: OLS on the columns most correlated with y
    let mut order: Vec<(usize, f64)> = (0..p).map(|j| (j, x.column(j).dot(y).abs())).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let top: Vec<usize> = order.iter().take(INITIAL_COLUMNS).map(|(j, _)| *j).collect();
    let resid = ols_residual(x, y, &top)?;
    if negligible(&resid, y) {
        return Err(Error::Singular("initial residuals are all zero".into()));
    }
    let mut psi = loadings(x, &resid, &opts.mode);

    let problem = LassoProblem::new(x, y, fit.algorithm)?;
    let mut warm: Option<DVector<f64>> = None;
    let mut rounds = 0;
    let mut notes = Vec::new();
    let mut settled = false;
    while rounds < opts.max_rounds {
        rounds += 1;
        let penalty = PenaltyConfig::new(lambda, psi.clone())?;
        let lasso = problem.solve(&penalty, fit, warm.as_ref())?;
        let resid = ols_residual(x, y, &lasso.active_set)?;
        warm = Some(lasso.coefficients);
        if negligible(&resid, y) {
            return Err(Error::Singular("post-lasso residuals are all zero".into()));
        }
        let next = loadings(x, &resid, &opts.mode);
        let change = psi
            .iter()
            .zip(&next)
            .map(|(a, b)| if *a > 0.0 { (b - a).abs() / a } else { b.abs() })
            .fold(0.0, f64::max);
        psi = next;
        if change <= opts.tol {
            settled = true;
            break;
        }
    }
    if !settled {
        notes.push(format!("loadings still moving after {rounds} rounds"));
    }
    Ok(TuningResult {
        method: TuneMethod::Rigorous,
        chosen_lambda: lambda,
        loadings: psi,
        candidates: vec![],
        iterations: rounds,
        notes,
    })
}
