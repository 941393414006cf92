//! Cyclic coordinate descent for the weighted lasso.

use nalgebra::{DMatrix, DVector};

use super::{
    check_finite, soft_threshold, Algorithm, CoordinateOrder, FitOptions, LassoFit, PenaltyConfig,
};
use crate::error::{Error, Result};
use crate::linalg;

/// Relative slack on the soft-threshold boundary. Keeps exact zeros at
/// `lambda_max` when the gradient is recomputed along a different
/// floating-point route.
const THRESHOLD_SLACK: f64 = 1e-11;

/// Design, response and precomputed quantities shared by repeated fits
/// (for example along a regularization path).
pub(crate) struct LassoProblem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    n: usize,
    sq_norms: Vec<f64>,
    gram: Option<Gram>,
}

struct Gram {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
}

enum State {
    /// Residual r = y - Xb.
    Naive(DVector<f64>),
    /// Inner products c = X'r.
    Covariance(DVector<f64>),
}

impl<'a> LassoProblem<'a> {
    pub(crate) fn new(
        x: &'a DMatrix<f64>,
        y: &'a DVector<f64>,
        algorithm: Algorithm,
    ) -> Result<LassoProblem<'a>> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "design has {} rows, response {}",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument("empty design".into()));
        }
        check_finite("design matrix", x.iter().copied())?;
        check_finite("response", y.iter().copied())?;
        let (n, p) = x.shape();
        let sq_norms = (0..p).map(|j| x.column(j).norm_squared()).collect();
        let use_gram = match algorithm {
            Algorithm::Naive => false,
            Algorithm::Covariance => true,
            Algorithm::Auto => p <= n && p <= 2000,
        };
        let gram = use_gram.then(|| Gram {
            xtx: x.tr_mul(x),
            xty: x.tr_mul(y),
        });
        Ok(LassoProblem {
            x,
            y,
            n,
            sq_norms,
            gram,
        })
    }

    fn p(&self) -> usize {
        self.x.ncols()
    }

    fn fresh_state(&self, b: &DVector<f64>) -> State {
        match &self.gram {
            Some(g) => State::Covariance(&g.xty - &g.xtx * b),
            None => State::Naive(self.residual(b)),
        }
    }

    fn residual(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut r = self.y.clone();
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                r.axpy(-bj, &self.x.column(j), 1.0);
            }
        }
        r
    }

    /// x_j'r under the current state.
    fn inner(&self, state: &State, j: usize) -> f64 {
        match state {
            State::Naive(r) => self.x.column(j).dot(r),
            State::Covariance(c) => c[j],
        }
    }

    fn apply(&self, state: &mut State, j: usize, delta: f64) {
        match state {
            State::Naive(r) => r.axpy(-delta, &self.x.column(j), 1.0),
            State::Covariance(c) => {
                let g = self.gram.as_ref().expect("covariance state has a gram matrix");
                c.axpy(-delta, &g.xtx.column(j), 1.0);
            }
        }
    }

    /// One pass over `coords`; returns the largest absolute coefficient change.
    fn sweep(
        &self,
        state: &mut State,
        b: &mut DVector<f64>,
        half_thresholds: &[f64],
        coords: &[usize],
    ) -> f64 {
        let mut max_delta = 0.0f64;
        for &j in coords {
            let sq = self.sq_norms[j];
            if sq == 0.0 {
                continue;
            }
            let old = b[j];
            let z = self.inner(state, j) + old * sq;
            let t = half_thresholds[j];
            let new = if z.abs() <= t * (1.0 + THRESHOLD_SLACK) {
                0.0
            } else {
                soft_threshold(z, t) / sq
            };
            let delta = new - old;
            if delta != 0.0 {
                b[j] = new;
                self.apply(state, j, delta);
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }

    fn kkt_from_state(&self, state: &State, b: &DVector<f64>, penalty: &PenaltyConfig) -> f64 {
        (0..self.p())
            .map(|j| {
                let g = 2.0 * self.inner(state, j) / self.n as f64;
                coordinate_violation(g, b[j], penalty.lambda * penalty.loadings[j] / self.n as f64)
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn solve(
        &self,
        penalty: &PenaltyConfig,
        opts: &FitOptions,
        warm: Option<&DVector<f64>>,
    ) -> Result<LassoFit> {
        let p = self.p();
        penalty.check_len(p)?;
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        let mut b = match warm {
            Some(w) if w.len() == p => w.clone(),
            Some(w) => {
                return Err(Error::Dimension(format!("warm start of length {}", w.len())))
            }
            None => DVector::zeros(p),
        };
        let half: Vec<f64> = penalty
            .loadings
            .iter()
            .map(|psi| 0.5 * penalty.lambda * psi)
            .collect();
        let mut all: Vec<usize> = (0..p).collect();
        if opts.order == CoordinateOrder::Reversed {
            all.reverse();
        }

        let mut state = self.fresh_state(&b);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iter {
            let max_delta = self.sweep(&mut state, &mut b, &half, &all);
            iterations += 1;
            if max_delta <= opts.tol {
                state = self.fresh_state(&b);
                if self.kkt_from_state(&state, &b, penalty) <= opts.kkt_tol {
                    converged = true;
                    break;
                }
                continue;
            }
            let active: Vec<usize> = all.iter().copied().filter(|&j| b[j] != 0.0).collect();
            while iterations < opts.max_iter {
                let d = self.sweep(&mut state, &mut b, &half, &active);
                iterations += 1;
                if d <= opts.tol {
                    break;
                }
            }
        }

        let state = self.fresh_state(&b);
        let kkt = self.kkt_from_state(&state, &b, penalty);
        let r = self.residual(&b);
        Ok(LassoFit {
            active_set: (0..p).filter(|&j| b[j] != 0.0).collect(),
            lambda: penalty.lambda,
            objective: objective_from_residual(&r, &b, penalty),
            iterations,
            converged: converged && kkt <= opts.kkt_tol,
            kkt_violation: kkt,
            coefficients: b,
        })
    }
}

fn coordinate_violation(g: f64, bj: f64, threshold: f64) -> f64 {
    if bj != 0.0 {
        (g - threshold * bj.signum()).abs()
    } else if g.abs() <= threshold * (1.0 + THRESHOLD_SLACK) {
        0.0
    } else {
        g.abs() - threshold
    }
}

fn objective_from_residual(r: &DVector<f64>, b: &DVector<f64>, penalty: &PenaltyConfig) -> f64 {
    let n = r.len() as f64;
    let pen: f64 = b
        .iter()
        .zip(&penalty.loadings)
        .map(|(bj, psi)| psi * bj.abs())
        .sum();
    r.norm_squared() / n + penalty.lambda / n * pen
}

/// Lasso objective `(1/N)||y - Xb||^2 + (lambda/N) sum psi_j |b_j|`.
pub fn objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    b: &DVector<f64>,
    penalty: &PenaltyConfig,
) -> f64 {
    objective_from_residual(&(y - x * b), b, penalty)
}

/// Minimize the weighted lasso objective by cyclic coordinate descent from zero.
///
/// Non-convergence within `max_iter` sweeps is not an error: the fit is
/// returned with `converged == false`.
pub fn fit_lasso(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltyConfig,
    opts: &FitOptions,
) -> Result<LassoFit> {
    LassoProblem::new(x, y, opts.algorithm)?.solve(penalty, opts, None)
}

/// As [`fit_lasso`], starting from `warm`.
pub fn fit_lasso_warm(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltyConfig,
    opts: &FitOptions,
    warm: &DVector<f64>,
) -> Result<LassoFit> {
    LassoProblem::new(x, y, opts.algorithm)?.solve(penalty, opts, Some(warm))
}

/// Largest violation of the subgradient optimality conditions at `b`, with
/// `g_j = (2/N) x_j'(y - Xb)`: `|g_j - (lambda/N) psi_j sign(b_j)|` for
/// nonzero `b_j` and `max(0, |g_j| - (lambda/N) psi_j)` otherwise.
pub fn kkt_violation(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    b: &DVector<f64>,
    penalty: &PenaltyConfig,
) -> f64 {
    let n = x.nrows() as f64;
    let r = y - x * b;
    let g = x.tr_mul(&r) * (2.0 / n);
    (0..x.ncols())
        .map(|j| coordinate_violation(g[j], b[j], penalty.lambda * penalty.loadings[j] / n))
        .fold(0.0, f64::max)
}

pub fn kkt_check(
    fit: &LassoFit,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltyConfig,
) -> f64 {
    kkt_violation(x, y, &fit.coefficients, penalty)
}

/// Smallest lambda at which the penalized coefficients are all zero:
/// `max_j 2|x_j'r| / psi_j` over penalized columns, where `r` is `y` after
/// partialling out the unpenalized (zero-loading) columns.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>, loadings: &[f64]) -> Result<f64> {
    if loadings.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "{} loadings for {} columns",
            loadings.len(),
            x.ncols()
        )));
    }
    if let Some(bad) = loadings.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid loading {bad}")));
    }
    let penalized: Vec<usize> = (0..x.ncols()).filter(|&j| loadings[j] > 0.0).collect();
    if penalized.is_empty() {
        return Err(Error::InvalidArgument(
            "lambda_max needs at least one penalized column".into(),
        ));
    }
    let unpen: Vec<usize> = (0..x.ncols()).filter(|&j| loadings[j] == 0.0).collect();
    let r = if unpen.is_empty() {
        y.clone()
    } else {
        linalg::partial_out_vec(&x.select_columns(&unpen), y)?
    };
    Ok(penalized
        .iter()
        .map(|&j| 2.0 * x.column(j).dot(&r).abs() / loadings[j])
        .fold(0.0, f64::max))
}
