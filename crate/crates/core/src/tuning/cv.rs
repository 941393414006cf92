use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CandidateScore, TuneMethod, TuningResult};
use crate::dataset::standardize::moments;
use crate::error::{Error, Result};
use crate::solver::{lambda_max, path_for_lambdas, FitOptions, PathGrid};

/// Fold label in `0..k` for each of `n` rows: a seeded shuffle dealt out
/// round-robin, so fold sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold[row] = pos % k;
    }
    fold
}

struct Scaler {
    means: Vec<f64>,
    scales: Vec<f64>,
    y_mean: f64,
}

impl Scaler {
    fn fit(x: &DMatrix<f64>, y: &DVector<f64>, loadings: &[f64]) -> Scaler {
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let (m, sd) = moments(&col);
            means.push(m);
            // unpenalized columns are centered only; constant columns are zeroed
            let constant = sd <= 1e-14 * m.abs().max(1.0);
            scales.push(if constant {
                f64::INFINITY
            } else if loadings[j] == 0.0 {
                1.0
            } else {
                sd
            });
        }
        let y_mean = y.mean();
        Scaler {
            means,
            scales,
            y_mean,
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for j in 0..x.ncols() {
            let (m, s) = (self.means[j], self.scales[j]);
            out.column_mut(j).apply(|v| *v = (*v - m) / s);
        }
        out
    }
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    x.select_rows(idx)
}

/// K-fold cross-validation over a lambda grid anchored at the full-data
/// `lambda_max`. Standardization is recomputed on each training fold and
/// applied unchanged to the held-out fold. Returns the lambda with the
/// smallest mean out-of-fold squared error (ties to the larger lambda).
pub fn kfold_cv(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    loadings: &[f64],
    grid: &PathGrid,
    k: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<TuningResult> {
    let n = x.nrows();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "number of folds must lie in [2, {n}], got {k}"
        )));
    }
    if loadings.len() != x.ncols() || y.len() != n {
        return Err(Error::Dimension("cross-validation inputs".into()));
    }
    let full = Scaler::fit(x, y, loadings);
    let xs = full.apply(x);
    let yc = y.add_scalar(-full.y_mean);
    let lambdas = grid.lambdas(lambda_max(&xs, &yc, loadings)?)?;

    let fold = fold_assignment(n, k, seed);
    let fold_errors: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|f| -> Result<Vec<f64>> {
            let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
            if test.is_empty() || train.is_empty() {
                return Err(Error::InvalidArgument(format!("fold {f} has no rows")));
            }
            let (xtr, ytr) = (rows(x, &train), y.select_rows(&train));
            let scaler = Scaler::fit(&xtr, &ytr, loadings);
            let xtr_s = scaler.apply(&xtr);
            let ytr_c = ytr.add_scalar(-scaler.y_mean);
            let xte_s = scaler.apply(&rows(x, &test));
            let yte = y.select_rows(&test);
            let path = path_for_lambdas(&xtr_s, &ytr_c, loadings, &lambdas, opts)
                .map_err(|e| e.in_step(format!("cv fold {f}")))?;
            Ok(path
                .points
                .iter()
                .map(|pt| {
                    let pred = (&xte_s * &pt.fit.coefficients).add_scalar(scaler.y_mean);
                    (&yte - pred).norm_squared() / test.len() as f64
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    // fixed summation order over folds
    let mut candidates = Vec::with_capacity(lambdas.len());
    let mut best = 0;
    for (l, &lambda) in lambdas.iter().enumerate() {
        let mut total = 0.0;
        for errs in &fold_errors {
            total += errs[l];
        }
        let score = total / k as f64;
        if score < candidates.get(best).map_or(f64::INFINITY, |c: &CandidateScore| c.score) {
            best = l;
        }
        candidates.push(CandidateScore {
            lambda,
            score,
            df: 0,
        });
    }
    Ok(TuningResult {
        method: TuneMethod::Cv,
        chosen_lambda: lambdas[best],
        loadings: loadings.to_vec(),
        candidates,
        iterations: 0,
        notes: vec![],
    })
}
