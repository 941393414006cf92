//! Independent oracles and instance generators shared by the integration
//! tests. Nothing here calls the solver under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Box-Muller, so the oracles do not lean on the library's samplers.
pub fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn gauss_matrix<R: Rng>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| gauss(rng))
}

pub fn gauss_vector<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| gauss(rng))
}

/// y = X beta + noise with the first `s` coefficients equal to `coef`.
pub fn sparse_instance<R: Rng>(
    n: usize,
    p: usize,
    s: usize,
    coef: f64,
    rng: &mut R,
) -> (DMatrix<f64>, DVector<f64>) {
    let x = gauss_matrix(n, p, rng);
    let beta = DVector::from_fn(p, |j, _| if j < s { coef } else { 0.0 });
    let y = &x * beta + gauss_vector(n, rng);
    (x, y)
}

/// Least squares through the normal equations (Cholesky).
pub fn ols_normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    xtx.cholesky().expect("full rank").solve(&xty)
}

pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::from_element(n, x.ncols() + 1, 1.0);
    out.columns_mut(1, x.ncols()).copy_from(x);
    out
}

/// `(1/N)||y - Xb||^2 + (lambda/N) sum psi_j |b_j|`, written out directly.
pub fn lasso_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    b: &DVector<f64>,
    lambda: f64,
    psi: &[f64],
) -> f64 {
    let n = x.nrows() as f64;
    let r = y - x * b;
    let pen: f64 = b.iter().zip(psi).map(|(bj, p)| p * bj.abs()).sum();
    r.norm_squared() / n + lambda / n * pen
}

/// Exhaustive sign-pattern oracle. For every pattern s in {-1, 0, 1}^p the
/// stationarity condition on the support A = {s != 0} is linear:
/// `X_A'X_A b_A = X_A'y - (lambda/2) psi_A s_A`. Candidates whose solution
/// agrees with the pattern are feasible points; the global minimizer is one
/// of them, so the smallest candidate objective is the optimum.
pub fn sign_pattern_minimum(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, psi: &[f64]) -> f64 {
    let p = x.ncols();
    let mut best = lasso_objective(x, y, &DVector::zeros(p), lambda, psi);
    let total = 3usize.pow(p as u32);
    for code in 1..total {
        let mut signs = vec![0i32; p];
        let mut c = code;
        for s in signs.iter_mut() {
            *s = (c % 3) as i32 - 1;
            c /= 3;
        }
        let support: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        if support.is_empty() {
            continue;
        }
        let xa = x.select_columns(&support);
        let gram = xa.transpose() * &xa;
        let mut rhs = xa.transpose() * y;
        for (k, &j) in support.iter().enumerate() {
            rhs[k] -= 0.5 * lambda * psi[j] * signs[j] as f64;
        }
        let Some(ba) = gram.lu().solve(&rhs) else {
            continue;
        };
        if support
            .iter()
            .enumerate()
            .any(|(k, &j)| ba[k] * signs[j] as f64 <= 0.0)
        {
            continue;
        }
        let mut b = DVector::zeros(p);
        for (k, &j) in support.iter().enumerate() {
            b[j] = ba[k];
        }
        best = best.min(lasso_objective(x, y, &b, lambda, psi));
    }
    best
}

/// `2 max_j |x_j'y| / psi_j`, for designs without unpenalized columns.
pub fn lambda_max_direct(x: &DMatrix<f64>, y: &DVector<f64>, psi: &[f64]) -> f64 {
    (0..x.ncols())
        .map(|j| 2.0 * x.column(j).dot(y).abs() / psi[j])
        .fold(0.0, f64::max)
}

/// N x p design with centred, mutually orthogonal columns scaled so that
/// x_j'x_j = N.
pub fn orthonormal_design<R: Rng>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    let q = with_intercept(&gauss_matrix(n, p, rng)).qr().q();
    q.columns(1, p).into_owned() * (n as f64).sqrt()
}

/// Two-stage least squares written as (X'Pz X)^{-1} X'Pz y with explicit
/// projection matrices.
pub fn two_sls_textbook(y: &DVector<f64>, x: &DMatrix<f64>, z: &DMatrix<f64>) -> DVector<f64> {
    let ztz_inv = (z.transpose() * z).try_inverse().expect("instruments full rank");
    let pz = z * ztz_inv * z.transpose();
    let a = x.transpose() * &pz * x;
    let b = x.transpose() * &pz * y;
    a.try_inverse().expect("identified") * b
}

/// Columns centred and scaled so that x_j'x_j = N.
pub fn standardized(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
        let s = (col.norm_squared() / n).sqrt();
        col /= s;
    }
    out
}

pub fn centred(y: &DVector<f64>) -> DVector<f64> {
    y.add_scalar(-y.mean())
}
