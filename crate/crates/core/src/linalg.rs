//! Dense least-squares helpers shared by the estimators: rank-revealing column
//! selection, OLS through a thin QR factorization, partialling-out and
//! sandwich covariance estimators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative residual norm below which a column is treated as collinear with
/// the columns kept before it.
pub const COLLINEARITY_TOL: f64 = 1e-9;

/// Standard-error flavour for OLS and 2SLS coefficient covariances.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeMode {
    #[default]
    Iid,
    /// HC1 sandwich.
    Robust,
    /// Cluster-robust sandwich; one group label per row.
    Cluster(Vec<usize>),
}

impl SeMode {
    pub fn name(&self) -> &'static str {
        match self {
            SeMode::Iid => "iid",
            SeMode::Robust => "robust",
            SeMode::Cluster(_) => "cluster",
        }
    }

    /// Restrict cluster labels to a subset of rows.
    pub fn select_rows(&self, rows: &[usize]) -> SeMode {
        match self {
            SeMode::Cluster(ids) => SeMode::Cluster(rows.iter().map(|&r| ids[r]).collect()),
            other => other.clone(),
        }
    }
}

/// Indices of columns that are linearly independent of the columns before
/// them, scanning left to right (modified Gram-Schmidt).
pub fn independent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm0 = col.norm();
        if norm0 == 0.0 || !norm0.is_finite() {
            continue;
        }
        let mut v = col;
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        // second pass for numerical orthogonality
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let norm = v.norm();
        if norm > COLLINEARITY_TOL * norm0 {
            basis.push(v / norm);
            kept.push(j);
        }
    }
    kept
}

pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    x.select_columns(cols)
}

pub fn hstack(blocks: &[&DMatrix<f64>], n: usize) -> DMatrix<f64> {
    let k: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, k);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), n);
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

pub fn ones(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, 1, 1.0)
}

/// Thin QR of a full-column-rank matrix.
pub(crate) struct Qr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl Qr {
    pub(crate) fn new(x: &DMatrix<f64>) -> Result<Qr> {
        let k = x.ncols();
        if x.nrows() < k {
            return Err(Error::DegreesOfFreedom(format!(
                "{} columns with {} rows",
                k,
                x.nrows()
            )));
        }
        let qr = x.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..k {
            if r[(i, i)].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Singular(format!("design column {i} is collinear")));
            }
        }
        Ok(Qr { q, r })
    }

    pub(crate) fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.q.tr_mul(y);
        self.r
            .solve_upper_triangular(&qty)
            .expect("diagonal checked nonzero")
    }

    /// Projection of `y` on the column space.
    pub(crate) fn fitted(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.q * self.q.tr_mul(y)
    }

    /// (X'X)^{-1} = R^{-1} R^{-T}.
    pub(crate) fn xtx_inverse(&self) -> DMatrix<f64> {
        let k = self.r.ncols();
        let rinv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("diagonal checked nonzero");
        let inv = &rinv * rinv.transpose();
        symmetrize(inv)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Least-squares coefficients of `y` on full-rank `x`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if x.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    Ok(Qr::new(x)?.solve(y))
}

/// Residuals of every column of `targets` after projection on `controls`.
/// Collinear control columns are dropped first.
pub fn partial_out(controls: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if controls.ncols() == 0 {
        return Ok(targets.clone());
    }
    let keep = independent_columns(controls);
    let c = controls.select_columns(&keep);
    let qr = Qr::new(&c)?;
    let mut out = targets.clone();
    for j in 0..targets.ncols() {
        let t = targets.column(j).into_owned();
        let fitted = qr.fitted(&t);
        out.set_column(j, &(t - fitted));
    }
    Ok(out)
}

pub fn partial_out_vec(controls: &DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let m = DMatrix::from_column_slice(target.len(), 1, target.as_slice());
    Ok(partial_out(controls, &m)?.column(0).into_owned())
}

/// Coefficients, covariance and residual diagnostics of an OLS fit.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    /// Residual degrees of freedom: N - k - absorbed.
    pub dof: usize,
}

/// OLS with a covariance estimate. `x` must have full column rank.
/// `absorbed_dof` counts parameters removed before the fit (fixed effects,
/// partialled-out columns) and enters every small-sample correction.
pub fn ols_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    se: &SeMode,
    absorbed_dof: usize,
) -> Result<OlsFit> {
    let n = x.nrows();
    let k = x.ncols();
    let dof = residual_dof(n, k, absorbed_dof)?;
    let qr = Qr::new(x)?;
    let coefficients = qr.solve(y);
    let residuals = y - x * &coefficients;
    let rss = residuals.norm_squared();
    let bread = qr.xtx_inverse();
    let vcov = sandwich(&bread, x, &residuals, se, dof)?;
    Ok(OlsFit {
        coefficients,
        vcov,
        residuals,
        rss,
        dof,
    })
}

pub(crate) fn residual_dof(n: usize, k: usize, absorbed: usize) -> Result<usize> {
    let used = k + absorbed;
    if used >= n {
        return Err(Error::DegreesOfFreedom(format!(
            "{used} parameters with {n} observations"
        )));
    }
    Ok(n - used)
}

/// Covariance `bread * meat * bread'` of a linear estimator whose score
/// contributions are `scores[i] * resid[i]`.
///
/// iid: s^2 * bread * S'S * bread' with s^2 = e'e / dof, which reduces to
/// s^2 (X'X)^{-1} for OLS. Robust: HC1, scaled by N / dof.
/// Cluster: G/(G-1) * (N-1)/dof.
pub(crate) fn sandwich(
    bread: &DMatrix<f64>,
    scores: &DMatrix<f64>,
    resid: &DVector<f64>,
    se: &SeMode,
    dof: usize,
) -> Result<DMatrix<f64>> {
    let n = scores.nrows();
    let k = scores.ncols();
    let dof_f = dof as f64;
    let v = match se {
        SeMode::Iid => {
            let gram = scores.tr_mul(scores);
            bread * gram * bread.transpose() * (resid.norm_squared() / dof_f)
        }
        SeMode::Robust => {
            let mut meat = DMatrix::zeros(k, k);
            for i in 0..n {
                let xi = scores.row(i).transpose();
                meat.ger(resid[i] * resid[i], &xi, &xi, 1.0);
            }
            bread * meat * bread.transpose() * (n as f64 / dof_f)
        }
        SeMode::Cluster(ids) => {
            if ids.len() != n {
                return Err(Error::Dimension(format!(
                    "{} cluster labels for {} rows",
                    ids.len(),
                    n
                )));
            }
            let mut sums: std::collections::BTreeMap<usize, DVector<f64>> = Default::default();
            for i in 0..n {
                let xi = scores.row(i).transpose() * resid[i];
                sums.entry(ids[i])
                    .and_modify(|s| *s += &xi)
                    .or_insert(xi);
            }
            let g = sums.len();
            if g < 2 {
                return Err(Error::InvalidArgument(
                    "cluster-robust errors need at least two clusters".into(),
                ));
            }
            let mut meat = DMatrix::zeros(k, k);
            for s in sums.values() {
                meat.ger(1.0, s, s, 1.0);
            }
            let g = g as f64;
            let corr = g / (g - 1.0) * ((n as f64 - 1.0) / dof_f);
            bread * meat * bread.transpose() * corr
        }
    };
    Ok(symmetrize(v))
}

/// Named columns of a design block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl Block {
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Block> {
        if names.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        Ok(Block { names, values })
    }

    pub fn empty(n: usize) -> Block {
        Block {
            names: Vec::new(),
            values: DMatrix::zeros(n, 0),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn select(&self, cols: &[usize]) -> Block {
        Block {
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            values: self.values.select_columns(cols),
        }
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.values.column(j).into_owned()
    }

    /// Concatenate blocks left to right.
    pub fn concat(blocks: &[&Block], n: usize) -> Block {
        let mats: Vec<&DMatrix<f64>> = blocks.iter().map(|b| &b.values).collect();
        Block {
            names: blocks.iter().flat_map(|b| b.names.iter().cloned()).collect(),
            values: hstack(&mats, n),
        }
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn center(v: &DVector<f64>) -> (DVector<f64>, f64) {
    let m = mean(v.as_slice());
    (v.map(|x| x - m), m)
}
