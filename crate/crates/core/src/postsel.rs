//! Post-lasso OLS: refit the selected support without a penalty.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hstack, independent_columns, ones, Qr};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostFit {
    /// One entry per design column; zero off the refitted support.
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    /// Columns that entered the refit, ascending.
    pub active_set: Vec<usize>,
    /// Columns of the requested support dropped as collinear.
    pub dropped: Vec<usize>,
    pub rss: f64,
    /// N - (refitted columns + intercept).
    pub dof: usize,
    pub warnings: Vec<String>,
}

impl PostFit {
    pub fn fitted(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.coefficients).add_scalar(self.intercept)
    }
}

/// OLS with an intercept on the columns in `active_set ∪ always_in`.
///
/// Collinear columns are dropped left to right, keeping the earlier one,
/// and each drop is reported as a warning.
pub fn post_lasso_ols(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    active_set: &[usize],
    always_in: &[usize],
) -> Result<PostFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("{} responses for {n} rows", y.len())));
    }
    let support: BTreeSet<usize> = active_set.iter().chain(always_in).copied().collect();
    if let Some(&j) = support.iter().find(|&&j| j >= p) {
        return Err(Error::Dimension(format!("column index {j} out of range for {p} columns")));
    }
    if support.len() >= n {
        return Err(Error::DegreesOfFreedom(format!(
            "{} selected columns with {n} observations",
            support.len()
        )));
    }
    let support: Vec<usize> = support.into_iter().collect();

    let design = hstack(&[&ones(n), &x.select_columns(&support)], n);
    let keep = independent_columns(&design);
    let mut warnings = Vec::new();
    let mut dropped = Vec::new();
    if keep.first() != Some(&0) {
        return Err(Error::Singular("intercept column is degenerate".into()));
    }
    for (pos, &j) in support.iter().enumerate() {
        if !keep.contains(&(pos + 1)) {
            dropped.push(j);
            warnings.push(format!("column {j} dropped from the refit as collinear"));
        }
    }
    let design = design.select_columns(&keep);
    let qr = Qr::new(&design)?;
    let b = qr.solve(y);
    let resid = y - &design * &b;

    let mut coefficients = DVector::zeros(p);
    let mut refit = Vec::with_capacity(keep.len() - 1);
    for (k, &col) in keep.iter().enumerate().skip(1) {
        let j = support[col - 1];
        coefficients[j] = b[k];
        refit.push(j);
    }
    Ok(PostFit {
        coefficients,
        intercept: b[0],
        active_set: refit,
        dropped,
        rss: resid.norm_squared(),
        dof: n - keep.len(),
        warnings,
    })
}
