use nalgebra::{DMatrix, DVector};

use super::{check_finite, PenaltyConfig};
use crate::error::{Error, Result};

/// Ridge coefficients from the normal equations
/// `(X'X + lambda * diag(psi)) b = X'y`.
pub fn fit_ridge(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &PenaltyConfig,
) -> Result<DVector<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("design has {n} rows, response {}", y.len())));
    }
    penalty.check_len(p)?;
    check_finite("design matrix", x.iter().copied())?;
    check_finite("response", y.iter().copied())?;
    let mut a = x.tr_mul(x);
    for j in 0..p {
        a[(j, j)] += penalty.lambda * penalty.loadings[j];
    }
    let rhs = x.tr_mul(y);
    match a.cholesky() {
        Some(ch) => Ok(ch.solve(&rhs)),
        None if p >= n || penalty.lambda == 0.0 => Err(Error::Singular(
            "ridge system is singular; use lambda > 0 with positive loadings".into(),
        )),
        None => Err(Error::Singular("ridge system is singular".into())),
    }
}
