//! Treatment effects with many candidate controls: post-double-selection
//! (lasso of the outcome and of each treatment on the controls, then OLS on
//! the union) and partialling-out on lasso or post-lasso residuals.
//!
//! Unpenalized controls and the intercept are partialled out of every
//! variable before the selection lassos and re-enter the final regression.
//! Amelioration-set columns skip selection and join only the final
//! regression.

mod chs;
mod pds;

pub use chs::{chs_estimate, ChsResult, ChsVariant};
pub use pds::{pds_estimate, pds_select, PdsResult, Selection};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::standardize::moments;
use crate::error::{Error, Result};
use crate::linalg::{hstack, ones, partial_out, partial_out_vec, Block};
use crate::solver::LassoFit;
use crate::tuning::{tune_and_fit, TunerConfig, TuningResult};

/// Variables of a treatment-effect problem, in original units.
#[derive(Debug, Clone)]
pub struct HdDesign {
    pub y: DVector<f64>,
    pub y_name: String,
    /// Regressors of interest; never penalized.
    pub treatments: Block,
    /// Candidate controls exposed to selection.
    pub controls: Block,
    /// Controls that are always included and partialled out before selection.
    pub unpenalized: Block,
    /// Columns forced into the final regression only.
    pub aset: Block,
    /// False after a within transformation.
    pub intercept: bool,
    /// Parameters absorbed before estimation, e.g. the number of fixed-effect groups.
    pub absorbed_dof: usize,
}

impl HdDesign {
    pub fn new(y: DVector<f64>, treatments: Block, controls: Block) -> HdDesign {
        let n = y.len();
        HdDesign {
            y,
            y_name: "y".into(),
            treatments,
            controls,
            unpenalized: Block::empty(n),
            aset: Block::empty(n),
            intercept: true,
            absorbed_dof: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.n();
        for (what, b) in [
            ("treatments", &self.treatments),
            ("controls", &self.controls),
            ("unpenalized", &self.unpenalized),
            ("aset", &self.aset),
        ] {
            if b.nrows() != n {
                return Err(Error::Dimension(format!("{what} have {} rows, expected {n}", b.nrows())));
            }
            if b.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(what.into()));
            }
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(self.y_name.clone()));
        }
        if self.treatments.is_empty() {
            return Err(Error::InvalidModel("no regressor of interest".into()));
        }
        Ok(())
    }

    /// Intercept column (when present) followed by the given blocks.
    pub(crate) fn partial_basis(&self, blocks: &[&Block]) -> DMatrix<f64> {
        let n = self.n();
        let one = ones(n);
        let mut mats: Vec<&DMatrix<f64>> = Vec::new();
        if self.intercept {
            mats.push(&one);
        }
        mats.extend(blocks.iter().map(|b| &b.values));
        hstack(&mats, n)
    }
}

/// Penalty and fit diagnostics of one selection lasso.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTuning {
    pub step: String,
    pub target: String,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tuning: TuningResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreatmentSelection {
    pub treatment: String,
    pub controls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
}

/// Controls after partialling and standardization, ready for selection.
pub(crate) struct Prepared {
    pub y: DVector<f64>,
    pub d: DMatrix<f64>,
    /// Standardized partialled controls, one column per entry of `kept`.
    pub x: DMatrix<f64>,
    /// Indices into the control block.
    pub kept: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Partial `basis` out of y, the treatments and the controls, then scale
/// every control to unit mean square. Constant controls are an error;
/// controls with nothing left after partialling are skipped with a warning.
pub(crate) fn prepare(
    y: &DVector<f64>,
    d: &DMatrix<f64>,
    controls: &Block,
    basis: &DMatrix<f64>,
) -> Result<Prepared> {
    let n = y.len();
    for j in 0..controls.len() {
        let (m, sd) = moments(controls.values.column(j).as_slice());
        if sd <= 1e-14 * m.abs().max(1.0) {
            return Err(Error::ZeroScale(controls.names[j].clone()));
        }
    }
    let y_t = partial_out_vec(basis, y)?;
    let d_t = partial_out(basis, d)?;
    let x_t = partial_out(basis, &controls.values)?;
    let mut kept = Vec::new();
    let mut warnings = Vec::new();
    let mut cols = Vec::new();
    for j in 0..controls.len() {
        let raw = controls.values.column(j).norm();
        let col = x_t.column(j);
        let rms = (col.norm_squared() / n as f64).sqrt();
        if col.norm() <= 1e-10 * raw {
            warnings.push(format!(
                "control {:?} is spanned by the unpenalized columns and was not offered to the lasso",
                controls.names[j]
            ));
            continue;
        }
        cols.push(col.into_owned() / rms);
        kept.push(j);
    }
    let x = if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    Ok(Prepared {
        y: y_t,
        d: d_t,
        x,
        kept,
        warnings,
    })
}

/// Lasso of `target` on the prepared controls at the tuned penalty.
pub(crate) fn select_on(
    x: &DMatrix<f64>,
    target: &DVector<f64>,
    tuner: &TunerConfig,
    step: &str,
    target_name: &str,
) -> Result<Option<(LassoFit, StepTuning)>> {
    if x.ncols() == 0 {
        return Ok(None);
    }
    let label = format!("{step} ({target_name})");
    let (fit, tr) = tune_and_fit(x, target, tuner).map_err(|e| e.in_step(label))?;
    let st = StepTuning {
        step: step.into(),
        target: target_name.into(),
        lambda: tr.chosen_lambda,
        iterations: fit.iterations,
        converged: fit.converged,
        tuning: tr,
    };
    Ok(Some((fit, st)))
}

/// Selection lassos for the outcome and each treatment; the treatment fits
/// run concurrently and are collected in treatment order.
pub(crate) fn double_selection(
    prep: &Prepared,
    y_name: &str,
    treatment_names: &[String],
    tuner: &TunerConfig,
) -> Result<(Option<(LassoFit, StepTuning)>, Vec<Option<(LassoFit, StepTuning)>>)> {
    let step1 = select_on(&prep.x, &prep.y, tuner, "step 1", y_name)?;
    let step2 = (0..prep.d.ncols())
        .into_par_iter()
        .map(|k| {
            let d = prep.d.column(k).into_owned();
            select_on(&prep.x, &d, tuner, "step 2", &treatment_names[k])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((step1, step2))
}

pub(crate) fn non_convergence(steps: &[&StepTuning]) -> Vec<String> {
    steps
        .iter()
        .filter(|s| !s.converged)
        .map(|s| format!("{} lasso for {} did not converge", s.step, s.target))
        .collect()
}

pub(crate) fn vcov_rows(v: &DMatrix<f64>, k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|i| (0..k).map(|j| v[(i, j)]).collect()).collect()
}
