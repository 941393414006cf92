use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    double_selection, non_convergence, prepare, vcov_rows, Coefficient, HdDesign, StepTuning,
    TreatmentSelection,
};
use crate::error::{Error, Result};
use crate::linalg::{hstack, independent_columns, ols_fit, ones, SeMode};
use crate::tuning::TunerConfig;

/// Controls picked by the two selection steps, as indices into the control block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub step1: Vec<usize>,
    /// One set per treatment, in treatment order.
    pub step2: Vec<Vec<usize>>,
    pub tuning: Vec<StepTuning>,
    pub warnings: Vec<String>,
}

impl Selection {
    /// Sorted union of every selected control.
    pub fn union(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .step1
            .iter()
            .chain(self.step2.iter().flatten())
            .copied()
            .collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdsResult {
    pub treatments: Vec<String>,
    pub alpha: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub vcov: Vec<Vec<f64>>,
    pub se_mode: String,
    pub selected_step1: Vec<String>,
    pub selected_step2: Vec<TreatmentSelection>,
    /// Selected controls, then the amelioration set, then unpenalized controls.
    pub union_controls: Vec<String>,
    /// Union members left out of the final regression as collinear.
    pub dropped_collinear: Vec<String>,
    /// Every coefficient of the final regression, treatments first.
    pub coefficients: Vec<Coefficient>,
    pub n_used: usize,
    pub dof: usize,
    pub tuning: Vec<StepTuning>,
    pub warnings: Vec<String>,
}

/// Lasso of the outcome on the controls (step 1) and of each treatment on
/// the controls (step 2), after partialling out the intercept and the
/// unpenalized controls.
pub fn pds_select(design: &HdDesign, tuner: &TunerConfig) -> Result<Selection> {
    design.check()?;
    let basis = design.partial_basis(&[&design.unpenalized]);
    let prep = prepare(&design.y, &design.treatments.values, &design.controls, &basis)?;
    let (s1, s2) = double_selection(&prep, &design.y_name, &design.treatments.names, tuner)?;
    let map = |fit: &Option<(crate::solver::LassoFit, StepTuning)>| -> Vec<usize> {
        fit.as_ref()
            .map(|(f, _)| f.active_set.iter().map(|&j| prep.kept[j]).collect())
            .unwrap_or_default()
    };
    let step1 = map(&s1);
    let step2: Vec<Vec<usize>> = s2.iter().map(map).collect();
    let tuning: Vec<StepTuning> = std::iter::once(s1)
        .chain(s2)
        .flatten()
        .map(|(_, t)| t)
        .collect();
    let mut warnings = prep.warnings;
    warnings.extend(non_convergence(&tuning.iter().collect::<Vec<_>>()));
    Ok(Selection {
        step1,
        step2,
        tuning,
        warnings,
    })
}

/// Final OLS of y on the treatments, the union of selected controls, the
/// amelioration set, the unpenalized controls and the intercept.
pub fn pds_estimate(design: &HdDesign, selection: &Selection, se: &SeMode) -> Result<PdsResult> {
    design.check()?;
    let n = design.n();
    let k_d = design.treatments.len();
    if selection.step2.len() != k_d {
        return Err(Error::Dimension(format!(
            "{} step-2 selections for {k_d} treatments",
            selection.step2.len()
        )));
    }
    let union = selection.union();
    let selected = design.controls.select(&union);

    // Collinearity is resolved with the treatments last so that a treatment
    // spanned by the controls is reported rather than silently kept.
    let one = ones(n);
    let mut names: Vec<String> = Vec::new();
    let mut mats: Vec<&DMatrix<f64>> = Vec::new();
    if design.intercept {
        names.push("_cons".into());
        mats.push(&one);
    }
    for b in [&design.unpenalized, &design.aset, &selected, &design.treatments] {
        names.extend(b.names.iter().cloned());
        mats.push(&b.values);
    }
    let full = hstack(&mats, n);
    let keep = independent_columns(&full);
    let first_treatment = full.ncols() - k_d;
    for k in 0..k_d {
        if !keep.contains(&(first_treatment + k)) {
            return Err(Error::TreatmentExplained(design.treatments.names[k].clone()));
        }
    }
    let dropped: Vec<String> = (0..first_treatment)
        .filter(|j| !keep.contains(j))
        .map(|j| names[j].clone())
        .collect();
    if design.intercept && keep.first() != Some(&0) {
        return Err(Error::Singular("intercept column is degenerate".into()));
    }

    // reorder: treatments, selected, aset, unpenalized, intercept
    let mut order: Vec<usize> = (first_treatment..full.ncols()).collect();
    let controls_from = usize::from(design.intercept);
    let mut ctrl: Vec<usize> = keep
        .iter()
        .copied()
        .filter(|&j| j >= controls_from && j < first_treatment)
        .collect();
    let n_unpen = design.unpenalized.len();
    let n_aset = design.aset.len();
    ctrl.sort_by_key(|&j| {
        let rel = j - controls_from;
        if rel < n_unpen {
            (2, rel)
        } else if rel < n_unpen + n_aset {
            (1, rel)
        } else {
            (0, rel)
        }
    });
    order.extend(ctrl);
    if design.intercept {
        order.push(0);
    }
    let x = full.select_columns(&order);
    let fit = ols_fit(&x, &design.y, se, design.absorbed_dof)?;

    let coefficients: Vec<Coefficient> = order
        .iter()
        .enumerate()
        .map(|(i, &j)| Coefficient {
            name: names[j].clone(),
            estimate: fit.coefficients[i],
            std_error: fit.vcov[(i, i)].max(0.0).sqrt(),
        })
        .collect();
    let names_of = |idx: &[usize]| -> Vec<String> {
        idx.iter().map(|&j| design.controls.names[j].clone()).collect()
    };
    let mut union_controls = selected.names.clone();
    union_controls.extend(design.aset.names.iter().cloned());
    union_controls.extend(design.unpenalized.names.iter().cloned());
    let mut warnings = selection.warnings.clone();
    warnings.extend(
        dropped
            .iter()
            .map(|d| format!("column {d:?} dropped from the final regression as collinear")),
    );

    Ok(PdsResult {
        treatments: design.treatments.names.clone(),
        alpha: (0..k_d).map(|k| fit.coefficients[k]).collect(),
        std_errors: (0..k_d).map(|k| fit.vcov[(k, k)].max(0.0).sqrt()).collect(),
        vcov: vcov_rows(&fit.vcov, k_d),
        se_mode: se.name().into(),
        selected_step1: names_of(&selection.step1),
        selected_step2: design
            .treatments
            .names
            .iter()
            .zip(&selection.step2)
            .map(|(t, s)| TreatmentSelection {
                treatment: t.clone(),
                controls: names_of(s),
            })
            .collect(),
        union_controls,
        dropped_collinear: dropped,
        coefficients,
        n_used: n,
        dof: fit.dof,
        tuning: selection.tuning.clone(),
        warnings,
    })
}
