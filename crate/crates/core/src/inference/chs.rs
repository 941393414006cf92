use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{
    double_selection, non_convergence, prepare, vcov_rows, HdDesign, StepTuning,
    TreatmentSelection,
};
use crate::error::{Error, Result};
use crate::linalg::{independent_columns, ols_fit, SeMode};
use crate::postsel::post_lasso_ols;
use crate::solver::LassoFit;
use crate::tuning::TunerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChsVariant {
    /// Residuals from the lasso fits.
    LassoOrthogonalized,
    /// Residuals from OLS refits on each lasso's support.
    #[default]
    PostLassoOrthogonalized,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChsResult {
    pub treatments: Vec<String>,
    pub alpha: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub vcov: Vec<Vec<f64>>,
    pub se_mode: String,
    pub variant: ChsVariant,
    pub selected_step1: Vec<String>,
    pub selected_step2: Vec<TreatmentSelection>,
    pub union_controls: Vec<String>,
    pub n_used: usize,
    pub dof: usize,
    pub tuning: Vec<StepTuning>,
    pub warnings: Vec<String>,
}

fn residualize(
    x: &DMatrix<f64>,
    target: &DVector<f64>,
    fit: Option<&LassoFit>,
    variant: ChsVariant,
) -> Result<DVector<f64>> {
    let Some(fit) = fit else {
        return Ok(target.clone());
    };
    match variant {
        ChsVariant::LassoOrthogonalized => Ok(target - x * &fit.coefficients),
        ChsVariant::PostLassoOrthogonalized => {
            let post = post_lasso_ols(x, target, &fit.active_set, &[])?;
            Ok(target - post.fitted(x))
        }
    }
}

/// Partialling-out estimator: residualize the outcome and every treatment
/// on the selected controls, then regress residual on residual.
///
/// The amelioration set and unpenalized controls are partialled out with
/// the intercept before selection. Residual degrees of freedom subtract
/// the partialled columns but not the selected controls.
pub fn chs_estimate(
    design: &HdDesign,
    variant: ChsVariant,
    tuner: &TunerConfig,
    se: &SeMode,
) -> Result<ChsResult> {
    design.check()?;
    let n = design.n();
    let k_d = design.treatments.len();
    let basis = design.partial_basis(&[&design.unpenalized, &design.aset]);
    let prep = prepare(&design.y, &design.treatments.values, &design.controls, &basis)?;
    let (s1, s2) = double_selection(&prep, &design.y_name, &design.treatments.names, tuner)?;

    let y_res = residualize(&prep.x, &prep.y, s1.as_ref().map(|(f, _)| f), variant)
        .map_err(|e| e.in_step(format!("step 1 ({})", design.y_name)))?;
    let mut d_res = DMatrix::zeros(n, k_d);
    for k in 0..k_d {
        let name = &design.treatments.names[k];
        let d = prep.d.column(k).into_owned();
        let r = residualize(&prep.x, &d, s2[k].as_ref().map(|(f, _)| f), variant)
            .map_err(|e| e.in_step(format!("step 2 ({name})")))?;
        if r.norm() < 1e-10 * design.treatments.values.column(k).norm() {
            return Err(Error::TreatmentExplained(name.clone()));
        }
        d_res.set_column(k, &r);
    }
    if independent_columns(&d_res).len() < k_d {
        return Err(Error::TreatmentExplained(
            "treatment residuals are collinear".into(),
        ));
    }

    let partialled = if basis.ncols() == 0 {
        0
    } else {
        independent_columns(&basis).len()
    };
    let fit = ols_fit(&d_res, &y_res, se, partialled + design.absorbed_dof)?;

    let to_names = |fit: &Option<(LassoFit, StepTuning)>| -> Vec<String> {
        fit.as_ref()
            .map(|(f, _)| {
                f.active_set
                    .iter()
                    .map(|&j| design.controls.names[prep.kept[j]].clone())
                    .collect()
            })
            .unwrap_or_default()
    };
    let selected_step1 = to_names(&s1);
    let selected_step2: Vec<TreatmentSelection> = design
        .treatments
        .names
        .iter()
        .zip(&s2)
        .map(|(t, f)| TreatmentSelection {
            treatment: t.clone(),
            controls: to_names(f),
        })
        .collect();
    let union_idx: BTreeSet<usize> = std::iter::once(&s1)
        .chain(s2.iter())
        .flatten()
        .flat_map(|(f, _)| f.active_set.iter().map(|&j| prep.kept[j]))
        .collect();
    let mut union_controls: Vec<String> = union_idx
        .iter()
        .map(|&j| design.controls.names[j].clone())
        .collect();
    union_controls.extend(design.aset.names.iter().cloned());
    union_controls.extend(design.unpenalized.names.iter().cloned());

    let tuning: Vec<StepTuning> = std::iter::once(s1).chain(s2).flatten().map(|(_, t)| t).collect();
    let mut warnings = prep.warnings;
    warnings.extend(non_convergence(&tuning.iter().collect::<Vec<_>>()));

    Ok(ChsResult {
        treatments: design.treatments.names.clone(),
        alpha: fit.coefficients.iter().copied().collect(),
        std_errors: (0..k_d).map(|k| fit.vcov[(k, k)].max(0.0).sqrt()).collect(),
        vcov: vcov_rows(&fit.vcov, k_d),
        se_mode: se.name().into(),
        variant,
        selected_step1,
        selected_step2,
        union_controls,
        n_used: n,
        dof: fit.dof,
        tuning,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Block;

    #[test]
    fn no_controls_gives_simple_slope_for_both_variants() {
        let d = vec![1.0, 2.0, 3.0, 4.0, 6.0];
        let y = DVector::from_vec(vec![2.0, 2.5, 4.1, 4.0, 7.0]);
        let tb = Block::new(vec!["d".into()], DMatrix::from_vec(5, 1, d.clone())).unwrap();
        let design = HdDesign::new(y.clone(), tb, Block::empty(5));
        let dm = d.iter().sum::<f64>() / 5.0;
        let ym = y.mean();
        let sxy: f64 = d.iter().zip(y.iter()).map(|(a, b)| (a - dm) * (b - ym)).sum();
        let sxx: f64 = d.iter().map(|a| (a - dm).powi(2)).sum();
        for v in [ChsVariant::LassoOrthogonalized, ChsVariant::PostLassoOrthogonalized] {
            let r = chs_estimate(&design, v, &TunerConfig::default(), &SeMode::Iid).unwrap();
            assert!((r.alpha[0] - sxy / sxx).abs() < 1e-12);
            assert_eq!(r.dof, 3);
        }
    }
}
