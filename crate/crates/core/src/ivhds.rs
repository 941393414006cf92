//! IV-lasso: lasso selection of controls and instruments, then 2SLS on the
//! selected sets.
//!
//! Step 1 selects controls for the outcome. Step 2 runs, for each
//! endogenous regressor, a lasso on the controls and the penalized
//! instruments together and splits the support into its control and
//! instrument parts. Exogenous regressors of interest get a step-2 lasso on
//! the controls as in post-double-selection. Every selected control joins
//! the exogenous block of the final 2SLS.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{
    pds_estimate, pds_select, Coefficient, HdDesign, StepTuning, TreatmentSelection,
};
use crate::inference::{double_selection, non_convergence, prepare, select_on, vcov_rows};
use crate::linalg::{hstack, independent_columns, ols, ones, residual_dof, sandwich, Block, Qr, SeMode};
use crate::tuning::TunerConfig;

#[derive(Debug, Clone)]
pub struct IvDesign {
    pub y: DVector<f64>,
    pub y_name: String,
    pub endogenous: Block,
    /// Exogenous regressors of interest.
    pub exogenous: Block,
    pub controls: Block,
    pub unpenalized: Block,
    pub aset: Block,
    /// Excluded instruments exposed to selection.
    pub instruments: Block,
    /// Excluded instruments that are always used.
    pub instruments_unpenalized: Block,
    pub intercept: bool,
    pub absorbed_dof: usize,
}

impl IvDesign {
    pub fn new(y: DVector<f64>, endogenous: Block, instruments: Block) -> IvDesign {
        let n = y.len();
        IvDesign {
            y,
            y_name: "y".into(),
            endogenous,
            exogenous: Block::empty(n),
            controls: Block::empty(n),
            unpenalized: Block::empty(n),
            aset: Block::empty(n),
            instruments,
            instruments_unpenalized: Block::empty(n),
            intercept: true,
            absorbed_dof: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// The same problem seen as post-double-selection on the exogenous
    /// regressors; used when there is nothing to instrument.
    pub fn as_pds(&self) -> HdDesign {
        HdDesign {
            y: self.y.clone(),
            y_name: self.y_name.clone(),
            treatments: self.exogenous.clone(),
            controls: self.controls.clone(),
            unpenalized: self.unpenalized.clone(),
            aset: self.aset.clone(),
            intercept: self.intercept,
            absorbed_dof: self.absorbed_dof,
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.n();
        for (what, b) in [
            ("endogenous", &self.endogenous),
            ("exogenous", &self.exogenous),
            ("controls", &self.controls),
            ("unpenalized", &self.unpenalized),
            ("aset", &self.aset),
            ("instruments", &self.instruments),
            ("unpenalized instruments", &self.instruments_unpenalized),
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
        if self.endogenous.is_empty() && self.exogenous.is_empty() {
            return Err(Error::InvalidModel("no regressor of interest".into()));
        }
        let has_instruments = !self.instruments.is_empty() || !self.instruments_unpenalized.is_empty();
        if self.endogenous.is_empty() == has_instruments {
            return Err(Error::InvalidModel(
                "endogenous regressors and excluded instruments must be given together".into(),
            ));
        }
        Ok(())
    }

    fn partial_basis(&self, blocks: &[&Block]) -> DMatrix<f64> {
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

/// How first-stage fitted values are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStage {
    /// OLS of each endogenous regressor on the selected instruments and the
    /// exogenous block; the lasso coefficients are discarded.
    #[default]
    PostLasso,
    /// The step-2 lasso fitted values, used as a single instrument per
    /// endogenous regressor.
    LassoFitted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndogenousSelection {
    pub endogenous: String,
    /// Indices into the control block.
    pub controls: Vec<usize>,
    /// Indices into the penalized instrument block.
    pub instruments: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvSelection {
    pub step1: Vec<usize>,
    /// Control sets for the exogenous regressors of interest.
    pub exogenous_step2: Vec<Vec<usize>>,
    pub endogenous_step2: Vec<EndogenousSelection>,
    /// Step-2 lasso fitted values in original units, one column per
    /// endogenous regressor.
    pub lasso_fitted: DMatrix<f64>,
    pub tuning: Vec<StepTuning>,
    pub warnings: Vec<String>,
}

impl IvSelection {
    pub fn union_controls(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .step1
            .iter()
            .chain(self.exogenous_step2.iter().flatten())
            .chain(self.endogenous_step2.iter().flat_map(|e| e.controls.iter()))
            .copied()
            .collect();
        set.into_iter().collect()
    }

    pub fn union_instruments(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .endogenous_step2
            .iter()
            .flat_map(|e| e.instruments.iter().copied())
            .collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstStageStats {
    pub endogenous: String,
    /// Instruments chosen by this regressor's step-2 lasso.
    pub selected: Vec<String>,
    /// F statistic for the excluded instruments given the exogenous block.
    pub partial_f: f64,
    pub df_num: usize,
    pub df_den: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvResult {
    /// Endogenous regressors first, then exogenous regressors of interest.
    pub treatments: Vec<String>,
    pub alpha: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub vcov: Vec<Vec<f64>>,
    pub se_mode: String,
    /// "2SLS", or "OLS" when nothing is instrumented.
    pub estimator: String,
    pub first_stage_fit: FirstStage,
    pub selected_step1: Vec<String>,
    pub selected_step2: Vec<TreatmentSelection>,
    pub selected_instruments: Vec<TreatmentSelection>,
    pub union_controls: Vec<String>,
    /// Excluded instruments used in the final 2SLS.
    pub instruments: Vec<String>,
    pub first_stage: Vec<FirstStageStats>,
    pub dropped_collinear: Vec<String>,
    pub coefficients: Vec<Coefficient>,
    pub n_used: usize,
    pub dof: usize,
    pub tuning: Vec<StepTuning>,
    pub warnings: Vec<String>,
}

/// Selection steps of IV-lasso.
pub fn iv_lasso_select(design: &IvDesign, tuner: &TunerConfig) -> Result<IvSelection> {
    design.check()?;
    let n = design.n();
    let basis = design.partial_basis(&[&design.unpenalized]);
    let prep = prepare(&design.y, &design.exogenous.values, &design.controls, &basis)?;
    let (s1, s2_exo) = double_selection(&prep, &design.y_name, &design.exogenous.names, tuner)?;
    let map_ctrl = |fit: &Option<(crate::solver::LassoFit, StepTuning)>| -> Vec<usize> {
        fit.as_ref()
            .map(|(f, _)| f.active_set.iter().map(|&j| prep.kept[j]).collect())
            .unwrap_or_default()
    };
    let step1 = map_ctrl(&s1);
    let exogenous_step2: Vec<Vec<usize>> = s2_exo.iter().map(map_ctrl).collect();
    let mut warnings = prep.warnings.clone();

    // endogenous: controls and instruments compete in one lasso, with the
    // unpenalized instruments partialled out alongside the unpenalized controls
    let n_ctrl = design.controls.len();
    let candidates = Block::concat(&[&design.controls, &design.instruments], n);
    let basis2 = design.partial_basis(&[&design.unpenalized, &design.instruments_unpenalized]);
    let prep2 = prepare(&design.y, &design.endogenous.values, &candidates, &basis2)?;
    for w in &prep2.warnings {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    let fits = (0..design.endogenous.len())
        .into_par_iter()
        .map(|k| {
            let d = prep2.d.column(k).into_owned();
            select_on(&prep2.x, &d, tuner, "step 2", &design.endogenous.names[k])
        })
        .collect::<Result<Vec<_>>>()?;

    let mut endogenous_step2 = Vec::new();
    let mut lasso_fitted = DMatrix::zeros(n, design.endogenous.len());
    for (k, fit) in fits.iter().enumerate() {
        let mut controls = Vec::new();
        let mut instruments = Vec::new();
        let d = design.endogenous.column(k);
        let d_t = prep2.d.column(k).into_owned();
        let mut fitted = &d - &d_t;
        if let Some((f, _)) = fit {
            for &j in &f.active_set {
                let c = prep2.kept[j];
                if c < n_ctrl {
                    controls.push(c);
                } else {
                    instruments.push(c - n_ctrl);
                }
            }
            fitted += &prep2.x * &f.coefficients;
        }
        lasso_fitted.set_column(k, &fitted);
        endogenous_step2.push(EndogenousSelection {
            endogenous: design.endogenous.names[k].clone(),
            controls,
            instruments,
        });
    }

    let tuning: Vec<StepTuning> = std::iter::once(s1)
        .chain(s2_exo)
        .chain(fits)
        .flatten()
        .map(|(_, t)| t)
        .collect();
    warnings.extend(non_convergence(&tuning.iter().collect::<Vec<_>>()));
    Ok(IvSelection {
        step1,
        exogenous_step2,
        endogenous_step2,
        lasso_fitted,
        tuning,
        warnings,
    })
}

/// Partial F of the excluded instruments in a regression of `d` on
/// `[z, w]`, homoskedastic form.
fn partial_f(d: &DVector<f64>, z: &DMatrix<f64>, w: &DMatrix<f64>, absorbed: usize) -> Result<(f64, usize, usize)> {
    let n = d.len();
    let rss = |m: &DMatrix<f64>| -> Result<f64> {
        if m.ncols() == 0 {
            return Ok(d.norm_squared());
        }
        let b = ols(m, d)?;
        Ok((d - m * b).norm_squared())
    };
    let full = hstack(&[z, w], n);
    let rss_u = rss(&full)?;
    let rss_r = rss(w)?;
    let q = z.ncols();
    let df_den = residual_dof(n, full.ncols(), absorbed)?;
    let f = ((rss_r - rss_u) / q as f64) / (rss_u / df_den as f64);
    Ok((f, q, df_den))
}

/// Two-stage least squares on the selected sets.
pub fn iv_estimate(
    design: &IvDesign,
    selection: &IvSelection,
    se: &SeMode,
    first_stage: FirstStage,
) -> Result<IvResult> {
    design.check()?;
    let n = design.n();
    let k_endog = design.endogenous.len();
    let k_exo = design.exogenous.len();

    for e in &selection.endogenous_step2 {
        if e.instruments.is_empty() && design.instruments_unpenalized.is_empty() {
            return Err(Error::NoInstruments(e.endogenous.clone()));
        }
    }
    let ctrl_idx = selection.union_controls();
    let selected = design.controls.select(&ctrl_idx);
    let z_sel = design.instruments.select(&selection.union_instruments());
    let z_block = Block::concat(&[&z_sel, &design.instruments_unpenalized], n);

    // exogenous block with collinear drops; regressors of interest go last so
    // that a spanned one is reported
    let one = ones(n);
    let mut w_names: Vec<String> = Vec::new();
    let mut w_mats: Vec<&DMatrix<f64>> = Vec::new();
    if design.intercept {
        w_names.push("_cons".into());
        w_mats.push(&one);
    }
    for b in [&design.unpenalized, &design.aset, &selected, &design.exogenous] {
        w_names.extend(b.names.iter().cloned());
        w_mats.push(&b.values);
    }
    let w_all = hstack(&w_mats, n);
    let with_endog = hstack(&[&w_all, &design.endogenous.values], n);
    let keep = independent_columns(&with_endog);
    let first_exo = w_all.ncols() - k_exo;
    for k in 0..k_exo + k_endog {
        if !keep.contains(&(first_exo + k)) {
            let name = if k < k_exo {
                &design.exogenous.names[k]
            } else {
                &design.endogenous.names[k - k_exo]
            };
            return Err(Error::TreatmentExplained(name.clone()));
        }
    }
    let mut dropped: Vec<String> = (0..first_exo)
        .filter(|j| !keep.contains(j))
        .map(|j| w_names[j].clone())
        .collect();
    if design.intercept && keep.first() != Some(&0) {
        return Err(Error::Singular("intercept column is degenerate".into()));
    }

    // reporting order of the exogenous block: exogenous of interest,
    // selected controls, aset, unpenalized, intercept
    let from = usize::from(design.intercept);
    let n_unpen = design.unpenalized.len();
    let n_aset = design.aset.len();
    let mut w_order: Vec<usize> = keep.iter().copied().filter(|&j| j >= from && j < w_all.ncols()).collect();
    w_order.sort_by_key(|&j| {
        let rel = j - from;
        let group = if rel < n_unpen {
            3
        } else if rel < n_unpen + n_aset {
            2
        } else if j < first_exo {
            1
        } else {
            0
        };
        (group, rel)
    });
    if design.intercept {
        w_order.push(0);
    }
    let w = w_all.select_columns(&w_order);

    // excluded instruments, dropping any spanned by the exogenous block
    let wz = hstack(&[&w, &z_block.values], n);
    let zkeep: Vec<usize> = independent_columns(&wz)
        .into_iter()
        .filter(|&j| j >= w.ncols())
        .map(|j| j - w.ncols())
        .collect();
    for j in 0..z_block.len() {
        if !zkeep.contains(&j) {
            dropped.push(z_block.names[j].clone());
        }
    }
    let z = z_block.select(&zkeep);
    if z.len() < k_endog {
        return Err(Error::Underidentified {
            instruments: z.len(),
            endogenous: k_endog,
        });
    }

    let x = hstack(&[&design.endogenous.values, &w], n);
    let k = x.ncols();
    let dof = residual_dof(n, k, design.absorbed_dof)?;
    let zw = hstack(&[&z.values, &w], n);
    let (beta, bread, scores) = match first_stage {
        FirstStage::PostLasso => {
            let qz = Qr::new(&zw)?;
            let mut xhat = x.clone();
            for j in 0..k_endog {
                let d = design.endogenous.column(j);
                xhat.set_column(j, &qz.fitted(&d));
            }
            let qx = Qr::new(&xhat)?;
            (qx.solve(&design.y), qx.xtx_inverse(), xhat)
        }
        FirstStage::LassoFitted => {
            let inst = hstack(&[&selection.lasso_fitted, &w], n);
            let a = inst.tr_mul(&x);
            let lu = a.clone().lu();
            let inv = lu
                .try_inverse()
                .ok_or_else(|| Error::Singular("lasso-fitted first stage is singular".into()))?;
            let beta = &inv * inst.tr_mul(&design.y);
            (beta, inv, inst)
        }
    };
    let resid = &design.y - &x * &beta;
    let vcov = sandwich(&bread, &scores, &resid, se, dof)?;

    let mut stats = Vec::new();
    for (j, e) in selection.endogenous_step2.iter().enumerate() {
        let d = design.endogenous.column(j);
        let (f, q, df) = partial_f(&d, &z.values, &w, design.absorbed_dof)?;
        stats.push(FirstStageStats {
            endogenous: e.endogenous.clone(),
            selected: e.instruments.iter().map(|&i| design.instruments.names[i].clone()).collect(),
            partial_f: f,
            df_num: q,
            df_den: df,
        });
    }

    let mut names: Vec<String> = design.endogenous.names.clone();
    names.extend(w_order.iter().map(|&j| w_names[j].clone()));
    let k_int = k_endog + k_exo;
    let coefficients = names
        .iter()
        .enumerate()
        .map(|(i, nm)| Coefficient {
            name: nm.clone(),
            estimate: beta[i],
            std_error: vcov[(i, i)].max(0.0).sqrt(),
        })
        .collect();
    let ctrl_names = |idx: &[usize]| -> Vec<String> {
        idx.iter().map(|&j| design.controls.names[j].clone()).collect()
    };
    let mut selected_step2: Vec<TreatmentSelection> = design
        .exogenous
        .names
        .iter()
        .zip(&selection.exogenous_step2)
        .map(|(t, s)| TreatmentSelection {
            treatment: t.clone(),
            controls: ctrl_names(s),
        })
        .collect();
    selected_step2.extend(selection.endogenous_step2.iter().map(|e| TreatmentSelection {
        treatment: e.endogenous.clone(),
        controls: ctrl_names(&e.controls),
    }));
    let mut union_controls = selected.names.clone();
    union_controls.extend(design.aset.names.iter().cloned());
    union_controls.extend(design.unpenalized.names.iter().cloned());
    let mut warnings = selection.warnings.clone();
    warnings.extend(
        dropped
            .iter()
            .map(|d| format!("column {d:?} dropped from the final regression as collinear")),
    );

    Ok(IvResult {
        treatments: names[..k_int].to_vec(),
        alpha: (0..k_int).map(|i| beta[i]).collect(),
        std_errors: (0..k_int).map(|i| vcov[(i, i)].max(0.0).sqrt()).collect(),
        vcov: vcov_rows(&vcov, k_int),
        se_mode: se.name().into(),
        estimator: "2SLS".into(),
        first_stage_fit: first_stage,
        selected_step1: ctrl_names(&selection.step1),
        selected_step2,
        selected_instruments: selection
            .endogenous_step2
            .iter()
            .map(|e| TreatmentSelection {
                treatment: e.endogenous.clone(),
                controls: e.instruments.iter().map(|&i| design.instruments.names[i].clone()).collect(),
            })
            .collect(),
        union_controls,
        instruments: z.names,
        first_stage: stats,
        dropped_collinear: dropped,
        coefficients,
        n_used: n,
        dof,
        tuning: selection.tuning.clone(),
        warnings,
    })
}

/// Full IV-lasso pipeline. Without endogenous regressors the problem is
/// handed to post-double-selection and reported as OLS.
pub fn iv_lasso(
    design: &IvDesign,
    tuner: &TunerConfig,
    se: &SeMode,
    first_stage: FirstStage,
) -> Result<IvResult> {
    design.check()?;
    if design.endogenous.is_empty() {
        let pds = design.as_pds();
        let sel = pds_select(&pds, tuner)?;
        let r = pds_estimate(&pds, &sel, se)?;
        return Ok(IvResult {
            treatments: r.treatments,
            alpha: r.alpha,
            std_errors: r.std_errors,
            vcov: r.vcov,
            se_mode: r.se_mode,
            estimator: "OLS".into(),
            first_stage_fit: first_stage,
            selected_step1: r.selected_step1,
            selected_step2: r.selected_step2,
            selected_instruments: vec![],
            union_controls: r.union_controls,
            instruments: vec![],
            first_stage: vec![],
            dropped_collinear: r.dropped_collinear,
            coefficients: r.coefficients,
            n_used: r.n_used,
            dof: r.dof,
            tuning: r.tuning,
            warnings: r.warnings,
        });
    }
    let sel = iv_lasso_select(design, tuner)?;
    iv_estimate(design, &sel, se, first_stage)
}
