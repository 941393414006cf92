//! Penalty-level selection: information criteria along a path, K-fold
//! cross-validation, and the iterated plug-in ("rigorous") rule with iid,
//! heteroskedasticity-robust or cluster-robust loadings.

mod cv;
mod ic;
mod rigorous;

pub use cv::{fold_assignment, kfold_cv};
pub use ic::{select_by_ic, Criterion};
pub use rigorous::{plug_in_lambda, rigorous_lambda, LoadingMode, RigorousOptions};


use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::solver::{fit_lasso, regularization_path, FitOptions, LassoFit, PathGrid, PenaltyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneMethod {
    Aic,
    Bic,
    Ebic,
    Cv,
    Rigorous,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub lambda: f64,
    /// Information criterion value or mean cross-validated squared error.
    pub score: f64,
    /// Active-set size of the full-data fit (IC only; CV reports 0).
    pub df: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningResult {
    pub method: TuneMethod,
    pub chosen_lambda: f64,
    pub loadings: Vec<f64>,
    /// Per-candidate scores (IC) or the CV curve; empty for plug-in rules.
    pub candidates: Vec<CandidateScore>,
    /// Loading-update rounds for the plug-in rule.
    pub iterations: usize,
    pub notes: Vec<String>,
}

/// How a selection step picks its penalty.
#[derive(Debug, Clone, PartialEq)]
pub enum Tuner {
    Rigorous(RigorousOptions),
    Ic {
        criterion: Criterion,
        grid: PathGrid,
    },
    Cv {
        folds: usize,
        seed: u64,
        grid: PathGrid,
    },
    /// Fixed lambda with unit loadings.
    Fixed(f64),
}

impl Default for Tuner {
    fn default() -> Self {
        Tuner::Rigorous(RigorousOptions::default())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TunerConfig {
    pub tuner: Tuner,
    pub fit: FitOptions,
}

/// Tune the penalty on a standardized design with centered response and
/// return the lasso fit at the chosen penalty.
pub fn tune_and_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &TunerConfig,
) -> Result<(LassoFit, TuningResult)> {
    let p = x.ncols();
    match &config.tuner {
        Tuner::Rigorous(opts) => {
            let tr = rigorous_lambda(x, y, opts, &config.fit)?;
            let pen = PenaltyConfig::new(tr.chosen_lambda, tr.loadings.clone())?;
            let fit = fit_lasso(x, y, &pen, &config.fit)?;
            Ok((fit, tr))
        }
        Tuner::Ic { criterion, grid } => {
            let ones = vec![1.0; p];
            let path = regularization_path(x, y, &ones, grid, &config.fit)?;
            let tr = select_by_ic(&path, x, y, *criterion)?;
            let fit = path
                .points
                .iter()
                .find(|pt| pt.lambda == tr.chosen_lambda)
                .expect("chosen lambda is on the path")
                .fit
                .clone();
            Ok((fit, tr))
        }
        Tuner::Cv { folds, seed, grid } => {
            let ones = vec![1.0; p];
            let tr = kfold_cv(x, y, &ones, grid, *folds, *seed, &config.fit)?;
            let pen = PenaltyConfig::new(tr.chosen_lambda, ones)?;
            let fit = fit_lasso(x, y, &pen, &config.fit)?;
            Ok((fit, tr))
        }
        Tuner::Fixed(lambda) => {
            let pen = PenaltyConfig::uniform(*lambda, p)?;
            let fit = fit_lasso(x, y, &pen, &config.fit)?;
            let tr = TuningResult {
                method: TuneMethod::Fixed,
                chosen_lambda: *lambda,
                loadings: pen.loadings,
                candidates: vec![],
                iterations: 0,
                notes: vec![],
            };
            Ok((fit, tr))
        }
    }
}
