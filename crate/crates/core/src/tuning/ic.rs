use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{CandidateScore, TuneMethod, TuningResult};
use crate::error::{Error, Result};
use crate::solver::PathResult;

const RSS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    /// Extended BIC with penalty `ln N + 2 xi ln p`.
    Ebic { xi: f64 },
}

impl Criterion {
    pub fn ebic() -> Criterion {
        Criterion::Ebic { xi: 1.0 }
    }

    fn per_df(&self, n: usize, p: usize) -> f64 {
        let n = n as f64;
        match self {
            Criterion::Aic => 2.0,
            Criterion::Bic => n.ln(),
            Criterion::Ebic { xi } => n.ln() + 2.0 * xi * (p.max(1) as f64).ln(),
        }
    }

    fn method(&self) -> TuneMethod {
        match self {
            Criterion::Aic => TuneMethod::Aic,
            Criterion::Bic => TuneMethod::Bic,
            Criterion::Ebic { .. } => TuneMethod::Ebic,
        }
    }
}

/// Pick the path point minimizing `N ln(RSS/N) + penalty * df`, with df the
/// active-set size. Ties go to the larger lambda.
pub fn select_by_ic(
    path: &PathResult,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    criterion: Criterion,
) -> Result<TuningResult> {
    if path.points.is_empty() {
        return Err(Error::InvalidArgument("empty path".into()));
    }
    let (n, p) = x.shape();
    let per_df = criterion.per_df(n, p);
    let mut notes = Vec::new();
    let mut candidates = Vec::with_capacity(path.points.len());
    let mut best = 0usize;
    let mut best_score = f64::INFINITY;
    for (k, pt) in path.points.iter().enumerate() {
        let rss = (y - x * &pt.fit.coefficients).norm_squared();
        if rss < RSS_FLOOR {
            notes.push(format!(
                "rss {rss:e} at lambda={} floored at {RSS_FLOOR:e}",
                pt.lambda
            ));
        }
        let df = pt.fit.active_set.len();
        let score = n as f64 * (rss.max(RSS_FLOOR) / n as f64).ln() + per_df * df as f64;
        // path lambdas decrease, so only a strict improvement moves to a smaller lambda
        if score < best_score {
            best = k;
            best_score = score;
        }
        candidates.push(CandidateScore {
            lambda: pt.lambda,
            score,
            df,
        });
    }
    Ok(TuningResult {
        method: criterion.method(),
        chosen_lambda: candidates[best].lambda,
        loadings: path.loadings.clone(),
        candidates,
        iterations: 0,
        notes,
    })
}
