use std::io::Write;
use std::path::Path;

use hdselect_core::inference::StepTuning;
use hdselect_core::ivhds::FirstStageStats;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub estimator: String,
    pub dependent: String,
    pub n_used: usize,
    pub n_dropped_missing: usize,
    pub panel: Option<PanelInfo>,
    pub se_mode: Option<String>,
    pub dof: Option<usize>,
    pub coefficients: Vec<CoefRow>,
    pub intercept: Option<f64>,
    pub steps: Vec<StepReport>,
    pub union_controls: Vec<String>,
    pub instruments: Vec<String>,
    pub dropped_collinear: Vec<String>,
    pub first_stage: Vec<FirstStageStats>,
    pub path: Option<PathReport>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelInfo {
    pub method: String,
    pub panel: String,
    pub groups: usize,
    pub rows_before: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub t: Option<f64>,
    pub p_value: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    /// Post-lasso OLS estimate (lasso command only).
    pub post_estimate: Option<f64>,
}

impl CoefRow {
    pub fn point(name: impl Into<String>, estimate: f64) -> CoefRow {
        CoefRow {
            name: name.into(),
            estimate,
            std_error: None,
            t: None,
            p_value: None,
            ci_lower: None,
            ci_upper: None,
            post_estimate: None,
        }
    }

    /// Normal-theory t statistic, two-sided p-value and 95% interval.
    pub fn inferential(name: impl Into<String>, estimate: f64, se: f64) -> CoefRow {
        let normal = Normal::standard();
        let z = normal.inverse_cdf(0.975);
        let t = estimate / se;
        CoefRow {
            name: name.into(),
            estimate,
            std_error: Some(se),
            t: Some(t),
            p_value: Some(2.0 * (1.0 - normal.cdf(t.abs()))),
            ci_lower: Some(estimate - z * se),
            ci_upper: Some(estimate + z * se),
            post_estimate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub step: String,
    pub target: String,
    pub selected: Vec<String>,
    /// Sparsity index of the step's lasso fit.
    pub s: usize,
    pub method: String,
    pub lambda: f64,
    pub loadings: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl StepReport {
    pub fn from_tuning(t: &StepTuning, selected: Vec<String>) -> StepReport {
        StepReport {
            step: t.step.clone(),
            target: t.target.clone(),
            s: selected.len(),
            selected,
            method: method_name(&t.tuning.method),
            lambda: t.lambda,
            loadings: t.tuning.loadings.clone(),
            iterations: t.iterations,
            converged: t.converged,
        }
    }
}

pub fn method_name<T: Serialize>(m: &T) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    /// Penalized columns, in the order of each point's coefficients.
    pub names: Vec<String>,
    pub points: Vec<PathPointReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPointReport {
    pub lambda: f64,
    pub s: usize,
    pub l1_norm: f64,
    /// Original-unit coefficients.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(config: &RunConfig) -> Provenance {
        Provenance {
            tool: "hdselect".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            config: config.clone(),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Tsv => {
            let mut s = String::from("name\testimate\tstd_error\tt\tp_value\tci_lower\tci_upper\n");
            for c in &report.coefficients {
                s.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    c.name,
                    c.estimate,
                    cell(c.std_error),
                    cell(c.t),
                    cell(c.p_value),
                    cell(c.ci_lower),
                    cell(c.ci_upper)
                ));
            }
            s
        }
    }
}

/// Write through a temporary file in the target directory and rename it
/// into place, so readers never see a partial report.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let err = |source| CliError::Output {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}
