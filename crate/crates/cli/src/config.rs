use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Lasso,
    Ridge,
    Path,
    Pds,
    Chs,
    Ivlasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PostMethod {
    Pds,
    ChsLasso,
    ChsPost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TuneChoice {
    #[default]
    Rigorous,
    Cv,
    Aic,
    Bic,
    Ebic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FirstStageChoice {
    #[default]
    PostLasso,
    Lasso,
}

/// Everything one invocation needs. Parsed from the command line or built
/// directly by library callers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub data: PathBuf,
    pub model: String,
    pub pnotpen: Vec<String>,
    pub aset: Vec<String>,
    pub partial: Vec<String>,
    /// Categorical columns expanded into one dummy per level before the
    /// model is resolved.
    pub dummies: Vec<String>,
    pub robust: bool,
    pub cluster: Option<String>,
    pub fe: bool,
    pub fd: bool,
    pub allow_gaps: bool,
    pub panel: Option<String>,
    pub time: Option<String>,
    pub post: Option<PostMethod>,
    pub first_stage: FirstStageChoice,
    pub tune: TuneChoice,
    pub lambda: Option<f64>,
    pub folds: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    pub full: bool,
}

impl RunConfig {
    pub fn new(command: Command, data: impl Into<PathBuf>, model: impl Into<String>) -> RunConfig {
        RunConfig {
            command,
            data: data.into(),
            model: model.into(),
            pnotpen: vec![],
            aset: vec![],
            partial: vec![],
            dummies: vec![],
            robust: false,
            cluster: None,
            fe: false,
            fd: false,
            allow_gaps: false,
            panel: None,
            time: None,
            post: None,
            first_stage: FirstStageChoice::PostLasso,
            tune: TuneChoice::Rigorous,
            lambda: None,
            folds: 10,
            seed: 42,
            out: None,
            format: Format::Json,
            full: false,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hdselect", version, about = "Sparse high-dimensional regression and post-selection inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Lasso fit at a tuned or fixed penalty
    Lasso(RunArgs),
    /// Ridge fit at a fixed penalty
    Ridge(RunArgs),
    /// Lasso regularization path
    Path(RunArgs),
    /// Post-double-selection inference
    Pds(RunArgs),
    /// Partialling-out inference on lasso residuals
    Chs(RunArgs),
    /// Instrument and control selection followed by 2SLS
    Ivlasso(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Input CSV file with a header row
    #[arg(long)]
    pub data: PathBuf,
    /// Model string, e.g. "y d (c1-c50)" or "y (d = z*) (c*)"
    #[arg(long)]
    pub model: String,
    /// Controls kept unpenalized (partialled out before selection)
    #[arg(long, num_args = 1..)]
    pub pnotpen: Vec<String>,
    /// Controls added to the final regression without selection
    #[arg(long, num_args = 1..)]
    pub aset: Vec<String>,
    /// Controls partialled out before selection
    #[arg(long, num_args = 1..)]
    pub partial: Vec<String>,
    /// Categorical columns to expand into dummies
    #[arg(long, num_args = 1..)]
    pub dummies: Vec<String>,
    /// Heteroskedasticity-robust standard errors
    #[arg(long)]
    pub robust: bool,
    /// Cluster-robust standard errors and loadings by this column
    #[arg(long)]
    pub cluster: Option<String>,
    /// Within (fixed-effects) transformation by --panel
    #[arg(long)]
    pub fe: bool,
    /// First differences by --panel along --time
    #[arg(long)]
    pub fd: bool,
    /// Difference across gaps in the time index
    #[arg(long)]
    pub allow_gaps: bool,
    #[arg(long)]
    pub panel: Option<String>,
    #[arg(long)]
    pub time: Option<String>,
    /// Final-stage estimator for pds/chs
    #[arg(long, value_enum)]
    pub post: Option<PostMethod>,
    /// First-stage fitted values for ivlasso
    #[arg(long, value_enum, default_value_t)]
    pub first_stage: FirstStageChoice,
    #[arg(long, value_enum, default_value_t)]
    pub tune: TuneChoice,
    /// Fixed penalty level; overrides --tune
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Folds for --tune cv
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output file (written atomically); stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Include nuisance coefficients in the report
    #[arg(long)]
    pub full: bool,
}

impl Sub {
    pub fn into_config(self) -> RunConfig {
        let (command, a) = match self {
            Sub::Lasso(a) => (Command::Lasso, a),
            Sub::Ridge(a) => (Command::Ridge, a),
            Sub::Path(a) => (Command::Path, a),
            Sub::Pds(a) => (Command::Pds, a),
            Sub::Chs(a) => (Command::Chs, a),
            Sub::Ivlasso(a) => (Command::Ivlasso, a),
        };
        RunConfig {
            command,
            data: a.data,
            model: a.model,
            pnotpen: a.pnotpen,
            aset: a.aset,
            partial: a.partial,
            dummies: a.dummies,
            robust: a.robust,
            cluster: a.cluster,
            fe: a.fe,
            fd: a.fd,
            allow_gaps: a.allow_gaps,
            panel: a.panel,
            time: a.time,
            post: a.post,
            first_stage: a.first_stage,
            tune: a.tune,
            lambda: a.lambda,
            folds: a.folds,
            seed: a.seed,
            out: a.out,
            format: a.format,
            full: a.full,
        }
    }
}
