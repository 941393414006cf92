use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classification used by front ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed files, unknown names, invalid options.
    User,
    /// The data were accepted but the estimator could not produce an answer.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("non-numeric value {token:?} in column {column:?} at row {row}")]
    NonNumeric {
        row: usize,
        column: String,
        token: String,
    },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {0:?} is constant")]
    ConstantColumn(String),
    #[error("column {0:?} has zero scale and cannot be penalized")]
    ZeroScale(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("insufficient degrees of freedom after selection: {0}")]
    DegreesOfFreedom(String),
    #[error("treatment fully explained by controls: {0}")]
    TreatmentExplained(String),
    #[error("no instruments survived selection for {0}; instruments may be weak or irrelevant")]
    NoInstruments(String),
    #[error("order condition fails: {instruments} instruments for {endogenous} endogenous regressors")]
    Underidentified {
        instruments: usize,
        endogenous: usize,
    },
    #[error("gap in time index for panel {panel:?} between {from} and {to}")]
    TimeGap { panel: String, from: f64, to: f64 },
    #[error("{step}: {source}")]
    Step {
        step: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite(_)
            | Error::Singular(_)
            | Error::DegreesOfFreedom(_)
            | Error::TreatmentExplained(_)
            | Error::NoInstruments(_)
            | Error::Underidentified { .. } => ErrorKind::Numeric,
            Error::Step { source, .. } => source.kind(),
            _ => ErrorKind::User,
        }
    }

    /// Name of the module that raised the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::NonNumeric { .. }
            | Error::DuplicateColumn(_)
            | Error::UnknownColumn(_)
            | Error::ConstantColumn(_)
            | Error::ZeroScale(_)
            | Error::InvalidModel(_) => "dataset",
            Error::InvalidArgument(_) | Error::Dimension(_) | Error::NonFinite(_) => "solver",
            Error::Singular(_) | Error::DegreesOfFreedom(_) => "postsel",
            Error::TreatmentExplained(_) => "inference",
            Error::NoInstruments(_) | Error::Underidentified { .. } => "ivhds",
            Error::TimeGap { .. } => "panelfx",
            Error::Step { source, .. } => source.module(),
        }
    }

    pub(crate) fn in_step(self, step: impl Into<String>) -> Error {
        Error::Step {
            step: step.into(),
            source: Box::new(self),
        }
    }
}
