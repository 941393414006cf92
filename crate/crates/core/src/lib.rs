//! Sparse high-dimensional linear regression.
//!
//! Weighted lasso and ridge solvers, penalty selection (information criteria,
//! K-fold cross-validation and the iterated plug-in rule), post-lasso OLS,
//! treatment-effect inference by post-double-selection and partialling-out,
//! lasso-based instrument selection with 2SLS, and panel transforms.

pub mod dataset;
pub mod error;
pub mod inference;
pub mod ivhds;
pub mod linalg;
pub mod panelfx;
pub mod postsel;
pub mod sim;
pub mod solver;
pub mod tuning;

pub use error::{Error, ErrorKind, Result};
pub use linalg::{Block, SeMode};
