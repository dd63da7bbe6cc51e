//! Statistical estimators: OLS with model metrics, Pearson correlation, VIF,
//! global spatial autocorrelation with permutation inference, and the
//! spatially lagged regression with effect decomposition.

mod diagnostics;
mod moran;
mod ols;
mod slx;
mod stars;

pub use diagnostics::*;
pub use moran::*;
pub use ols::*;
pub use slx::*;
pub use stars::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EconError {
    #[error("need more observations than parameters: n={n}, k={k}")]
    TooFewObservations { n: usize, k: usize },
    #[error("design matrix is rank deficient (column {0})")]
    RankDeficient(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("need at least {needed} observations, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("need at least 2 columns for VIF, got {0}")]
    TooFewColumns(usize),
}
