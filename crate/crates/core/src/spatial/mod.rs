//! Higher-order spatial procedures: the distance-threshold sweep locating
//! spillover reach, the per-unit spatial decay coefficient field, and
//! heterogeneity tests over urban-structure groups.

mod decay;
mod heterogeneity;
mod sweep;

pub use decay::*;
pub use heterogeneity::*;
pub use sweep::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("threshold grid is empty or has nonpositive step")]
    BadGrid,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("recovery-rate field is empty")]
    EmptyField,
    #[error("group '{0}' is empty after the mean split")]
    EmptyGroup(&'static str),
    #[error("weights error: {0}")]
    Weights(#[from] crate::weights::WeightsError),
}
