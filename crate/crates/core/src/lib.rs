//! Spatial spillover analytics for disaster recovery.
//!
//! The crate turns raw claim, parcel, and device-stop tables into a per-CBG
//! regression surface (damage metrics, recovery rates, control variables),
//! builds sparse spatial weight matrices, and runs the estimator stack:
//! correlation and collinearity diagnostics, least squares, global spatial
//! autocorrelation with permutation inference, spatially lagged regression
//! with effect decomposition, distance-threshold reach sweeps, hyperbolic
//! decay coefficients, and group heterogeneity tests. A synthetic-scenario
//! generator with planted ground truth closes the loop for verification.

pub mod covariates;
pub mod damage;
pub mod econometrics;
pub mod frame;
pub mod geo;
pub mod ingest;
pub mod mobility;
pub mod spatial;
pub mod synthetic;
pub mod weights;
