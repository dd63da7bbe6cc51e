//! Independent brute-force oracles for the estimator stack. These stay
//! deliberately naive (dense double sums, normal equations) so they share no
//! code path with the implementations they check.

use crate::econometrics::{morans_i_statistic, Design, RegressionFit};
use crate::spatial::DecayField;
use crate::weights::SpatialWeights;
use nalgebra::{DMatrix, DVector};

/// Literal double-sum autocorrelation statistic over a dense matrix copy.
pub fn dense_moran(x: &[f64], weights: &SpatialWeights) -> f64 {
    let n = x.len();
    let dense = weights.to_dense();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut s0 = 0.0;
    for i in 0..n {
        for j in 0..n {
            num += dense[i][j] * (x[i] - mean) * (x[j] - mean);
            s0 += dense[i][j];
        }
    }
    let den: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    n as f64 * num / (s0 * den)
}

/// Normal-equations least squares, solved by full-pivot LU.
pub fn normal_equations_ols(y: &[f64], design: &Design) -> Vec<f64> {
    let n = design.n;
    let k = design.k();
    let x = DMatrix::from_fn(n, k, |r, c| design.columns[c][r]);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * DVector::from_column_slice(y);
    let beta = xtx.full_piv_lu().solve(&xty).expect("full-rank oracle input");
    beta.iter().copied().collect()
}

/// Dense matrix-vector spatial lag.
pub fn dense_lag(weights: &SpatialWeights, x: &[f64]) -> Vec<f64> {
    let dense = weights.to_dense();
    dense
        .iter()
        .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
        .collect()
}

/// Maximum deviations of the implementation against the oracles.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OracleReport {
    pub n: usize,
    pub max_moran_deviation: f64,
    pub max_ols_deviation: f64,
    pub max_lag_deviation: f64,
    pub max_decay_residual: f64,
}

impl OracleReport {
    pub fn passes(&self) -> bool {
        self.max_moran_deviation <= 1e-12
            && self.max_ols_deviation <= 1e-8
            && self.max_lag_deviation <= 1e-12
            && self.max_decay_residual <= 1e-12
    }
}

/// Recompute results by brute force and report worst-case deviations.
///
/// `moran_inputs` pairs each tested field with the weights it was tested
/// under; `fit` is re-estimated by normal equations on the same design.
pub fn oracle_checks(
    moran_inputs: &[(&[f64], &SpatialWeights)],
    fit: Option<(&[f64], &Design, &RegressionFit)>,
    lag_inputs: &[(&[f64], &SpatialWeights)],
    decay: Option<(&DecayField, &[f64])>,
) -> OracleReport {
    let mut max_moran = 0.0f64;
    let mut n = 0;
    for (x, w) in moran_inputs {
        n = n.max(x.len());
        let fast = morans_i_statistic(x, w).expect("tested fields are nonconstant");
        let slow = dense_moran(x, w);
        max_moran = max_moran.max((fast - slow).abs());
    }

    let mut max_ols = 0.0f64;
    if let Some((y, design, fit)) = fit {
        n = n.max(design.n);
        let oracle = normal_equations_ols(y, design);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            max_ols = max_ols.max((a - b).abs());
        }
    }

    let mut max_lag = 0.0f64;
    for (x, w) in lag_inputs {
        let fast = w.lag(x).expect("aligned");
        let slow = dense_lag(w, x);
        for (a, b) in fast.iter().zip(&slow) {
            max_lag = max_lag.max((a - b).abs());
        }
    }

    let mut max_decay = 0.0f64;
    if let Some((field, rr)) = decay {
        for (_, resid) in field.identity_residuals(rr) {
            max_decay = max_decay.max(resid);
        }
    }

    OracleReport {
        n,
        max_moran_deviation: max_moran,
        max_ols_deviation: max_ols,
        max_lag_deviation: max_lag,
        max_decay_residual: max_decay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::fit_ols;
    use crate::ingest::CbgIndex;
    use crate::weights::{build_weights, WeightScheme};
    use rand::{Rng, SeedableRng};

    #[test]
    fn oracles_agree_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let n = 40;
        let rows: Vec<(String, f64, f64, f64)> = (0..n)
            .map(|i| {
                (
                    format!("o{i:02}"),
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(29.4..30.0),
                    1.0,
                )
            })
            .collect();
        let index = CbgIndex::new(rows, &[]).unwrap();
        let w = build_weights(&index, WeightScheme::InverseDistance).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let design = Design::with_intercept(vec![("x".into(), x.clone())]).unwrap();
        let fit = fit_ols(&y, &design).unwrap();

        let report = oracle_checks(
            &[(&x, &w)],
            Some((&y, &design, &fit)),
            &[(&x, &w)],
            None,
        );
        assert!(report.passes(), "{report:?}");
    }
}
