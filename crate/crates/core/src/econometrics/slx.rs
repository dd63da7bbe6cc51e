//! Spatially lagged regression: y on [1, X, WX], with the effect
//! decomposition direct = beta_X, indirect = theta_WX, total = their sum.

use super::ols::{fit_ols, two_sided_p, Design, RegressionFit};
use super::EconError;
use crate::weights::SpatialWeights;

/// Lag columns whose spread falls at or below this (relative to the column
/// scale) collapse into the intercept and are dropped.
const CONSTANT_TOL: f64 = 1e-12;

/// Effect decomposition for one regressor.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EffectRow {
    pub name: String,
    pub direct: f64,
    pub direct_se: f64,
    pub direct_p: f64,
    /// 0.0 when the lag column was dropped (no spatial variation to estimate).
    pub indirect: f64,
    pub indirect_se: f64,
    pub indirect_p: Option<f64>,
    /// total = direct + indirect, exactly.
    pub total: f64,
    pub total_se: f64,
    pub total_p: Option<f64>,
    pub lag_dropped: bool,
}

#[derive(Debug, Clone)]
pub struct SlxFit {
    /// Fit over the augmented design [1, X, lag(X)].
    pub fit: RegressionFit,
    pub effects: Vec<EffectRow>,
    /// (variable, lag coefficient) for the retained lag columns.
    pub lag_coefficients: Vec<(String, f64)>,
    /// Variables whose lag column was constant and therefore dropped.
    pub dropped_lags: Vec<String>,
}

fn is_constant(col: &[f64]) -> bool {
    let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = min.abs().max(max.abs()).max(1.0);
    (max - min) <= CONSTANT_TOL * scale
}

/// Fit the spatially lagged model using a prebuilt weight matrix.
pub fn fit_slx(
    y: &[f64],
    x: &[(String, Vec<f64>)],
    weights: &SpatialWeights,
) -> Result<SlxFit, EconError> {
    let lags: Vec<(String, Vec<f64>)> = x
        .iter()
        .map(|(name, col)| {
            weights
                .lag(col)
                .map(|lagged| (name.clone(), lagged))
                .map_err(|e| EconError::DimensionMismatch(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    fit_slx_with_lags(y, x, &lags)
}

/// Fit with lag columns computed by the caller (used by threshold sweeps,
/// which build lags incrementally).
pub fn fit_slx_with_lags(
    y: &[f64],
    x: &[(String, Vec<f64>)],
    lags: &[(String, Vec<f64>)],
) -> Result<SlxFit, EconError> {
    if x.len() != lags.len() {
        return Err(EconError::DimensionMismatch(format!(
            "{} x columns vs {} lag columns",
            x.len(),
            lags.len()
        )));
    }

    let mut named: Vec<(String, Vec<f64>)> = x.to_vec();
    let mut dropped_lags = Vec::new();
    let mut kept_lag_names = Vec::new();
    for (name, lag_col) in lags {
        if is_constant(lag_col) {
            dropped_lags.push(name.clone());
        } else {
            kept_lag_names.push(name.clone());
            named.push((format!("lag_{name}"), lag_col.clone()));
        }
    }

    let design = Design::with_intercept(named)?;
    let fit = fit_ols(y, &design)?;
    let df = (fit.n - fit.k) as f64;

    let position = |label: &str| fit.names.iter().position(|n| n == label);
    let mut effects = Vec::with_capacity(x.len());
    for (name, _) in x {
        let xi = position(name).expect("x column present in design");
        let direct = fit.coefficients[xi];
        let direct_se = fit.std_errors[xi];
        let direct_p = fit.p_values[xi];
        match position(&format!("lag_{name}")) {
            Some(li) => {
                let indirect = fit.coefficients[li];
                let indirect_se = fit.std_errors[li];
                let indirect_p = fit.p_values[li];
                let total = direct + indirect;
                let var_total = fit.covariance[(xi, xi)]
                    + fit.covariance[(li, li)]
                    + 2.0 * fit.covariance[(xi, li)];
                let total_se = var_total.max(0.0).sqrt();
                let total_p = if total_se == 0.0 {
                    None
                } else {
                    Some(two_sided_p(total / total_se, df))
                };
                effects.push(EffectRow {
                    name: name.clone(),
                    direct,
                    direct_se,
                    direct_p,
                    indirect,
                    indirect_se,
                    indirect_p: Some(indirect_p),
                    total,
                    total_se,
                    total_p,
                    lag_dropped: false,
                });
            }
            None => effects.push(EffectRow {
                name: name.clone(),
                direct,
                direct_se,
                direct_p,
                indirect: 0.0,
                indirect_se: 0.0,
                indirect_p: None,
                total: direct,
                total_se: direct_se,
                total_p: Some(direct_p),
                lag_dropped: true,
            }),
        }
    }

    let lag_coefficients = kept_lag_names
        .iter()
        .map(|name| {
            let li = position(&format!("lag_{name}")).expect("kept lag present");
            (name.clone(), fit.coefficients[li])
        })
        .collect();

    Ok(SlxFit {
        fit,
        effects,
        lag_coefficients,
        dropped_lags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CbgIndex;
    use crate::weights::{build_weights, WeightScheme};
    use rand::{Rng, SeedableRng};

    fn random_index(n: usize, seed: u64) -> CbgIndex {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(String, f64, f64, f64)> = (0..n)
            .map(|i| {
                (
                    format!("g{i:03}"),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(29.5..30.2),
                    1.0,
                )
            })
            .collect();
        CbgIndex::new(rows, &[]).unwrap()
    }

    #[test]
    fn planted_coefficients_recovered_exactly() {
        let index = random_index(60, 9);
        let w = build_weights(&index, WeightScheme::InverseDistance).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let x: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
        let wx = w.lag(&x).unwrap();
        let y: Vec<f64> = x
            .iter()
            .zip(&wx)
            .map(|(xi, wi)| 0.5 + 2.0 * xi - 3.0 * wi)
            .collect();
        let slx = fit_slx(&y, &[("x".into(), x)], &w).unwrap();
        let row = &slx.effects[0];
        assert!((slx.fit.coefficients[0] - 0.5).abs() < 1e-8);
        assert!((row.direct - 2.0).abs() < 1e-8);
        assert!((row.indirect + 3.0).abs() < 1e-8);
        assert!((row.total + 1.0).abs() < 1e-8);
        assert_eq!(row.total, row.direct + row.indirect);
    }

    #[test]
    fn planted_zero_lag_coefficient_stays_zero() {
        let index = random_index(50, 21);
        let w = build_weights(&index, WeightScheme::InverseDistance).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        let x: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|xi| 0.5 + 2.0 * xi).collect();
        let slx = fit_slx(&y, &[("x".into(), x)], &w).unwrap();
        assert!(slx.effects[0].indirect.abs() < 1e-8);
    }

    #[test]
    fn totals_equal_direct_plus_indirect_exactly() {
        let index = random_index(40, 33);
        let w = build_weights(&index, WeightScheme::InverseDistance).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(34);
        let cols: Vec<(String, Vec<f64>)> = (0..3)
            .map(|c| {
                (
                    format!("x{c}"),
                    (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
            })
            .collect();
        let y: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let slx = fit_slx(&y, &cols, &w).unwrap();
        for row in &slx.effects {
            assert_eq!(row.total, row.direct + row.indirect);
        }
    }

    #[test]
    fn all_isolate_weights_reduce_to_ols() {
        let index = random_index(30, 44);
        // Threshold below the minimum pairwise distance isolates everything.
        let w = build_weights(
            &index,
            WeightScheme::InverseDistanceThresholded { threshold_miles: 1e-9 },
        )
        .unwrap();
        assert_eq!(w.isolates.len(), 30);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(45);
        let x: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let slx = fit_slx(&y, &[("x".into(), x.clone())], &w).unwrap();
        assert_eq!(slx.dropped_lags, vec!["x".to_string()]);

        let ols = fit_ols(
            &y,
            &Design::with_intercept(vec![("x".into(), x)]).unwrap(),
        )
        .unwrap();
        for (a, b) in slx.fit.coefficients.iter().zip(&ols.coefficients) {
            assert_eq!(a, b);
        }
    }
}
