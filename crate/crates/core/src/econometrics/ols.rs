//! Least squares via Householder QR, with conventional t-inference and
//! Gaussian maximum-likelihood model metrics.

use super::EconError;
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Relative tolerance on QR diagonal entries below which the design is
/// declared rank deficient.
const RANK_TOL: f64 = 1e-10;

/// A named design matrix. Column 0 is the intercept when built through
/// [`Design::with_intercept`].
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    /// Column-major data, each column of length n.
    pub columns: Vec<Vec<f64>>,
    pub n: usize,
}

impl Design {
    pub fn with_intercept(named_columns: Vec<(String, Vec<f64>)>) -> Result<Design, EconError> {
        let n = named_columns
            .first()
            .map(|(_, c)| c.len())
            .ok_or_else(|| EconError::DimensionMismatch("no columns".into()))?;
        let mut names = vec!["const".to_string()];
        let mut columns = vec![vec![1.0; n]];
        for (name, col) in named_columns {
            if col.len() != n {
                return Err(EconError::DimensionMismatch(format!(
                    "column '{name}' has length {}, expected {n}",
                    col.len()
                )));
            }
            names.push(name);
            columns.push(col);
        }
        Ok(Design { names, columns, n })
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.k(), |r, c| self.columns[c][r])
    }
}

/// Fitted linear model with inference and fit metrics.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    /// Two-sided p-values from the t distribution with n - k df.
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// Gaussian log-likelihood at the ML variance estimate RSS/n.
    pub log_likelihood: f64,
    /// 2k - 2 logL with k the number of estimated coefficients.
    pub aic: f64,
    pub n: usize,
    pub k: usize,
    /// Coefficient covariance, s^2 (X'X)^-1 with s^2 = RSS/(n-k).
    pub covariance: DMatrix<f64>,
}

impl RegressionFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }
}

pub(crate) fn two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Ordinary least squares of y on the design.
///
/// Errors on rank deficiency and on n <= k. The estimation route is an
/// orthogonal decomposition; normal equations are reserved for test oracles.
pub fn fit_ols(y: &[f64], design: &Design) -> Result<RegressionFit, EconError> {
    let n = design.n;
    let k = design.k();
    if y.len() != n {
        return Err(EconError::DimensionMismatch(format!(
            "y has length {}, design has {n} rows",
            y.len()
        )));
    }
    if n <= k {
        return Err(EconError::TooFewObservations { n, k });
    }

    let x = design.to_matrix();
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();

    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    for i in 0..k {
        if r[(i, i)].abs() <= RANK_TOL * max_diag.max(1e-300) {
            return Err(EconError::RankDeficient(i));
        }
    }

    // Least squares through the thin factorization: beta = R^-1 (Q' y).
    let mut qty = yv.clone();
    qr.q_tr_mul(&mut qty);
    let qty_top = qty.rows(0, k).into_owned();
    let beta = r
        .solve_upper_triangular(&qty_top)
        .ok_or(EconError::RankDeficient(0))?;

    let fitted = &x * &beta;
    let residuals = &yv - &fitted;
    let rss: f64 = residuals.iter().map(|e| e * e).sum();

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let r_squared = if tss == 0.0 { 1.0 } else { 1.0 - rss / tss };
    let df_resid = (n - k) as f64;
    let adj_r_squared = 1.0 - (1.0 - r_squared) * ((n as f64 - 1.0) / df_resid);

    // (X'X)^-1 = R^-1 R^-T from the triangular factor.
    let identity = DMatrix::identity(k, k);
    let r_inv = r
        .solve_upper_triangular(&identity)
        .ok_or(EconError::RankDeficient(0))?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let sigma2 = rss / df_resid;
    let covariance = xtx_inv * sigma2;
    let std_errors: Vec<f64> = (0..k).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();
    let t_values: Vec<f64> = (0..k)
        .map(|i| {
            if std_errors[i] == 0.0 {
                if beta[i] == 0.0 {
                    0.0
                } else {
                    f64::INFINITY * beta[i].signum()
                }
            } else {
                beta[i] / std_errors[i]
            }
        })
        .collect();
    let p_values: Vec<f64> = t_values.iter().map(|&t| two_sided_p(t, df_resid)).collect();

    // ML variance for the likelihood, per the AIC convention used here.
    let nf = n as f64;
    let log_likelihood = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + (rss / nf).ln() + 1.0);
    let aic = 2.0 * k as f64 - 2.0 * log_likelihood;

    Ok(RegressionFit {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        residuals: residuals.iter().copied().collect(),
        r_squared,
        adj_r_squared,
        log_likelihood,
        aic,
        n,
        k,
        covariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovers_slope_two() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let design = Design::with_intercept(vec![("x".into(), x)]).unwrap();
        let fit = fit_ols(&y, &design).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_model_fits_the_mean() {
        let y = [1.0, 2.0, 3.0, 6.0];
        let design = Design {
            names: vec!["const".into()],
            columns: vec![vec![1.0; 4]],
            n: 4,
        };
        let fit = fit_ols(&y, &design).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations_oracle_on_random_designs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(20..120);
            let k_vars = rng.gen_range(1..6);
            let cols: Vec<(String, Vec<f64>)> = (0..k_vars)
                .map(|c| {
                    (
                        format!("x{c}"),
                        (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                    )
                })
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let design = Design::with_intercept(cols).unwrap();
            let fit = fit_ols(&y, &design).unwrap();

            // Normal-equations oracle, solved by full-pivot LU.
            let x = design.to_matrix();
            let xtx = x.transpose() * &x;
            let xty = x.transpose() * DVector::from_column_slice(&y);
            let beta = xtx.full_piv_lu().solve(&xty).unwrap();
            for i in 0..design.k() {
                assert!(
                    (fit.coefficients[i] - beta[i]).abs() < 1e-8,
                    "coefficient {i}: {} vs {}",
                    fit.coefficients[i],
                    beta[i]
                );
            }
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_design() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let cols: Vec<(String, Vec<f64>)> = (0..3)
            .map(|c| {
                (
                    format!("x{c}"),
                    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                )
            })
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let design = Design::with_intercept(cols).unwrap();
        let fit = fit_ols(&y, &design).unwrap();
        let resid_norm: f64 = fit.residuals.iter().map(|e| e * e).sum::<f64>().sqrt();
        for col in &design.columns {
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            let col_norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(dot.abs() <= 1e-8 * col_norm * resid_norm.max(1.0));
        }
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let design = Design::with_intercept(vec![
            ("a".into(), x.clone()),
            ("b".into(), x),
        ])
        .unwrap();
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            fit_ols(&y, &design),
            Err(EconError::RankDeficient(_))
        ));
    }

    #[test]
    fn too_few_observations_rejected() {
        let design = Design::with_intercept(vec![("x".into(), vec![1.0, 2.0])]).unwrap();
        assert!(matches!(
            fit_ols(&[1.0, 2.0], &design),
            Err(EconError::TooFewObservations { .. })
        ));
    }

    #[test]
    fn aic_identity_holds() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + (i as f64) * 0.01).collect();
        let design = Design::with_intercept(vec![("x".into(), x)]).unwrap();
        let fit = fit_ols(&y, &design).unwrap();
        assert!((fit.aic - (2.0 * fit.k as f64 - 2.0 * fit.log_likelihood)).abs() < 1e-10);
        assert!(fit.adj_r_squared <= fit.r_squared);
    }
}
