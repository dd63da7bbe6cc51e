//! Pearson correlation and variance-inflation-factor diagnostics.

use super::ols::two_sided_p;
use super::EconError;

/// VIF at or above this marks serious multicollinearity.
pub const VIF_FLAG_THRESHOLD: f64 = 10.0;

/// Auxiliary R-squared this close to 1 reports an infinite VIF.
const EXACT_COLLINEARITY_TOL: f64 = 1e-12;

/// Sample Pearson correlation with a two-sided p-value from the t transform
/// (df = n - 2). Errors on n < 3 or zero variance in either argument.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<(f64, f64), EconError> {
    if x.len() != y.len() {
        return Err(EconError::DimensionMismatch(format!(
            "{} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(EconError::TooFewSamples { needed: 3, got: n });
    }
    let nf = n as f64;
    let x_mean = x.iter().sum::<f64>() / nf;
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - x_mean;
        let dy = y[i] - y_mean;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(EconError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(EconError::ZeroVariance("y"));
    }
    let mut r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    // Snap exact linear dependence to +-1 despite rounding in the quotient.
    if (1.0 - r * r) < 1e-14 {
        r = r.signum();
    }
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * ((nf - 2.0) / (1.0 - r * r)).sqrt();
        two_sided_p(t, nf - 2.0)
    };
    Ok((r, p))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct VifEntry {
    pub name: String,
    pub vif: f64,
    /// True at or above [`VIF_FLAG_THRESHOLD`], including infinite VIF.
    pub flagged: bool,
}

/// VIF_j = 1/(1 - R²_j), with R²_j from regressing column j on the other
/// columns plus an intercept. Exact collinearity reports an infinite VIF
/// rather than an error.
pub fn vif(columns: &[(String, Vec<f64>)]) -> Result<Vec<VifEntry>, EconError> {
    let k = columns.len();
    if k < 2 {
        return Err(EconError::TooFewColumns(k));
    }
    let n = columns[0].1.len();
    for (name, col) in columns {
        if col.len() != n {
            return Err(EconError::DimensionMismatch(format!(
                "column '{name}' has length {}, expected {n}",
                col.len()
            )));
        }
    }
    if n <= k {
        return Err(EconError::TooFewObservations { n, k });
    }

    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let target = &columns[j].1;
        let others: Vec<&[f64]> = (0..k).filter(|&c| c != j).map(|c| columns[c].1.as_slice()).collect();
        let r2 = auxiliary_r_squared(target, &others);
        let vif = if r2 >= 1.0 - EXACT_COLLINEARITY_TOL {
            f64::INFINITY
        } else {
            1.0 / (1.0 - r2)
        };
        out.push(VifEntry {
            name: columns[j].0.clone(),
            vif,
            flagged: vif >= VIF_FLAG_THRESHOLD,
        });
    }
    Ok(out)
}

/// R² of target on [1, others], robust to redundant columns: the projection
/// is built on an orthonormal basis kept by modified Gram-Schmidt, so exact
/// duplicates among the regressors do not break the auxiliary fit.
fn auxiliary_r_squared(target: &[f64], others: &[&[f64]]) -> f64 {
    let n = target.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let intercept = vec![1.0 / (n as f64).sqrt(); n];
    basis.push(intercept);
    for col in others {
        let mut v: Vec<f64> = col.to_vec();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        // Re-orthogonalize once for numerical hygiene at near dependence.
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let col_norm: f64 = col.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 * col_norm.max(1.0) {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
        }
    }

    let mean = target.iter().sum::<f64>() / n as f64;
    let tss: f64 = target.iter().map(|v| (v - mean) * (v - mean)).sum();
    if tss == 0.0 {
        return 0.0;
    }
    let mut resid: Vec<f64> = target.to_vec();
    for b in &basis {
        let dot: f64 = resid.iter().zip(b).map(|(a, c)| a * c).sum();
        for (ri, bi) in resid.iter_mut().zip(b) {
            *ri -= dot * bi;
        }
    }
    let rss: f64 = resid.iter().map(|v| v * v).sum();
    (1.0 - rss / tss).clamp(0.0, 1.0)
}
