//! Distance-threshold sweep: refit the lagged regression at each cutoff of
//! the thresholded inverse-distance weights and track the effect
//! decomposition per variable.
//!
//! Pairs are sorted by distance once. Thresholds partition into contiguous
//! chunks processed in parallel; within a chunk, raw weight sums per row are
//! updated incrementally, and every accumulation consumes pairs in the same
//! global order, so results are independent of chunking and scheduling.

use super::SpatialError;
use crate::econometrics::{fit_slx_with_lags, EffectRow};
use crate::ingest::CbgIndex;
use crate::weights::distance_pairs;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct ThresholdGrid {
    pub start_miles: f64,
    pub stop_miles: f64,
    pub step_miles: f64,
}

impl ThresholdGrid {
    pub fn thresholds(&self) -> Result<Vec<f64>, SpatialError> {
        if self.step_miles <= 0.0 || self.stop_miles < self.start_miles {
            return Err(SpatialError::BadGrid);
        }
        let count = ((self.stop_miles - self.start_miles) / self.step_miles).round() as usize + 1;
        let grid: Vec<f64> = (0..count)
            .map(|i| self.start_miles + i as f64 * self.step_miles)
            .filter(|&d| d > 0.0)
            .collect();
        if grid.is_empty() {
            return Err(SpatialError::BadGrid);
        }
        Ok(grid)
    }
}

/// Outcome of one threshold's fit.
#[derive(Debug, Clone)]
pub enum ThresholdOutcome {
    Fitted {
        effects: Vec<EffectRow>,
        r_squared: f64,
        adj_r_squared: f64,
        log_likelihood: f64,
        aic: f64,
    },
    Skipped {
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct ThresholdRecord {
    pub threshold_miles: f64,
    pub outcome: ThresholdOutcome,
}

/// Per-variable reach summary derived from a sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReachStats {
    /// Largest threshold with indirect-effect p <= alpha; None when the
    /// effect is never significant.
    pub cutoff_miles: Option<f64>,
    /// Threshold where the indirect effect peaks: the minimum for variables
    /// whose saturated indirect effect is negative, the maximum otherwise.
    /// A reporting statistic; on planted-radius data its peak sits below the
    /// true radius (thresholded row-standardized lags shrink in variance as
    /// the cutoff grows, inflating coefficients on partially matched proxies).
    pub extremum_miles: Option<f64>,
    /// Threshold maximizing the model log-likelihood across fitted records:
    /// the model-selection estimate of the distance at which the spillover
    /// operates, and the statistic that recovers a planted radius.
    pub best_fit_miles: Option<f64>,
    /// Sign of the indirect effect at the largest fitted threshold.
    pub saturated_sign: f64,
}

#[derive(Debug, Clone)]
pub struct ReachProfile {
    pub variables: Vec<String>,
    pub records: Vec<ThresholdRecord>,
    pub alpha: f64,
}

impl ReachProfile {
    /// Indirect effect and p-value of `variable` at each fitted threshold.
    pub fn indirect_series(&self, variable: &str) -> Vec<(f64, f64, Option<f64>)> {
        let mut out = Vec::new();
        for rec in &self.records {
            if let ThresholdOutcome::Fitted { effects, .. } = &rec.outcome {
                if let Some(row) = effects.iter().find(|e| e.name == variable) {
                    out.push((rec.threshold_miles, row.indirect, row.indirect_p));
                }
            }
        }
        out
    }

    pub fn stats_for(&self, variable: &str) -> ReachStats {
        locate_cutoff_and_extremum(self, variable, self.alpha)
    }
}

/// Cutoff = largest significant threshold; extremum oriented by the effect
/// sign at the largest fitted threshold (the unthresholded proxy); best-fit
/// threshold from the likelihood trace.
pub fn locate_cutoff_and_extremum(profile: &ReachProfile, variable: &str, alpha: f64) -> ReachStats {
    let series = profile.indirect_series(variable);
    let mut cutoff = None;
    for &(d, _, p) in &series {
        if let Some(p) = p {
            if p <= alpha {
                cutoff = Some(d);
            }
        }
    }
    let saturated_sign = series
        .last()
        .map(|&(_, eff, _)| if eff < 0.0 { -1.0 } else { 1.0 })
        .unwrap_or(0.0);
    let mut extremum: Option<(f64, f64)> = None; // (threshold, effect)
    for &(d, eff, _) in &series {
        let better = match extremum {
            None => true,
            Some((_, best)) => {
                if saturated_sign < 0.0 {
                    eff < best
                } else {
                    eff > best
                }
            }
        };
        if better {
            extremum = Some((d, eff));
        }
    }
    let mut best_fit: Option<(f64, f64)> = None; // (threshold, logL)
    for rec in &profile.records {
        if let ThresholdOutcome::Fitted { log_likelihood, .. } = &rec.outcome {
            if best_fit.is_none() || *log_likelihood > best_fit.expect("set").1 {
                best_fit = Some((rec.threshold_miles, *log_likelihood));
            }
        }
    }
    ReachStats {
        cutoff_miles: cutoff,
        extremum_miles: extremum.map(|(d, _)| d),
        best_fit_miles: best_fit.map(|(d, _)| d),
        saturated_sign,
    }
}

/// Running raw thresholded-inverse-distance state over distance-sorted pairs.
struct LagState {
    /// Raw weighted sums per row per variable: sum of x_j / d_ij.
    raw_wx: Vec<Vec<f64>>,
    /// Raw row sums: sum of 1 / d_ij.
    raw_w: Vec<f64>,
    next_pair: usize,
}

impl LagState {
    fn new(n: usize, k: usize) -> Self {
        Self {
            raw_wx: vec![vec![0.0; n]; k],
            raw_w: vec![0.0; n],
            next_pair: 0,
        }
    }

    /// Consume pairs with d <= threshold, in global sorted order.
    fn advance(&mut self, pairs: &[(u32, u32, f64)], columns: &[&[f64]], threshold: f64) {
        while self.next_pair < pairs.len() {
            let (i, j, d) = pairs[self.next_pair];
            if d > threshold {
                break;
            }
            let (i, j) = (i as usize, j as usize);
            let w = 1.0 / d;
            self.raw_w[i] += w;
            self.raw_w[j] += w;
            for (v, col) in columns.iter().enumerate() {
                self.raw_wx[v][i] += w * col[j];
                self.raw_wx[v][j] += w * col[i];
            }
            self.next_pair += 1;
        }
    }

    /// Row-standardized lag columns; isolate rows lag to zero.
    fn lag_columns(&self, names: &[String]) -> Vec<(String, Vec<f64>)> {
        names
            .iter()
            .enumerate()
            .map(|(v, name)| {
                let col = self.raw_wx[v]
                    .iter()
                    .zip(&self.raw_w)
                    .map(|(&wx, &w)| if w == 0.0 { 0.0 } else { wx / w })
                    .collect();
                (name.clone(), col)
            })
            .collect()
    }
}

/// Sweep the threshold grid, fitting the lagged model at each cutoff.
///
/// Thresholds where no pair is in range, or where the augmented design is
/// rank deficient, are recorded as skipped rather than failing the sweep.
pub fn sweep_spatial_reach(
    y: &[f64],
    x: &[(String, Vec<f64>)],
    index: &CbgIndex,
    grid: ThresholdGrid,
    alpha: f64,
) -> Result<ReachProfile, SpatialError> {
    let n = index.len();
    if y.len() != n {
        return Err(SpatialError::DimensionMismatch(format!(
            "y has length {}, index has {n} units",
            y.len()
        )));
    }
    for (name, col) in x {
        if col.len() != n {
            return Err(SpatialError::DimensionMismatch(format!(
                "column '{name}' has length {}, expected {n}",
                col.len()
            )));
        }
    }
    let thresholds = grid.thresholds()?;
    let pairs = distance_pairs(index)?;
    let names: Vec<String> = x.iter().map(|(name, _)| name.clone()).collect();
    let columns: Vec<&[f64]> = x.iter().map(|(_, col)| col.as_slice()).collect();

    let workers = rayon::current_num_threads().max(1);
    let chunk_len = thresholds.len().div_ceil(workers);
    let chunks: Vec<&[f64]> = thresholds.chunks(chunk_len).collect();

    let records: Vec<ThresholdRecord> = chunks
        .par_iter()
        .flat_map(|chunk| {
            let mut state = LagState::new(n, names.len());
            // Rebuild prefix state up to just below this chunk's first
            // threshold by consuming pairs in the same global order.
            let mut out = Vec::with_capacity(chunk.len());
            for &threshold in *chunk {
                state.advance(&pairs, &columns, threshold);
                let outcome = if state.next_pair == 0 {
                    ThresholdOutcome::Skipped {
                        reason: "no pairs within threshold".into(),
                    }
                } else {
                    let lags = state.lag_columns(&names);
                    match fit_slx_with_lags(y, x, &lags) {
                        Ok(slx) => ThresholdOutcome::Fitted {
                            effects: slx.effects,
                            r_squared: slx.fit.r_squared,
                            adj_r_squared: slx.fit.adj_r_squared,
                            log_likelihood: slx.fit.log_likelihood,
                            aic: slx.fit.aic,
                        },
                        Err(e) => ThresholdOutcome::Skipped {
                            reason: e.to_string(),
                        },
                    }
                };
                out.push(ThresholdRecord {
                    threshold_miles: threshold,
                    outcome,
                });
            }
            out
        })
        .collect();

    // flat_map over ordered chunks preserves threshold order.
    Ok(ReachProfile {
        variables: names,
        records,
        alpha,
    })
}
