//! The per-CBG regression frame: recovery rate as outcome, damage metrics
//! plus control variables as regressors, with min-max scaling applied as a
//! whole-frame transform.

use crate::covariates::{min_max_scale, ControlVariables};
use crate::damage::CbgDamage;
use crate::ingest::CbgIndex;
use crate::mobility::{RecoveryResult, RecoveryStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame inputs must be index-aligned: {0}")]
    Misaligned(String),
    #[error("no CBGs left after exclusions")]
    Empty,
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
}

/// Canonical regressor order: damage metrics then controls.
pub const DAMAGE_NAMES: [&str; 4] = ["nc", "mp", "sdp", "mdp"];
pub const ALL_VARIABLE_NAMES: [&str; 10] =
    ["nc", "mp", "sdp", "mdp", "pop", "rd", "poi", "ms", "is", "hmi"];

#[derive(Debug, Clone)]
pub struct CbgFrame {
    /// Sorted CBG ids retained in the frame.
    pub ids: Vec<String>,
    /// Recovery rate per retained CBG (raw, unscaled).
    pub rr: Vec<f64>,
    /// Raw regressor columns, in [`ALL_VARIABLE_NAMES`] order.
    pub columns: Vec<(String, Vec<f64>)>,
    /// (cbg_id, reason) for every excluded CBG.
    pub excluded: Vec<(String, String)>,
}

impl CbgFrame {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<&[f64], FrameError> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
            .ok_or_else(|| FrameError::UnknownVariable(name.to_string()))
    }

    /// Subset of columns by name, preserving frame order.
    pub fn select(&self, names: &[String]) -> Result<Vec<(String, Vec<f64>)>, FrameError> {
        names
            .iter()
            .map(|name| {
                self.column(name)
                    .map(|c| (name.clone(), c.to_vec()))
            })
            .collect()
    }

    /// Min-max scale every regressor column and the outcome.
    ///
    /// Returns the scaled frame plus the names of degenerate (constant)
    /// columns, which map to all zeros.
    pub fn scaled(&self) -> (CbgFrame, Vec<String>) {
        let mut degenerate = Vec::new();
        let rr_scaled = min_max_scale(&self.rr).expect("nonempty frame");
        if rr_scaled.degenerate {
            degenerate.push("rr".to_string());
        }
        let columns = self
            .columns
            .iter()
            .map(|(name, col)| {
                let s = min_max_scale(col).expect("nonempty frame");
                if s.degenerate {
                    degenerate.push(name.clone());
                }
                (name.clone(), s.values)
            })
            .collect();
        (
            CbgFrame {
                ids: self.ids.clone(),
                rr: rr_scaled.values,
                columns,
                excluded: self.excluded.clone(),
            },
            degenerate,
        )
    }

    /// Per-variable (min, max, mean, sd) over raw values, outcome first.
    pub fn descriptive_stats(&self) -> Vec<(String, f64, f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.columns.len() + 1);
        let describe = |name: &str, values: &[f64]| {
            let n = values.len() as f64;
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = values.iter().sum::<f64>() / n;
            let sd = if values.len() < 2 {
                0.0
            } else {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            (name.to_string(), min, max, mean, sd)
        };
        out.push(describe("rr", &self.rr));
        for (name, col) in &self.columns {
            out.push(describe(name, col));
        }
        out
    }
}

/// Assemble the regression frame from index-aligned stage outputs.
///
/// A CBG is retained only when its recovery extraction succeeded and all six
/// control variables are defined; every exclusion carries a reason.
pub fn build_frame(
    index: &CbgIndex,
    damage: &[CbgDamage],
    recoveries: &[RecoveryResult],
    controls: &[ControlVariables],
) -> Result<CbgFrame, FrameError> {
    let n = index.len();
    if damage.len() != n || recoveries.len() != n || controls.len() != n {
        return Err(FrameError::Misaligned(format!(
            "index {n}, damage {}, recoveries {}, controls {}",
            damage.len(),
            recoveries.len(),
            controls.len()
        )));
    }

    let mut ids = Vec::new();
    let mut rr = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); ALL_VARIABLE_NAMES.len()];
    let mut excluded = Vec::new();

    for i in 0..n {
        let id = index.id(i).to_string();
        let rec = &recoveries[i];
        if rec.status != RecoveryStatus::Recovered {
            excluded.push((id, format!("status {}", rec.status.as_str())));
            continue;
        }
        let Some(rate) = rec.recovery_rate else {
            excluded.push((id, "recovery rate undefined".to_string()));
            continue;
        };
        let c = &controls[i];
        let control_values = [c.pop, c.rd, c.poi, c.ms, c.is, c.hmi];
        let control_order = ["pop", "rd", "poi", "ms", "is", "hmi"];
        if let Some(missing) = control_order
            .iter()
            .zip(&control_values)
            .find(|(_, v)| v.is_none())
        {
            excluded.push((id, format!("control '{}' undefined", missing.0)));
            continue;
        }

        ids.push(id);
        rr.push(rate);
        let d = &damage[i];
        let values = [
            d.nc,
            d.mp,
            d.sdp,
            d.mdp,
            c.pop.expect("checked"),
            c.rd.expect("checked"),
            c.poi.expect("checked"),
            c.ms.expect("checked"),
            c.is.expect("checked"),
            c.hmi.expect("checked"),
        ];
        for (col, v) in cols.iter_mut().zip(values) {
            col.push(v);
        }
    }

    if ids.is_empty() {
        return Err(FrameError::Empty);
    }
    let columns = ALL_VARIABLE_NAMES
        .iter()
        .zip(cols)
        .map(|(name, col)| (name.to_string(), col))
        .collect();
    Ok(CbgFrame {
        ids,
        rr,
        columns,
        excluded,
    })
}
