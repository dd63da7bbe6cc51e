//! Control variables: density features, dissimilarity-index segregation,
//! mobility activity index, and the min-max scaling shared by the pipeline.

use crate::ingest::{CbgIndex, CensusRecord, StopRecord};
use crate::mobility::HomeAssignment;
use chrono::NaiveDate;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CovariateError {
    #[error("dissimilarity index undefined: zero total in {0} group")]
    ZeroGroupTotal(&'static str),
    #[error("land area must be positive, got {0}")]
    ZeroLandArea(f64),
    #[error("scaling needs at least one value")]
    EmptyVector,
    #[error("mobility index needs at least 2 CBGs")]
    TooFewCbgs,
}

/// Focus/reference counts per subunit for a dissimilarity index.
#[derive(Debug, Clone, Default)]
pub struct GroupCounts {
    /// (focus_count, reference_count) per subunit.
    pub subunits: Vec<(f64, f64)>,
}

impl GroupCounts {
    pub fn totals(&self) -> (f64, f64) {
        self.subunits
            .iter()
            .fold((0.0, 0.0), |(x, y), (xi, yi)| (x + xi, y + yi))
    }
}

/// DI = 1/2 * sum_i |x_i/X - y_i/Y|; 0 is perfect evenness, 1 complete
/// separation. Errors when either group total is zero.
pub fn dissimilarity_index(groups: &GroupCounts) -> Result<f64, CovariateError> {
    let (total_x, total_y) = groups.totals();
    if total_x <= 0.0 {
        return Err(CovariateError::ZeroGroupTotal("focus"));
    }
    if total_y <= 0.0 {
        return Err(CovariateError::ZeroGroupTotal("reference"));
    }
    let sum: f64 = groups
        .subunits
        .iter()
        .map(|(x, y)| (x / total_x - y / total_y).abs())
        .sum();
    Ok(0.5 * sum)
}

/// Min-max scaled vector plus a degeneracy flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaled {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// True when the input was constant; values are then all zero.
    pub degenerate: bool,
}

/// (x - min) / (max - min). A constant vector maps to all zeros with the
/// degenerate flag set so callers can warn instead of dividing by zero.
pub fn min_max_scale(values: &[f64]) -> Result<Scaled, CovariateError> {
    if values.is_empty() {
        return Err(CovariateError::EmptyVector);
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(Scaled {
            values: vec![0.0; values.len()],
            min,
            max,
            degenerate: true,
        });
    }
    let range = max - min;
    Ok(Scaled {
        values: values.iter().map(|v| (v - min) / range).collect(),
        min,
        max,
        degenerate: false,
    })
}

/// count / land_area, guarding zero areas.
pub fn density(count: f64, land_area_sqmi: f64) -> Result<f64, CovariateError> {
    if land_area_sqmi <= 0.0 {
        return Err(CovariateError::ZeroLandArea(land_area_sqmi));
    }
    Ok(count / land_area_sqmi)
}

/// Visits into each CBG during [window_start, window_end]: stops of at least
/// `visit_dwell_hours` made in a CBG other than the device's home.
/// Devices with no home assignment are skipped.
pub fn visit_counts(
    stops: &[StopRecord],
    homes: &HomeAssignment,
    index: &CbgIndex,
    window_start: NaiveDate,
    window_end: NaiveDate,
    visit_dwell_hours: f64,
) -> Vec<f64> {
    let mut counts = vec![0.0; index.len()];
    for stop in stops {
        let Some(&home) = homes.home.get(&stop.device_id) else {
            continue;
        };
        let Some(cbg) = index.index_of(&stop.cbg_id) else {
            continue;
        };
        let date = stop.start.date();
        if date < window_start || date > window_end {
            continue;
        }
        if cbg != home && stop.dwell_hours >= visit_dwell_hours {
            counts[cbg] += 1.0;
        }
    }
    counts
}

/// Mean daily visits per CBG over `days`, then min-max scaled across CBGs.
/// Returns the scaled values plus the raw (pre-scaling) index.
pub fn human_mobility_index(
    visit_counts: &[f64],
    days: f64,
) -> Result<(Scaled, Vec<f64>), CovariateError> {
    if visit_counts.len() < 2 {
        return Err(CovariateError::TooFewCbgs);
    }
    let raw: Vec<f64> = visit_counts.iter().map(|v| v / days).collect();
    let scaled = min_max_scale(&raw)?;
    Ok((scaled, raw))
}

/// The six control variables for one CBG. None marks a variable that could
/// not be computed (the CBG is later excluded from regression frames).
#[derive(Debug, Clone, Default)]
pub struct ControlVariables {
    pub pop: Option<f64>,
    pub ms: Option<f64>,
    pub is: Option<f64>,
    pub hmi: Option<f64>,
    pub poi: Option<f64>,
    pub rd: Option<f64>,
}

pub const CONTROL_NAMES: [&str; 6] = ["pop", "ms", "is", "hmi", "poi", "rd"];

/// Assemble all six control variables, index-aligned.
///
/// Segregation indices are computed per census tract over its member CBGs
/// and assigned to each member: minority = non-Hispanic Black + Asian vs
/// non-Hispanic White; income = bottom two quartile groups vs top two.
/// Tracts with a zero group total leave the index undefined for their CBGs.
pub fn build_controls(
    index: &CbgIndex,
    census: &[CensusRecord],
    poi_counts: &HashMap<String, f64>,
    road_counts: &HashMap<String, f64>,
    hmi_scaled: &Scaled,
) -> Vec<ControlVariables> {
    let mut controls: Vec<ControlVariables> = vec![ControlVariables::default(); index.len()];

    // Tract membership from census rows present in the index.
    let mut tracts: HashMap<&str, Vec<&CensusRecord>> = HashMap::new();
    for rec in census {
        if index.index_of(&rec.cbg_id).is_some() {
            tracts.entry(&rec.tract_id).or_default().push(rec);
        }
    }

    for members in tracts.values() {
        let minority = GroupCounts {
            subunits: members
                .iter()
                .map(|r| (r.pop_nhblack + r.pop_nhasian, r.pop_nhwhite))
                .collect(),
        };
        let income = GroupCounts {
            subunits: members
                .iter()
                .map(|r| (r.income_q[0] + r.income_q[1], r.income_q[2] + r.income_q[3]))
                .collect(),
        };
        let ms = dissimilarity_index(&minority).ok();
        let is = dissimilarity_index(&income).ok();
        for rec in members {
            let i = index.index_of(&rec.cbg_id).expect("membership checked");
            controls[i].ms = ms;
            controls[i].is = is;
        }
    }

    for rec in census {
        if let Some(i) = index.index_of(&rec.cbg_id) {
            controls[i].pop = density(rec.pop_total, index.land_area_sqmi(i)).ok();
        }
    }
    for i in 0..index.len() {
        let id = index.id(i);
        let poi = poi_counts.get(id).copied().unwrap_or(0.0);
        let rd = road_counts.get(id).copied().unwrap_or(0.0);
        controls[i].poi = density(poi, index.land_area_sqmi(i)).ok();
        controls[i].rd = density(rd, index.land_area_sqmi(i)).ok();
        controls[i].hmi = Some(hmi_scaled.values[i]);
    }
    controls
}
