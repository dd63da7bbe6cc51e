//! Mobility-derived recovery: home detection, daily movement rates, weekly
//! baselines, percent change, steady-state detection, and recovery rates.

use crate::ingest::{CbgIndex, StopRecord};
use chrono::{Datelike, NaiveDate, Weekday};
use rayon::prelude::*;
use std::collections::HashMap;
use thiserror::Error;

/// Dwell above which a stop marks its CBG as the device's home.
pub const DEFAULT_HOME_DWELL_HOURS: f64 = 24.0;
/// Dwell at or above which a stop in a non-home CBG counts as a visit.
pub const DEFAULT_VISIT_DWELL_HOURS: f64 = 4.0;
/// Consecutive-day percent-change tolerance defining the new steady state.
pub const DEFAULT_STEADY_TOL: f64 = 0.10;
/// A series whose deepest percent-change dip stays above -floor never
/// experienced a meaningful perturbation.
pub const DEFAULT_PERTURBATION_FLOOR: f64 = 0.05;
/// Interior gaps in the movement series longer than this censor the CBG.
pub const MAX_INTERPOLATED_GAP_DAYS: usize = 2;

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("no stops supplied")]
    NoStops,
    #[error("baseline window has no occurrence of {0}")]
    MissingWeekday(Weekday),
    #[error("window is empty or reversed: {0}..{1}")]
    BadWindow(NaiveDate, NaiveDate),
    #[error("series for cbg index {0} does not cover the requested window")]
    WindowOutOfRange(usize),
}

/// device_id -> home CBG index.
#[derive(Debug, Clone, Default)]
pub struct HomeAssignment {
    pub home: HashMap<String, usize>,
}

/// Assign each device the CBG where it has a stop longer than
/// `home_dwell_hours`. Ties across qualifying CBGs go to the greatest
/// cumulative dwell, then the smallest cbg_id. Devices with no qualifying
/// stop are excluded.
pub fn detect_home_cbgs(
    stops: &[StopRecord],
    index: &CbgIndex,
    home_dwell_hours: f64,
) -> Result<HomeAssignment, MobilityError> {
    if stops.is_empty() {
        return Err(MobilityError::NoStops);
    }
    // device -> cbg -> (cumulative dwell, has qualifying stop)
    let mut per_device: HashMap<&str, HashMap<usize, (f64, bool)>> = HashMap::new();
    for stop in stops {
        let Some(cbg) = index.index_of(&stop.cbg_id) else {
            continue;
        };
        let entry = per_device
            .entry(&stop.device_id)
            .or_default()
            .entry(cbg)
            .or_insert((0.0, false));
        entry.0 += stop.dwell_hours;
        if stop.dwell_hours > home_dwell_hours {
            entry.1 = true;
        }
    }
    let mut home = HashMap::new();
    for (device, cbgs) in per_device {
        let mut best: Option<(usize, f64)> = None;
        for (&cbg, &(cumulative, qualifies)) in &cbgs {
            if !qualifies {
                continue;
            }
            best = match best {
                None => Some((cbg, cumulative)),
                Some((bc, bd)) => {
                    if cumulative > bd || (cumulative == bd && index.id(cbg) < index.id(bc)) {
                        Some((cbg, cumulative))
                    } else {
                        Some((bc, bd))
                    }
                }
            };
        }
        if let Some((cbg, _)) = best {
            home.insert(device.to_string(), cbg);
        }
    }
    Ok(HomeAssignment { home })
}

/// Daily movement rates for one home CBG over a contiguous date range.
#[derive(Debug, Clone)]
pub struct MovementSeries {
    pub cbg: usize,
    pub start: NaiveDate,
    /// One entry per day; None when no resident device was observed.
    pub mr: Vec<Option<f64>>,
    pub residents_observed: Vec<u32>,
}

impl MovementSeries {
    pub fn date(&self, offset: usize) -> NaiveDate {
        self.start + chrono::Days::new(offset as u64)
    }

    pub fn len(&self) -> usize {
        self.mr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mr.is_empty()
    }

    fn offset_of(&self, date: NaiveDate) -> Option<usize> {
        let days = (date - self.start).num_days();
        if days < 0 || days as usize >= self.mr.len() {
            None
        } else {
            Some(days as usize)
        }
    }
}

/// Movement rate per home CBG per day over [window_start, window_end].
///
/// MR = (resident devices with a visit of dwell >= `visit_dwell_hours` in a
/// different CBG that day) / (resident devices observed that day). Days with
/// zero observed residents are gaps.
pub fn compute_daily_movement(
    stops: &[StopRecord],
    homes: &HomeAssignment,
    index: &CbgIndex,
    window_start: NaiveDate,
    window_end: NaiveDate,
    visit_dwell_hours: f64,
) -> Result<Vec<MovementSeries>, MobilityError> {
    if window_end < window_start {
        return Err(MobilityError::BadWindow(window_start, window_end));
    }
    let n_days = (window_end - window_start).num_days() as usize + 1;

    // (device, day) -> (observed, moved); keyed by home CBG.
    #[derive(Default, Clone)]
    struct DayFlags {
        observed: bool,
        moved: bool,
    }
    let mut flags: HashMap<(usize, &str), Vec<DayFlags>> = HashMap::new();
    for stop in stops {
        let Some(&home) = homes.home.get(&stop.device_id) else {
            continue;
        };
        let date = stop.start.date();
        if date < window_start || date > window_end {
            continue;
        }
        let day = (date - window_start).num_days() as usize;
        let Some(stop_cbg) = index.index_of(&stop.cbg_id) else {
            continue;
        };
        let entry = flags
            .entry((home, &stop.device_id))
            .or_insert_with(|| vec![DayFlags::default(); n_days]);
        entry[day].observed = true;
        if stop_cbg != home && stop.dwell_hours >= visit_dwell_hours {
            entry[day].moved = true;
        }
    }

    let mut residents: Vec<Vec<u32>> = vec![vec![0; n_days]; index.len()];
    let mut movers: Vec<Vec<u32>> = vec![vec![0; n_days]; index.len()];
    for ((home, _device), days) in &flags {
        for (d, f) in days.iter().enumerate() {
            if f.observed {
                residents[*home][d] += 1;
                if f.moved {
                    movers[*home][d] += 1;
                }
            }
        }
    }

    Ok((0..index.len())
        .map(|cbg| {
            let mr = (0..n_days)
                .map(|d| {
                    let obs = residents[cbg][d];
                    if obs == 0 {
                        None
                    } else {
                        Some(movers[cbg][d] as f64 / obs as f64)
                    }
                })
                .collect();
            MovementSeries {
                cbg,
                start: window_start,
                mr,
                residents_observed: residents[cbg].clone(),
            }
        })
        .collect())
}

/// Weekly baseline: mean movement rate per weekday over the baseline window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    /// Indexed by Weekday::num_days_from_monday().
    pub by_weekday: [f64; 7],
}

impl Baseline {
    pub fn for_date(&self, date: NaiveDate) -> f64 {
        self.by_weekday[date.weekday().num_days_from_monday() as usize]
    }

    pub fn mean(&self) -> f64 {
        self.by_weekday.iter().sum::<f64>() / 7.0
    }
}

/// Mean MR per weekday inside [window_start, window_end].
/// Errors if some weekday never occurs with an observed rate.
pub fn compute_baseline(
    series: &MovementSeries,
    window_start: NaiveDate,
    window_end: NaiveDate,
) -> Result<Baseline, MobilityError> {
    if window_end < window_start {
        return Err(MobilityError::BadWindow(window_start, window_end));
    }
    let mut sums = [0.0f64; 7];
    let mut counts = [0u32; 7];
    let mut date = window_start;
    while date <= window_end {
        if let Some(offset) = series.offset_of(date) {
            if let Some(mr) = series.mr[offset] {
                let w = date.weekday().num_days_from_monday() as usize;
                sums[w] += mr;
                counts[w] += 1;
            }
        }
        date += chrono::Duration::days(1);
    }
    let mut by_weekday = [0.0f64; 7];
    for w in 0..7 {
        if counts[w] == 0 {
            let weekday = match w {
                0 => Weekday::Mon,
                1 => Weekday::Tue,
                2 => Weekday::Wed,
                3 => Weekday::Thu,
                4 => Weekday::Fri,
                5 => Weekday::Sat,
                _ => Weekday::Sun,
            };
            return Err(MobilityError::MissingWeekday(weekday));
        }
        by_weekday[w] = sums[w] / counts[w] as f64;
    }
    Ok(Baseline { by_weekday })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStatus {
    Recovered,
    NoPerturbation,
    Censored,
}

impl RecoveryStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecoveryStatus::Recovered => "recovered",
            RecoveryStatus::NoPerturbation => "no_perturbation",
            RecoveryStatus::Censored => "censored",
        }
    }
}

/// Recovery extraction for one CBG.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub cbg: usize,
    pub status: RecoveryStatus,
    /// Date of the percent-change minimum (perturbation trough).
    pub t_s: Option<NaiveDate>,
    /// First post-trough date satisfying the steady-state rule.
    pub t_n: Option<NaiveDate>,
    /// Percent-change units per day; defined only when recovered.
    pub recovery_rate: Option<f64>,
    /// Diagnostic: PC at t_n minus the percent-change level of 90% of the
    /// mean baseline. Not used in the rate itself.
    pub recovery_extent: Option<f64>,
    /// Percent change per day of the event window (None at unfilled gaps).
    pub pc: Vec<Option<f64>>,
    pub window_start: NaiveDate,
}

/// Trough/steady-state extraction on a raw percent-change path.
///
/// Returns (t_s offset, t_n offset, rate) or None when no steady state is
/// reached. The trough is the first occurrence of the window minimum; the
/// steady state is the first later day whose change from the previous day is
/// at most `steady_tol` in absolute value.
pub fn extract_recovery_from_pc(pc: &[f64], steady_tol: f64) -> Option<(usize, usize, f64)> {
    if pc.is_empty() {
        return None;
    }
    let mut t_s = 0;
    for (i, &v) in pc.iter().enumerate() {
        if v < pc[t_s] {
            t_s = i;
        }
    }
    for t in (t_s + 1)..pc.len() {
        if (pc[t] - pc[t - 1]).abs() <= steady_tol {
            let rate = (pc[t] - pc[t_s]) / (t - t_s) as f64;
            return Some((t_s, t, rate));
        }
    }
    None
}

/// Full recovery extraction for one CBG over the event window.
///
/// Percent change is (MR - BL)/BL per day. Interior gaps of at most
/// `MAX_INTERPOLATED_GAP_DAYS` days are linearly interpolated on MR; longer
/// or edge gaps censor the CBG, as does a zero baseline for any weekday
/// appearing in the window.
pub fn compute_recovery_rate(
    series: &MovementSeries,
    baseline: &Baseline,
    event_start: NaiveDate,
    event_end: NaiveDate,
    steady_tol: f64,
    perturbation_floor: f64,
) -> Result<RecoveryResult, MobilityError> {
    if event_end < event_start {
        return Err(MobilityError::BadWindow(event_start, event_end));
    }
    let start_off = series
        .offset_of(event_start)
        .ok_or(MobilityError::WindowOutOfRange(series.cbg))?;
    let end_off = series
        .offset_of(event_end)
        .ok_or(MobilityError::WindowOutOfRange(series.cbg))?;

    let censored = |pc: Vec<Option<f64>>| RecoveryResult {
        cbg: series.cbg,
        status: RecoveryStatus::Censored,
        t_s: None,
        t_n: None,
        recovery_rate: None,
        recovery_extent: None,
        pc,
        window_start: event_start,
    };

    // Fill interior gaps on MR.
    let raw: Vec<Option<f64>> = series.mr[start_off..=end_off].to_vec();
    let Some(mr) = interpolate_gaps(&raw, MAX_INTERPOLATED_GAP_DAYS) else {
        return Ok(censored(vec![None; raw.len()]));
    };

    let mut pc = Vec::with_capacity(mr.len());
    for (i, &m) in mr.iter().enumerate() {
        let bl = baseline.for_date(event_start + chrono::Days::new(i as u64));
        if bl == 0.0 {
            return Ok(censored(vec![None; mr.len()]));
        }
        pc.push((m - bl) / bl);
    }

    let min_pc = pc.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_pc > -perturbation_floor {
        return Ok(RecoveryResult {
            cbg: series.cbg,
            status: RecoveryStatus::NoPerturbation,
            t_s: None,
            t_n: None,
            recovery_rate: None,
            recovery_extent: None,
            pc: pc.iter().map(|&v| Some(v)).collect(),
            window_start: event_start,
        });
    }

    match extract_recovery_from_pc(&pc, steady_tol) {
        Some((s, n, rate)) => {
            // The percent-change level of 90% of the mean baseline is -0.1 by
            // construction of Eq-style normalization; kept explicit anyway.
            let bl_mean = baseline.mean();
            let reference_level = (0.9 * bl_mean - bl_mean) / bl_mean;
            Ok(RecoveryResult {
                cbg: series.cbg,
                status: RecoveryStatus::Recovered,
                t_s: Some(event_start + chrono::Days::new(s as u64)),
                t_n: Some(event_start + chrono::Days::new(n as u64)),
                recovery_rate: Some(rate),
                recovery_extent: Some(pc[n] - reference_level),
                pc: pc.iter().map(|&v| Some(v)).collect(),
                window_start: event_start,
            })
        }
        None => Ok(RecoveryResult {
            status: RecoveryStatus::Censored,
            pc: pc.iter().map(|&v| Some(v)).collect(),
            ..censored(Vec::new())
        }),
    }
}

/// Run recovery extraction for every CBG in parallel.
#[allow(clippy::too_many_arguments)]
pub fn compute_all_recoveries(
    series: &[MovementSeries],
    baseline_start: NaiveDate,
    baseline_end: NaiveDate,
    event_start: NaiveDate,
    event_end: NaiveDate,
    steady_tol: f64,
    perturbation_floor: f64,
) -> Vec<(RecoveryResult, Option<Baseline>)> {
    series
        .par_iter()
        .map(|s| {
            let censored = RecoveryResult {
                cbg: s.cbg,
                status: RecoveryStatus::Censored,
                t_s: None,
                t_n: None,
                recovery_rate: None,
                recovery_extent: None,
                pc: Vec::new(),
                window_start: event_start,
            };
            match compute_baseline(s, baseline_start, baseline_end) {
                Ok(bl) => {
                    let result = compute_recovery_rate(
                        s,
                        &bl,
                        event_start,
                        event_end,
                        steady_tol,
                        perturbation_floor,
                    )
                    .unwrap_or(censored);
                    (result, Some(bl))
                }
                Err(_) => (censored, None),
            }
        })
        .collect()
}

/// Linear interpolation of interior gaps up to `max_gap` days.
/// Returns None when a gap is too long or touches either edge.
fn interpolate_gaps(values: &[Option<f64>], max_gap: usize) -> Option<Vec<f64>> {
    if values.is_empty() || values[0].is_none() || values[values.len() - 1].is_none() {
        return None;
    }
    let mut out = Vec::with_capacity(values.len());
    let mut i = 0;
    while i < values.len() {
        match values[i] {
            Some(v) => {
                out.push(v);
                i += 1;
            }
            None => {
                let gap_start = i;
                while values[i].is_none() {
                    i += 1;
                }
                let gap_len = i - gap_start;
                if gap_len > max_gap {
                    return None;
                }
                let left = out[gap_start - 1];
                let right = values[i].expect("gap is interior");
                for k in 0..gap_len {
                    let frac = (k + 1) as f64 / (gap_len + 1) as f64;
                    out.push(left + (right - left) * frac);
                }
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CbgIndex;

    fn index() -> CbgIndex {
        CbgIndex::new(
            vec![
                ("A".into(), 0.0, 0.0, 1.0),
                ("B".into(), 0.1, 0.0, 1.0),
                ("C".into(), 0.2, 0.0, 1.0),
            ],
            &[],
        )
        .unwrap()
    }

    fn stop(device: &str, cbg: &str, day: u32, hour: u32, dwell: f64) -> StopRecord {
        StopRecord {
            device_id: device.into(),
            cbg_id: cbg.into(),
            start: NaiveDate::from_ymd_opt(2017, 8, day)
                .unwrap()
                .and_hms_opt(hour, 0, 0)
                .unwrap(),
            dwell_hours: dwell,
        }
    }

    #[test]
    fn single_qualifying_stop_sets_home() {
        let idx = index();
        let stops = vec![stop("d1", "A", 1, 0, 26.0)];
        let homes = detect_home_cbgs(&stops, &idx, 24.0).unwrap();
        assert_eq!(homes.home["d1"], idx.index_of("A").unwrap());
    }

    #[test]
    fn home_tie_breaks_on_cumulative_dwell() {
        let idx = index();
        let stops = vec![
            stop("d1", "A", 1, 0, 26.0),
            stop("d1", "B", 2, 0, 25.0),
            stop("d1", "B", 3, 0, 15.0), // cumulative B = 40 > A = 26
        ];
        let homes = detect_home_cbgs(&stops, &idx, 24.0).unwrap();
        assert_eq!(homes.home["d1"], idx.index_of("B").unwrap());
    }

    #[test]
    fn device_below_threshold_is_excluded() {
        let idx = index();
        let stops = vec![stop("d1", "A", 1, 0, 20.0), stop("d2", "B", 1, 0, 30.0)];
        let homes = detect_home_cbgs(&stops, &idx, 24.0).unwrap();
        assert!(!homes.home.contains_key("d1"));
        assert!(homes.home.contains_key("d2"));
    }

    #[test]
    fn movement_rate_counts_qualifying_visits() {
        let idx = index();
        let a = idx.index_of("A").unwrap();
        // 10 residents of A; 6 visit B for >= 4h on Aug 7; 1 more makes only
        // a 3h external stop, so it is observed but not moving.
        let mut stops = Vec::new();
        for d in 0..10 {
            stops.push(stop(&format!("d{d}"), "A", 1, 0, 30.0)); // homes
            stops.push(stop(&format!("d{d}"), "A", 7, 0, 2.0)); // observed
        }
        for d in 0..6 {
            stops.push(stop(&format!("d{d}"), "B", 7, 8, 4.0));
        }
        stops.push(stop("d6", "B", 7, 8, 3.0)); // below visit threshold
        let homes = detect_home_cbgs(&stops, &idx, 24.0).unwrap();
        let series = compute_daily_movement(
            &stops,
            &homes,
            &idx,
            NaiveDate::from_ymd_opt(2017, 8, 1).unwrap(),
            NaiveDate::from_ymd_opt(2017, 8, 7).unwrap(),
            4.0,
        )
        .unwrap();
        let day = 6; // Aug 7
        assert_eq!(series[a].residents_observed[day], 10);
        assert_eq!(series[a].mr[day], Some(0.6));
    }

    #[test]
    fn all_residents_home_gives_zero_rate() {
        let idx = index();
        let a = idx.index_of("A").unwrap();
        let stops = vec![stop("d1", "A", 1, 0, 30.0), stop("d1", "A", 2, 0, 8.0)];
        let homes = detect_home_cbgs(&stops, &idx, 24.0).unwrap();
        let series = compute_daily_movement(
            &stops,
            &homes,
            &idx,
            NaiveDate::from_ymd_opt(2017, 8, 2).unwrap(),
            NaiveDate::from_ymd_opt(2017, 8, 2).unwrap(),
            4.0,
        )
        .unwrap();
        assert_eq!(series[a].mr[0], Some(0.0));
    }

    fn series_from(mr: &[Option<f64>], start: NaiveDate) -> MovementSeries {
        MovementSeries {
            cbg: 0,
            start,
            mr: mr.to_vec(),
            residents_observed: vec![1; mr.len()],
        }
    }

    #[test]
    fn baseline_is_weekday_mean() {
        // Aug 1 2017 is a Tuesday; window Aug 1-21 holds exactly 3 of each.
        let start = NaiveDate::from_ymd_opt(2017, 8, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2017, 8, 21).unwrap();
        let mut mr = vec![Some(0.4); 21];
        // Mondays fall on Aug 7, 14, 21 -> offsets 6, 13, 20.
        mr[6] = Some(0.50);
        mr[13] = Some(0.52);
        mr[20] = Some(0.48);
        let series = series_from(&mr, start);
        let bl = compute_baseline(&series, start, end).unwrap();
        assert!((bl.by_weekday[0] - 0.50).abs() < 1e-15);
        assert!((bl.by_weekday[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn constant_series_baseline_is_constant() {
        let start = NaiveDate::from_ymd_opt(2017, 8, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2017, 8, 21).unwrap();
        let series = series_from(&vec![Some(0.4); 21], start);
        let bl = compute_baseline(&series, start, end).unwrap();
        for w in 0..7 {
            assert!((bl.by_weekday[w] - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_weekday_errors() {
        let start = NaiveDate::from_ymd_opt(2017, 8, 1).unwrap();
        let series = series_from(&vec![Some(0.4); 3], start);
        let err = compute_baseline(&series, start, start + chrono::Days::new(2)).unwrap_err();
        assert!(matches!(err, MobilityError::MissingWeekday(_)));
    }

    #[test]
    fn worked_pc_path_recovers_at_expected_rate() {
        let pc = [0.0, -0.2, -0.6, -0.4, -0.25, -0.18];
        let (t_s, t_n, rate) = extract_recovery_from_pc(&pc, 0.10).unwrap();
        assert_eq!(t_s, 2);
        assert_eq!(t_n, 5);
        // (-0.18 - (-0.6)) / 3: exact up to f64 representation of 0.14.
        assert!((rate - 0.14).abs() < 1e-15, "rate {rate}");
    }

    #[test]
    fn flat_path_is_no_perturbation() {
        let start = NaiveDate::from_ymd_opt(2017, 8, 25).unwrap();
        let series = series_from(&vec![Some(0.4); 10], start);
        let bl = Baseline { by_weekday: [0.4; 7] };
        let result = compute_recovery_rate(
            &series,
            &bl,
            start,
            start + chrono::Days::new(9),
            0.10,
            DEFAULT_PERTURBATION_FLOOR,
        )
        .unwrap();
        assert_eq!(result.status, RecoveryStatus::NoPerturbation);
        assert!(result.recovery_rate.is_none());
    }

    #[test]
    fn oscillating_path_is_censored() {
        let start = NaiveDate::from_ymd_opt(2017, 8, 25).unwrap();
        // MR alternating 0.1/0.4 around BL 0.4: PC alternates -0.75/0, every
        // consecutive diff 0.75 > 0.10.
        let mr: Vec<Option<f64>> = (0..10)
            .map(|i| Some(if i % 2 == 0 { 0.1 } else { 0.4 }))
            .collect();
        let series = series_from(&mr, start);
        let bl = Baseline { by_weekday: [0.4; 7] };
        let result = compute_recovery_rate(
            &series,
            &bl,
            start,
            start + chrono::Days::new(9),
            0.10,
            DEFAULT_PERTURBATION_FLOOR,
        )
        .unwrap();
        assert_eq!(result.status, RecoveryStatus::Censored);
    }

    #[test]
    fn zero_baseline_censors() {
        let start = NaiveDate::from_ymd_opt(2017, 8, 25).unwrap();
        let series = series_from(&vec![Some(0.4); 7], start);
        let bl = Baseline { by_weekday: [0.0; 7] };
        let result =
            compute_recovery_rate(&series, &bl, start, start + chrono::Days::new(6), 0.10, 0.05)
                .unwrap();
        assert_eq!(result.status, RecoveryStatus::Censored);
    }

    #[test]
    fn short_gap_interpolates_long_gap_censors() {
        assert_eq!(
            interpolate_gaps(&[Some(0.0), None, Some(1.0)], 2),
            Some(vec![0.0, 0.5, 1.0])
        );
        assert_eq!(
            interpolate_gaps(&[Some(0.0), None, None, None, Some(1.0)], 2),
            None
        );
        assert_eq!(interpolate_gaps(&[None, Some(1.0)], 2), None);
    }

    #[test]
    fn scaling_mr_and_bl_leaves_recovery_unchanged() {
        let start = NaiveDate::from_ymd_opt(2017, 8, 25).unwrap();
        let base_mr = [0.5, 0.4, 0.2, 0.3, 0.37, 0.41, 0.42];
        for scale in [1.0, 2.0, 0.125] {
            let mr: Vec<Option<f64>> = base_mr.iter().map(|&m| Some(m * scale)).collect();
            let series = series_from(&mr, start);
            let bl = Baseline {
                by_weekday: [0.5 * scale; 7],
            };
            let result = compute_recovery_rate(
                &series,
                &bl,
                start,
                start + chrono::Days::new(6),
                0.10,
                0.05,
            )
            .unwrap();
            assert_eq!(result.status, RecoveryStatus::Recovered);
            let reference = compute_recovery_rate(
                &series_from(
                    &base_mr.iter().map(|&m| Some(m)).collect::<Vec<_>>(),
                    start,
                ),
                &Baseline { by_weekday: [0.5; 7] },
                start,
                start + chrono::Days::new(6),
                0.10,
                0.05,
            )
            .unwrap();
            assert_eq!(result.t_s, reference.t_s);
            assert_eq!(result.t_n, reference.t_n);
            let (a, b) = (
                result.recovery_rate.unwrap(),
                reference.recovery_rate.unwrap(),
            );
            assert!((a - b).abs() < 1e-12, "scale {scale}: {a} vs {b}");
        }
    }
}
