//! Scenario realization: tables, stops, and the absorbing-column solve.

use super::{GroundTruth, Layout, MobilityParams, PlantedCoefficient, ScenarioSpec, SynthError};
use crate::covariates::{build_controls, human_mobility_index, min_max_scale, visit_counts};
use crate::damage::{fit_ia_nfip_bridge, BridgeModel};
use crate::geo::MILES_PER_DEGREE;
use crate::ingest::{
    CbgIndex, CensusRecord, ClaimRecord, ClaimSource, ParcelRecord, StopRecord,
};
use crate::mobility::{detect_home_cbgs, extract_recovery_from_pc};
use crate::spatial::{compute_decay_coefficients, DecayExposure};
use crate::weights::{build_weights, WeightScheme};
use chrono::{NaiveDate, NaiveDateTime};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::Normal;

/// Study calendar used by every generated scenario.
pub const HOME_ANCHOR_DATE: (i32, u32, u32) = (2017, 7, 3);
pub const HMI_WINDOW: ((i32, u32, u32), (i32, u32, u32)) = ((2017, 7, 4), (2017, 7, 31));
pub const BASELINE_WINDOW: ((i32, u32, u32), (i32, u32, u32)) = ((2017, 8, 1), (2017, 8, 21));
pub const EVENT_WINDOW: ((i32, u32, u32), (i32, u32, u32)) = ((2017, 8, 25), (2017, 9, 30));
pub const DIP_DATE: (i32, u32, u32) = (2017, 8, 27);

/// Anchor of the synthetic coordinate frame.
const BASE_LON: f64 = -95.8;
const BASE_LAT: f64 = 29.5;

/// Bounds the absorbing column must land in so damage extents stay in (0, 1).
const MP_MIN: f64 = 0.05;
const MP_MAX: f64 = 0.95;

/// Claim parcels carry this market value; a power of two makes
/// claim_value / market_value exact for any f64 damage extent.
const CLAIM_PARCEL_MARKET_VALUE: f64 = 131_072.0;

/// Reference bridge used when realizing uninsured-path claims.
const BRIDGE_INTERCEPT: f64 = 0.35;
const BRIDGE_SLOPE: f64 = 1.08;

pub fn date(d: (i32, u32, u32)) -> NaiveDate {
    NaiveDate::from_ymd_opt(d.0, d.1, d.2).expect("valid calendar date")
}

fn at_hour(d: NaiveDate, hour: u32, minute: u32) -> NaiveDateTime {
    d.and_hms_opt(hour, minute, 0).expect("valid time")
}

/// Independent deterministic stream per (channel, unit).
fn stream(seed: u64, channel: u32, unit: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((channel as u64) << 40) ^ unit);
    rng
}

/// Everything the pipeline needs, plus the truth to verify against.
#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    pub index: CbgIndex,
    pub parcels: Vec<ParcelRecord>,
    pub claims: Vec<ClaimRecord>,
    pub stops: Vec<StopRecord>,
    pub census: Vec<CensusRecord>,
    pub poi: Vec<(String, f64)>,
    pub roads: Vec<(String, f64)>,
    pub bridge_pairs: Vec<(f64, f64)>,
    pub truth: GroundTruth,
    /// Variable names of the planted relation, in canonical frame order.
    pub regressors: Vec<String>,
}

/// Per-CBG planted recovery trajectory in mover-count units.
struct Trajectory {
    /// Mover count per event-window day.
    movers: Vec<u32>,
    rr: f64,
}

fn plan_trajectory(
    rng: &mut ChaCha8Rng,
    mobility: &MobilityParams,
    event_days: usize,
    dip_offset: usize,
) -> Trajectory {
    let half = (mobility.devices_per_cbg / 2) as u32;
    if mobility.dip_depth == 0.0 {
        // Flat trajectory: movement never deviates from the baseline.
        return Trajectory {
            movers: vec![half; event_days],
            rr: 0.0,
        };
    }
    // Shallowest allowed level keeps the dip below the perturbation floor
    // with margin; deepest respects the configured dip depth.
    let margin = ((0.06 * half as f64).ceil() as u32).max(1);
    let shallowest = half - margin;
    let deepest = (((1.0 - mobility.dip_depth) * half as f64).ceil() as u32).min(shallowest);
    let m_s = rng.gen_range(deepest..=shallowest);
    let m_n = rng.gen_range(m_s..=shallowest);
    let total_rise = m_n - m_s;
    let max_rise = (total_rise as usize).min(mobility.max_rise_days);
    let rise_days = if max_rise == 0 {
        0
    } else {
        rng.gen_range(0..=max_rise)
    };

    let mut movers = vec![half; event_days];
    movers[dip_offset] = m_s;
    let mut level = m_s;
    for r in 0..rise_days {
        // Last rising day takes the remainder; earlier days rise by 1 unit.
        let step = if r + 1 == rise_days {
            total_rise - rise_days as u32 + 1
        } else {
            1
        };
        level += step;
        movers[dip_offset + 1 + r] = level;
    }
    for day in (dip_offset + 1 + rise_days)..event_days {
        movers[day] = m_n;
    }

    // Exact percent-change path as the pipeline computes it, then the same
    // extraction routine, so the planted rate is bit-identical downstream.
    let k = mobility.devices_per_cbg as f64;
    let pc: Vec<f64> = movers.iter().map(|&m| (m as f64 / k - 0.5) / 0.5).collect();
    let (t_s, _t_n, rr) =
        extract_recovery_from_pc(&pc, 0.10).expect("planted path reaches a steady state");
    debug_assert_eq!(t_s, dip_offset);
    Trajectory { movers, rr }
}

fn layout_points(spec: &ScenarioSpec) -> Vec<(f64, f64)> {
    let n = spec.n_cbgs;
    let extent = spec.layout.extent_miles();
    let dlat = extent / MILES_PER_DEGREE;
    let mid_lat = BASE_LAT + dlat / 2.0;
    let dlon = extent / (MILES_PER_DEGREE * mid_lat.to_radians().cos());
    match spec.layout {
        Layout::Lattice { .. } => {
            let side = (n as f64).sqrt().ceil() as usize;
            let steps = (side.max(2) - 1) as f64;
            (0..n)
                .map(|i| {
                    let r = i / side;
                    let c = i % side;
                    (
                        BASE_LON + dlon * c as f64 / steps,
                        BASE_LAT + dlat * r as f64 / steps,
                    )
                })
                .collect()
        }
        Layout::UniformCloud { .. } => {
            let mut taken = std::collections::HashSet::new();
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let mut rng = stream(spec.seed, 0, i as u64);
                loop {
                    let lon = BASE_LON + rng.gen_range(0.0..dlon);
                    let lat = BASE_LAT + rng.gen_range(0.0..dlat);
                    let key = ((lon * 1e7) as i64, (lat * 1e7) as i64);
                    if taken.insert(key) {
                        out.push((lon, lat));
                        break;
                    }
                }
            }
            out
        }
    }
}

/// In-memory planted regression data (no table realization): x columns drawn
/// uniform on [0, 1], y from the planted relation at the spillover radius.
/// Used for reach-sweep validation at scales where full table realization
/// would be wasteful.
pub struct PlantedSlx {
    pub index: CbgIndex,
    pub x: Vec<(String, Vec<f64>)>,
    pub y: Vec<f64>,
    pub radius_miles: f64,
}

pub fn planted_slx_data(
    seed: u64,
    n: usize,
    extent_miles: f64,
    radius_miles: f64,
    beta0: f64,
    coefficients: &[(&str, f64, f64)],
    noise_sigma: f64,
) -> Result<PlantedSlx, SynthError> {
    if n < 10 {
        return Err(SynthError::InvalidSpec("need at least 10 units".into()));
    }
    let spec_like = ScenarioSpec {
        seed,
        n_cbgs: n,
        layout: Layout::UniformCloud { extent_miles },
        beta0,
        coefficients: vec![PlantedCoefficient {
            name: "mp".into(),
            beta: 1.0,
            theta: 0.0,
        }],
        spillover_radius_miles: radius_miles,
        noise_sigma,
        mobility: MobilityParams::default(),
        max_claim_pairs: 1,
        ia_fraction: 0.0,
    };
    let points = layout_points(&spec_like);
    let rows: Vec<(String, f64, f64, f64)> = points
        .iter()
        .enumerate()
        .map(|(i, &(lon, lat))| (format!("G{i:04}"), lon, lat, 1.0))
        .collect();
    let index = CbgIndex::new(rows, &[])?;

    let mut x = Vec::new();
    for (v, (name, _, _)) in coefficients.iter().enumerate() {
        let col: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = stream(seed, 10 + v as u32, i as u64);
                rng.gen_range(0.0..1.0)
            })
            .collect();
        x.push((name.to_string(), col));
    }

    let w = build_weights(
        &index,
        WeightScheme::InverseDistanceThresholded {
            threshold_miles: radius_miles,
        },
    )?;
    let mut y = vec![beta0; n];
    for ((_, col), &(_, beta, theta)) in x.iter().zip(coefficients) {
        let lag = w.lag(col).expect("aligned");
        for i in 0..n {
            y[i] += beta * col[i] + theta * lag[i];
        }
    }
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("sigma > 0");
        for (i, yi) in y.iter_mut().enumerate() {
            let mut rng = stream(seed, 9, i as u64);
            *yi += rand::distributions::Distribution::sample(&normal, &mut rng);
        }
    }
    Ok(PlantedSlx {
        index,
        x,
        y,
        radius_miles,
    })
}

/// Generate the full input table set plus ground truth.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<GeneratedScenario, SynthError> {
    spec.validate()?;
    let n = spec.n_cbgs;
    let seed = spec.seed;

    // ── geometry ──────────────────────────────────────────────────────────
    let points = layout_points(spec);
    let cbg_rows: Vec<(String, f64, f64, f64)> = points
        .iter()
        .enumerate()
        .map(|(i, &(lon, lat))| (format!("G{i:04}"), lon, lat, 1.0))
        .collect();
    // 3-nearest neighbor graph, symmetrized, as the shared-boundary input.
    let provisional = CbgIndex::new(cbg_rows.clone(), &[])?;
    let knn = build_weights(&provisional, WeightScheme::Knn { k: 3 })?;
    let mut adjacency_pairs = Vec::new();
    for i in 0..n {
        for &(j, _) in knn.row(i) {
            let (a, b) = (i.min(j as usize), i.max(j as usize));
            adjacency_pairs.push((format!("G{a:04}"), format!("G{b:04}")));
        }
    }
    adjacency_pairs.sort();
    adjacency_pairs.dedup();
    let index = CbgIndex::new(cbg_rows, &adjacency_pairs)?;

    // ── census, poi, roads ───────────────────────────────────────────────
    let mut census = Vec::with_capacity(n);
    let mut poi = Vec::with_capacity(n);
    let mut roads = Vec::with_capacity(n);
    for i in 0..n {
        let id = index.id(i).to_string();
        let mut rng = stream(seed, 1, i as u64);
        let nhwhite = rng.gen_range(100..2_000) as f64;
        let nhblack = rng.gen_range(50..1_500) as f64;
        let nhasian = rng.gen_range(10..600) as f64;
        let other = rng.gen_range(0..400) as f64;
        let q: [f64; 4] = [
            rng.gen_range(20..400) as f64,
            rng.gen_range(20..400) as f64,
            rng.gen_range(20..400) as f64,
            rng.gen_range(20..400) as f64,
        ];
        census.push(CensusRecord {
            cbg_id: id.clone(),
            tract_id: format!("T{:03}", i / 4),
            pop_total: nhwhite + nhblack + nhasian + other,
            pop_nhwhite: nhwhite,
            pop_nhblack: nhblack,
            pop_nhasian: nhasian,
            income_q: q,
        });
        let mut rng = stream(seed, 2, i as u64);
        poi.push((id.clone(), rng.gen_range(0..60) as f64));
        roads.push((id, rng.gen_range(5..220) as f64));
    }

    // ── mobility stops and exact recovery rates ──────────────────────────
    let event_start = date(EVENT_WINDOW.0);
    let event_end = date(EVENT_WINDOW.1);
    let event_days = (event_end - event_start).num_days() as usize + 1;
    let dip_offset = (date(DIP_DATE) - event_start).num_days() as usize;
    let study_start = date(BASELINE_WINDOW.0);
    let study_end = event_end;

    let devices = spec.mobility.devices_per_cbg;
    let half = devices / 2;
    let mut stops: Vec<StopRecord> = Vec::new();
    let mut rr = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream(seed, 3, i as u64);
        let traj = plan_trajectory(&mut rng, &spec.mobility, event_days, dip_offset);
        rr.push(traj.rr);
        let home_id = index.id(i).to_string();
        let visit_target = index.id((i + 1) % n).to_string();
        for d in 0..devices {
            let device_id = format!("D-{home_id}-{d:03}");
            stops.push(StopRecord {
                device_id: device_id.clone(),
                cbg_id: home_id.clone(),
                start: at_hour(date(HOME_ANCHOR_DATE), 0, 0),
                dwell_hours: 25.0,
            });
            let mut day = study_start;
            while day <= study_end {
                stops.push(StopRecord {
                    device_id: device_id.clone(),
                    cbg_id: home_id.clone(),
                    start: at_hour(day, 0, 30),
                    dwell_hours: 2.0,
                });
                let movers_today = if day < event_start {
                    half as u32
                } else {
                    traj.movers[(day - event_start).num_days() as usize]
                };
                if (d as u32) < movers_today {
                    stops.push(StopRecord {
                        device_id: device_id.clone(),
                        cbg_id: visit_target.clone(),
                        start: at_hour(day, 9, 0),
                        dwell_hours: 5.0,
                    });
                }
                day += chrono::Duration::days(1);
            }
        }
    }

    // Activity visits in the pre-baseline window, driving the mobility index.
    let hmi_start = date(HMI_WINDOW.0);
    let hmi_days = (date(HMI_WINDOW.1) - hmi_start).num_days() as usize + 1;
    for j in 0..n {
        let mut rng = stream(seed, 4, j as u64);
        let count: usize = rng.gen_range(5..250);
        let visitor_home = (j + 1) % n;
        let target = index.id(j).to_string();
        for v in 0..count {
            let device_id = format!("D-{}-{:03}", index.id(visitor_home), v % devices);
            let day = hmi_start + chrono::Days::new((v % hmi_days) as u64);
            stops.push(StopRecord {
                device_id,
                cbg_id: target.clone(),
                start: at_hour(day, 8 + (v / hmi_days) as u32 % 12, (v % 60) as u32),
                dwell_hours: 4.0,
            });
        }
    }

    // ── exact control-variable values via the pipeline's own code ────────
    let homes = detect_home_cbgs(&stops, &index, 24.0).expect("stops nonempty");
    let visits = visit_counts(&stops, &homes, &index, hmi_start, date(HMI_WINDOW.1), 4.0);
    let (hmi_scaled, _raw) =
        human_mobility_index(&visits, hmi_days as f64).expect("n >= 2");
    let poi_map: std::collections::HashMap<String, f64> = poi.iter().cloned().collect();
    let road_map: std::collections::HashMap<String, f64> = roads.iter().cloned().collect();
    let controls = build_controls(&index, &census, &poi_map, &road_map, &hmi_scaled);

    // ── claim counts and damage-spread targets ───────────────────────────
    let mut nc = Vec::with_capacity(n);
    let mut sdp_target = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream(seed, 5, i as u64);
        nc.push(2.0 * rng.gen_range(1..=spec.max_claim_pairs) as f64);
        sdp_target.push(rng.gen_range(0.002..0.03));
    }

    // ── assemble x columns in canonical order ────────────────────────────
    let value_of = |name: &str, i: usize| -> f64 {
        match name {
            "nc" => nc[i],
            "sdp" => sdp_target[i],
            "pop" => controls[i].pop.expect("area is 1"),
            "rd" => controls[i].rd.expect("area is 1"),
            "poi" => controls[i].poi.expect("area is 1"),
            "ms" => controls[i].ms.expect("positive group totals"),
            "is" => controls[i].is.expect("positive group totals"),
            "hmi" => controls[i].hmi.expect("always set"),
            other => unreachable!("unvalidated variable '{other}'"),
        }
    };
    let mut ordered: Vec<PlantedCoefficient> = Vec::new();
    for name in crate::frame::ALL_VARIABLE_NAMES {
        if let Some(c) = spec.coefficients.iter().find(|c| c.name == name) {
            ordered.push(c.clone());
        }
    }

    let weights = build_weights(
        &index,
        WeightScheme::InverseDistanceThresholded {
            threshold_miles: spec.spillover_radius_miles,
        },
    )?;

    let noise: Vec<f64> = if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma > 0");
        (0..n)
            .map(|i| {
                let mut rng = stream(seed, 6, i as u64);
                rand::distributions::Distribution::sample(&normal, &mut rng)
            })
            .collect()
    } else {
        vec![0.0; n]
    };

    // ── solve for the absorbing column ───────────────────────────────────
    let mp_coef = ordered.iter().find(|c| c.name == "mp").expect("validated");
    let mut residual = DVector::from_fn(n, |i, _| rr[i] - spec.beta0 - noise[i]);
    let mut variables = std::collections::BTreeMap::new();
    let mut lagged = std::collections::BTreeMap::new();
    for c in &ordered {
        if c.name == "mp" {
            continue;
        }
        let col: Vec<f64> = (0..n).map(|i| value_of(&c.name, i)).collect();
        let lag = weights.lag(&col).expect("aligned");
        for i in 0..n {
            residual[i] -= c.beta * col[i] + c.theta * lag[i];
        }
        variables.insert(c.name.clone(), col);
        lagged.insert(c.name.clone(), lag);
    }

    let mut system = DMatrix::from_element(n, n, 0.0);
    for i in 0..n {
        system[(i, i)] = mp_coef.beta;
    }
    for (i, row) in weights.iter_rows().enumerate() {
        for &(j, w) in row {
            system[(i, j as usize)] += mp_coef.theta * w;
        }
    }
    let mp = system
        .clone()
        .lu()
        .solve(&residual)
        .ok_or_else(|| SynthError::Infeasible("absorbing-column system is singular".into()))?;
    let solve_residual = (&system * &mp - &residual).amax();
    if solve_residual > 1e-9 {
        return Err(SynthError::Infeasible(format!(
            "absorbing-column solve residual {solve_residual:.2e}"
        )));
    }
    for (i, &v) in mp.iter().enumerate() {
        if !(MP_MIN..=MP_MAX).contains(&v) {
            return Err(SynthError::Infeasible(format!(
                "absorbing damage extent {v:.4} out of [{MP_MIN}, {MP_MAX}] at unit {i}; \
                 adjust beta0/coefficient magnitudes"
            )));
        }
    }
    let mp: Vec<f64> = mp.iter().copied().collect();
    let mp_lag = weights.lag(&mp).expect("aligned");
    variables.insert("mp".into(), mp.clone());
    lagged.insert("mp".into(), mp_lag);

    // ── realize parcels and claims ───────────────────────────────────────
    let bridge = reference_bridge();
    let mut parcels = Vec::new();
    let mut claims = Vec::new();
    for i in 0..n {
        let id = index.id(i).to_string();
        let (lon0, lat0) = index.centroid(i);
        let mut rng = stream(seed, 7, i as u64);
        let count = nc[i] as usize;
        let delta = sdp_target[i] * (((count - 1) as f64) / count as f64).sqrt();
        for c in 0..count {
            let parcel_id = format!("P-{id}-{c:03}");
            let lon = lon0 + 0.000_1 + 0.000_01 * c as f64;
            let lat = lat0 + 0.000_1;
            parcels.push(ParcelRecord {
                parcel_id,
                lon,
                lat,
                market_value: CLAIM_PARCEL_MARKET_VALUE,
                cbg_id: id.clone(),
            });
            let pde = if c % 2 == 0 { mp[i] + delta } else { mp[i] - delta };
            let claim_value = pde * CLAIM_PARCEL_MARKET_VALUE;
            let use_ia = rng.gen_range(0.0..1.0) < spec.ia_fraction;
            let (source, amount) = if use_ia {
                (ClaimSource::Ia, bridge.invert(claim_value))
            } else {
                (ClaimSource::Nfip, claim_value)
            };
            claims.push(ClaimRecord {
                claim_id: format!("L-{id}-{c:03}"),
                source,
                lon,
                lat,
                amount,
                parcel_hint: None,
            });
        }
        // One claim-free parcel per CBG, away from the claim cluster.
        parcels.push(ParcelRecord {
            parcel_id: format!("P-{id}-x"),
            lon: lon0 - 0.000_5,
            lat: lat0 - 0.000_5,
            market_value: rng.gen_range(60_000..400_000) as f64,
            cbg_id: id.clone(),
        });
    }

    // Calibration pairs lying exactly on the reference bridge line.
    let bridge_pairs: Vec<(f64, f64)> = (0..40)
        .map(|k| {
            let ia = 500.0 * (k + 1) as f64;
            (ia, bridge.apply(ia))
        })
        .collect();

    // ── reference decay field at the spillover-radius weights ────────────
    let nc_scaled = min_max_scale(&nc).expect("nonempty");
    let decay = compute_decay_coefficients(&rr, &nc_scaled.values, &weights, DecayExposure::Neighbor)
        .expect("aligned inputs");

    let truth = GroundTruth {
        beta0: spec.beta0,
        coefficients: ordered.clone(),
        spillover_radius_miles: spec.spillover_radius_miles,
        noise_sigma: spec.noise_sigma,
        rr,
        variables,
        lagged,
        decay_k: decay.k,
        noise,
    };

    Ok(GeneratedScenario {
        index,
        parcels,
        claims,
        stops,
        census,
        poi,
        roads,
        bridge_pairs,
        truth,
        regressors: ordered.iter().map(|c| c.name.clone()).collect(),
    })
}

fn reference_bridge() -> BridgeModel {
    // Exact by construction; fitting three points on the line reproduces it.
    let pairs: Vec<(f64, f64)> = [1_000.0f64, 10_000.0, 80_000.0]
        .iter()
        .map(|&ia| (ia, (BRIDGE_INTERCEPT + BRIDGE_SLOPE * ia.ln()).exp()))
        .collect();
    fit_ia_nfip_bridge(&pairs).expect("well-posed reference fit")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            seed,
            n_cbgs: 24,
            layout: Layout::UniformCloud { extent_miles: 20.0 },
            beta0: 0.5,
            coefficients: vec![
                PlantedCoefficient { name: "mp".into(), beta: 2.0, theta: -3.0 },
                PlantedCoefficient { name: "nc".into(), beta: -0.002, theta: 0.001 },
                PlantedCoefficient { name: "hmi".into(), beta: 0.05, theta: 0.0 },
            ],
            spillover_radius_miles: 8.0,
            noise_sigma: 0.0,
            mobility: MobilityParams::default(),
            max_claim_pairs: 3,
            ia_fraction: 0.0,
        }
    }

    #[test]
    fn validation_catches_bad_specs() {
        let mut spec = small_spec(1);
        spec.n_cbgs = 5;
        assert!(spec.validate().is_err());

        let mut spec = small_spec(1);
        spec.spillover_radius_miles = 100.0;
        assert!(spec.validate().is_err());

        let mut spec = small_spec(1);
        spec.coefficients.retain(|c| c.name != "mp");
        assert!(spec.validate().is_err());

        let mut spec = small_spec(1);
        spec.coefficients.push(PlantedCoefficient {
            name: "mdp".into(),
            beta: 0.1,
            theta: 0.0,
        });
        assert!(spec.validate().is_err());

        let mut spec = small_spec(1);
        spec.mobility.devices_per_cbg = 12;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn planted_relation_holds_exactly_on_generated_truth() {
        let scenario = generate_scenario(&small_spec(7)).unwrap();
        let t = &scenario.truth;
        let n = t.rr.len();
        for i in 0..n {
            let mut y = t.beta0 + t.noise[i];
            for c in &t.coefficients {
                y += c.beta * t.variables[&c.name][i] + c.theta * t.lagged[&c.name][i];
            }
            assert!(
                (y - t.rr[i]).abs() < 1e-10,
                "unit {i}: planted {y} vs realized {}",
                t.rr[i]
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scenario(&small_spec(3)).unwrap();
        let b = generate_scenario(&small_spec(3)).unwrap();
        assert_eq!(a.truth.rr, b.truth.rr);
        assert_eq!(a.parcels.len(), b.parcels.len());
        assert_eq!(a.claims, b.claims);
        assert_eq!(a.stops, b.stops);
    }

    #[test]
    fn flat_mobility_yields_zero_rates() {
        let mut spec = small_spec(4);
        spec.mobility.dip_depth = 0.0;
        // With a flat trajectory no CBG recovers; the truth rr is all zero.
        let scenario = generate_scenario(&spec).unwrap();
        assert!(scenario.truth.rr.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn planted_slx_data_reproduces_relation() {
        let planted = planted_slx_data(
            5,
            80,
            40.0,
            10.0,
            0.5,
            &[("x0", 2.0, -3.0)],
            0.0,
        )
        .unwrap();
        let w = build_weights(
            &planted.index,
            WeightScheme::InverseDistanceThresholded { threshold_miles: 10.0 },
        )
        .unwrap();
        let lag = w.lag(&planted.x[0].1).unwrap();
        for i in 0..planted.y.len() {
            let y = 0.5 + 2.0 * planted.x[0].1[i] - 3.0 * lag[i];
            assert!((y - planted.y[i]).abs() < 1e-12);
        }
    }
}
