//! Pipeline stages. Each stage reads its inputs from disk (original tables
//! or prior stage artifacts), writes its outputs into the artifact
//! directory, and records input/output hashes in the manifest. Stages are
//! therefore resumable and reruns are byte-identical.

use crate::config::PipelineConfig;
use anyhow::{anyhow, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spillover_core::covariates::{
    build_controls, human_mobility_index, min_max_scale, visit_counts, ControlVariables,
};
use spillover_core::damage::{
    aggregate_cbg_damage, compute_pde, fit_ia_nfip_bridge, match_claims_to_parcels, BridgeModel,
    CbgDamage,
};
use spillover_core::econometrics::{
    fit_ols, fit_slx, morans_i, pearson_correlation, stars, vif, Design, MoranAlternative,
    MoranResult, RegressionFit, SlxFit, StarConvention,
};
use spillover_core::frame::{build_frame, CbgFrame};
use spillover_core::ingest::{
    emit_diagnostics_into, load_bridge_pairs, load_cbg_index, load_census, load_claims,
    load_count_table, load_parcels, load_stops, validate_dataset, CbgIndex, RowDiagnostic,
};
use spillover_core::mobility::{
    compute_all_recoveries, compute_daily_movement, detect_home_cbgs, RecoveryResult,
    RecoveryStatus,
};
use spillover_core::spatial::{
    compute_decay_coefficients, heterogeneity_test, sweep_spatial_reach, HeterogeneityResult,
    ThresholdGrid, ThresholdOutcome,
};
use spillover_core::synthetic::oracle_checks;
use spillover_core::weights::{build_weights, SpatialWeights, WeightScheme};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const STAGES: [&str; 8] = [
    "ingest",
    "damage",
    "recovery",
    "covariates",
    "analyze",
    "sweep",
    "decay",
    "heterogeneity",
];

/// Failure classification for process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or missing input: exit code 1.
    Validation(anyhow::Error),
    /// A stage failed while computing: exit code 2.
    Stage(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Stage(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Validation(e) | Failure::Stage(e) => e,
        }
    }
}

pub type StageResult<T> = std::result::Result<T, Failure>;

fn validation<T>(err: anyhow::Error) -> StageResult<T> {
    Err(Failure::Validation(err))
}

fn stage_err<E: Into<anyhow::Error>>(err: E) -> Failure {
    Failure::Stage(err.into())
}

// ── manifest ─────────────────────────────────────────────────────────────

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StageEntry {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn record_stage(
    out_dir: &Path,
    stage: &str,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<()> {
    let manifest_path = out_dir.join("manifest.json");
    let mut manifest: Manifest = if manifest_path.exists() {
        serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
            .context("parsing existing manifest")?
    } else {
        Manifest::default()
    };
    let mut entry = StageEntry {
        inputs: BTreeMap::new(),
        outputs: BTreeMap::new(),
    };
    // Paths under the artifact directory are stored relative to it, so two
    // runs into different directories produce identical manifests.
    let rel = |path: &Path| {
        path.strip_prefix(out_dir)
            .unwrap_or(path)
            .display()
            .to_string()
    };
    for path in inputs {
        entry.inputs.insert(rel(path), sha256_file(path)?);
    }
    for path in outputs {
        entry.outputs.insert(rel(path), sha256_file(path)?);
    }
    manifest.stages.insert(stage.to_string(), entry);
    write_file(
        &manifest_path,
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn require_input(path: &Path, what: &str) -> StageResult<()> {
    if !path.exists() {
        return validation(anyhow!("missing input for {what}: {}", path.display()));
    }
    Ok(())
}

// ── small CSV helpers for stage artifacts ─────────────────────────────────

fn csv_rows(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let rows = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    Ok((headers, rows))
}

fn col(headers: &[String], name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("{} lacks column '{name}'", path.display()))
}

fn opt_f64(s: &str) -> Option<f64> {
    if s.is_empty() {
        None
    } else {
        s.parse().ok()
    }
}

// ── stage: ingest ─────────────────────────────────────────────────────────

#[derive(Serialize)]
struct IngestSummary {
    accepted: BTreeMap<String, usize>,
    rejected: BTreeMap<String, usize>,
    validation: spillover_core::ingest::ValidationReport,
}

pub fn run_ingest(config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    let inputs = &config.inputs;
    for (path, what) in [
        (&inputs.cbgs, "cbgs"),
        (&inputs.adjacency, "adjacency"),
        (&inputs.parcels, "parcels"),
        (&inputs.claims, "claims"),
        (&inputs.stops, "stops"),
        (&inputs.census, "census"),
        (&inputs.poi, "poi"),
        (&inputs.roads, "roads"),
    ] {
        require_input(path, what)?;
    }

    let dir = out_dir.join("ingest");
    std::fs::create_dir_all(&dir).map_err(stage_err)?;

    let (index, cbg_diags, raw_adjacency) =
        load_cbg_index(&inputs.cbgs, &inputs.adjacency).map_err(stage_err)?;
    let parcels = load_parcels(&inputs.parcels, Some(&index)).map_err(stage_err)?;
    let claims = load_claims(&inputs.claims).map_err(stage_err)?;
    let stops = load_stops(&inputs.stops, Some(&index)).map_err(stage_err)?;
    let census = load_census(&inputs.census, Some(&index)).map_err(stage_err)?;
    let poi = load_count_table(&inputs.poi, "poi_count", Some(&index)).map_err(stage_err)?;
    let roads =
        load_count_table(&inputs.roads, "segment_count", Some(&index)).map_err(stage_err)?;
    let bridge = match &inputs.bridge_pairs {
        Some(path) if path.exists() => Some(load_bridge_pairs(path).map_err(stage_err)?),
        _ => None,
    };

    let validation_report = validate_dataset(
        &index,
        &parcels.records,
        &claims.records,
        &stops.records,
        &raw_adjacency,
        config.thresholds.match_max_distance_miles,
    );

    use spillover_core::ingest as emit;
    emit::emit_parcels(&dir.join("accepted_parcels.csv"), &parcels.records).map_err(stage_err)?;
    emit::emit_claims(&dir.join("accepted_claims.csv"), &claims.records).map_err(stage_err)?;
    emit::emit_stops(&dir.join("accepted_stops.csv"), &stops.records).map_err(stage_err)?;
    emit::emit_cbgs(&dir.join("accepted_cbgs.csv"), &index).map_err(stage_err)?;
    emit::emit_adjacency(&dir.join("accepted_adjacency.csv"), &index).map_err(stage_err)?;
    emit::emit_census(&dir.join("accepted_census.csv"), &census.records).map_err(stage_err)?;
    emit::emit_count_table(&dir.join("accepted_poi.csv"), "poi_count", &poi.records)
        .map_err(stage_err)?;
    emit::emit_count_table(&dir.join("accepted_roads.csv"), "segment_count", &roads.records)
        .map_err(stage_err)?;
    let mut outputs = vec![
        dir.join("accepted_parcels.csv"),
        dir.join("accepted_claims.csv"),
        dir.join("accepted_stops.csv"),
        dir.join("accepted_cbgs.csv"),
        dir.join("accepted_adjacency.csv"),
        dir.join("accepted_census.csv"),
        dir.join("accepted_poi.csv"),
        dir.join("accepted_roads.csv"),
    ];
    if let Some(pairs) = &bridge {
        emit::emit_bridge_pairs(&dir.join("accepted_bridge_pairs.csv"), &pairs.records)
            .map_err(stage_err)?;
        outputs.push(dir.join("accepted_bridge_pairs.csv"));
    }

    // Rejection sidecar across all tables.
    let mut sidecar: Vec<(&str, &[RowDiagnostic])> = vec![
        ("cbgs_or_adjacency", &cbg_diags),
        ("parcels", &parcels.rejected),
        ("claims", &claims.rejected),
        ("stops", &stops.rejected),
        ("census", &census.rejected),
        ("poi", &poi.rejected),
        ("roads", &roads.rejected),
    ];
    if let Some(pairs) = &bridge {
        sidecar.push(("bridge_pairs", &pairs.rejected));
    }
    let rejected_path = dir.join("rejected_rows.csv");
    emit_diagnostics_into(&rejected_path, &sidecar).map_err(stage_err)?;
    outputs.push(rejected_path);

    let mut accepted = BTreeMap::new();
    let mut rejected = BTreeMap::new();
    accepted.insert("parcels".into(), parcels.records.len());
    accepted.insert("claims".into(), claims.records.len());
    accepted.insert("stops".into(), stops.records.len());
    accepted.insert("cbgs".into(), index.len());
    accepted.insert("census".into(), census.records.len());
    rejected.insert("parcels".into(), parcels.rejected.len());
    rejected.insert("claims".into(), claims.rejected.len());
    rejected.insert("stops".into(), stops.rejected.len());
    rejected.insert("census".into(), census.rejected.len());
    let summary = IngestSummary {
        accepted,
        rejected,
        validation: validation_report,
    };
    let report_path = dir.join("validation_report.json");
    write_file(
        &report_path,
        &(serde_json::to_string_pretty(&summary).map_err(stage_err)? + "\n"),
    )
    .map_err(stage_err)?;
    outputs.push(report_path);

    let mut input_paths: Vec<PathBuf> = vec![
        inputs.parcels.clone(),
        inputs.claims.clone(),
        inputs.stops.clone(),
        inputs.cbgs.clone(),
        inputs.adjacency.clone(),
        inputs.census.clone(),
        inputs.poi.clone(),
        inputs.roads.clone(),
    ];
    if let Some(path) = &inputs.bridge_pairs {
        if path.exists() {
            input_paths.push(path.clone());
        }
    }
    record_stage(out_dir, "ingest", &input_paths, &outputs).map_err(stage_err)?;
    Ok(())
}

fn load_artifact_index(out_dir: &Path) -> StageResult<CbgIndex> {
    let cbgs = out_dir.join("ingest/accepted_cbgs.csv");
    let adjacency = out_dir.join("ingest/accepted_adjacency.csv");
    require_input(&cbgs, "accepted cbgs (run ingest first)")?;
    require_input(&adjacency, "accepted adjacency (run ingest first)")?;
    let (index, _, _) = load_cbg_index(&cbgs, &adjacency).map_err(stage_err)?;
    Ok(index)
}

// ── stage: damage ─────────────────────────────────────────────────────────

#[derive(Serialize)]
struct MatchingSummary {
    matched: usize,
    unmatched: usize,
    unmatched_claim_ids: Vec<String>,
    max_distance_miles: f64,
}

pub fn run_damage(config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    let parcels_path = out_dir.join("ingest/accepted_parcels.csv");
    let claims_path = out_dir.join("ingest/accepted_claims.csv");
    require_input(&parcels_path, "accepted parcels (run ingest first)")?;
    require_input(&claims_path, "accepted claims (run ingest first)")?;
    let index = load_artifact_index(out_dir)?;
    let parcels = load_parcels(&parcels_path, Some(&index)).map_err(stage_err)?;
    let claims = load_claims(&claims_path).map_err(stage_err)?;

    let dir = out_dir.join("damage");
    std::fs::create_dir_all(&dir).map_err(stage_err)?;
    let mut inputs = vec![parcels_path, claims_path];
    let mut outputs = Vec::new();

    let bridge_path = out_dir.join("ingest/accepted_bridge_pairs.csv");
    let bridge: Option<BridgeModel> = if bridge_path.exists() {
        let pairs = load_bridge_pairs(&bridge_path).map_err(stage_err)?;
        inputs.push(bridge_path);
        let model = fit_ia_nfip_bridge(&pairs.records).map_err(stage_err)?;
        if model.nonmonotone {
            eprintln!(
                "warning: damage-scale bridge has nonpositive slope {:.4}",
                model.slope
            );
        }
        let path = dir.join("bridge.json");
        write_file(
            &path,
            &(serde_json::to_string_pretty(&model).map_err(stage_err)? + "\n"),
        )
        .map_err(stage_err)?;
        outputs.push(path);
        Some(model)
    } else {
        None
    };

    let matching = match_claims_to_parcels(
        &claims.records,
        &parcels.records,
        config.thresholds.match_max_distance_miles,
    )
    .map_err(stage_err)?;
    let summary = MatchingSummary {
        matched: matching.matched.len(),
        unmatched: matching.unmatched.len(),
        unmatched_claim_ids: matching.unmatched.clone(),
        max_distance_miles: config.thresholds.match_max_distance_miles,
    };
    let matching_path = dir.join("matching.json");
    write_file(
        &matching_path,
        &(serde_json::to_string_pretty(&summary).map_err(stage_err)? + "\n"),
    )
    .map_err(stage_err)?;
    outputs.push(matching_path);

    let records = compute_pde(&matching.matched, bridge.as_ref(), config.thresholds.pde_cap)
        .map_err(stage_err)?;
    let pde_path = dir.join("pde_records.csv");
    {
        let mut out = String::from("parcel_id,cbg_id,claim_value,market_value,pde,capped,source\n");
        for r in &records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.parcel_id,
                r.cbg_id,
                r.claim_value,
                r.market_value,
                r.pde,
                r.capped,
                r.source.as_str()
            ));
        }
        write_file(&pde_path, &out).map_err(stage_err)?;
    }
    outputs.push(pde_path);

    let damage = aggregate_cbg_damage(&records, &index).map_err(stage_err)?;
    let damage_path = dir.join("cbg_damage.csv");
    {
        let mut out = String::from("cbg_id,nc,mp,sdp,mdp\n");
        for (i, d) in damage.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                index.id(i),
                d.nc,
                d.mp,
                d.sdp,
                d.mdp
            ));
        }
        write_file(&damage_path, &out).map_err(stage_err)?;
    }
    outputs.push(damage_path);

    record_stage(out_dir, "damage", &inputs, &outputs).map_err(stage_err)?;
    Ok(())
}

// ── stage: recovery ───────────────────────────────────────────────────────

pub fn run_recovery(config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    let stops_path = out_dir.join("ingest/accepted_stops.csv");
    require_input(&stops_path, "accepted stops (run ingest first)")?;
    let index = load_artifact_index(out_dir)?;
    let stops = load_stops(&stops_path, Some(&index)).map_err(stage_err)?;
    if stops.records.is_empty() {
        return validation(anyhow!("stops table is empty; recovery stage needs stop records"));
    }

    let w = &config.windows;
    let t = &config.thresholds;
    let homes = detect_home_cbgs(&stops.records, &index, t.home_dwell_hours).map_err(stage_err)?;
    let series = compute_daily_movement(
        &stops.records,
        &homes,
        &index,
        w.baseline_start,
        w.event_end,
        t.visit_dwell_hours,
    )
    .map_err(stage_err)?;
    let recoveries = compute_all_recoveries(
        &series,
        w.baseline_start,
        w.baseline_end,
        w.event_start,
        w.event_end,
        t.steady_tolerance,
        t.perturbation_floor,
    );

    let dir = out_dir.join("recovery");
    std::fs::create_dir_all(&dir).map_err(stage_err)?;

    let recovery_path = dir.join("recovery.csv");
    {
        let mut out = String::from("cbg_id,t_s,t_n,rr,recovery_extent,status\n");
        for (result, _) in &recoveries {
            let fmt_date = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_default();
            let fmt_f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                index.id(result.cbg),
                fmt_date(result.t_s),
                fmt_date(result.t_n),
                fmt_f(result.recovery_rate),
                fmt_f(result.recovery_extent),
                result.status.as_str()
            ));
        }
        write_file(&recovery_path, &out).map_err(stage_err)?;
    }

    let pc_path = dir.join("pc_series.csv");
    {
        let mut out = String::from("cbg_id,date,mr,bl,pc\n");
        for ((result, baseline), s) in recoveries.iter().zip(&series) {
            let mut date = w.baseline_start;
            let mut day = 0usize;
            while date <= w.event_end {
                let mr = s.mr[day].map(|v| v.to_string()).unwrap_or_default();
                let bl = baseline
                    .as_ref()
                    .map(|b| b.for_date(date).to_string())
                    .unwrap_or_default();
                let pc = if date >= w.event_start {
                    let offset = (date - w.event_start).num_days() as usize;
                    result
                        .pc
                        .get(offset)
                        .copied()
                        .flatten()
                        .map(|v| v.to_string())
                        .unwrap_or_default()
                } else {
                    String::new()
                };
                out.push_str(&format!("{},{},{},{},{}\n", index.id(s.cbg), date, mr, bl, pc));
                date += chrono::Duration::days(1);
                day += 1;
            }
        }
        write_file(&pc_path, &out).map_err(stage_err)?;
    }

    record_stage(
        out_dir,
        "recovery",
        &[stops_path],
        &[recovery_path, pc_path],
    )
    .map_err(stage_err)?;
    Ok(())
}

// ── stage: covariates ─────────────────────────────────────────────────────

pub fn run_covariates(config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    let census_path = out_dir.join("ingest/accepted_census.csv");
    let poi_path = out_dir.join("ingest/accepted_poi.csv");
    let roads_path = out_dir.join("ingest/accepted_roads.csv");
    let stops_path = out_dir.join("ingest/accepted_stops.csv");
    for (p, what) in [
        (&census_path, "accepted census"),
        (&poi_path, "accepted poi"),
        (&roads_path, "accepted roads"),
        (&stops_path, "accepted stops"),
    ] {
        require_input(p, &format!("{what} (run ingest first)"))?;
    }
    let index = load_artifact_index(out_dir)?;
    let census = load_census(&census_path, Some(&index)).map_err(stage_err)?;
    let poi = load_count_table(&poi_path, "poi_count", Some(&index)).map_err(stage_err)?;
    let roads = load_count_table(&roads_path, "segment_count", Some(&index)).map_err(stage_err)?;
    let stops = load_stops(&stops_path, Some(&index)).map_err(stage_err)?;

    let w = &config.windows;
    let t = &config.thresholds;
    let homes = detect_home_cbgs(&stops.records, &index, t.home_dwell_hours).map_err(stage_err)?;
    let visits = visit_counts(
        &stops.records,
        &homes,
        &index,
        w.hmi_start,
        w.hmi_end,
        t.visit_dwell_hours,
    );
    let days = (w.hmi_end - w.hmi_start).num_days() as f64 + 1.0;
    let (hmi_scaled, _raw) = human_mobility_index(&visits, days).map_err(stage_err)?;
    if hmi_scaled.degenerate {
        eprintln!("warning: mobility index is constant across CBGs; scaled to zeros");
    }
    let poi_map: std::collections::HashMap<String, f64> = poi.records.iter().cloned().collect();
    let road_map: std::collections::HashMap<String, f64> =
        roads.records.iter().cloned().collect();
    let controls = build_controls(&index, &census.records, &poi_map, &road_map, &hmi_scaled);

    let dir = out_dir.join("covariates");
    std::fs::create_dir_all(&dir).map_err(stage_err)?;
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();

    let controls_path = dir.join("controls.csv");
    {
        let mut out = String::from("cbg_id,pop,ms,is,hmi,poi,rd\n");
        for (i, c) in controls.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                index.id(i),
                fmt(c.pop),
                fmt(c.ms),
                fmt(c.is),
                fmt(c.hmi),
                fmt(c.poi),
                fmt(c.rd)
            ));
        }
        write_file(&controls_path, &out).map_err(stage_err)?;
    }

    // Scaled variant: min-max over the defined entries of each column.
    let scaled_path = dir.join("controls_scaled.csv");
    {
        let names = ["pop", "ms", "is", "hmi", "poi", "rd"];
        let getters: [fn(&ControlVariables) -> Option<f64>; 6] = [
            |c| c.pop,
            |c| c.ms,
            |c| c.is,
            |c| c.hmi,
            |c| c.poi,
            |c| c.rd,
        ];
        let mut scaled_columns: Vec<Vec<Option<f64>>> = Vec::new();
        for get in getters {
            let defined: Vec<f64> = controls.iter().filter_map(get).collect();
            if defined.is_empty() {
                scaled_columns.push(vec![None; controls.len()]);
                continue;
            }
            let scaled = min_max_scale(&defined).map_err(stage_err)?;
            let mut iter = scaled.values.into_iter();
            scaled_columns.push(
                controls
                    .iter()
                    .map(|c| get(c).map(|_| iter.next().expect("aligned")))
                    .collect(),
            );
        }
        let mut out = String::from("cbg_id,");
        out.push_str(&names.join(","));
        out.push('\n');
        for i in 0..controls.len() {
            out.push_str(index.id(i));
            for column in &scaled_columns {
                out.push(',');
                out.push_str(&fmt(column[i]));
            }
            out.push('\n');
        }
        write_file(&scaled_path, &out).map_err(stage_err)?;
    }

    record_stage(
        out_dir,
        "covariates",
        &[census_path, poi_path, roads_path, stops_path],
        &[controls_path, scaled_path],
    )
    .map_err(stage_err)?;
    Ok(())
}

// ── frame assembly from artifacts ─────────────────────────────────────────

fn read_damage(path: &Path, index: &CbgIndex) -> Result<Vec<CbgDamage>> {
    let (headers, rows) = csv_rows(path)?;
    let id_col = col(&headers, "cbg_id", path)?;
    let cols = [
        col(&headers, "nc", path)?,
        col(&headers, "mp", path)?,
        col(&headers, "sdp", path)?,
        col(&headers, "mdp", path)?,
    ];
    let mut out = vec![CbgDamage::ZERO; index.len()];
    for row in rows {
        let id = row.get(id_col).unwrap_or("");
        let Some(i) = index.index_of(id) else { continue };
        let mut values = [0.0; 4];
        for (slot, &c) in cols.iter().enumerate() {
            values[slot] = row.get(c).unwrap_or("0").parse().unwrap_or(0.0);
        }
        out[i] = CbgDamage {
            nc: values[0],
            mp: values[1],
            sdp: values[2],
            mdp: values[3],
        };
    }
    Ok(out)
}

fn read_recoveries(path: &Path, index: &CbgIndex) -> Result<Vec<RecoveryResult>> {
    let (headers, rows) = csv_rows(path)?;
    let id_col = col(&headers, "cbg_id", path)?;
    let rr_col = col(&headers, "rr", path)?;
    let status_col = col(&headers, "status", path)?;
    let placeholder = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid");
    let mut out: Vec<RecoveryResult> = (0..index.len())
        .map(|cbg| RecoveryResult {
            cbg,
            status: RecoveryStatus::Censored,
            t_s: None,
            t_n: None,
            recovery_rate: None,
            recovery_extent: None,
            pc: Vec::new(),
            window_start: placeholder,
        })
        .collect();
    for row in rows {
        let id = row.get(id_col).unwrap_or("");
        let Some(i) = index.index_of(id) else { continue };
        let status = match row.get(status_col).unwrap_or("") {
            "recovered" => RecoveryStatus::Recovered,
            "no_perturbation" => RecoveryStatus::NoPerturbation,
            _ => RecoveryStatus::Censored,
        };
        out[i].status = status;
        out[i].recovery_rate = opt_f64(row.get(rr_col).unwrap_or(""));
    }
    Ok(out)
}

fn read_controls(path: &Path, index: &CbgIndex) -> Result<Vec<ControlVariables>> {
    let (headers, rows) = csv_rows(path)?;
    let id_col = col(&headers, "cbg_id", path)?;
    let cols = [
        col(&headers, "pop", path)?,
        col(&headers, "ms", path)?,
        col(&headers, "is", path)?,
        col(&headers, "hmi", path)?,
        col(&headers, "poi", path)?,
        col(&headers, "rd", path)?,
    ];
    let mut out = vec![ControlVariables::default(); index.len()];
    for row in rows {
        let id = row.get(id_col).unwrap_or("");
        let Some(i) = index.index_of(id) else { continue };
        out[i] = ControlVariables {
            pop: opt_f64(row.get(cols[0]).unwrap_or("")),
            ms: opt_f64(row.get(cols[1]).unwrap_or("")),
            is: opt_f64(row.get(cols[2]).unwrap_or("")),
            hmi: opt_f64(row.get(cols[3]).unwrap_or("")),
            poi: opt_f64(row.get(cols[4]).unwrap_or("")),
            rd: opt_f64(row.get(cols[5]).unwrap_or("")),
        };
    }
    Ok(out)
}

/// The frame plus the working (possibly scaled) outcome and design columns.
pub struct AnalysisData {
    pub frame: CbgFrame,
    pub frame_index: CbgIndex,
    pub y: Vec<f64>,
    pub x: Vec<(String, Vec<f64>)>,
    pub dropped_constant: Vec<String>,
}

pub fn load_analysis_data(config: &PipelineConfig, out_dir: &Path) -> StageResult<AnalysisData> {
    let damage_path = out_dir.join("damage/cbg_damage.csv");
    let recovery_path = out_dir.join("recovery/recovery.csv");
    let controls_path = out_dir.join("covariates/controls.csv");
    require_input(&damage_path, "cbg damage metrics (run damage first)")?;
    require_input(&recovery_path, "recovery rates (run recovery first)")?;
    require_input(&controls_path, "control variables (run covariates first)")?;
    let index = load_artifact_index(out_dir)?;
    let damage = read_damage(&damage_path, &index).map_err(stage_err)?;
    let recoveries = read_recoveries(&recovery_path, &index).map_err(stage_err)?;
    let controls = read_controls(&controls_path, &index).map_err(stage_err)?;
    let frame = build_frame(&index, &damage, &recoveries, &controls).map_err(stage_err)?;
    let frame_index = index.subset(&frame.ids).map_err(stage_err)?;

    let working = if config.regression.scale_variables {
        frame.scaled().0
    } else {
        frame.clone()
    };
    let selected = working
        .select(&config.regression.regressors)
        .map_err(stage_err)?;
    let mut x = Vec::new();
    let mut dropped_constant = Vec::new();
    for (name, colv) in selected {
        let min = colv.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = colv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            dropped_constant.push(name);
        } else {
            x.push((name, colv));
        }
    }
    if x.is_empty() {
        return Err(Failure::Stage(anyhow!(
            "all requested regressors are constant over the frame"
        )));
    }
    Ok(AnalysisData {
        y: working.rr.clone(),
        frame,
        frame_index,
        x,
        dropped_constant,
    })
}

// ── stage: analyze ────────────────────────────────────────────────────────

#[derive(Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t: f64,
    pub p: f64,
    pub stars: String,
}

#[derive(Serialize)]
pub struct ModelBlock {
    pub coefficients: Vec<CoefficientRow>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub n: usize,
    pub k: usize,
}

#[derive(Serialize)]
pub struct EffectReportRow {
    pub name: String,
    pub coefficient: f64,
    pub coefficient_stars: String,
    pub direct: f64,
    pub direct_stars: String,
    pub indirect: f64,
    pub indirect_stars: String,
    pub total: f64,
    pub total_stars: String,
    pub lag_dropped: bool,
}

#[derive(Serialize)]
pub struct SlxBlock {
    pub model: ModelBlock,
    pub effects: Vec<EffectReportRow>,
    pub dropped_lags: Vec<String>,
}

#[derive(Serialize)]
pub struct MoranBlock {
    pub i: f64,
    pub p_value: f64,
    pub stars: String,
    pub permutations: usize,
}

#[derive(Serialize)]
pub struct RobustnessBlock {
    pub scheme: String,
    pub moran_rr: MoranBlock,
    pub slx: SlxBlock,
}

#[derive(Serialize)]
pub struct RegressionReport {
    pub n: usize,
    pub scheme: String,
    pub scale_variables: bool,
    pub regressors: Vec<String>,
    pub dropped_constant: Vec<String>,
    pub excluded_cbgs: Vec<(String, String)>,
    pub pearson: Vec<(String, f64, f64)>,
    pub vif: Vec<(String, f64, bool)>,
    pub moran: BTreeMap<String, MoranBlock>,
    pub ols: ModelBlock,
    pub slx: Option<SlxBlock>,
    pub robustness: BTreeMap<String, RobustnessBlock>,
}

fn model_block(fit: &RegressionFit, convention: StarConvention) -> ModelBlock {
    ModelBlock {
        coefficients: fit
            .names
            .iter()
            .enumerate()
            .map(|(i, name)| CoefficientRow {
                name: name.clone(),
                estimate: fit.coefficients[i],
                std_error: fit.std_errors[i],
                t: fit.t_values[i],
                p: fit.p_values[i],
                stars: stars(fit.p_values[i], convention).to_string(),
            })
            .collect(),
        r_squared: fit.r_squared,
        adj_r_squared: fit.adj_r_squared,
        log_likelihood: fit.log_likelihood,
        aic: fit.aic,
        n: fit.n,
        k: fit.k,
    }
}

fn slx_block(slx: &SlxFit, convention: StarConvention) -> SlxBlock {
    SlxBlock {
        model: model_block(&slx.fit, convention),
        effects: slx
            .effects
            .iter()
            .map(|e| EffectReportRow {
                name: e.name.clone(),
                coefficient: e.direct,
                coefficient_stars: stars(e.direct_p, convention).to_string(),
                direct: e.direct,
                direct_stars: stars(e.direct_p, convention).to_string(),
                indirect: e.indirect,
                indirect_stars: e
                    .indirect_p
                    .map(|p| stars(p, convention).to_string())
                    .unwrap_or_default(),
                total: e.total,
                total_stars: e
                    .total_p
                    .map(|p| stars(p, convention).to_string())
                    .unwrap_or_default(),
                lag_dropped: e.lag_dropped,
            })
            .collect(),
        dropped_lags: slx.dropped_lags.clone(),
    }
}

fn moran_block(result: &MoranResult, convention: StarConvention) -> MoranBlock {
    MoranBlock {
        i: result.i,
        p_value: result.p_value,
        stars: stars(result.p_value, convention).to_string(),
        permutations: result.permutations,
    }
}

pub fn run_analyze(config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    let data = load_analysis_data(config, out_dir)?;
    let convention = config.inference.convention().map_err(Failure::Validation)?;
    let scheme = config.weights.parse_scheme().map_err(Failure::Validation)?;
    let weights = build_weights(&data.frame_index, scheme).map_err(stage_err)?;

    let dir = out_dir.join("analyze");
    std::fs::create_dir_all(&dir).map_err(stage_err)?;
    let mut outputs = Vec::new();

    // Correlations and collinearity diagnostics.
    let pearson: Vec<(String, f64, f64)> = data
        .x
        .iter()
        .map(|(name, colv)| {
            pearson_correlation(colv, &data.y)
                .map(|(r, p)| (name.clone(), r, p))
                .map_err(stage_err)
        })
        .collect::<StageResult<_>>()?;
    let vif_entries = if data.x.len() >= 2 {
        vif(&data.x)
            .map_err(stage_err)?
            .into_iter()
            .map(|e| (e.name, e.vif, e.flagged))
            .collect()
    } else {
        Vec::new()
    };

    // Autocorrelation for the outcome and every regressor.
    let mut moran = BTreeMap::new();
    let rr_moran = morans_i(
        &data.y,
        &weights,
        config.inference.permutations,
        config.seed,
        MoranAlternative::TwoSided,
    )
    .map_err(stage_err)?;
    moran.insert("rr".to_string(), moran_block(&rr_moran, convention));
    for (name, colv) in &data.x {
        let result = morans_i(
            colv,
            &weights,
            config.inference.permutations,
            config.seed,
            MoranAlternative::TwoSided,
        )
        .map_err(stage_err)?;
        moran.insert(name.clone(), moran_block(&result, convention));
    }

    let design = Design::with_intercept(data.x.clone()).map_err(stage_err)?;
    let ols = fit_ols(&data.y, &design).map_err(stage_err)?;

    let slx = if config.regression.run_slx {
        Some(fit_slx(&data.y, &data.x, &weights).map_err(stage_err)?)
    } else {
        None
    };

    let mut robustness = BTreeMap::new();
    if config.regression.run_slx {
        for scheme_name in &config.robustness.schemes {
            let alt = crate::config::scheme_from_parts(
                scheme_name,
                config.weights.threshold_miles,
                config.weights.k,
            )
            .map_err(Failure::Validation)?;
            let alt_weights = build_weights(&data.frame_index, alt).map_err(stage_err)?;
            let alt_moran = morans_i(
                &data.y,
                &alt_weights,
                config.inference.permutations,
                config.seed,
                MoranAlternative::TwoSided,
            )
            .map_err(stage_err)?;
            let alt_slx = fit_slx(&data.y, &data.x, &alt_weights).map_err(stage_err)?;
            robustness.insert(
                scheme_name.clone(),
                RobustnessBlock {
                    scheme: alt.label(),
                    moran_rr: moran_block(&alt_moran, convention),
                    slx: slx_block(&alt_slx, convention),
                },
            );
        }
    }

    // Dense-oracle cross checks on small frames.
    if config.regression.oracle_checks {
        if data.frame.len() <= 200 {
            let moran_inputs: Vec<(&[f64], &SpatialWeights)> =
                vec![(data.y.as_slice(), &weights)];
            let lag_inputs: Vec<(&[f64], &SpatialWeights)> = data
                .x
                .iter()
                .map(|(_, colv)| (colv.as_slice(), &weights))
                .collect();
            let report = oracle_checks(
                &moran_inputs,
                Some((&data.y, &design, &ols)),
                &lag_inputs,
                None,
            );
            let path = dir.join("oracle_report.json");
            write_file(
                &path,
                &(serde_json::to_string_pretty(&report).map_err(stage_err)? + "\n"),
            )
            .map_err(stage_err)?;
            outputs.push(path);
            if !report.passes() {
                return Err(Failure::Stage(anyhow!(
                    "oracle checks failed: {report:?}"
                )));
            }
        } else {
            eprintln!(
                "note: oracle checks skipped (frame has {} units, dense oracles cap at 200)",
                data.frame.len()
            );
        }
    }

    if config.regression.dump_weights {
        let mut out = String::from("i,j,weight\n");
        for (i, row) in weights.iter_rows().enumerate() {
            for &(j, w) in row {
                out.push_str(&format!("{i},{j},{w}\n"));
            }
        }
        let path = dir.join("weights.csv");
        write_file(&path, &out).map_err(stage_err)?;
        outputs.push(path);
    }

    // Raw-scale descriptive statistics.
    let descriptive_path = dir.join("descriptive_stats.csv");
    {
        let mut out = String::from("variable,min,max,mean,std\n");
        for (name, min, max, mean, sd) in data.frame.descriptive_stats() {
            out.push_str(&format!("{name},{min},{max},{mean},{sd}\n"));
        }
        write_file(&descriptive_path, &out).map_err(stage_err)?;
    }
    outputs.push(descriptive_path);

    let report = RegressionReport {
        n: data.frame.len(),
        scheme: scheme.label(),
        scale_variables: config.regression.scale_variables,
        regressors: data.x.iter().map(|(n, _)| n.clone()).collect(),
        dropped_constant: data.dropped_constant.clone(),
        excluded_cbgs: data.frame.excluded.clone(),
        pearson,
        vif: vif_entries,
        moran,
        ols: model_block(&ols, convention),
        slx: slx.as_ref().map(|s| slx_block(s, convention)),
        robustness,
    };
    let report_path = dir.join("regression_report.json");
    write_file(
        &report_path,
        &(serde_json::to_string_pretty(&report).map_err(stage_err)? + "\n"),
    )
    .map_err(stage_err)?;
    outputs.push(report_path);

    let inputs = vec![
        out_dir.join("damage/cbg_damage.csv"),
        out_dir.join("recovery/recovery.csv"),
        out_dir.join("covariates/controls.csv"),
    ];
    record_stage(out_dir, "analyze", &inputs, &outputs).map_err(stage_err)?;
    Ok(())
}

// ── stage: sweep ──────────────────────────────────────────────────────────

#[derive(Serialize)]
struct ReachSummary {
    alpha: f64,
    grid_start_miles: f64,
    grid_stop_miles: f64,
    grid_step_miles: f64,
    focal: BTreeMap<String, spillover_core::spatial::ReachStats>,
}

pub fn run_sweep(config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    let data = load_analysis_data(config, out_dir)?;
    let grid = ThresholdGrid {
        start_miles: config.sweep.start_miles,
        stop_miles: config.sweep.stop_miles,
        step_miles: config.sweep.step_miles,
    };
    let profile = sweep_spatial_reach(
        &data.y,
        &data.x,
        &data.frame_index,
        grid,
        config.sweep.alpha,
    )
    .map_err(stage_err)?;

    let dir = out_dir.join("sweep");
    std::fs::create_dir_all(&dir).map_err(stage_err)?;

    let profile_path = dir.join("reach_profile.csv");
    {
        let mut out = String::from("D,variable,direct,indirect,total,p_indirect,skipped\n");
        for rec in &profile.records {
            match &rec.outcome {
                ThresholdOutcome::Fitted { effects, .. } => {
                    for e in effects {
                        let p = e
                            .indirect_p
                            .map(|p| p.to_string())
                            .unwrap_or_default();
                        out.push_str(&format!(
                            "{},{},{},{},{},{},false\n",
                            rec.threshold_miles, e.name, e.direct, e.indirect, e.total, p
                        ));
                    }
                }
                ThresholdOutcome::Skipped { .. } => {
                    for name in &profile.variables {
                        out.push_str(&format!("{},{},,,,,true\n", rec.threshold_miles, name));
                    }
                }
            }
        }
        write_file(&profile_path, &out).map_err(stage_err)?;
    }

    let mut focal = BTreeMap::new();
    for name in &config.sweep.focal {
        if profile.variables.contains(name) {
            focal.insert(name.clone(), profile.stats_for(name));
        }
    }
    let summary = ReachSummary {
        alpha: config.sweep.alpha,
        grid_start_miles: grid.start_miles,
        grid_stop_miles: grid.stop_miles,
        grid_step_miles: grid.step_miles,
        focal,
    };
    let summary_path = dir.join("reach_summary.json");
    write_file(
        &summary_path,
        &(serde_json::to_string_pretty(&summary).map_err(stage_err)? + "\n"),
    )
    .map_err(stage_err)?;

    let inputs = vec![
        out_dir.join("damage/cbg_damage.csv"),
        out_dir.join("recovery/recovery.csv"),
        out_dir.join("covariates/controls.csv"),
    ];
    record_stage(out_dir, "sweep", &inputs, &[profile_path, summary_path]).map_err(stage_err)?;
    Ok(())
}

// ── stage: decay ──────────────────────────────────────────────────────────

fn decay_threshold(config: &PipelineConfig, out_dir: &Path) -> StageResult<f64> {
    if config.decay.threshold_miles > 0.0 {
        return Ok(config.decay.threshold_miles);
    }
    let summary_path = out_dir.join("sweep/reach_summary.json");
    require_input(
        &summary_path,
        "reach summary (run sweep first, or set decay.threshold_miles)",
    )?;
    let text = std::fs::read_to_string(&summary_path).map_err(stage_err)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(stage_err)?;
    let focal = &value["focal"];
    // Prefer the damage feature's own reach; fall back to any focal entry.
    let candidates: Vec<&serde_json::Value> = std::iter::once(&focal[&config.decay.damage_feature])
        .chain(
            focal
                .as_object()
                .map(|m| m.values().collect::<Vec<_>>())
                .unwrap_or_default(),
        )
        .collect();
    for stats in candidates {
        if let Some(d) = stats["extremum_miles"].as_f64() {
            return Ok(d);
        }
    }
    validation(anyhow!(
        "no reach statistics available; set decay.threshold_miles explicitly"
    ))
}

pub fn run_decay(config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    let data = load_analysis_data(config, out_dir)?;
    let threshold = decay_threshold(config, out_dir)?;

    // Raw recovery rates with min-max-scaled damage exposure.
    let damage_raw = data
        .frame
        .column(&config.decay.damage_feature)
        .map_err(stage_err)?;
    let damage_scaled = min_max_scale(damage_raw).map_err(stage_err)?;
    let weights = build_weights(
        &data.frame_index,
        WeightScheme::InverseDistanceThresholded {
            threshold_miles: threshold,
        },
    )
    .map_err(stage_err)?;
    let exposure = config.decay.parse_exposure().map_err(Failure::Validation)?;
    let field = compute_decay_coefficients(&data.frame.rr, &damage_scaled.values, &weights, exposure)
        .map_err(stage_err)?;

    let dir = out_dir.join("decay");
    std::fs::create_dir_all(&dir).map_err(stage_err)?;
    let decay_path = dir.join("decay.csv");
    {
        let excluded: BTreeMap<usize, &str> = field
            .excluded
            .iter()
            .map(|(i, why)| (*i, why.as_str()))
            .collect();
        let mut out = String::from("cbg_id,k,excluded_reason\n");
        for (i, id) in data.frame.ids.iter().enumerate() {
            match field.k[i] {
                Some(k) => out.push_str(&format!("{id},{k},\n")),
                None => out.push_str(&format!(
                    "{id},,{}\n",
                    excluded.get(&i).copied().unwrap_or("excluded")
                )),
            }
        }
        write_file(&decay_path, &out).map_err(stage_err)?;
    }

    #[derive(Serialize)]
    struct DecaySummary {
        threshold_miles: f64,
        damage_feature: String,
        exposure: String,
        rr0: f64,
        included: usize,
        excluded: usize,
    }
    let summary = DecaySummary {
        threshold_miles: threshold,
        damage_feature: config.decay.damage_feature.clone(),
        exposure: config.decay.exposure.clone(),
        rr0: field.rr0,
        included: field.k.iter().flatten().count(),
        excluded: field.excluded.len(),
    };
    let summary_path = dir.join("decay_summary.json");
    write_file(
        &summary_path,
        &(serde_json::to_string_pretty(&summary).map_err(stage_err)? + "\n"),
    )
    .map_err(stage_err)?;

    let inputs = vec![
        out_dir.join("damage/cbg_damage.csv"),
        out_dir.join("recovery/recovery.csv"),
        out_dir.join("covariates/controls.csv"),
    ];
    record_stage(out_dir, "decay", &inputs, &[decay_path, summary_path]).map_err(stage_err)?;
    Ok(())
}

// ── stage: heterogeneity ─────────────────────────────────────────────────

pub fn run_heterogeneity(config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    let data = load_analysis_data(config, out_dir)?;
    let decay_path = out_dir.join("decay/decay.csv");
    require_input(&decay_path, "decay coefficients (run decay first)")?;
    let (headers, rows) = csv_rows(&decay_path).map_err(stage_err)?;
    let id_col = col(&headers, "cbg_id", &decay_path).map_err(stage_err)?;
    let k_col = col(&headers, "k", &decay_path).map_err(stage_err)?;
    let mut k_by_id: BTreeMap<String, Option<f64>> = BTreeMap::new();
    for row in rows {
        k_by_id.insert(
            row.get(id_col).unwrap_or("").to_string(),
            opt_f64(row.get(k_col).unwrap_or("")),
        );
    }
    let k: Vec<Option<f64>> = data
        .frame
        .ids
        .iter()
        .map(|id| k_by_id.get(id).copied().flatten())
        .collect();

    let mut results: BTreeMap<String, HeterogeneityResult> = BTreeMap::new();
    for feature in &config.heterogeneity.features {
        let grouping = data.frame.column(feature).map_err(stage_err)?;
        let result = heterogeneity_test(&k, grouping, feature).map_err(stage_err)?;
        results.insert(feature.clone(), result);
    }

    let dir = out_dir.join("heterogeneity");
    std::fs::create_dir_all(&dir).map_err(stage_err)?;
    let path = dir.join("heterogeneity.json");
    write_file(
        &path,
        &(serde_json::to_string_pretty(&results).map_err(stage_err)? + "\n"),
    )
    .map_err(stage_err)?;

    record_stage(out_dir, "heterogeneity", &[decay_path], &[path]).map_err(stage_err)?;
    Ok(())
}

// ── run-all ───────────────────────────────────────────────────────────────

pub fn run_all(config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    for stage in STAGES {
        run_stage(stage, config, out_dir)?;
    }
    Ok(())
}

pub fn run_stage(stage: &str, config: &PipelineConfig, out_dir: &Path) -> StageResult<()> {
    eprintln!("running stage: {stage}");
    match stage {
        "ingest" => run_ingest(config, out_dir),
        "damage" => run_damage(config, out_dir),
        "recovery" => run_recovery(config, out_dir),
        "covariates" => run_covariates(config, out_dir),
        "analyze" => run_analyze(config, out_dir),
        "sweep" => run_sweep(config, out_dir),
        "decay" => run_decay(config, out_dir),
        "heterogeneity" => run_heterogeneity(config, out_dir),
        other => validation(anyhow!("unknown stage '{other}'")),
    }
}
