//! The synth subcommand: realize a scenario into input tables plus a
//! ready-to-run pipeline config and the ground-truth sidecar.

use crate::config::PipelineConfig;
use crate::stages::Failure;
use anyhow::Context;
use spillover_core::ingest as emit;
use spillover_core::synthetic::{
    generate_scenario, Layout, MobilityParams, PlantedCoefficient, ScenarioSpec, SynthError,
    BASELINE_WINDOW, EVENT_WINDOW, HMI_WINDOW,
};
use std::path::Path;

fn classify(err: SynthError) -> Failure {
    match &err {
        SynthError::InvalidSpec(_) => Failure::Validation(err.into()),
        _ => Failure::Stage(err.into()),
    }
}

/// Small demonstration scenario used when no spec file is given.
pub fn demo_spec() -> ScenarioSpec {
    ScenarioSpec {
        seed: 42,
        n_cbgs: 48,
        layout: Layout::UniformCloud { extent_miles: 25.0 },
        beta0: 0.5,
        coefficients: vec![
            PlantedCoefficient { name: "mp".into(), beta: 2.0, theta: -3.0 },
            PlantedCoefficient { name: "nc".into(), beta: -0.002, theta: 0.001 },
            PlantedCoefficient { name: "poi".into(), beta: 0.0005, theta: 0.0 },
            PlantedCoefficient { name: "hmi".into(), beta: 0.05, theta: 0.0 },
        ],
        spillover_radius_miles: 8.0,
        noise_sigma: 0.0,
        mobility: MobilityParams::default(),
        max_claim_pairs: 4,
        ia_fraction: 0.25,
    }
}

pub fn run_synth(
    scenario_path: Option<&Path>,
    out_dir: &Path,
    config_path: Option<&Path>,
) -> Result<(), Failure> {
    let spec: ScenarioSpec = match scenario_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading scenario {}", path.display()))
                .map_err(Failure::Validation)?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing scenario {}", path.display()))
                .map_err(Failure::Validation)?
        }
        None => demo_spec(),
    };

    let scenario = generate_scenario(&spec).map_err(classify)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(Failure::Stage)?;

    let write = |r: Result<(), spillover_core::ingest::IngestError>| r.map_err(|e| Failure::Stage(e.into()));
    write(emit::emit_parcels(&out_dir.join("parcels.csv"), &scenario.parcels))?;
    write(emit::emit_claims(&out_dir.join("claims.csv"), &scenario.claims))?;
    write(emit::emit_stops(&out_dir.join("stops.csv"), &scenario.stops))?;
    write(emit::emit_cbgs(&out_dir.join("cbgs.csv"), &scenario.index))?;
    write(emit::emit_adjacency(&out_dir.join("adjacency.csv"), &scenario.index))?;
    write(emit::emit_census(&out_dir.join("census.csv"), &scenario.census))?;
    write(emit::emit_count_table(&out_dir.join("poi.csv"), "poi_count", &scenario.poi))?;
    write(emit::emit_count_table(&out_dir.join("roads.csv"), "segment_count", &scenario.roads))?;
    write(emit::emit_bridge_pairs(&out_dir.join("bridge_pairs.csv"), &scenario.bridge_pairs))?;

    let truth = serde_json::to_string_pretty(&scenario.truth).map_err(|e| Failure::Stage(e.into()))?;
    std::fs::write(out_dir.join("ground_truth.json"), truth + "\n")
        .context("writing ground truth")
        .map_err(Failure::Stage)?;

    // Scenario JSON as realized (handy when the demo spec was used).
    let spec_json = serde_json::to_string_pretty(&spec).map_err(|e| Failure::Stage(e.into()))?;
    std::fs::write(out_dir.join("scenario.json"), spec_json + "\n")
        .context("writing scenario spec")
        .map_err(Failure::Stage)?;

    // Matching pipeline config: planted coefficients live on the raw scale,
    // so min-max scaling is off; the weight scheme matches the planted
    // spillover structure.
    let mut config = PipelineConfig::default_for(out_dir);
    config.seed = spec.seed;
    let d = |(y, m, dd): (i32, u32, u32)| chrono::NaiveDate::from_ymd_opt(y, m, dd).unwrap();
    config.windows.baseline_start = d(BASELINE_WINDOW.0);
    config.windows.baseline_end = d(BASELINE_WINDOW.1);
    config.windows.event_start = d(EVENT_WINDOW.0);
    config.windows.event_end = d(EVENT_WINDOW.1);
    config.windows.hmi_start = d(HMI_WINDOW.0);
    config.windows.hmi_end = d(HMI_WINDOW.1);
    config.weights.scheme = "inverse_distance_thresholded".into();
    config.weights.threshold_miles = spec.spillover_radius_miles;
    config.regression.regressors = scenario.regressors.clone();
    config.regression.scale_variables = false;
    config.regression.oracle_checks = spec.n_cbgs <= 200;
    let extent = spec.layout.extent_miles();
    config.sweep.start_miles = 0.5;
    config.sweep.stop_miles = (extent * 1.5).ceil();
    config.sweep.step_miles = 0.5;
    config.sweep.focal = scenario.regressors.clone();
    config.decay.damage_feature = "nc".into();
    config.decay.threshold_miles = spec.spillover_radius_miles;
    config.validate().map_err(Failure::Stage)?;

    let config_out = config_path
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| out_dir.join("config.toml"));
    let text = config.to_annotated_toml().map_err(Failure::Stage)?;
    std::fs::write(&config_out, text)
        .with_context(|| format!("writing {}", config_out.display()))
        .map_err(Failure::Stage)?;

    println!(
        "generated {} CBGs, {} parcels, {} claims, {} stops into {}",
        scenario.index.len(),
        scenario.parcels.len(),
        scenario.claims.len(),
        scenario.stops.len(),
        out_dir.display()
    );
    println!("config: {}", config_out.display());
    Ok(())
}
