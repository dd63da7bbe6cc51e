use spillover_core::econometrics::fit_slx;
use spillover_core::synthetic::*;
use spillover_core::weights::{build_weights, WeightScheme};

fn main() {
    for sigma in [0.0, 0.01, 0.1] {
        for seed in 1..=3u64 {
            let spec = ScenarioSpec {
                seed,
                n_cbgs: 60,
                layout: Layout::UniformCloud { extent_miles: 25.0 },
                beta0: 0.5,
                coefficients: vec![
                    PlantedCoefficient { name: "mp".into(), beta: 2.0, theta: -3.0 },
                    PlantedCoefficient { name: "nc".into(), beta: -0.002, theta: 0.001 },
                ],
                spillover_radius_miles: 8.0,
                noise_sigma: sigma,
                mobility: MobilityParams::default(),
                max_claim_pairs: 4,
                ia_fraction: 0.0,
            };
            match generate_scenario(&spec) {
                Ok(s) => {
                    let w = build_weights(
                        &s.index,
                        WeightScheme::InverseDistanceThresholded { threshold_miles: 8.0 },
                    )
                    .unwrap();
                    let x: Vec<(String, Vec<f64>)> = s
                        .regressors
                        .iter()
                        .map(|n| (n.clone(), s.truth.variables[n].clone()))
                        .collect();
                    let slx = fit_slx(&s.truth.rr, &x, &w).unwrap();
                    let mp = slx.effects.iter().find(|e| e.name == "mp").unwrap();
                    println!(
                        "sigma {sigma:5.2} seed {seed}: direct err {:+.4e} indirect err {:+.4e} const err {:+.4e}",
                        mp.direct - 2.0,
                        mp.indirect + 3.0,
                        slx.fit.coefficients[0] - 0.5
                    );
                }
                Err(e) => println!("sigma {sigma} seed {seed}: {e}"),
            }
        }
    }
}
