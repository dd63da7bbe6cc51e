//! End-to-end acceptance: pipeline determinism, planted-coefficient closure
//! through the full CSV round trip, and report fidelity against a golden
//! file. Run with `cargo test -p spillover-cli --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

fn spillover() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spillover"))
}

fn run_ok(cmd: &mut Command) {
    let output = cmd.output().expect("spawning spillover");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn synth_and_run(base: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = base.join("data");
    let run = base.join("run");
    run_ok(spillover().args(["synth", "--out"]).arg(&data));
    run_ok(
        spillover()
            .args(["run-all", "--config"])
            .arg(data.join("config.toml"))
            .arg("--out")
            .arg(&run),
    );
    (data, run)
}

/// Every file under `dir`, keyed by relative path, as raw bytes.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(&current).expect("readable dir") {
            let entry = entry.expect("dir entry");
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

#[test]
fn criterion_end_to_end_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    run_ok(spillover().args(["synth", "--out"]).arg(&data));

    let run_a = tmp.path().join("a");
    let run_b = tmp.path().join("b");
    for run in [&run_a, &run_b] {
        run_ok(
            spillover()
                .args(["run-all", "--config"])
                .arg(data.join("config.toml"))
                .arg("--out")
                .arg(run),
        );
    }
    let a = snapshot(&run_a);
    let b = snapshot(&run_b);
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>(),
        "artifact file sets differ"
    );
    for (path, bytes) in &a {
        assert_eq!(bytes, &b[path], "artifact {path} differs between runs");
    }
    assert!(a.len() > 20, "expected a full artifact tree, got {} files", a.len());
    println!(
        "[PASS] determinism: {} artifacts byte-identical across independent run-all invocations",
        a.len()
    );
}

#[test]
fn criterion_pipeline_recovers_planted_coefficients() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, run) = synth_and_run(tmp.path());

    let truth: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(data.join("ground_truth.json")).unwrap(),
    )
    .unwrap();
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run.join("analyze/regression_report.json")).unwrap(),
    )
    .unwrap();

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(
        manifest["stages"].as_object().unwrap().len(),
        8,
        "manifest should list 8 completed stages"
    );

    let effects = report["slx"]["effects"].as_array().unwrap();
    for planted in truth["coefficients"].as_array().unwrap() {
        let name = planted["name"].as_str().unwrap();
        let beta = planted["beta"].as_f64().unwrap();
        let theta = planted["theta"].as_f64().unwrap();
        let row = effects
            .iter()
            .find(|e| e["name"].as_str() == Some(name))
            .unwrap_or_else(|| panic!("effect row for {name}"));
        let direct = row["direct"].as_f64().unwrap();
        let indirect = row["indirect"].as_f64().unwrap();
        assert!(
            (direct - beta).abs() < 1e-6,
            "{name}: direct {direct} vs planted {beta}"
        );
        assert!(
            (indirect - theta).abs() < 1e-6,
            "{name}: indirect {indirect} vs planted {theta}"
        );
    }
    let constant = report["slx"]["model"]["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"].as_str() == Some("const"))
        .unwrap()["estimate"]
        .as_f64()
        .unwrap();
    let beta0 = truth["beta0"].as_f64().unwrap();
    assert!((constant - beta0).abs() < 1e-6, "const {constant} vs {beta0}");

    // Dense-oracle cross checks ran (small n) and passed.
    let oracle: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run.join("analyze/oracle_report.json")).unwrap(),
    )
    .unwrap();
    assert!(oracle["max_moran_deviation"].as_f64().unwrap() <= 1e-12);
    assert!(oracle["max_ols_deviation"].as_f64().unwrap() <= 1e-8);
    println!(
        "[PASS] pipeline closure: planted coefficients recovered within 1e-6 through the full CSV round trip"
    );
}

#[test]
fn criterion_report_fidelity_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let (_data, run) = synth_and_run(tmp.path());
    run_ok(spillover().args(["report", "--out"]).arg(&run));

    let table2 = std::fs::read_to_string(run.join("report/table2_regression.txt")).unwrap();
    let golden = include_str!("golden/table2_regression.txt");
    assert_eq!(
        table2, golden,
        "table2_regression.txt deviates from the golden file"
    );

    // Structural contract: decomposition columns and the star convention.
    for needed in ["Coefficient", "Direct", "Indirect", "Total"] {
        let header_ok = table2.contains(needed)
            || table2.contains(&format!("{} ", needed.to_uppercase()))
            || table2.contains("SLX Coef");
        assert!(header_ok, "missing column marker '{needed}'");
    }
    assert!(
        table2.contains("***, **, and * mark significance at 1%, 5%, and 10%"),
        "missing star-convention note"
    );
    let csv2 = std::fs::read_to_string(run.join("report/table2_regression.csv")).unwrap();
    let header = csv2.lines().next().unwrap();
    for column in ["slx_coefficient", "direct", "indirect", "total"] {
        assert!(header.contains(column), "csv header lacks '{column}'");
    }
    println!("[PASS] report fidelity: Table-2 layout matches golden file, effect columns and star note present");
}

#[test]
fn ols_only_run_omits_effect_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    run_ok(spillover().args(["synth", "--out"]).arg(&data));

    // Disable the lagged model: the report must omit the effect columns
    // rather than blank-fill them.
    let config_path = data.join("config.toml");
    let config = std::fs::read_to_string(&config_path).unwrap();
    let config = config.replace("run_slx = true", "run_slx = false");
    std::fs::write(&config_path, config).unwrap();

    let run = tmp.path().join("run");
    run_ok(
        spillover()
            .args(["run-all", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&run),
    );
    run_ok(spillover().args(["report", "--out"]).arg(&run));
    let csv2 = std::fs::read_to_string(run.join("report/table2_regression.csv")).unwrap();
    let header = csv2.lines().next().unwrap();
    assert_eq!(header, "variable,ols_coefficient,ols_stars");
    println!("[PASS] OLS-only run omits effect columns");
}

#[test]
fn missing_input_fails_with_validation_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    run_ok(spillover().args(["synth", "--out"]).arg(&data));
    std::fs::remove_file(data.join("stops.csv")).unwrap();

    let out = spillover()
        .args(["run-all", "--config"])
        .arg(data.join("config.toml"))
        .arg("--out")
        .arg(tmp.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "validation failures exit 1");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stops"), "error names the missing input: {stderr}");
}
