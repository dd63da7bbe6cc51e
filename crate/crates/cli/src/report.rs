//! Human-readable and machine-readable report tables, rendered strictly from
//! stage artifacts — nothing is recomputed here.

use anyhow::{anyhow, Context, Result};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn run_report(out_dir: &Path) -> Result<Vec<PathBuf>> {
    let report_path = out_dir.join("analyze/regression_report.json");
    if !report_path.exists() {
        return Err(anyhow!(
            "missing regression artifacts at {}; run the analyze stage first",
            report_path.display()
        ));
    }
    let report: Value = serde_json::from_str(
        &std::fs::read_to_string(&report_path).context("reading regression report")?,
    )?;
    let dir = out_dir.join("report");
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();

    // ── Table 1: descriptive statistics ──────────────────────────────────
    let descriptive_src = out_dir.join("analyze/descriptive_stats.csv");
    if descriptive_src.exists() {
        let csv_out = dir.join("table1_descriptive.csv");
        std::fs::copy(&descriptive_src, &csv_out)?;
        written.push(csv_out);

        let mut text = String::new();
        writeln!(text, "Descriptive statistics of variables")?;
        writeln!(text, "{:-<58}", "")?;
        writeln!(
            text,
            "{:<10} {:>11} {:>11} {:>11} {:>11}",
            "Variable", "Min", "Max", "Mean", "Std Dev"
        )?;
        let mut reader = csv::Reader::from_path(&descriptive_src)?;
        for row in reader.records() {
            let row = row?;
            let parse = |i: usize| row.get(i).unwrap_or("").parse::<f64>().unwrap_or(f64::NAN);
            writeln!(
                text,
                "{:<10} {:>11.3} {:>11.3} {:>11.3} {:>11.3}",
                row.get(0).unwrap_or(""),
                parse(1),
                parse(2),
                parse(3),
                parse(4)
            )?;
        }
        writeln!(text, "{:-<58}", "")?;
        let txt_out = dir.join("table1_descriptive.txt");
        std::fs::write(&txt_out, text)?;
        written.push(txt_out);
    }

    // ── Table 2: regression and effect decomposition ─────────────────────
    let (csv_out, txt_out) = render_table2(&report, &dir)?;
    written.push(csv_out);
    written.push(txt_out);

    // ── Robustness across weight schemes ─────────────────────────────────
    if report["robustness"]
        .as_object()
        .map(|m| !m.is_empty())
        .unwrap_or(false)
    {
        let (csv_out, txt_out) = render_robustness(&report, &dir)?;
        written.push(csv_out);
        written.push(txt_out);
    }

    // ── Reach curve data ─────────────────────────────────────────────────
    let reach_src = out_dir.join("sweep/reach_profile.csv");
    if reach_src.exists() {
        let out = dir.join("reach_curve.csv");
        std::fs::copy(&reach_src, &out)?;
        written.push(out);
    }

    Ok(written)
}

fn fnum(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn coefficient_by_name<'v>(block: &'v Value, name: &str) -> Option<&'v Value> {
    block["coefficients"]
        .as_array()?
        .iter()
        .find(|c| c["name"].as_str() == Some(name))
}

fn render_table2(report: &Value, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let ols = &report["ols"];
    let slx = &report["slx"];
    let has_slx = !slx.is_null();
    let regressors: Vec<String> = report["regressors"]
        .as_array()
        .map(|a| {
            a.iter()
                .filter_map(|v| v.as_str().map(|s| s.to_string()))
                .collect()
        })
        .unwrap_or_default();

    // Delimited layout: the machine contract.
    let mut csv_text = String::new();
    if has_slx {
        csv_text.push_str(
            "variable,ols_coefficient,ols_stars,slx_coefficient,slx_stars,direct,direct_stars,indirect,indirect_stars,total,total_stars\n",
        );
    } else {
        csv_text.push_str("variable,ols_coefficient,ols_stars\n");
    }
    for name in &regressors {
        let ols_c = coefficient_by_name(ols, name);
        let (oc, ostars) = ols_c
            .map(|c| (fnum(&c["estimate"]), c["stars"].as_str().unwrap_or("").to_string()))
            .unwrap_or((f64::NAN, String::new()));
        if has_slx {
            let effect = slx["effects"]
                .as_array()
                .and_then(|a| a.iter().find(|e| e["name"].as_str() == Some(name)));
            match effect {
                Some(e) => {
                    csv_text.push_str(&format!(
                        "{name},{oc},{ostars},{},{},{},{},{},{},{},{}\n",
                        fnum(&e["coefficient"]),
                        e["coefficient_stars"].as_str().unwrap_or(""),
                        fnum(&e["direct"]),
                        e["direct_stars"].as_str().unwrap_or(""),
                        fnum(&e["indirect"]),
                        e["indirect_stars"].as_str().unwrap_or(""),
                        fnum(&e["total"]),
                        e["total_stars"].as_str().unwrap_or("")
                    ));
                }
                None => csv_text.push_str(&format!("{name},{oc},{ostars},,,,,,,,\n")),
            }
        } else {
            csv_text.push_str(&format!("{name},{oc},{ostars}\n"));
        }
    }
    // Model metrics rows.
    let metric = |block: &Value, key: &str| fnum(&block[key]);
    if has_slx {
        for key in ["r_squared", "adj_r_squared", "log_likelihood", "aic"] {
            csv_text.push_str(&format!(
                "{key},{},,{},,,,,,,\n",
                metric(ols, key),
                metric(&slx["model"], key)
            ));
        }
    } else {
        for key in ["r_squared", "adj_r_squared", "log_likelihood", "aic"] {
            csv_text.push_str(&format!("{key},{},\n", metric(ols, key)));
        }
    }
    let csv_out = dir.join("table2_regression.csv");
    std::fs::write(&csv_out, &csv_text)?;

    // Formatted layout.
    let mut text = String::new();
    writeln!(text, "Regression results and model performance")?;
    if has_slx {
        let moran = &report["moran"]["rr"];
        writeln!(
            text,
            "Weights: {} | Outcome Moran's I: {:.3}, p = {:.3}{}",
            report["scheme"].as_str().unwrap_or(""),
            fnum(&moran["i"]),
            fnum(&moran["p_value"]),
            moran["stars"].as_str().unwrap_or("")
        )?;
        writeln!(text, "{:-<88}", "")?;
        writeln!(
            text,
            "{:<10} {:>14} {:>14} {:>14} {:>14} {:>14}",
            "Variable", "OLS Coef", "SLX Coef", "Direct", "Indirect", "Total"
        )?;
        writeln!(text, "{:-<88}", "")?;
        for name in &regressors {
            let oc = coefficient_by_name(ols, name);
            let effect = slx["effects"]
                .as_array()
                .and_then(|a| a.iter().find(|e| e["name"].as_str() == Some(name)));
            let cell = |v: f64, s: &str| format!("{v:.3}{s}");
            let ols_cell = oc
                .map(|c| cell(fnum(&c["estimate"]), c["stars"].as_str().unwrap_or("")))
                .unwrap_or_default();
            match effect {
                Some(e) => {
                    writeln!(
                        text,
                        "{:<10} {:>14} {:>14} {:>14} {:>14} {:>14}",
                        name,
                        ols_cell,
                        cell(
                            fnum(&e["coefficient"]),
                            e["coefficient_stars"].as_str().unwrap_or("")
                        ),
                        cell(fnum(&e["direct"]), e["direct_stars"].as_str().unwrap_or("")),
                        cell(
                            fnum(&e["indirect"]),
                            e["indirect_stars"].as_str().unwrap_or("")
                        ),
                        cell(fnum(&e["total"]), e["total_stars"].as_str().unwrap_or(""))
                    )?;
                }
                None => writeln!(text, "{:<10} {:>14}", name, ols_cell)?,
            }
        }
        writeln!(text, "{:-<88}", "")?;
        writeln!(
            text,
            "{:<16} {:>14.3} {:>14.3}",
            "R-squared",
            metric(ols, "r_squared"),
            metric(&slx["model"], "r_squared")
        )?;
        writeln!(
            text,
            "{:<16} {:>14.3} {:>14.3}",
            "Adj R-squared",
            metric(ols, "adj_r_squared"),
            metric(&slx["model"], "adj_r_squared")
        )?;
        writeln!(
            text,
            "{:<16} {:>14.3} {:>14.3}",
            "Log-likelihood",
            metric(ols, "log_likelihood"),
            metric(&slx["model"], "log_likelihood")
        )?;
        writeln!(
            text,
            "{:<16} {:>14.3} {:>14.3}",
            "AIC",
            metric(ols, "aic"),
            metric(&slx["model"], "aic")
        )?;
    } else {
        writeln!(text, "{:-<40}", "")?;
        writeln!(text, "{:<10} {:>14}", "Variable", "OLS Coef")?;
        writeln!(text, "{:-<40}", "")?;
        for name in &regressors {
            let oc = coefficient_by_name(ols, name);
            let ols_cell = oc
                .map(|c| format!("{:.3}{}", fnum(&c["estimate"]), c["stars"].as_str().unwrap_or("")))
                .unwrap_or_default();
            writeln!(text, "{:<10} {:>14}", name, ols_cell)?;
        }
        writeln!(text, "{:-<40}", "")?;
        writeln!(text, "{:<16} {:>14.3}", "R-squared", metric(ols, "r_squared"))?;
        writeln!(
            text,
            "{:<16} {:>14.3}",
            "Adj R-squared",
            metric(ols, "adj_r_squared")
        )?;
        writeln!(
            text,
            "{:<16} {:>14.3}",
            "Log-likelihood",
            metric(ols, "log_likelihood")
        )?;
        writeln!(text, "{:<16} {:>14.3}", "AIC", metric(ols, "aic"))?;
    }
    writeln!(
        text,
        "Note: observations: {} CBGs; ***, **, and * mark significance at 1%, 5%, and 10%.",
        report["n"].as_u64().unwrap_or(0)
    )?;
    let txt_out = dir.join("table2_regression.txt");
    std::fs::write(&txt_out, text)?;
    Ok((csv_out, txt_out))
}

fn render_robustness(report: &Value, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let robustness = report["robustness"]
        .as_object()
        .ok_or_else(|| anyhow!("robustness block missing"))?;
    let regressors: Vec<String> = report["regressors"]
        .as_array()
        .map(|a| {
            a.iter()
                .filter_map(|v| v.as_str().map(|s| s.to_string()))
                .collect()
        })
        .unwrap_or_default();

    let mut csv_text = String::from(
        "scheme,variable,coefficient,coefficient_stars,direct,direct_stars,indirect,indirect_stars,total,total_stars\n",
    );
    let mut text = String::new();
    writeln!(
        text,
        "Robustness: effect decomposition under alternative weight schemes"
    )?;
    for (key, block) in robustness {
        let scheme = block["scheme"].as_str().unwrap_or(key);
        let moran = &block["moran_rr"];
        writeln!(text, "{:-<88}", "")?;
        writeln!(
            text,
            "{scheme} (Moran's I: {:.3}, p = {:.3}{})",
            fnum(&moran["i"]),
            fnum(&moran["p_value"]),
            moran["stars"].as_str().unwrap_or("")
        )?;
        writeln!(
            text,
            "{:<10} {:>14} {:>14} {:>14} {:>14}",
            "Variable", "Coefficient", "Direct", "Indirect", "Total"
        )?;
        for name in &regressors {
            let effect = block["slx"]["effects"]
                .as_array()
                .and_then(|a| a.iter().find(|e| e["name"].as_str() == Some(name)));
            let Some(e) = effect else { continue };
            let cell = |v: f64, s: &str| format!("{v:.3}{s}");
            csv_text.push_str(&format!(
                "{key},{name},{},{},{},{},{},{},{},{}\n",
                fnum(&e["coefficient"]),
                e["coefficient_stars"].as_str().unwrap_or(""),
                fnum(&e["direct"]),
                e["direct_stars"].as_str().unwrap_or(""),
                fnum(&e["indirect"]),
                e["indirect_stars"].as_str().unwrap_or(""),
                fnum(&e["total"]),
                e["total_stars"].as_str().unwrap_or("")
            ));
            writeln!(
                text,
                "{:<10} {:>14} {:>14} {:>14} {:>14}",
                name,
                cell(
                    fnum(&e["coefficient"]),
                    e["coefficient_stars"].as_str().unwrap_or("")
                ),
                cell(fnum(&e["direct"]), e["direct_stars"].as_str().unwrap_or("")),
                cell(
                    fnum(&e["indirect"]),
                    e["indirect_stars"].as_str().unwrap_or("")
                ),
                cell(fnum(&e["total"]), e["total_stars"].as_str().unwrap_or(""))
            )?;
        }
        let model = &block["slx"]["model"];
        writeln!(
            text,
            "R2 {:.3} | Adj R2 {:.3} | logL {:.3} | AIC {:.3}",
            fnum(&model["r_squared"]),
            fnum(&model["adj_r_squared"]),
            fnum(&model["log_likelihood"]),
            fnum(&model["aic"])
        )?;
        for key2 in ["r_squared", "adj_r_squared", "log_likelihood", "aic"] {
            csv_text.push_str(&format!("{key},{key2},{},,,,,,,\n", fnum(&model[key2])));
        }
    }
    let csv_out = dir.join("robustness.csv");
    std::fs::write(&csv_out, &csv_text)?;
    let txt_out = dir.join("robustness.txt");
    std::fs::write(&txt_out, text)?;
    Ok((csv_out, txt_out))
}
