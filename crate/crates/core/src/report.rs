//! Comparison tables over metrics files, and run manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, ExperimentMetrics, ExperimentOutput, METRICS_SCHEMA};
use crate::telemetry::write_csv;

pub fn parse_metrics(text: &str) -> Result<ExperimentMetrics> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(METRICS_SCHEMA) => {}
        Some(other) => return Err(Error::Schema(format!("expected `{METRICS_SCHEMA}`, found `{other}`"))),
        None => return Err(Error::Schema("metrics file has no `schema` field".into())),
    }
    serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))
}

fn column(m: &ExperimentMetrics) -> String {
    let mut c = format!("{} {}", m.mode.as_str(), m.demo_budget);
    if m.noise_sigma > 0.0 {
        write!(c, " noisy").unwrap();
    }
    c
}

/// Markdown table with one row per (algorithm, split) and one column per
/// (mode, budget); cells hold the mean success rate over seeds, "—" where
/// no run exists. A per-seed listing follows.
pub fn render_table(runs: &[ExperimentMetrics]) -> Result<String> {
    if runs.is_empty() {
        return Err(Error::invalid("at least one metrics file is required"));
    }
    let mut cols: Vec<(u8, usize, bool, String)> = runs
        .iter()
        .map(|m| (m.mode.as_str() != "seen") as u8)
        .zip(runs)
        .map(|(k, m)| (k, m.demo_budget, m.noise_sigma > 0.0, column(m)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    cols.dedup_by(|a, b| a.3 == b.3);
    let mut rows: Vec<(String, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    for m in runs {
        let row = (m.algorithm.clone(), m.split.clone());
        if !rows.contains(&row) {
            rows.push(row.clone());
        }
        cells.insert((row.0, row.1, column(m)), m.mean_success_rate);
    }
    rows.sort_by(|a, b| (a.0 != "Baseline", &a.0, &a.1).cmp(&(b.0 != "Baseline", &b.0, &b.1)));

    let mut out = String::new();
    write!(out, "| Algorithm | Split |").unwrap();
    for c in &cols {
        write!(out, " {} |", c.3).unwrap();
    }
    write!(out, "\n|---|---|").unwrap();
    for _ in &cols {
        out.push_str("---:|");
    }
    out.push('\n');
    for (alg, split) in &rows {
        write!(out, "| {alg} | {split} |").unwrap();
        for c in &cols {
            match cells.get(&(alg.clone(), split.clone(), c.3.clone())) {
                Some(v) => write!(out, " {v:.1} |").unwrap(),
                None => out.push_str(" — |"),
            }
        }
        out.push('\n');
    }
    out.push_str("\nPer seed success rates (%):\n\n");
    for m in runs {
        let rates: Vec<String> = m.seeds.iter().map(|s| format!("seed {}: {:.1}", s.seed, s.success_rate)).collect();
        writeln!(
            out,
            "- {} {}, {}: mean {:.1} ± {:.1} ({})",
            m.algorithm,
            m.split,
            column(m),
            m.mean_success_rate,
            m.std_success_rate,
            rates.join(", ")
        )
        .unwrap();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub package: String,
    pub version: String,
    /// Commit the binary was built from, when known.
    pub git_rev: Option<String>,
}

impl BuildInfo {
    pub fn current() -> Self {
        BuildInfo {
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            git_rev: option_env!("PARTNR_GIT_REV").map(str::to_string),
        }
    }
}

/// Everything needed to reproduce a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub build: BuildInfo,
    pub seeds: Vec<u64>,
    /// Output name to file path, relative to the output directory.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig) -> Self {
        let outputs = [("metrics", "metrics.json"), ("telemetry", "telemetry.csv"), ("report", "report.md")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        RunManifest { seeds: config.seeds.clone(), config, build: BuildInfo::current(), outputs }
    }
}

/// Writes metrics, telemetry, report and manifest into `dir`.
pub fn write_run<T>(dir: &Path, manifest: &RunManifest, output: &ExperimentOutput<T>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = |key: &str| dir.join(manifest.outputs.get(key).map_or(key, String::as_str));
    let mut metrics = serde_json::to_string_pretty(&output.metrics)?;
    metrics.push('\n');
    fs::write(file("metrics"), metrics)?;
    write_csv(&output.telemetry, fs::File::create(file("telemetry"))?)?;
    fs::write(file("report"), render_table(std::slice::from_ref(&output.metrics))?)?;
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}
