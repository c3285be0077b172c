//! Resolving a configuration, running its preset and writing the outputs.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::error::Result;
use crate::rng::RNG_IDENTITY;

use super::config::ExperimentConfig;
use super::experiments::{execute, Outcome};
use super::output::write_checks;
use super::output::write_json;
use super::presets::find_preset;

/// Where a run wrote its files and how its chains fared.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub preset: String,
    pub output_dir: PathBuf,
    pub rows: usize,
    pub runs_total: usize,
    pub runs_failed: usize,
    /// Inequality checks written, and how many of them failed.
    pub checks: (usize, usize),
}

impl RunSummary {
    /// True when the preset ran chains and every one of them failed.
    pub fn all_runs_failed(&self) -> bool {
        self.runs_total > 0 && self.runs_failed == self.runs_total
    }
}

/// `GIT_DESCRIBE` when set, otherwise `v` and the package version.
pub fn version_string() -> String {
    std::env::var("GIT_DESCRIBE")
        .ok()
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| format!("v{}", env!("CARGO_PKG_VERSION")))
}

/// Runs the preset and returns its outputs without writing anything.
pub fn run_in_memory(config: &ExperimentConfig) -> Result<(Outcome, Value)> {
    let preset = find_preset(&config.preset)?;
    let params = preset.resolve(&config.overrides)?;
    let outcome = execute(&preset, &params)?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "preset": preset.name,
        "summary": preset.summary,
        "version": version_string(),
        "rng": RNG_IDENTITY,
        "timestamp": timestamp,
        "parameters": serde_json::to_value(&params).unwrap_or(Value::Null),
        "fixed": preset.fixed.iter().map(|(k, v)| json!({"name": k, "value": v})).collect::<Vec<_>>(),
        "runs": {"total": outcome.runs_total, "failed": outcome.runs_failed},
        "failures": outcome.failures.iter().map(|f| f.to_json()).collect::<Vec<_>>(),
        "details": Value::Object(outcome.details.clone()),
        "files": {
            "metrics": "metrics.csv",
            "samples": outcome.samples.as_ref().map(|_| "samples.csv"),
            "checks": (!outcome.checks.is_empty()).then_some("checks.csv"),
        },
    });
    Ok((outcome, meta))
}

/// Runs the preset and writes `metrics.csv`, `meta.json` and, when the
/// preset produces them, `samples.csv` and `checks.csv` into the output
/// directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    let (outcome, meta) = run_in_memory(config)?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    outcome.metrics.write(&dir.join("metrics.csv"))?;
    if let Some(samples) = &outcome.samples {
        samples.write(&dir.join("samples.csv"))?;
    }
    if !outcome.checks.is_empty() {
        write_checks(&dir.join("checks.csv"), &outcome.checks)?;
    }
    write_json(&dir.join("meta.json"), &meta)?;
    Ok(RunSummary {
        preset: config.preset.clone(),
        output_dir: dir.clone(),
        rows: outcome.metrics.rows.len(),
        runs_total: outcome.runs_total,
        runs_failed: outcome.runs_failed,
        checks: (outcome.checks.len(), outcome.checks.iter().filter(|c| !c.holds).count()),
    })
}
