//! Seeded runs, sweeps and their files.

use std::fs;
use std::path::{Path, PathBuf};

use equitrust_sim::{RunOutput, ScenarioConfig};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::Value;

use crate::error::{CliError, CliResult};
use crate::experiment::{apply_override, ExperimentConfig};
use crate::report::{
    group_labels, metric_rows, series_rows, summarize, to_csv, SummaryRow, METRIC_HEADER, SERIES_HEADER, SUMMARY_HEADER,
};

/// SHA-256 of the canonical TOML form of a scenario.
pub fn config_hash(cfg: &ScenarioConfig) -> CliResult<String> {
    let text = toml::to_string(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// Writes through a temporary sibling so readers never see half a file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| CliError::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(format!("renaming to {}", path.display()), e))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

/// Runs every seed, in parallel, keeping seed order in the result.
pub fn run_seeds(cfg: &ScenarioConfig, seeds: &[u64]) -> CliResult<Vec<RunOutput>> {
    seeds
        .par_iter()
        .map(|&s| cfg.run(s).map_err(CliError::from))
        .collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: String,
    scenario: &'a str,
    config_hash: String,
    seeds: &'a [u64],
    files: Vec<String>,
    experiment: ExperimentConfig,
}

#[derive(Debug)]
pub struct RunReport {
    pub out: PathBuf,
    pub config_hash: String,
    pub files: Vec<String>,
    pub summary: Vec<SummaryRow>,
}

fn safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Runs a resolved scenario on `seeds` and writes per-seed files, a summary and a manifest.
pub fn run_experiment(cfg: &ScenarioConfig, seeds: &[u64], out: &Path, preset: Option<&str>) -> CliResult<RunReport> {
    if seeds.is_empty() {
        return Err(CliError::Usage("no seeds to run".into()));
    }
    cfg.validate()?;
    let outs = run_seeds(cfg, seeds)?;
    ensure_dir(out)?;
    let kind = cfg.kind();
    let labels = group_labels(cfg);
    let mut files = Vec::new();
    let mut write = |name: String, text: String| -> CliResult<()> {
        write_atomic(&out.join(&name), &text)?;
        files.push(name);
        Ok(())
    };
    for (&seed, o) in seeds.iter().zip(&outs) {
        let groups: Vec<String> = if labels.is_empty() { vec!["all".into()] } else { labels.clone() };
        for label in &groups {
            let rows = metric_rows(kind, label, &labels, seed, o);
            write(format!("metrics_{}_s{seed}.csv", safe(label)), to_csv(&rows, &METRIC_HEADER)?)?;
        }
        if !o.series.is_empty() {
            write(format!("series_s{seed}.csv"), to_csv(&series_rows(o), &SERIES_HEADER)?)?;
        }
        for (stem, text) in &o.traces {
            write(format!("trace_{}_s{seed}.csv", safe(stem)), text.clone())?;
        }
    }
    let summary = summarize(kind, &labels, &outs);
    write("summary.csv".into(), to_csv(&summary, &SUMMARY_HEADER)?)?;
    let hash = config_hash(cfg)?;
    let manifest = Manifest {
        tool: format!("equitrust {}", env!("CARGO_PKG_VERSION")),
        scenario: kind,
        config_hash: hash.clone(),
        seeds,
        files: files.clone(),
        experiment: ExperimentConfig {
            preset: preset.map(str::to_string),
            scenario: Some(cfg.clone()),
            seeds: seeds.to_vec(),
            ..Default::default()
        },
    };
    let text = toml::to_string(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    write_atomic(&out.join("manifest.toml"), &text)?;
    Ok(RunReport { out: out.to_path_buf(), config_hash: hash, files, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub policy: String,
    pub welfare: Option<f64>,
    pub fairness_hon: Option<f64>,
    pub quality: Option<f64>,
    pub wait_mean: Option<f64>,
}

const SWEEP_HEADER: [&str; 7] = ["param", "value", "policy", "welfare", "fairness_hon", "quality", "wait_mean"];

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One row per (value, policy) with seed means of the headline metrics.
pub fn sweep_parameter(cfg: &ScenarioConfig, param: &str, values: &[Value], seeds: &[u64]) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("no seeds to run".into()));
    }
    // Check every value before spending time on runs.
    let cfgs = values
        .iter()
        .map(|v| {
            let c = apply_override(cfg, param, v.clone())?;
            c.validate()?;
            Ok(c)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (v, c) in values.iter().zip(&cfgs) {
        let outs = run_seeds(c, seeds)?;
        let labels = group_labels(c);
        let summary = summarize(c.kind(), &labels, &outs);
        let pick = |policy: &str, metric: &str| {
            summary.iter().find(|r| r.policy == policy && r.metric == metric).and_then(|r| r.mean)
        };
        for label in &labels {
            rows.push(SweepRow {
                param: param.to_string(),
                value: value_text(v),
                policy: label.clone(),
                welfare: pick(label, "welfare"),
                fairness_hon: pick(label, "fairness_hon"),
                quality: pick(label, "quality"),
                wait_mean: pick(label, "wait_mean"),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep(rows: &[SweepRow], out: &Path, param: &str) -> CliResult<PathBuf> {
    ensure_dir(out)?;
    let path = out.join(format!("sweep_{}.csv", safe(param)));
    write_atomic(&path, &to_csv(rows, &SWEEP_HEADER)?)?;
    Ok(path)
}
