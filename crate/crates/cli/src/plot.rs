//! Plot-ready data files built from a finished run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::report::{parse_series_csv, parse_summary_csv, SummaryRow};
use crate::run::write_atomic;

/// A figure and the series-name prefixes it draws.
pub struct Figure {
    pub name: &'static str,
    pub about: &'static str,
    pub prefixes: &'static [&'static str],
}

pub const FIGURES: &[Figure] = &[
    Figure { name: "naul-curves", about: "NAUL against interaction count", prefixes: &["naul:"] },
    Figure { name: "f33-cdf", about: "completion-time CDF", prefixes: &["completion_cdf:"] },
    Figure { name: "competition-share", about: "requester preference per policy", prefixes: &["preference:"] },
    Figure { name: "draft-served", about: "tasks served within deadline", prefixes: &["served_within:"] },
    Figure { name: "rdp-reputation", about: "mean honest reputation over time", prefixes: &["reputation_mean:hon"] },
    Figure { name: "crn-errors", about: "false-alarm and miss rates", prefixes: &["eps1:", "eps2:"] },
];

pub fn figure(name: &str) -> Option<&'static Figure> {
    FIGURES.iter().find(|f| f.name == name)
}

#[derive(Deserialize)]
struct ManifestHead {
    scenario: String,
    seeds: Vec<u64>,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Usage(format!("missing {}; run an experiment into this directory first", path.display())),
        _ => CliError::io(format!("reading {}", path.display()), e),
    })
}

#[derive(Debug)]
pub struct PlotReport {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Vec<SummaryRow>,
}

/// Averages each matching series across seeds, point by point, and writes one
/// `x y` file per series plus a legend.
pub fn emit_plot_data(run_dir: &Path, fig: &str) -> CliResult<PlotReport> {
    let f = figure(fig).ok_or_else(|| {
        let known: Vec<_> = FIGURES.iter().map(|f| f.name).collect();
        CliError::Usage(format!("unknown figure `{fig}` (known: {})", known.join(", ")))
    })?;
    let head: ManifestHead = toml::from_str(&read(&run_dir.join("manifest.toml"))?)
        .map_err(|e| CliError::Config(format!("manifest: {}", e.message())))?;
    let summary = parse_summary_csv(&read(&run_dir.join("summary.csv"))?)?;

    // series -> [(x, sum of y, seeds)]
    let mut acc: BTreeMap<String, Vec<(f64, f64, usize)>> = BTreeMap::new();
    for seed in &head.seeds {
        let path = run_dir.join(format!("series_s{seed}.csv"));
        if !path.exists() {
            continue;
        }
        for row in parse_series_csv(&read(&path)?)? {
            if !f.prefixes.iter().any(|p| row.series.starts_with(p)) {
                continue;
            }
            let pts = acc.entry(row.series).or_default();
            match pts.iter_mut().find(|(x, _, _)| *x == row.x) {
                Some(p) => {
                    p.1 += row.y;
                    p.2 += 1;
                }
                None => pts.push((row.x, row.y, 1)),
            }
        }
    }
    if acc.is_empty() {
        return Err(CliError::Usage(format!(
            "run in {} ({}) has no series for figure `{fig}`",
            run_dir.display(),
            head.scenario
        )));
    }
    let dir = run_dir.join("plot").join(fig);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let mut files = Vec::new();
    let mut legend = String::from("file,series,seeds\n");
    for (name, mut pts) in acc {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let file = format!("{}.dat", name.replace([':', '/', ' '], "_"));
        let mut text = String::new();
        for (x, sum, n) in &pts {
            text.push_str(&format!("{x} {}\n", sum / *n as f64));
        }
        write_atomic(&dir.join(&file), &text)?;
        let seeds = pts.iter().map(|p| p.2).max().unwrap_or(0);
        legend.push_str(&format!("{file},{name},{seeds}\n"));
        files.push(file);
    }
    write_atomic(&dir.join("legend.csv"), &legend)?;
    Ok(PlotReport { dir, files, summary })
}
