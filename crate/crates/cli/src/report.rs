//! CSV layouts for per-seed metrics, series and the merged summary.

use equitrust_sim::{RunOutput, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Label for metrics that belong to no single policy.
pub const SHARED: &str = "shared";

/// Policy or mode labels a scenario's metrics are suffixed with.
pub fn group_labels(cfg: &ScenarioConfig) -> Vec<String> {
    match cfg {
        ScenarioConfig::Crn(c) => c
            .trust_modes
            .iter()
            .map(|&t| if t { "trust" } else { "no_trust" }.to_string())
            .collect(),
        other => other.policies().iter().map(|p| p.id().to_string()).collect(),
    }
}

/// Splits `metric:label` into `(label, metric)` when the label is known.
pub fn split_metric<'a>(name: &'a str, labels: &[String]) -> (&'a str, &'a str) {
    if let Some((base, label)) = name.rsplit_once(':') {
        if labels.iter().any(|l| l == label) {
            return (label, base);
        }
    }
    (SHARED, name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub metric: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Seeds on which the metric was defined.
    pub n: usize,
}

/// Metric rows of one seed for one label; shared metrics go to every label.
pub fn metric_rows(kind: &str, label: &str, labels: &[String], seed: u64, out: &RunOutput) -> Vec<MetricRow> {
    out.metrics
        .iter()
        .filter_map(|(name, value)| {
            let (l, base) = split_metric(name, labels);
            (l == label || l == SHARED).then(|| MetricRow {
                scenario: kind.to_string(),
                policy: l.to_string(),
                seed,
                metric: base.to_string(),
                value: *value,
            })
        })
        .collect()
}

pub fn series_rows(out: &RunOutput) -> Vec<SeriesRow> {
    out.series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| SeriesRow { series: s.name.clone(), x, y }))
        .collect()
}

/// Mean, min and max of every metric across seeds, in first-seen order.
pub fn summarize(kind: &str, labels: &[String], outs: &[RunOutput]) -> Vec<SummaryRow> {
    let mut names: Vec<&str> = Vec::new();
    for o in outs {
        for (name, _) in &o.metrics {
            if !names.contains(&name.as_str()) {
                names.push(name);
            }
        }
    }
    names
        .into_iter()
        .map(|name| {
            let vals: Vec<f64> = outs.iter().filter_map(|o| o.metric(name)).collect();
            let (label, base) = split_metric(name, labels);
            let n = vals.len();
            SummaryRow {
                scenario: kind.to_string(),
                policy: label.to_string(),
                metric: base.to_string(),
                mean: (n > 0).then(|| vals.iter().sum::<f64>() / n as f64),
                min: vals.iter().cloned().reduce(f64::min),
                max: vals.iter().cloned().reduce(f64::max),
                n,
            }
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Config(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))
}

pub const SUMMARY_HEADER: [&str; 7] = ["scenario", "policy", "metric", "mean", "min", "max", "n"];
pub const METRIC_HEADER: [&str; 5] = ["scenario", "policy", "seed", "metric", "value"];
pub const SERIES_HEADER: [&str; 3] = ["series", "x", "y"];

fn check_header(r: &mut csv::Reader<&[u8]>, want: &[&str], what: &str) -> CliResult<()> {
    let got = r.headers().map_err(|e| CliError::Config(format!("{what}: {e}")))?;
    if got.iter().ne(want.iter().copied()) {
        return Err(CliError::Config(format!(
            "{what}: expected columns {}, found {}",
            want.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Reads a summary file back, checking its columns and that every row is consistent.
pub fn parse_summary_csv(text: &str) -> CliResult<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut r, &SUMMARY_HEADER, "summary")?;
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<SummaryRow>().enumerate() {
        let row = rec.map_err(|e| CliError::Config(format!("summary row {}: {e}", i + 1)))?;
        let stats = [row.mean, row.min, row.max];
        let defined = stats.iter().filter(|s| s.is_some()).count();
        let consistent = match (row.mean, row.min, row.max) {
            (Some(m), Some(lo), Some(hi)) => lo <= hi && lo - 1e-9 * lo.abs().max(1.0) <= m && m <= hi + 1e-9 * hi.abs().max(1.0),
            _ => defined == 0 && row.n == 0,
        };
        if !consistent || (defined == 3 && row.n == 0) || stats.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("summary row {}: inconsistent statistics", i + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_series_csv(text: &str) -> CliResult<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut r, &SERIES_HEADER, "series")?;
    r.deserialize::<SeriesRow>()
        .enumerate()
        .map(|(i, rec)| rec.map_err(|e| CliError::Config(format!("series row {}: {e}", i + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use equitrust_sim::preset;

    fn out(pairs: &[(&str, Option<f64>)]) -> RunOutput {
        let mut o = RunOutput::default();
        for (k, v) in pairs {
            o.push(*k, *v);
        }
        o
    }

    #[test]
    fn splits_known_labels_only() {
        let labels = vec!["sword".to_string(), "amt".to_string()];
        assert_eq!(split_metric("welfare:sword", &labels), ("sword", "welfare"));
        assert_eq!(split_metric("reputation_mean:hon", &labels), (SHARED, "reputation_mean:hon"));
        assert_eq!(split_metric("queue_bound_checks", &labels), (SHARED, "queue_bound_checks"));
    }

    #[test]
    fn summary_statistics() {
        let labels = vec!["draft".to_string()];
        let outs = [out(&[("welfare:draft", Some(1.0)), ("x", None)]), out(&[("welfare:draft", Some(3.0)), ("x", None)])];
        let rows = summarize("ch7-draft", &labels, &outs);
        assert_eq!(rows[0].mean, Some(2.0));
        assert_eq!((rows[0].min, rows[0].max, rows[0].n), (Some(1.0), Some(3.0), 2));
        assert_eq!((rows[1].mean, rows[1].n), (None, 0));
        let text = to_csv(&rows, &SUMMARY_HEADER).unwrap();
        assert!(text.starts_with("scenario,policy,metric,mean,min,max,n\n"));
        assert_eq!(parse_summary_csv(&text).unwrap(), rows);
    }

    #[test]
    fn summary_parser_rejects_garbage() {
        assert!(parse_summary_csv("a,b\n1,2\n").is_err());
        assert!(parse_summary_csv("scenario,policy,metric,mean,min,max,n\ns,p,m,5,1,2,3\n").is_err());
        assert!(parse_summary_csv("scenario,policy,metric,mean,min,max,n\ns,p,m,1,1,,3\n").is_err());
        assert!(parse_summary_csv("scenario,policy,metric,mean,min,max,n\ns,p,m,x,1,2,3\n").is_err());
        assert!(parse_summary_csv("scenario,policy,metric,mean,min,max,n\ns,p,m,NaN,NaN,NaN,3\n").is_err());
        assert_eq!(parse_summary_csv("scenario,policy,metric,mean,min,max,n\n").unwrap(), vec![]);
    }

    #[test]
    fn crn_labels_are_trust_modes() {
        assert_eq!(group_labels(&preset("crn").unwrap()), vec!["trust", "no_trust"]);
        assert_eq!(group_labels(&preset("ch4-rdp").unwrap()), vec!["brs2012"]);
    }
}
