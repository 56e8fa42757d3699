//! Experiment files, `key=value` overrides and seed lists.

use std::path::PathBuf;

use equitrust_sim::{preset, preset_names, Policy, ScenarioConfig};
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{CliError, CliResult};

/// What to run, read from a TOML file and then amended by command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    /// Full scenario table; takes precedence over `preset`.
    pub scenario: Option<ScenarioConfig>,
    pub policy: Option<Policy>,
    pub seeds: Vec<u64>,
    /// Consecutive seeds run from each listed seed.
    pub repeat: Option<u64>,
    /// Horizon in steps.
    pub steps: Option<u64>,
    pub out: Option<PathBuf>,
    /// Parameter overrides keyed by dotted path, e.g. `sword.v = 4`.
    pub overrides: toml::Table,
}

/// A run manifest wraps the resolved experiment under `[experiment]`.
#[derive(Deserialize)]
struct ManifestShape {
    experiment: ExperimentConfig,
}

/// Parses an experiment file. A run manifest is accepted too, so a manifest
/// alone reproduces its run.
pub fn parse_experiment(text: &str) -> CliResult<ExperimentConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
    if table.contains_key("experiment") {
        let m: ManifestShape = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        return Ok(m.experiment);
    }
    table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
}

impl ExperimentConfig {
    /// Seeds to run, in order and without repeats.
    pub fn seed_list(&self) -> Vec<u64> {
        let base = if self.seeds.is_empty() { vec![0] } else { self.seeds.clone() };
        let n = self.repeat.unwrap_or(1).max(1);
        let mut out = Vec::new();
        for s in base {
            for k in 0..n {
                let seed = s.saturating_add(k);
                if !out.contains(&seed) {
                    out.push(seed);
                }
            }
        }
        out
    }

    /// Builds the scenario: preset or inline table, then overrides, horizon and policy.
    pub fn resolve(&self) -> CliResult<ScenarioConfig> {
        let mut cfg = match (&self.scenario, &self.preset) {
            (Some(s), _) => s.clone(),
            (None, Some(name)) => preset(name).ok_or_else(|| {
                CliError::Usage(format!("unknown preset `{name}` (known: {})", preset_names().join(", ")))
            })?,
            (None, None) => return Err(CliError::Usage("no scenario given: use --preset or a config file".into())),
        };
        for (key, value) in flatten(&self.overrides) {
            cfg = apply_override(&cfg, &key, value)?;
        }
        if let Some(steps) = self.steps {
            let key = match cfg {
                ScenarioConfig::Ch3(_) => "problems",
                ScenarioConfig::Crn(_) => "crn.iterations",
                _ => "steps",
            };
            cfg = apply_override(&cfg, key, Value::Integer(steps as i64))?;
        }
        if let Some(p) = self.policy {
            cfg.restrict_policy(p)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Nested override tables become dotted keys.
fn flatten(table: &toml::Table) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    for (k, v) in table {
        match v {
            Value::Table(t) => {
                for (sub, v) in flatten(t) {
                    out.push((format!("{k}.{sub}"), v));
                }
            }
            other => out.push((k.clone(), other.clone())),
        }
    }
    out
}

/// Reads a value the way TOML would, falling back to a bare string.
pub fn parse_value(text: &str) -> Value {
    let text = text.trim();
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.to_string())),
        Err(_) => Value::String(text.to_string()),
    }
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> CliResult<(String, Value)> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{s}` is not of the form key=value")))?;
    let key = key.trim();
    let valid = !key.is_empty()
        && key.split('.').all(|seg| !seg.is_empty())
        && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-');
    if !valid {
        return Err(CliError::Usage(format!("bad override key `{key}`")));
    }
    if value.trim().is_empty() {
        return Err(CliError::Usage(format!("override `{key}` has no value")));
    }
    Ok((key.to_string(), parse_value(value)))
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a number",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a date",
        Value::Array(_) => "a list",
        Value::Table(_) => "a table",
    }
}

/// Coerces `new` to the type of `old`, or explains why it cannot.
fn conform(key: &str, old: &Value, new: Value) -> CliResult<Value> {
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Value::Table(_), _) => Err(CliError::Config(format!("`{key}` is a group of parameters; set one of its fields"))),
        (o, n) if std::mem::discriminant(o) == std::mem::discriminant(&n) => Ok(n),
        (o, n) => Err(CliError::Config(format!("`{key}` expects {}, got {}", kind(o), kind(&n)))),
    }
}

/// Sets one dotted parameter. Unknown keys and mistyped values are errors.
pub fn apply_override(cfg: &ScenarioConfig, key: &str, value: Value) -> CliResult<ScenarioConfig> {
    if key == "scenario" {
        return Err(CliError::Config("the scenario kind cannot be overridden".into()));
    }
    let mut root = Value::try_from(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let segs: Vec<&str> = key.split('.').collect();
    let mut node = &mut root;
    for (i, seg) in segs.iter().enumerate() {
        let last = i + 1 == segs.len();
        node = match node {
            Value::Table(t) => {
                if last && !t.contains_key(*seg) {
                    // Optional parameters are absent when unset; deserializing decides.
                    t.insert(seg.to_string(), value.clone());
                    let back: ScenarioConfig = root.try_into().map_err(|_| unknown(key, cfg))?;
                    return Ok(back);
                }
                t.get_mut(*seg).ok_or_else(|| unknown(key, cfg))?
            }
            Value::Array(a) => {
                let idx: usize = seg.parse().map_err(|_| unknown(key, cfg))?;
                a.get_mut(idx).ok_or_else(|| CliError::Config(format!("`{key}`: index {idx} out of range")))?
            }
            _ => return Err(unknown(key, cfg)),
        };
    }
    *node = conform(key, node, value)?;
    root.try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("`{key}`: {}", e.message())))
}

fn unknown(key: &str, cfg: &ScenarioConfig) -> CliError {
    CliError::Config(format!(
        "unknown parameter `{key}` for a {} scenario (known: {})",
        cfg.kind(),
        parameter_names(cfg).join(", ")
    ))
}

/// Every settable dotted parameter of a scenario.
pub fn parameter_names(cfg: &ScenarioConfig) -> Vec<String> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<String>) {
        match v {
            Value::Table(t) => {
                for (k, v) in t {
                    let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&name, v, out);
                }
            }
            _ if prefix != "scenario" => out.push(prefix.to_string()),
            _ => {}
        }
    }
    let mut out = Vec::new();
    if let Ok(v) = Value::try_from(cfg) {
        walk("", &v, &mut out);
    }
    out
}

/// Parses `0..10`, `3-7` (inclusive) or `1,2,5`.
pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Usage(format!("bad seed list `{s}`: use 0..10, 3-7 or 1,2,5"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let s = s.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else if let Some((a, b)) = s.split_once('-') {
        (num(a)?..=num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<CliResult<_>>()?
    };
    if seeds.is_empty() || seeds.len() > 100_000 {
        return Err(bad());
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draft() -> ScenarioConfig {
        preset("ch7-draft").unwrap()
    }

    #[test]
    fn override_parsing() {
        assert_eq!(parse_override("v=10").unwrap(), ("v".into(), Value::Integer(10)));
        assert_eq!(parse_override(" sword.v = 2.5 ").unwrap(), ("sword.v".into(), Value::Float(2.5)));
        assert_eq!(parse_override("witness_mix=BS80").unwrap().1, Value::String("BS80".into()));
        assert_eq!(parse_override("policies=[\"sword\"]").unwrap().1, Value::Array(vec![Value::String("sword".into())]));
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("=3").is_err());
        assert!(parse_override("a..b=3").is_err());
        assert!(parse_override("v=").is_err());
    }

    #[test]
    fn overrides_apply_and_check_types() {
        let c = apply_override(&draft(), "v", Value::Integer(10)).unwrap();
        let ScenarioConfig::Ch7Draft(d) = &c else { panic!() };
        assert_eq!(d.v, 10.0);
        let c = apply_override(&draft(), "contexts.0.deadline", Value::Integer(4)).unwrap();
        let ScenarioConfig::Ch7Draft(d) = &c else { panic!() };
        assert_eq!(d.contexts[0].deadline, 4);
        assert!(apply_override(&draft(), "v", Value::String("fast".into())).is_err());
        assert!(apply_override(&draft(), "bogus", Value::Integer(1)).is_err());
        assert!(apply_override(&draft(), "contexts.9.deadline", Value::Integer(1)).is_err());
        assert!(apply_override(&draft(), "scenario", Value::String("crn".into())).is_err());
        assert!(apply_override(&draft(), "policies", Value::Array(vec![Value::String("nope".into())])).is_err());
    }

    #[test]
    fn optional_parameter_can_be_set() {
        let crn = preset("crn").unwrap();
        let c = apply_override(&crn, "crn.subs_weight", Value::Float(0.3)).unwrap();
        let ScenarioConfig::Crn(c) = c else { panic!() };
        assert_eq!(c.crn.subs_weight, Some(0.3));
        assert!(apply_override(&preset("crn").unwrap(), "crn.nonsense", Value::Float(0.3)).is_err());
    }

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("3-5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seeds("7, 1").unwrap(), vec![7, 1]);
        assert!(parse_seeds("5..5").is_err());
        assert!(parse_seeds("x").is_err());
        let e = ExperimentConfig { seeds: vec![10, 11], repeat: Some(2), ..Default::default() };
        assert_eq!(e.seed_list(), vec![10, 11, 12]);
        assert_eq!(ExperimentConfig::default().seed_list(), vec![0]);
    }

    #[test]
    fn experiment_files() {
        let e = parse_experiment(
            "preset = \"ch7-draft\"\nseeds = [1, 2]\npolicy = \"draft\"\nsteps = 20\n[overrides]\nv = 10\nhon_x = 30\n",
        )
        .unwrap();
        let cfg = e.resolve().unwrap();
        let ScenarioConfig::Ch7Draft(d) = cfg else { panic!() };
        assert_eq!((d.v, d.hon_x, d.steps), (10.0, 30, 20));
        assert_eq!(d.policies, vec![Policy::Draft]);
        assert!(parse_experiment("presett = \"crn\"").is_err());
        let e = parse_experiment("preset = \"nope\"").unwrap();
        assert!(matches!(e.resolve(), Err(CliError::Usage(_))));
        let e = parse_experiment("preset = \"crn\"\npolicy = \"sword\"").unwrap();
        assert!(e.resolve().is_err());
    }

    #[test]
    fn inline_scenario() {
        let e = parse_experiment("[scenario]\nscenario = \"ch4-rdp\"\nsteps = 7\n").unwrap();
        assert_eq!(e.resolve().unwrap().steps(), 7);
    }

    #[test]
    fn parameter_listing() {
        let names = parameter_names(&preset("ch6-comparison").unwrap());
        assert!(names.contains(&"sword.v".to_string()));
        assert!(!names.contains(&"scenario".to_string()));
    }
}
