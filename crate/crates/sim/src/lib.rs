//! Seeded discrete-time test-beds for the trust and delegation models.
//!
//! Every world advances in the same phase order: proposals, allocation or
//! acceptance, service, ratings, learning, clean sweep, metrics, drift.

pub mod behavior;
pub mod ch3;
pub mod competition;
pub mod crn_world;
pub mod crowd;
pub mod draft_world;
pub mod policy;
pub mod rdp;
pub mod rng;
pub mod scenario;

use std::fmt;

use equitrust_core::CoreError;
use serde::{Deserialize, Serialize};

pub use policy::Policy;
pub use scenario::{preset, preset_names, run_scenario, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// A model invariant was broken during a run.
    Invariant(String),
    Config(String),
    Core(CoreError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Invariant(m) => write!(f, "invariant violated: {m}"),
            SimError::Config(m) => write!(f, "bad configuration: {m}"),
            SimError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<CoreError> for SimError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Invariant(m) => SimError::Invariant(m),
            other => SimError::Core(other),
        }
    }
}

pub type SimResult<T> = std::result::Result<T, SimError>;

/// A world that can be advanced one step at a time.
pub trait World {
    fn advance_step(&mut self) -> SimResult<()>;
    fn clock(&self) -> u64;
    fn finish(self) -> RunOutput;
}

pub fn run_world<W: World>(mut world: W, steps: u64) -> SimResult<RunOutput> {
    for _ in 0..steps {
        world.advance_step()?;
    }
    Ok(world.finish())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Results of one (scenario, policy, seed) run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// Named scalar metrics; `None` when undefined.
    pub metrics: Vec<(String, Option<f64>)>,
    pub series: Vec<Series>,
    /// `(file stem, csv text)` pairs.
    pub traces: Vec<(String, String)>,
}

impl RunOutput {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.0 == name).and_then(|m| m.1)
    }

    pub fn push(&mut self, name: impl Into<String>, value: Option<f64>) {
        self.metrics.push((name.into(), value));
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// Mean of the defined waiting times.
pub(crate) fn mean_wait(times: &[Option<u64>]) -> Option<f64> {
    let done: Vec<u64> = times.iter().flatten().copied().collect();
    (!done.is_empty()).then(|| done.iter().sum::<u64>() as f64 / done.len() as f64)
}

pub(crate) fn csv_text<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        // Writing to a Vec cannot fail for plain records.
        let _ = w.serialize(r);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}
