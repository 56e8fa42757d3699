//! Runs scenarios from presets or TOML files and writes CSV results.

pub mod error;
pub mod experiment;
pub mod plot;
pub mod report;
pub mod run;

pub use error::{CliError, CliResult};
pub use experiment::{parse_experiment, parse_override, parse_seeds, ExperimentConfig};
pub use plot::emit_plot_data;
pub use report::parse_summary_csv;
pub use run::{run_experiment, sweep_parameter};
