use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use equitrust_cli::experiment::{parameter_names, parse_value};
use equitrust_cli::plot::FIGURES;
use equitrust_cli::report::group_labels;
use equitrust_cli::run::write_sweep;
use equitrust_cli::{
    emit_plot_data, parse_experiment, parse_override, parse_seeds, run_experiment, sweep_parameter, CliError,
    CliResult, ExperimentConfig,
};
use equitrust_sim::{preset, preset_names, Policy};

#[derive(Parser)]
#[command(name = "equitrust", version, about = "Run reputation and trust test-beds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario over one or more seeds.
    Run(Common),
    /// Run a scenario once per value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted parameter path, e.g. `v` or `sword.v`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Turn a finished run directory into per-series data files.
    PlotData {
        /// Run directory holding manifest.toml.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        figure: String,
    },
    /// List presets, their parameters and the known figures.
    ListPresets {
        /// Also print every overridable parameter.
        #[arg(long)]
        params: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment TOML file; a run manifest works too.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// A single seed; may be repeated.
    #[arg(long = "seed")]
    seed: Vec<u64>,
    /// Seed range or list: 0..10, 3-7 or 1,2,5.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep only this policy.
    #[arg(long)]
    policy: Option<String>,
    /// key=value parameter override; may be repeated.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    steps: Option<u64>,
}

impl Common {
    fn experiment(&self) -> CliResult<ExperimentConfig> {
        let mut exp = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Io {
                    context: format!("reading {}", path.display()),
                    source: e,
                })?;
                parse_experiment(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.preset {
            exp.preset = Some(p.clone());
            exp.scenario = None;
        }
        let mut seeds = self.seed.clone();
        if let Some(s) = &self.seeds {
            seeds.extend(parse_seeds(s)?);
        }
        if !seeds.is_empty() {
            exp.seeds = seeds;
            exp.repeat = None;
        }
        if let Some(out) = &self.out {
            exp.out = Some(out.clone());
        }
        if let Some(p) = &self.policy {
            exp.policy = Some(p.parse::<Policy>().map_err(CliError::Usage)?);
        }
        for o in &self.overrides {
            let (k, v) = parse_override(o)?;
            exp.overrides.insert(k, v);
        }
        if self.steps.is_some() {
            exp.steps = self.steps;
        }
        Ok(exp)
    }
}

fn out_dir(exp: &ExperimentConfig) -> PathBuf {
    exp.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cmd: Cmd) -> CliResult<()> {
    match cmd {
        Cmd::Run(common) => {
            let exp = common.experiment()?;
            let cfg = exp.resolve()?;
            let seeds = exp.seed_list();
            let report = run_experiment(&cfg, &seeds, &out_dir(&exp), exp.preset.as_deref())?;
            println!(
                "{} seed(s) of {} -> {} ({} files, config {})",
                seeds.len(),
                cfg.kind(),
                report.out.display(),
                report.files.len() + 1,
                &report.config_hash[..12]
            );
        }
        Cmd::Sweep { common, param, values } => {
            let exp = common.experiment()?;
            let cfg = exp.resolve()?;
            let values: Vec<_> = values.iter().filter(|v| !v.trim().is_empty()).map(|v| parse_value(v)).collect();
            let rows = sweep_parameter(&cfg, &param, &values, &exp.seed_list())?;
            let path = write_sweep(&rows, &out_dir(&exp), &param)?;
            println!("{} row(s) -> {}", rows.len(), path.display());
        }
        Cmd::PlotData { out, figure } => {
            let report = emit_plot_data(&out, &figure)?;
            println!("{} series -> {}", report.files.len(), report.dir.display());
        }
        Cmd::ListPresets { params } => {
            for name in preset_names() {
                let cfg = preset(name).expect("listed preset exists");
                let policies = group_labels(&cfg);
                println!("{name:<18} {:<10} steps {:<7} {}", cfg.kind(), cfg.steps(), policies.join(" "));
                if params {
                    for p in parameter_names(&cfg) {
                        println!("    {p}");
                    }
                }
            }
            println!();
            for f in FIGURES {
                println!("figure {:<18} {}", f.name, f.about);
            }
        }
    }
    Ok(())
}
