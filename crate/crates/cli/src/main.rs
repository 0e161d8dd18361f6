use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use formctl_core::analysis::detect_convergence;
use formctl_core::audit::domain_equivalence_audit;
use formctl_core::cbt::{CbtTransform, GroupPartition};
use formctl_core::config::{self, ScenarioConfig};
use formctl_core::output::write_outputs;
use formctl_core::sim::run_scenario;
use formctl_core::{Error, Result};

/// Multi-group formation control simulator.
#[derive(Parser, Debug)]
#[command(name = "formctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write trajectory, shape, min-distance and report files.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Output directory; overrides the scenario's own setting.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Turn collision avoidance on.
        #[arg(long)]
        collision: bool,
        /// Run collision mode even if the reaching gains fail the gain check.
        #[arg(long, requires = "collision")]
        override_gain_check: bool,
        /// Seed for randomized initial conditions.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the transformation matrix of a partition as CSV.
    Transform {
        /// Group sizes, e.g. 3,3,3.
        #[arg(long, value_delimiter = ',', required = true)]
        partition: Vec<usize>,
        /// Print the inverse instead.
        #[arg(long)]
        inverse: bool,
    },
    /// Integrate a scenario in both coordinate systems and compare them.
    Audit {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Exit with status 1 when the deviation exceeds this value.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Print a built-in scenario as JSON.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(config::PRESETS))]
        name: String,
    },
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct Source {
    /// Scenario file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario; paper_3x3 when neither option is given.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(config::PRESETS))]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => config::load_config(path),
            (None, name) => {
                let name = name.as_deref().unwrap_or("paper_3x3");
                config::preset(name).ok_or_else(|| Error::Config {
                    field: "preset".into(),
                    message: format!("unknown preset {name}"),
                })
            }
        }
    }
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "none".to_string(), |t| format!("{t:.4}"))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            source,
            out,
            collision,
            override_gain_check,
            seed,
        } => {
            let mut cfg = source.load()?;
            if collision {
                cfg.collision.enabled = true;
                cfg.collision.override_gain_check |= override_gain_check;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.outputs.directory));
            log::info!("simulating {} for {} s", cfg.name, cfg.integrator.duration);
            let result = run_scenario(&cfg)?;
            let report = detect_convergence(&result, &cfg.convergence);
            let files = write_outputs(&result, &report, &out_dir)?;
            println!("scenario      {}", cfg.name);
            println!(
                "surface time  intra {}  inter {}  centroid {}",
                fmt_time(report.surface_time.intra),
                fmt_time(report.surface_time.inter),
                fmt_time(report.surface_time.centroid)
            );
            println!(
                "error time    intra {}  inter {}  centroid {}",
                fmt_time(report.error_time.intra),
                fmt_time(report.error_time.inter),
                fmt_time(report.error_time.centroid)
            );
            println!("min distance  {:.4}", report.min_distance);
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Transform { partition, inverse } => {
            let t = CbtTransform::new(&GroupPartition::new(partition)?)?;
            let m = if inverse { t.inverse() } else { t.matrix() };
            for row in m.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
                println!("{}", cells.join(","));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit {
            source,
            steps,
            tolerance,
        } => {
            let cfg = source.load()?;
            let report = domain_equivalence_audit(&cfg, steps)?;
            println!("steps          {}", report.steps);
            println!("step           {}", report.step);
            println!("max deviation  {:.3e}", report.max_deviation);
            if report.max_deviation < tolerance {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("deviation exceeds {tolerance:e}");
                Ok(ExitCode::from(1))
            }
        }
        Command::Preset { name } => {
            let cfg = config::preset(&name).expect("validated by clap");
            println!("{}", cfg.to_json()?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FORMCTL_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
