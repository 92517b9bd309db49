//! Config-driven experiments on top of `bpre-core`, and the `bpre-lab`
//! command line that runs them.

pub mod config;
pub mod experiments;
pub mod records;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use config::{Experiment, ExperimentConfig};
pub use experiments::run;
pub use records::{ResultRecord, Row, Verdict};

/// A configuration that cannot be run as given.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] bpre_core::Error),
}

impl RunError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(ConfigError(msg.into()))
    }

    /// Bad parameters surfacing from the core count as config errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Core(bpre_core::Error::InvalidParameter { .. }) | Self::Core(bpre_core::Error::Inadmissible { .. }) => 2,
            Self::Core(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "bpre-lab", version, about = "Simulation lab for critical branching processes in heavy-tailed random environments")]
pub struct Cli {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// JSON config file; optional only for `oracle`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of replica streams, overriding the config.
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// Built-in oracle setup: two-point law with jumps `+-log 2`, n up to 12.
pub fn oracle_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::with_seed(1);
    cfg.experiment = Some(Experiment::Oracle);
    cfg.law = bpre_core::LawSpec::TwoPoint { a: std::f64::consts::LN_2, w: 0.5 };
    cfg.n_grid = (1..=12).collect();
    cfg.budget.samples = 1_000_000;
    cfg
}

/// Runs the command line and returns the process exit code: 0 when every
/// verdict passes, 1 when one fails or the run breaks down, 2 on config errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let mut cfg = match (&cli.config, cli.experiment) {
        (Some(path), _) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        },
        (None, Experiment::Oracle) => oracle_config(),
        (None, e) => {
            eprintln!("error: `{}` needs --config <path>", e.name());
            return 2;
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.replicas {
        cfg.replicas = r;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    let record = match run(cli.experiment, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let stem = cfg.stem(cli.experiment);
    let written = match cli.format {
        Format::Csv => record.write_csv(&cfg.output.dir, &stem),
        Format::Json => record.write_json(&cfg.output.dir, &stem),
    };
    match written {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: cannot write results: {e}");
            return 1;
        }
    }
    for v in &record.verdicts {
        println!("{}", v.line());
    }
    log::info!("{} finished in {:.1} s", record.experiment, record.wall_time_s);
    if record.all_passed() {
        0
    } else {
        1
    }
}
