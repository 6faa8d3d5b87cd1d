use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmwave_beam::sim::{
    conflict_table, overhead_table, run_trial_detailed, sweep, write_csv, Axis, Scenario, SimConfig,
};
use mmwave_beam::{Error, Result};

#[derive(Parser)]
#[command(name = "mmwave-beam", version, about = "mmWave multiuser beam training and hybrid precoding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral efficiency of every configured variant over one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// k_users, snr_dl_db, n_ue or n_bs.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Training overhead per scheme, closed form and measured.
    Overhead {
        #[command(flatten)]
        common: Common,
        /// SP budget ratios.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.375,0.5")]
        values: Vec<f64>,
    },
    /// Beam-conflict probability of uniform beam draws against the closed form.
    ConflictProb {
        #[command(flatten)]
        common: Common,
        /// User counts.
        #[arg(long, value_delimiter = ',', default_value = "10,16")]
        values: Vec<usize>,
    },
    /// One trial of every variant, printed as JSON.
    SingleTrial {
        #[command(flatten)]
        common: Common,
        /// Trial index within the seed's stream.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
}

fn load(common: &Common) -> Result<SimConfig> {
    let mut cfg = match &common.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep { common, axis, values } => {
            let cfg = load(&common)?;
            let (axis, values) = match (axis, values, &cfg.sweep) {
                (Some(a), Some(v), _) => (a.parse::<Axis>()?, v),
                (Some(a), None, Some(s)) => (a.parse::<Axis>()?, s.values.clone()),
                (None, Some(v), Some(s)) => (s.axis, v),
                (None, None, Some(s)) => (s.axis, s.values.clone()),
                (a, _, None) => {
                    let axis = a.map(|a| a.parse::<Axis>()).transpose()?;
                    return Err(Error::Config(format!(
                        "sweep needs --axis and --values or a [sweep] table (axis {:?})",
                        axis.map(|a| a.name())
                    )));
                }
            };
            let rows = sweep(&cfg, axis, &values)?;
            write_csv(&rows, output(common.out.as_deref())?)
        }
        Command::Overhead { common, values } => {
            let mut cfg = load(&common)?;
            if common.trials.is_none() {
                cfg.trials = 10_000;
            }
            let rows = overhead_table(
                &cfg.system,
                &cfg.channel,
                &cfg.training,
                &values,
                cfg.trials,
                cfg.seed,
                cfg.threads,
            )?;
            let mut w = csv::Writer::from_writer(output(common.out.as_deref())?);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        }
        Command::ConflictProb { common, values } => {
            let mut cfg = load(&common)?;
            if common.trials.is_none() {
                cfg.trials = 100_000;
            }
            let rows = conflict_table(cfg.system.n_bs, &values, cfg.trials, cfg.seed)?;
            let mut w = csv::Writer::from_writer(output(common.out.as_deref())?);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        }
        Command::SingleTrial { common, index } => {
            let cfg = load(&common)?;
            let mut out = output(common.out.as_deref())?;
            for &variant in &cfg.variants {
                let scenario = Scenario::from_config(&cfg, variant)?;
                let detail = run_trial_detailed(&scenario, index)?;
                let line = serde_json::json!({
                    "variant": variant.label(),
                    "record": detail.record,
                    "allocation": detail.allocation,
                    "per_user_rate": detail.rates.per_user_rate,
                });
                writeln!(out, "{line}")?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
