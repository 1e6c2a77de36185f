use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use macov::harness::{cmd_discover, cmd_plot, cmd_reproduce, cmd_train, ExperimentConfig, HarnessError, RunOverrides};

/// Multi-agent covering options: discovery, training and reporting.
///
/// Log verbosity comes from MACOV_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "macov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover multi-agent options and write options.csv.
    Discover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train one learner per seed and write per-seed, aggregate and summary CSVs.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `[run] out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Render aggregate CSVs as an SVG learning-curve plot.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Legend entries, one per input.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
    },
    /// Rerun a shipped comparison table: fourroom-2agent or fourroom-3x2.
    Reproduce {
        table: String,
        /// Also write each row's CSVs here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        episodes: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Discover { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = cmd_discover(&cfg, &out)?;
            print!("{report}");
            println!("wrote {}", out.join("options.csv").display());
        }
        Command::Train {
            config,
            out,
            seeds,
            episodes,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            RunOverrides { seeds, episodes }.apply(&mut cfg)?;
            let out = out
                .or_else(|| cfg.run.out.as_deref().map(|o| cfg.resolve(o)))
                .ok_or_else(|| HarnessError::Config("no output directory: pass --out or set [run] out".into()))?;
            let exp = cmd_train(&cfg, &out)?;
            let a = &exp.aggregate;
            println!("{:<24} {:>7} {:>7}", "", "Value", "Step");
            println!("{:<24} {:>7.3} {:>7.1}", a.label, a.value, a.step);
            println!("wrote {}", out.display());
        }
        Command::Plot { inputs, out, labels } => {
            cmd_plot(&inputs, &labels, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Reproduce {
            table,
            out,
            seeds,
            episodes,
        } => {
            let t = cmd_reproduce(&table, &RunOverrides { seeds, episodes }, out.as_deref())?;
            print!("{t}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MACOV_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
