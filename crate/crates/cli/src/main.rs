use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use memodiff_core::experiments::{run_scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "memodiff", version, about = "Parabolic equations with measure-valued memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML file.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config file.
        #[arg(long, env = "MEMODIFF_OUT_DIR")]
        out: Option<PathBuf>,
        /// Worker threads for sweeps and ensembles.
        #[arg(long)]
        threads: Option<usize>,
        /// Seed for randomized checks; overrides the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(config: PathBuf, out: Option<PathBuf>, threads: Option<usize>, seed: Option<u64>) -> u8 {
    let mut cfg = match ScenarioConfig::from_path(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    if seed.is_some() {
        cfg.experiment.seed = seed;
    }
    let out = out
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start thread pool: {e}");
            return 2;
        }
    };
    match pool.install(|| run_scenario(&cfg, &out)) {
        Ok(outcome) => {
            for a in &outcome.assertions {
                println!("{a}");
            }
            outcome.exit_code() as u8
        }
        Err(e) => {
            eprintln!("{e}");
            if e.is_config_error() {
                2
            } else {
                1
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => run(config, out, threads, seed),
    };
    ExitCode::from(code)
}
