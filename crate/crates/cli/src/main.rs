//! Operator entry point: train policies, run optimization and baselines,
//! reproduce the encoding-length study, sweep hyperparameters, and emit
//! report artifacts. Every command is deterministic given its config file
//! and seeds.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{RunConfig, RunSpec, SweepConfig};

#[derive(Parser)]
#[command(
    name = "react",
    about = "Evolve perturbed initial states into diverse, interpretable policy demonstrations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tabular softmax policy and write it to a policy file.
    Train(TrainArgs),
    /// Run optimization and baselines over seeds, exporting all artifacts.
    Optimize(OptimizeArgs),
    /// Measure decode-occupancy skew for a list of encoding lengths.
    EncodingStudy(StudyArgs),
    /// Run a hyperparameter grid and emit a summary table.
    Sweep(SweepArgs),
    /// Regenerate report artifacts from a stored run log.
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Environment spec file (TOML).
    #[arg(long)]
    env: PathBuf,
    /// Output policy file path.
    #[arg(long)]
    out: PathBuf,
    /// Training preset: grid-full, grid-undertrained, or reach-converged.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epsilon_start: Option<f64>,
    #[arg(long)]
    epsilon_end: Option<f64>,
    /// Start each training episode from a random legal state.
    #[arg(long)]
    exploring_starts: Option<bool>,
    #[arg(long)]
    temperature: Option<f64>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Run config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the config's mode list.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    population_size: Option<usize>,
    #[arg(long)]
    generations: Option<u32>,
    #[arg(long)]
    crossover_prob: Option<f64>,
    #[arg(long)]
    mutation_prob: Option<f64>,
    #[arg(long)]
    tournament_size: Option<usize>,
    #[arg(long)]
    bits_per_dim: Option<u32>,
}

#[derive(Args)]
struct StudyArgs {
    /// Encoding lengths (bits per dimension) to compare.
    #[arg(long, value_delimiter = ',', default_values_t = [4u32, 5, 6, 7, 8])]
    bits: Vec<u32>,
    /// Take dimensions from an environment spec file.
    #[arg(long)]
    env: Option<PathBuf>,
    /// Synthetic study: number of values per discrete dimension.
    #[arg(long)]
    values: Option<u64>,
    /// Synthetic study: number of dimensions.
    #[arg(long, default_value_t = 2)]
    dims: usize,
    /// Sample this many genomes instead of exhausting the code space.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory containing a run_log.jsonl.
    #[arg(long)]
    run_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => commands::cmd_train(commands::TrainOptions {
            env_path: args.env,
            out: args.out,
            preset: args.preset,
            seed: args.seed,
            episodes: args.episodes,
            gamma: args.gamma,
            learning_rate: args.learning_rate,
            epsilon_start: args.epsilon_start,
            epsilon_end: args.epsilon_end,
            exploring_starts: args.exploring_starts,
            temperature: args.temperature,
        }),
        Command::Optimize(args) => {
            let mut config = RunConfig::load(&args.config)?;
            if let Some(seeds) = args.seeds {
                anyhow::ensure!(!seeds.is_empty(), "--seeds must not be empty");
                config.seeds = seeds;
            }
            if let Some(modes) = args.modes {
                config.modes = modes
                    .iter()
                    .map(|m| RunSpec::parse(m))
                    .collect::<Result<Vec<_>>>()?;
            }
            if let Some(out) = args.out {
                config.out = out;
            }
            if let Some(v) = args.population_size {
                config.evolve.population_size = v;
            }
            if let Some(v) = args.generations {
                config.evolve.generations = v;
            }
            if let Some(v) = args.crossover_prob {
                config.evolve.crossover_prob = v;
            }
            if let Some(v) = args.mutation_prob {
                config.evolve.mutation_prob = v;
            }
            if let Some(v) = args.tournament_size {
                config.evolve.tournament_size = v;
            }
            if let Some(v) = args.bits_per_dim {
                config.bits_per_dim = v;
            }
            commands::cmd_optimize(&config)
        }
        Command::EncodingStudy(args) => commands::cmd_encoding_study(commands::StudyOptions {
            bits: args.bits,
            env_path: args.env,
            values: args.values,
            dims: args.dims,
            samples: args.samples,
            seed: args.seed,
            out: args
                .out
                .unwrap_or_else(|| config::default_out_dir().join("encoding_study")),
        }),
        Command::Sweep(args) => {
            let mut config = SweepConfig::load(&args.config)?;
            if let Some(out) = args.out {
                config.out = out;
            }
            commands::cmd_sweep(&config)
        }
        Command::Report(args) => commands::cmd_report(&args.run_dir),
    }
}
