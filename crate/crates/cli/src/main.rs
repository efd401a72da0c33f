//! `uplift` — campaign evaluation front end for the uplift-forest engine.
//!
//! Exit codes: 0 success; 2 input, schema, or configuration problems;
//! 3 model/data compatibility mismatches; 4 statistical refusals (overlap,
//! degenerate estimation, undefined evaluation).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uplift_forest::Error;

#[derive(Parser)]
#[command(
    name = "uplift",
    version,
    about = "Multiple-treatment uplift modeling with honest causal forests"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Input data file; overrides data.path from the config.
    #[arg(long, global = true)]
    data: Option<PathBuf>,

    /// Output directory; overrides output.dir from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed; overrides UPLIFT_SEED and the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores); overrides UPLIFT_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit input data and write its canonical encoded form.
    Prepare {
        /// Generate the bundled demonstration campaign at this path and audit
        /// it (no config needed).
        #[arg(long, value_name = "PATH")]
        write_demo: Option<PathBuf>,
    },
    /// Fit per-arm forests on the full dataset and save the model(s).
    Train,
    /// Score a covariate CSV with a saved model.
    Score {
        /// Model file produced by `train`.
        #[arg(long)]
        model: PathBuf,
        /// CSV of encoded covariates (optionally led by a unit_id column).
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the partitioned evaluation protocol and write the report bundle.
    Run,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema(_)
        | Error::Parse { .. }
        | Error::Labeling(_)
        | Error::Dataset(_)
        | Error::Sizing(_)
        | Error::Config(_)
        | Error::Precondition(_)
        | Error::Io(_)
        | Error::Csv(_) => 2,
        Error::Shape(_) | Error::Compatibility(_) => 3,
        Error::Composition(_) | Error::Overlap(_) | Error::Estimation(_) | Error::Evaluation(_) => {
            4
        }
    }
}

fn dispatch(cli: &Cli) -> uplift_forest::Result<()> {
    // seed/thread resolution without a config file (prepare --write-demo,
    // score) still honors the environment and flags
    let env_seed = match std::env::var(config::ENV_SEED) {
        Ok(s) => Some(s.trim().parse::<u64>().map_err(|_| {
            Error::Config(format!("{}={s:?} is not a non-negative integer", config::ENV_SEED))
        })?),
        Err(_) => None,
    };
    let env_threads = match std::env::var(config::ENV_THREADS) {
        Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| {
            Error::Config(format!(
                "{}={s:?} is not a non-negative integer",
                config::ENV_THREADS
            ))
        })?),
        Err(_) => None,
    };
    let bare_seed = cli.seed.or(env_seed).unwrap_or(0);
    uplift_forest::parallel::configure_threads(cli.threads.or(env_threads).unwrap_or(0))?;

    let resolved = match &cli.config {
        Some(path) => Some(config::resolve(
            path,
            cli.seed,
            cli.threads,
            cli.out.as_deref(),
            cli.data.as_deref(),
        )?),
        None => None,
    };
    let need_config = |cmd: &str| {
        resolved
            .as_ref()
            .ok_or_else(|| Error::Config(format!("`uplift {cmd}` needs --config <file>")))
    };

    match &cli.command {
        Command::Prepare { write_demo } => {
            let seed = resolved.as_ref().map_or(bare_seed, |r| r.seed);
            commands::prepare(resolved.as_ref(), write_demo.as_deref(), seed)
        }
        Command::Train => commands::train(need_config("train")?),
        Command::Score { model, input } => {
            let out = cli
                .out
                .clone()
                .or_else(|| resolved.as_ref().map(|r| r.out_dir.clone()))
                .unwrap_or_else(|| PathBuf::from("out"));
            commands::score(model, input, &out)
        }
        Command::Run => commands::run(need_config("run")?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("uplift_forest=info,uplift_cli=info"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
