use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zbdetect::experiment::{cmd_convert, cmd_coverage, cmd_incremental, cmd_simulate, cmd_train, ExperimentConfig};

#[derive(Parser)]
#[command(name = "zbdetect", version, about = "Zero-bias abnormality detection experiments")]
struct Cli {
    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat JSON configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train regular and zero-bias networks on the synthetic dataset.
    Train(Common),
    /// Convert a zero-bias model into a binary abnormality detector.
    Convert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Monte-Carlo sweep of CUSUM, EWMA and sliding-window delays.
    Simulate(Common),
    /// Compare incremental-learning strategies for both head types.
    Incremental(Common),
    /// Hypersphere coverage fractions per class.
    Coverage {
        #[command(flatten)]
        common: Common,
        /// Model files to measure; trains both heads when omitted.
        #[arg(long)]
        model: Vec<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Train(c) | Command::Simulate(c) | Command::Incremental(c) => c,
            Command::Convert { common, .. } | Command::Coverage { common, .. } => common,
        }
    }
}

fn run(cli: Cli) -> zbdetect::Result<()> {
    let common = cli.command.common();
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    if cli.print_config {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let out = &common.out;
    let report = match &cli.command {
        Command::Train(_) => cmd_train(&cfg, out)?,
        Command::Convert { model, .. } => cmd_convert(&cfg, model, out)?,
        Command::Simulate(_) => cmd_simulate(&cfg, out)?,
        Command::Incremental(_) => cmd_incremental(&cfg, out)?,
        Command::Coverage { model, .. } => cmd_coverage(&cfg, model, out)?,
    };
    println!("{}", serde_json::to_string_pretty(&report.metrics)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zbdetect: {e}");
            ExitCode::FAILURE
        }
    }
}
