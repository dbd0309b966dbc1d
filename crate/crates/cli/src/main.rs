use std::path::PathBuf;
use std::process::ExitCode;

use alqnn::runner::{self, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alqnn", version, about = "Leak-risk pipeline: statistics, noisy QNN training and classical comparison")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Contingency tables, continuous comparisons and logistic models.
    Stats(Common),
    /// Repeated QNN training over the outer folds.
    TrainQnn(Common),
    /// Baselines and QNN variants at a fixed sensitivity floor, plus importance.
    Compare(Common),
    /// Write the synthetic cohort as CSV.
    GenData(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; also seeds the synthetic cohort.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key as `--key value` or `--key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
    rest: Vec<String>,
}

fn overrides(common: &Common) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    let mut it = common.rest.iter();
    while let Some(arg) = it.next() {
        let key = arg.strip_prefix("--").ok_or_else(|| format!("unexpected argument {arg:?}"))?;
        match key.split_once('=') {
            Some((k, v)) => pairs.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| format!("--{key} needs a value"))?;
                pairs.push((key.to_string(), v.clone()));
            }
        }
    }
    if let Some(seed) = common.seed {
        pairs.push(("seed".into(), seed.to_string()));
        pairs.push(("data_seed".into(), seed.to_string()));
    }
    if let Some(out) = &common.out {
        pairs.push(("out".into(), out.display().to_string()));
    }
    Ok(pairs)
}

fn run(cli: Cli) -> Result<(), String> {
    let (name, common) = match &cli.command {
        Command::Stats(c) => ("stats", c),
        Command::TrainQnn(c) => ("train-qnn", c),
        Command::Compare(c) => ("compare", c),
        Command::GenData(c) => ("gen-data", c),
    };
    let cfg = RunConfig::load(common.config.as_deref(), &overrides(common)?).map_err(|e| e.to_string())?;
    if let Some(n) = runner::workers_from_env() {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    let files = runner::run_command(name, &cfg).map_err(|e| e.to_string())?;
    println!("{name}: wrote {} files and {} to {}", files.len(), runner::MANIFEST, cfg.out.display());
    Ok(())
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
