use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gplincc::runner::{self, Settings};

/// Conditional calibration of θ(λ) with a GP prior and linearized model outputs.
#[derive(Parser)]
#[command(name = "gplincc", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one analytic benchmark end to end
    Example(Flags),
    /// Replication study of predictor MSE over n and m
    Replicate(Flags),
    /// Fit hyperparameters and the posterior from CSV inputs
    Fit(Flags),
    /// Predict θ at new λ from CSV inputs and a fitted φ
    Predict(Flags),
    /// Leave-one-out compensation coverage test
    Diagnose(Flags),
    /// Latin hypercube design
    Design(Flags),
    /// Linear coefficients from a simulation bundle
    Linearize(Flags),
}

#[derive(Args)]
struct Flags {
    /// key = value file applied before environment and flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["1", "2", "3"])]
    example: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    pairs: Option<usize>,
    /// Worker threads, 0 for one per core
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    coefficients: Option<PathBuf>,
    #[arg(long)]
    observations: Option<PathBuf>,
    #[arg(long)]
    hyperfit: Option<PathBuf>,
    /// Any other setting, e.g. --set n_lambda=500
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn settings(name: &str, f: Flags) -> gplincc::Result<Settings> {
    let mut s = Settings::default();
    let config = f.config.or_else(|| std::env::var_os("GPLINCC_CONFIG").map(PathBuf::from));
    if let Some(c) = &config {
        s.apply_file(c)?;
    }
    s.apply_env(std::env::vars())?;
    s.set("command", name)?;
    let path = |p: PathBuf| p.to_string_lossy().into_owned();
    let flags: Vec<(&str, Option<String>)> = vec![
        ("example", f.example),
        ("n", f.n.map(|v| v.to_string())),
        ("m", f.m.map(|v| v.to_string())),
        ("k", f.k.map(|v| v.to_string())),
        ("seed", f.seed.map(|v| v.to_string())),
        ("out", f.out.map(path)),
        ("reps", f.reps.map(|v| v.to_string())),
        ("alpha", f.alpha.map(|v| v.to_string())),
        ("pairs", f.pairs.map(|v| v.to_string())),
        ("workers", f.workers.map(|v| v.to_string())),
        ("design", f.design.map(path)),
        ("bundle", f.bundle.map(path)),
        ("coefficients", f.coefficients.map(path)),
        ("observations", f.observations.map(path)),
        ("hyperfit", f.hyperfit.map(path)),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            s.set(k, v)?;
        }
    }
    for kv in &f.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| gplincc::Error::InvalidArgument(format!("--set {kv}: expected KEY=VALUE")))?;
        s.set(k.trim(), v.trim())?;
    }
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = match cli.command {
        Cmd::Example(f) => ("example", f),
        Cmd::Replicate(f) => ("replicate", f),
        Cmd::Fit(f) => ("fit", f),
        Cmd::Predict(f) => ("predict", f),
        Cmd::Diagnose(f) => ("diagnose", f),
        Cmd::Design(f) => ("design", f),
        Cmd::Linearize(f) => ("linearize", f),
    };
    match settings(name, flags).and_then(|s| runner::run(&s)) {
        Ok(report) => {
            for f in &report.files {
                println!("{}", report.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gplincc {name}: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
