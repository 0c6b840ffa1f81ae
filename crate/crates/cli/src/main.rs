//! Command-line front end: single runs and parameter sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entropia::harness::{run_experiment, run_sweep, ExperimentConfig, LabelChoice, SweepGrid};

#[derive(Parser)]
#[command(
    name = "entropia",
    version,
    about = "Entropy-SG(L)D training with generalization bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and write metrics.csv and report.json.
    Run(RunArgs),
    /// Run a grid of experiments in parallel and write one CSV row per point.
    Sweep(SweepArgs),
}

/// Overrides applied on top of the config file; each flag wins over the file.
#[derive(Args)]
struct Overrides {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sgd, sgld, entropy_sgd or entropy_sgld.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// true or random.
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// `synthetic` or `idx:<dir>`.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Comma-separated tau values.
    #[arg(long, value_delimiter = ',', required = true)]
    taus: Vec<f64>,
    /// Comma-separated beta values (ignored with --fixed-tau-beta).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    betas: Vec<f64>,
    /// Comma-separated gamma values.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    gammas: Vec<f64>,
    /// Comma-separated label modes.
    #[arg(long = "label-modes", value_delimiter = ',', default_value = "true")]
    label_modes: Vec<String>,
    /// Hold tau*beta at this value, so every point has the same privacy.
    #[arg(long)]
    fixed_tau_beta: Option<f64>,
    /// Output CSV; defaults to `<out>/sweep.csv`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn build_config(o: &Overrides) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &o.config {
        Some(path) => {
            ExperimentConfig::from_file(path).map_err(|e| Failure::Config(e.to_string()))?
        }
        None => ExperimentConfig::default(),
    };
    let flags = [
        ("algorithm", &o.algorithm),
        ("tau", &o.tau),
        ("beta", &o.beta),
        ("gamma", &o.gamma),
        ("labels", &o.labels),
        ("seed", &o.seed),
        ("epochs", &o.epochs),
        ("data", &o.data),
        ("subset", &o.subset),
        ("out", &o.out),
        ("delta", &o.delta),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)
                .map_err(|e| Failure::Config(e.to_string()))?;
        }
    }
    for kv in &o.extra {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = build_config(&args.overrides)?;
    let outcome = run_experiment(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    let json = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{json}");
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let cfg = build_config(&args.overrides)?;
    let labels = args
        .label_modes
        .iter()
        .map(|s| {
            s.parse::<LabelChoice>()
                .map_err(|e| Failure::Config(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let grid = SweepGrid {
        taus: args.taus,
        betas: args.betas,
        gammas: args.gammas,
        labels,
        fixed_tau_beta: args.fixed_tau_beta,
    };
    let csv = args
        .csv
        .unwrap_or_else(|| cfg.out.clone().unwrap_or_default().join("sweep.csv"));
    let points = run_sweep(&cfg, &grid, Some(&csv)).map_err(|e| Failure::Runtime(e.to_string()))?;
    let failed = points.iter().filter(|p| p.error.is_some()).count();
    log::info!(
        "sweep finished: {} points, {failed} failed, results in {}",
        points.len(),
        csv.display()
    );
    if failed > 0 {
        return Err(Failure::Runtime(format!(
            "{failed} of {} sweep points failed",
            points.len()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("run aborted: {msg}");
            ExitCode::from(2)
        }
    }
}
