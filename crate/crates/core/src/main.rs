use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qfiflow::cli::{parse_config, run_simulate, Checks, ConfigError, OutputTarget};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "qfiflow", version, about = "QFI flow of non-Markovian master equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a model, decompose the QFI flow and run the checks.
    Simulate(SimulateArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write the per-step flow table here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the JSON run summary here.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Comma-separated checks: oracle, theta, intervals, decomposition, none.
    #[arg(long)]
    check: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long = "tol-herm")]
    tol_herm: Option<f64>,
    #[arg(long = "tol-trace")]
    tol_trace: Option<f64>,
    #[arg(long = "tol-pos")]
    tol_pos: Option<f64>,
}

fn load(args: &SimulateArgs) -> Result<qfiflow::cli::RunConfig, ConfigError> {
    let text = std::fs::read(&args.config).map_err(|e| {
        ConfigError::Invariant(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(v) = args.dt {
        cfg.dt = v;
    }
    if let Some(v) = args.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = args.tol_herm {
        cfg.tolerances.herm = v;
    }
    if let Some(v) = args.tol_trace {
        cfg.tolerances.trace = v;
    }
    if let Some(v) = args.tol_pos {
        cfg.tolerances.pos = v;
    }
    if let Some(list) = &args.check {
        cfg.checks = Checks::from_list(list)?;
    }
    if args.out.is_some() || args.summary.is_some() {
        cfg.outputs.push(OutputTarget {
            csv_path: args.out.clone(),
            json_summary_path: args.summary.clone(),
        });
    }
    if cfg.outputs.is_empty() {
        return Err(ConfigError::Invariant(
            "no output target; give --out, --summary or config outputs".into(),
        ));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: &SimulateArgs) -> ExitCode {
    let cfg = match load(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match run_simulate(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("run aborted: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let s = &outcome.summary;
    println!(
        "{}: {} steps, max F = {:.6e}, max |flow_fd - full_flow| = {:.3e}",
        s.model, s.steps, s.max_qfi, s.max_abs_flow_fd_minus_full_flow
    );
    for c in &s.checks {
        println!(
            "{} {}: {:.3e} (tolerance {:.3e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    if s.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate(args) => simulate(&args),
    }
}
