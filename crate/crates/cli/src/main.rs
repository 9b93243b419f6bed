use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use optconn_cli::config::{self, Format, Overrides, DEFAULT_CONFIG};

/// Evaluate and verify adapted-frame Christoffel symbols for a scenario.
#[derive(Debug, Parser)]
#[command(name = "optconn", version)]
struct Args {
    /// Scenario file (TOML). Without it the flat two-dimensional base with
    /// unit parameters is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated checks, or `all`.
    #[arg(long)]
    check: Option<String>,
    /// Evaluation point as comma-separated chart coordinates `x.., s, t`.
    /// May be repeated; replaces random sampling.
    #[arg(long, allow_hyphen_values = true)]
    point: Vec<String>,
    /// Dump a Christoffel table at every point: sigma1, theorem, conformal or oracle.
    #[arg(long)]
    table: Option<String>,
    /// Finite-difference step for fd mode and the displacement oracle.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Field derivatives: exact or fd.
    #[arg(long)]
    mode: Option<String>,
    /// Per-check tolerances, e.g. `torsion=1e-8,metricity=1e-7`.
    #[arg(long)]
    tolerance: Option<String>,
    /// Seed of the point sampler.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random points.
    #[arg(long)]
    count: Option<usize>,
    /// Also report curvature summaries.
    #[arg(long)]
    curvature: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format: text or json.
    #[arg(long)]
    format: Option<String>,
    /// Flip the sign of one table entry, e.g. `E1,E2,q`. For testing the checks.
    #[arg(long)]
    fault: Option<String>,
}

fn execute(args: Args) -> Result<bool, String> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut raw = config::parse_raw(&text).map_err(|e| e.to_string())?;
    raw.apply(&Overrides {
        checks: args.check,
        points: args.point,
        table: args.table,
        fd_step: args.fd_step,
        tolerances: args.tolerance,
        seed: args.seed,
        output: args.output,
        format: args.format,
        fault: args.fault,
        mode: args.mode,
        count: args.count,
        curvature: args.curvature,
    })
    .map_err(|e| e.to_string())?;
    let cfg = config::validate(raw).map_err(|e| e.to_string())?;

    let report = optconn_cli::run(&cfg).map_err(|e| e.to_string())?;
    let body = match cfg.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json(),
    };
    match &cfg.output {
        Some(path) => fs::write(path, body).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{body}"),
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OPTCONN_LOG", "warn")).init();
    match execute(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
