use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ratelab::constructive::{build_report, BuildKind};
use ratelab::error::Error;
use ratelab::experiment::{emit_plotdata, run_experiment, ExperimentConfig, OUTPUT_ROOT_ENV};
use ratelab::rates::{lower_bound_exponent, theoretical_rate};

/// Convergence-rate experiments for piecewise-smooth regression.
#[derive(Parser, Debug)]
#[command(name = "ratelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run (or resume) an experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Prefix for a relative `output_dir`.
        #[arg(long, env = OUTPUT_ROOT_ENV)]
        output_root: Option<PathBuf>,
    },
    /// Print the rate exponents for smoothness `beta`, boundary smoothness `alpha`
    /// and dimension `dim`.
    Rates {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        dim: usize,
    },
    /// Build an explicit network, write it as JSON and print its statistics.
    Construct {
        #[arg(long, value_parser = parse_kind)]
        kind: BuildKind,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
        /// Inputs of `sum` and `product`, pairs of `inner`.
        #[arg(long, default_value_t = 2)]
        arity: usize,
    },
    /// Rebuild the plot table and slope summary from a results directory.
    Plotdata {
        results_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<BuildKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl Failure {
    /// Errors caused by the user's input map to exit code 1.
    fn classify(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) | Error::Input(_) => Failure::Config(e),
            _ => Failure::Runtime(e),
        }
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, output_root } => {
            let cfg = ExperimentConfig::load(&config).map_err(|e| match e {
                Error::Io { .. } => Failure::Config(e),
                other => Failure::classify(other),
            })?;
            let out = cfg.resolve_output(output_root.as_deref());
            log::info!("writing results to {}", out.display());
            let outcome = run_experiment(&cfg, &out).map_err(|e| match e {
                Error::Config(_) => Failure::Config(e),
                other => Failure::Runtime(other),
            })?;
            println!("{} rows in {} ({} computed)", outcome.rows.len(), out.display(), outcome.computed);
            for r in &outcome.reports {
                println!(
                    "{:<16} slope {:>8.4}  reference {:>8.4}",
                    r.method, r.slope, r.theoretical_exponent
                );
            }
        }
        Command::Rates { beta, alpha, dim } => {
            let rate = theoretical_rate(beta, alpha, dim).map_err(Failure::classify)?;
            let doc = serde_json::json!({
                "beta": beta,
                "alpha": alpha,
                "dim": dim,
                "theoretical_rate": rate,
                "linear_lower_bound_exponent": lower_bound_exponent(dim),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        }
        Command::Construct { kind, eps, out, arity } => {
            let (net, report) = build_report(kind, eps, arity).map_err(Failure::classify)?;
            net.save(&out).map_err(Failure::classify)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
        }
        Command::Plotdata { results_dir, out } => {
            let table = emit_plotdata(&results_dir, &out).map_err(|e| match e {
                Error::Config(_) | Error::Parse(_) => Failure::Config(e),
                other => Failure::Runtime(other),
            })?;
            println!("{} rows written to {}", table.rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
