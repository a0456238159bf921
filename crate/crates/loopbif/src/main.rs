use clap::{Parser, Subcommand};
use loopbif::cli::{run, Command, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

/// Bifurcation-diagram tracer for 1-D indefinite concave-convex Neumann
/// problems.
#[derive(Parser)]
#[command(name = "loopbif", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSVs and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the RNG seed recorded in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the regularization value for single-trace commands.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Principal eigenvalues of the linearization at the trivial line.
    Eigen,
    /// Constant-solution limit over the regularization sequence.
    Cstar,
    /// Trace a single branch at one regularization value.
    Trace,
    /// Trace the whole regularization family.
    Family,
    /// Family, rescale to the original frame, and classify the loop.
    Loop,
    /// Two-sided split of the mushroom component (prehypo configurations).
    Sigma,
    /// Run the invariant suite and report pass/fail per check.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.config {
        Some(c) => c,
        None => {
            eprintln!("config error: --config <path> is required");
            return ExitCode::from(2);
        }
    };
    let command = match cli.command {
        Cmd::Eigen => Command::Eigen,
        Cmd::Cstar => Command::Cstar,
        Cmd::Trace => Command::Trace,
        Cmd::Family => Command::Family,
        Cmd::Loop => Command::Loop,
        Cmd::Sigma => Command::Sigma,
        Cmd::Verify => Command::Verify,
    };
    let opts = RunOptions {
        command,
        config_path: config,
        out_dir: cli.out,
        seed: cli.seed,
        eps: cli.eps,
        quiet: cli.quiet,
    };
    ExitCode::from(run(&opts))
}
