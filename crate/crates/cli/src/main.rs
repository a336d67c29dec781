//! `subgap`: solve, gap, harden, check and bench front ends.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use report::Format;

#[derive(Parser, Debug)]
#[command(name = "subgap", version, about = "Submodular maximization over matroids and symmetry-gap hardness instances")]
struct Cli {
    /// Master seed; every random choice derives from it.
    #[arg(long, global = true, env = "SUBGAP_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores, 1 = single-threaded).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fractional local search plus pipage rounding on a function/matroid pair.
    Solve(SolveArgs),
    /// OPT, OPT_bar and the symmetry gap of a symmetric instance.
    Gap(GapArgs),
    /// Smoothed pair constants, realized gap and a distinguishing experiment.
    Harden(HardenArgs),
    /// Run a property suite.
    Check(CheckArgs),
    /// Time the main kernels.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Set function JSON: {"n", "kind", "payload"}.
    #[arg(long)]
    instance: PathBuf,
    /// Matroid JSON: {"kind": "free" | "uniform" | "partition" | "explicit", ...}.
    #[arg(long)]
    constraint: PathBuf,
    /// Box bound as an exact rational "r/q".
    #[arg(long, default_value = "1/2")]
    t: String,
    /// Search over B_t(M) and round to a base.
    #[arg(long)]
    bases: bool,
    /// "exact" or "sample[:COUNT]".
    #[arg(long, default_value = "exact")]
    evaluator: String,
    /// "zero", "relaxed" or a nonnegative number.
    #[arg(long, default_value = "zero")]
    slack: String,
    #[arg(long)]
    steepest: bool,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
}

#[derive(Args, Debug)]
struct InstanceArg {
    /// Bundled instance: k2cut, cardinality:K, dircut-bases:K, cyclic4.
    #[arg(required_unless_present = "instance", conflicts_with = "instance")]
    name: Option<String>,
    /// Instance JSON: {"function", "feasibility", "group"}.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GapArgs {
    #[command(flatten)]
    source: InstanceArg,
    #[arg(long, default_value_t = 1001)]
    grid_points: usize,
    #[arg(long, default_value_t = 1e-9)]
    grid_tol: f64,
}

#[derive(Args, Debug)]
struct HardenArgs {
    #[command(flatten)]
    source: InstanceArg,
    /// Smoothing accuracy; defaults to 0.01·M.
    #[arg(long)]
    eps: Option<f64>,
    /// Copies per element in the refinement.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Distinguishing trials (0 skips the experiment).
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Queries per trial.
    #[arg(long, default_value_t = 1000)]
    queries: usize,
    /// random, symmetric, greedy or local-probe.
    #[arg(long, default_value = "random")]
    strategy: String,
    /// Guess f-hat when an answer exceeds this; defaults to (OPT_bar + OPT)/2.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// structure, extensions, pipage, localsearch, hardness, bounds, symmetry or all.
    suite: String,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Largest ground set for the exact multilinear timing.
    #[arg(long, default_value_t = 18)]
    max_n: usize,
    /// Repetitions per measurement.
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

/// Exit status for a failed run.
fn exit_code(err: &anyhow::Error) -> u8 {
    use subgap::Error as E;
    if err.downcast_ref::<commands::CheckFailed>().is_some() {
        return 1;
    }
    match err.downcast_ref::<E>() {
        Some(E::Invalid(_) | E::Json(_)) => 2,
        Some(E::Infeasible { .. } | E::NotInvariant(_) | E::NotStronglySymmetric(_)) => 3,
        Some(E::SizeCap { .. }) => 4,
        Some(E::Contract(_) | E::Unbounded) => 1,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let run = match cli.command {
        Command::Solve(a) => commands::solve(&a, cli.seed, cli.format),
        Command::Gap(a) => commands::gap(&a, cli.seed, cli.format),
        Command::Harden(a) => commands::harden(&a, cli.seed, cli.format),
        Command::Check(a) => commands::check(&a, cli.seed, cli.format),
        Command::Bench(a) => commands::bench(&a, cli.seed, cli.format),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
