//! Command-line front end: run benchmark experiments, print the projection
//! bias bound, or query the exact oracle for a finite chain.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cbebf::bench::{best_rp_per_trial, mean_and_sem, run_experiment, ExperimentConfig};
use cbebf::mdp::FiniteMdp;
use cbebf::projection::eps_prj;

#[derive(Parser)]
#[command(name = "cbebf", about = "Compressed Bellman-error feature generation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark experiment from a TOML config and write a CSV.
    Run(RunArgs),
    /// Print the inner-product distortion bound for a projection size.
    Bounds(BoundsArgs),
    /// Print exact value, stationary distribution, and mixing norm of a
    /// finite chain loaded from a plain-text matrix file.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Directory the CSV is written into (joined with the config's output name).
    #[arg(long)]
    out: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's number of trials.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Sparsity of the feature vectors.
    #[arg(long)]
    k: usize,
    /// Original feature dimension.
    #[arg(long = "D")]
    big_dim: usize,
    /// Projected dimension.
    #[arg(long)]
    d: usize,
    /// Failure probability in (0, 1).
    #[arg(long)]
    xi: f64,
}

#[derive(Args)]
struct OracleArgs {
    /// Plain-text chain file: "S gamma", S transition rows, one reward row.
    #[arg(long)]
    mdp: PathBuf,
    /// Horizon for the mixing-matrix norm.
    #[arg(long, default_value_t = 10)]
    horizon: usize,
}

fn run(args: RunArgs) -> cbebf::Result<()> {
    let mut cfg = ExperimentConfig::from_toml_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.n_trials = trials;
    }
    let file_name = cfg
        .output
        .file_name()
        .ok_or_else(|| cbebf::Error::Config("output must name a file".into()))?
        .to_owned();
    cfg.output = args.out.join(file_name);

    let outcome = run_experiment(&cfg)?;
    println!(
        "wrote {} rows over {} trials to {}",
        outcome.rows.len(),
        cfg.n_trials,
        cfg.output.display()
    );
    for method in ["cbebf", "clstd"] {
        let best = best_rp_per_trial(&outcome.rows, method);
        if !best.is_empty() {
            let values: Vec<f64> = best.values().copied().collect();
            let (mean, sem) = mean_and_sem(&values);
            println!(
                "{method}: best RP error {mean:.6} +/- {sem:.6} (mean over {} trials)",
                best.len()
            );
        }
    }
    for failure in &outcome.failures {
        eprintln!(
            "warning: trial {} {} failed: {}",
            failure.trial, failure.method, failure.message
        );
    }
    Ok(())
}

fn bounds(args: BoundsArgs) -> cbebf::Result<()> {
    let bound = eps_prj(args.k, args.big_dim, args.d, args.xi)?;
    println!(
        "eps_prj = {:.6} (k={}, D={}, d={}, xi={})",
        bound.eps_prj, bound.k, bound.big_dim, bound.small_dim, bound.xi
    );
    Ok(())
}

fn oracle(args: OracleArgs) -> cbebf::Result<()> {
    let m = FiniteMdp::from_file(&args.mdp)?;
    let value = m.exact_value()?;
    println!("states: {}  gamma: {}", m.n_states(), m.gamma());
    println!("exact value: {}", format_vec(&value));
    match m.stationary_distribution() {
        Ok(rho) => println!("stationary distribution: {}", format_vec(&rho)),
        Err(e) => println!("stationary distribution: unavailable ({e})"),
    }
    let mixing = m.mixing_matrix(args.horizon)?;
    println!("mixing norm |Gamma_{}| = {:.10}", args.horizon, mixing.operator_norm());
    Ok(())
}

fn format_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Bounds(args) => bounds(args),
        Command::Oracle(args) => oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
