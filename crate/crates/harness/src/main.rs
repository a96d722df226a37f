//! `qloss` experiment CLI.
//!
//! Subcommands: `run-pendulum` (the replicated benchmark), `run-counterexample`
//! and `run-rates` (two-context Monte Carlo), `propcheck` (loss identity
//! verification), `plot` (re-render a summary CSV).
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver failure in at least
//! one cell, 3 property-check failure.

use clap::{Args, Parser, Subcommand};
use qloss::counterexamples::{log_log_slope, mc_verify, write_mc_csv, Variant};
use qloss_harness::config::{BinPreset, ExperimentConfig};
use qloss_harness::experiment::{
    run_pendulum, write_results_csv, write_timings_csv, HarnessError,
};
use qloss_harness::plot::emit_plot;
use qloss_harness::propcheck::{all_passed, render_table, run_propcheck};
use qloss_harness::summary::{read_summary_csv, write_summary_csv};
use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "qloss", version, about = "Batch RL loss-comparison experiments")]
struct Cli {
    /// Load configuration defaults from a TOML file (flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV/SVG reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replicated pendulum benchmark over (loss, dataset size) cells.
    RunPendulum(PendulumArgs),
    /// Monte Carlo verification of the two-context bad-event probabilities.
    RunCounterexample(McArgs),
    /// MAE rate sweep of the squared- and log-loss ERMs.
    RunRates(McArgs),
    /// Verify the core loss identities and print a pass/fail table.
    Propcheck,
    /// Render a summary CSV to SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct PendulumArgs {
    /// Comma-separated losses (sq, log, cat).
    #[arg(long, value_delimiter = ',')]
    losses: Option<Vec<String>>,
    /// Comma-separated dataset sizes in episodes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    /// Fourier feature order (2 or 3).
    #[arg(long)]
    order: Option<usize>,
    /// Bin preset for the categorical loss (uniform5, nonuniform5, custom).
    #[arg(long)]
    bins: Option<String>,
    /// Custom bin boundaries (with --bins custom).
    #[arg(long, value_delimiter = ',')]
    custom_bins: Option<Vec<f64>>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Evaluation horizon in steps.
    #[arg(long)]
    horizon: Option<usize>,
    /// Evaluation rollouts per replication.
    #[arg(long)]
    rollouts: Option<usize>,
    #[arg(long)]
    l2_sq: Option<f64>,
    #[arg(long)]
    l2_log: Option<f64>,
    #[arg(long)]
    l2_cat: Option<f64>,
    /// Warm-start each iteration's regression from the previous iterate.
    #[arg(long)]
    warm_start: bool,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Which construction to run (sq, log, both).
    #[arg(long, default_value = "both")]
    variant: String,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Summary CSV produced by run-pendulum.
    #[arg(long)]
    summary: PathBuf,
    /// Output SVG path (defaults to pendulum.svg in the output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_toml_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out_dir) = &cli.out_dir {
        config.out_dir = out_dir.clone();
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    Ok(config)
}

fn apply_pendulum_args(
    config: &mut ExperimentConfig,
    args: &PendulumArgs,
) -> Result<(), HarnessError> {
    if let Some(losses) = &args.losses {
        config.losses = losses.clone();
    }
    if let Some(sizes) = &args.sizes {
        config.sizes = sizes.clone();
    }
    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    if let Some(order) = args.order {
        config.feature_order = order;
    }
    if let Some(bins) = &args.bins {
        config.bins = BinPreset::parse(bins).ok_or_else(|| {
            qloss_harness::ConfigError::Invalid(format!("unknown bin preset {bins:?}"))
        })?;
    }
    if let Some(custom) = &args.custom_bins {
        config.custom_bins = custom.clone();
    }
    if let Some(gamma) = args.gamma {
        config.gamma = gamma;
    }
    if let Some(iterations) = args.iterations {
        config.iterations = iterations;
    }
    if let Some(horizon) = args.horizon {
        config.eval_horizon = horizon;
    }
    if let Some(rollouts) = args.rollouts {
        config.eval_rollouts = rollouts;
    }
    if let Some(l2) = args.l2_sq {
        config.l2_sq = l2;
    }
    if let Some(l2) = args.l2_log {
        config.l2_log = l2;
    }
    if let Some(l2) = args.l2_cat {
        config.l2_cat = l2;
    }
    if args.warm_start {
        config.warm_start = true;
    }
    Ok(())
}

fn parse_variants(name: &str) -> Result<Vec<Variant>, HarnessError> {
    match name {
        "sq" => Ok(vec![Variant::Squared]),
        "log" => Ok(vec![Variant::Log]),
        "both" => Ok(vec![Variant::Squared, Variant::Log]),
        other => Err(qloss_harness::ConfigError::Invalid(format!(
            "unknown variant {other:?} (expected sq, log, both)"
        ))
        .into()),
    }
}

fn create_out_file(config: &ExperimentConfig, name: &str) -> Result<File, HarnessError> {
    std::fs::create_dir_all(&config.out_dir)?;
    Ok(File::create(config.out_dir.join(name))?)
}

fn cmd_pendulum(config: &ExperimentConfig) -> Result<ExitCode, HarnessError> {
    config.validate()?;
    let output = run_pendulum(config)?;
    write_results_csv(create_out_file(config, "results.csv")?, &output.rows)?;
    write_timings_csv(create_out_file(config, "timings.csv")?, &output.timings)?;
    write_summary_csv(create_out_file(config, "summary.csv")?, &output.summaries)?;
    emit_plot(&output.summaries, create_out_file(config, "pendulum.svg")?)?;
    for summary in &output.summaries {
        if summary.degenerate {
            eprintln!(
                "warning: single replication for loss {} at {} episodes; interval is a point",
                summary.loss, summary.n_episodes
            );
        }
        println!(
            "loss={} episodes={} mean_failure={:.4} ci90=[{:.4}, {:.4}] reps={}",
            summary.loss,
            summary.n_episodes,
            summary.mean_failure,
            summary.lo90,
            summary.hi90,
            summary.reps
        );
    }
    println!("wrote {}", config.out_dir.display());
    if output.any_solver_failure() {
        eprintln!("at least one cell had a solver failure (flagged in results.csv)");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_counterexample(config: &ExperimentConfig, args: &McArgs) -> Result<ExitCode, HarnessError> {
    let variants = parse_variants(&args.variant)?;
    let ns = args.ns.clone().unwrap_or_else(|| config.mc_sizes.clone());
    let trials = args.trials.unwrap_or(config.mc_trials);
    let mut all_cells = Vec::new();
    for variant in variants {
        let cells = mc_verify(variant, &ns, trials, config.seed)
            .map_err(|e| qloss_harness::ConfigError::Invalid(e.to_string()))?;
        for cell in &cells {
            println!(
                "variant={} n={} p_bad={:.4} (se {:.4}) mae={:.5} rmse={:.5} cond_mae={:.5} cond_rmse={:.5}",
                cell.variant,
                cell.n,
                cell.p_bad,
                cell.p_bad_se,
                cell.mae_mean,
                cell.rmse_mean,
                cell.conditional_mae,
                cell.conditional_rmse
            );
        }
        all_cells.extend(cells);
    }
    write_mc_csv(create_out_file(config, "counterexample.csv")?, &all_cells)
        .map_err(|e| qloss_harness::ConfigError::Invalid(e.to_string()))?;
    println!("wrote {}", config.out_dir.join("counterexample.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_rates(config: &ExperimentConfig, args: &McArgs) -> Result<ExitCode, HarnessError> {
    let variants = parse_variants(&args.variant)?;
    let ns = args.ns.clone().unwrap_or_else(|| config.rate_sizes.clone());
    let trials = args.trials.unwrap_or(config.mc_trials);
    let mut all_cells = Vec::new();
    for variant in variants {
        let cells = mc_verify(variant, &ns, trials, config.seed)
            .map_err(|e| qloss_harness::ConfigError::Invalid(e.to_string()))?;
        let points: Vec<(f64, f64)> =
            cells.iter().map(|c| (c.n as f64, c.mae_mean)).collect();
        let slope = log_log_slope(&points);
        println!("variant={} log-log MAE slope = {slope:.4}", cells[0].variant);
        all_cells.extend(cells);
    }
    write_mc_csv(create_out_file(config, "rates.csv")?, &all_cells)
        .map_err(|e| qloss_harness::ConfigError::Invalid(e.to_string()))?;
    println!("wrote {}", config.out_dir.join("rates.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_propcheck(config: &ExperimentConfig) -> ExitCode {
    let results = run_propcheck(config.seed);
    print!("{}", render_table(&results));
    if all_passed(&results) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn cmd_plot(config: &ExperimentConfig, args: &PlotArgs) -> Result<ExitCode, HarnessError> {
    let summaries = read_summary_csv(File::open(&args.summary)?)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config.out_dir.join("pendulum.svg"));
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    emit_plot(&summaries, File::create(&out)?)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    let mut config = load_config(&cli)?;
    match &cli.command {
        Command::RunPendulum(args) => {
            apply_pendulum_args(&mut config, args)?;
            cmd_pendulum(&config)
        }
        Command::RunCounterexample(args) => cmd_counterexample(&config, args),
        Command::RunRates(args) => cmd_rates(&config, args),
        Command::Propcheck => Ok(cmd_propcheck(&config)),
        Command::Plot(args) => cmd_plot(&config, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are not errors; anything else is a usage /
            // config problem and exits 1.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(HarnessError::Config(err)) => {
            eprintln!("{err}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}
