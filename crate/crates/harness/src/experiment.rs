//! The replicated pendulum benchmark: collect a dataset, run fitted
//! Q-iteration, evaluate the greedy policy, repeat over the
//! (loss, size, replication) grid.

use crate::config::{ConfigError, ExperimentConfig};
use crate::summary::{summarize_ci, CiSummary};
use qloss::fit::LossKind;
use qloss::fqi::{run_fqi, BatchDataset, FqiConfig};
use qloss::pendulum::evaluate_policy;
use qloss::seeding;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("no summaries to plot")]
    EmptyPlot,
}

/// One replication's outcome. `solver_ok = false` marks a cell whose solver
/// failed; its failure rate is recorded as 1 (no usable policy) and the run
/// continues.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub loss: String,
    pub n_episodes: usize,
    pub replication: usize,
    pub failure_rate: f64,
    pub solver_ok: bool,
}

/// Wall-clock time per cell, kept out of `results.csv` so that file is
/// byte-identical across reruns of the same seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRow {
    pub loss: String,
    pub n_episodes: usize,
    pub replication: usize,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
    pub summaries: Vec<CiSummary>,
}

impl ExperimentOutput {
    pub fn any_solver_failure(&self) -> bool {
        self.rows.iter().any(|r| !r.solver_ok)
    }
}

fn fqi_config_for(config: &ExperimentConfig, loss: LossKind) -> Result<FqiConfig, ConfigError> {
    let mut fqi = FqiConfig::new(loss);
    fqi.iterations = config.iterations;
    fqi.gamma = config.gamma;
    fqi.feature_order = config.feature_order;
    fqi.l2 = config.l2_for(loss);
    fqi.warm_start = config.warm_start;
    if loss == LossKind::Cat {
        fqi.bins = Some(config.bin_spec()?);
    }
    Ok(fqi)
}

/// One cell: collect, fit, evaluate. Child seeds derive from
/// `(master, loss index, size index, replication)`; the dataset and the
/// evaluation rollouts get disjoint substreams.
fn run_cell(
    config: &ExperimentConfig,
    loss: LossKind,
    fqi_config: &FqiConfig,
    loss_index: usize,
    size_index: usize,
    replication: usize,
) -> (ResultRow, TimingRow) {
    let start = Instant::now();
    let n_episodes = config.sizes[size_index];
    let child = seeding::derive(
        config.seed,
        &[loss_index as u64, size_index as u64, replication as u64],
    );
    let dataset = BatchDataset::collect(n_episodes, seeding::derive(child, &[0]));
    let eval_seed = seeding::derive(child, &[1]);
    let (failure_rate, solver_ok) = match run_fqi(&dataset, fqi_config) {
        Ok((policy, _)) => (
            evaluate_policy(
                |state| policy.act(state),
                config.eval_horizon,
                config.eval_rollouts,
                eval_seed,
            ),
            true,
        ),
        Err(err) => {
            eprintln!(
                "solver failure (loss {loss}, {n_episodes} episodes, replication {replication}): {err}"
            );
            (1.0, false)
        }
    };
    let loss = loss.to_string();
    (
        ResultRow {
            loss: loss.clone(),
            n_episodes,
            replication,
            failure_rate,
            solver_ok,
        },
        TimingRow {
            loss,
            n_episodes,
            replication,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}

/// Runs the full (loss, size, replication) grid, in parallel, and summarizes
/// 90% confidence intervals per cell. Fully reproducible from the master
/// seed: rows are computed on independent derived streams and sorted by grid
/// indices before writing.
pub fn run_pendulum(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let losses = config.loss_kinds()?;
    let mut tasks = Vec::new();
    for (loss_index, loss) in losses.iter().enumerate() {
        let fqi_config = fqi_config_for(config, *loss)?;
        for size_index in 0..config.sizes.len() {
            for replication in 0..config.replications {
                tasks.push((*loss, fqi_config.clone(), loss_index, size_index, replication));
            }
        }
    }

    let run_all = || {
        tasks
            .par_iter()
            .map(|(loss, fqi_config, loss_index, size_index, replication)| {
                run_cell(config, *loss, fqi_config, *loss_index, *size_index, *replication)
            })
            .collect::<Vec<_>>()
    };
    let mut results = if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .expect("worker pool")
            .install(run_all)
    } else {
        run_all()
    };

    results.sort_by(|(a, _), (b, _)| {
        (losses.iter().position(|l| l.to_string() == a.loss), a.n_episodes, a.replication).cmp(&(
            losses.iter().position(|l| l.to_string() == b.loss),
            b.n_episodes,
            b.replication,
        ))
    });
    let (rows, timings): (Vec<ResultRow>, Vec<TimingRow>) = results.into_iter().unzip();
    let summaries = summarize_ci(&rows, 0.90);
    Ok(ExperimentOutput {
        rows,
        timings,
        summaries,
    })
}

/// Writes the results CSV
/// (`loss,n_episodes,replication,failure_rate,solver_ok`).
pub fn write_results_csv<W: io::Write>(writer: W, rows: &[ResultRow]) -> Result<(), csv::Error> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    for row in rows {
        csv_writer.serialize(row)?;
    }
    csv_writer.flush()?;
    Ok(())
}

pub fn read_results_csv<R: io::Read>(reader: R) -> Result<Vec<ResultRow>, csv::Error> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    csv_reader.deserialize().collect()
}

pub fn write_timings_csv<W: io::Write>(writer: W, rows: &[TimingRow]) -> Result<(), csv::Error> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    for row in rows {
        csv_writer.serialize(row)?;
    }
    csv_writer.flush()?;
    Ok(())
}
