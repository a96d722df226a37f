//! Per-cell confidence-interval summaries of replication results.

use crate::experiment::ResultRow;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::io;

/// Normal-approximation confidence interval for one (loss, size) cell,
/// clipped to `[0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CiSummary {
    pub loss: String,
    pub n_episodes: usize,
    pub mean_failure: f64,
    pub lo90: f64,
    pub hi90: f64,
    pub reps: usize,
    /// Set when the cell had a single replication: the interval degenerates
    /// to the point estimate.
    #[serde(skip)]
    pub degenerate: bool,
}

/// Two-sided normal quantile for the given confidence level (1.645 at 90%).
pub fn z_value(level: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// Groups rows by (loss, size) in first-appearance order and computes
/// `mean +/- z * std / sqrt(reps)` intervals.
pub fn summarize_ci(rows: &[ResultRow], level: f64) -> Vec<CiSummary> {
    let z = z_value(level);
    let mut order: Vec<(String, usize)> = Vec::new();
    for row in rows {
        let key = (row.loss.clone(), row.n_episodes);
        if !order.contains(&key) {
            order.push(key);
        }
    }
    order
        .into_iter()
        .map(|(loss, n_episodes)| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.loss == loss && r.n_episodes == n_episodes)
                .map(|r| r.failure_rate)
                .collect();
            let reps = values.len();
            let mean = values.iter().sum::<f64>() / reps as f64;
            if reps < 2 {
                return CiSummary {
                    loss,
                    n_episodes,
                    mean_failure: mean,
                    lo90: mean,
                    hi90: mean,
                    reps,
                    degenerate: true,
                };
            }
            let variance =
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
            let half = z * (variance / reps as f64).sqrt();
            CiSummary {
                loss,
                n_episodes,
                mean_failure: mean,
                lo90: (mean - half).max(0.0),
                hi90: (mean + half).min(1.0),
                reps,
                degenerate: false,
            }
        })
        .collect()
}

/// Writes the summary CSV (`loss,n_episodes,mean_failure,lo90,hi90,reps`).
pub fn write_summary_csv<W: io::Write>(
    writer: W,
    summaries: &[CiSummary],
) -> Result<(), csv::Error> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    for summary in summaries {
        csv_writer.serialize(summary)?;
    }
    csv_writer.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: io::Read>(reader: R) -> Result<Vec<CiSummary>, csv::Error> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    csv_reader.deserialize().collect()
}
