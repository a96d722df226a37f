//! Experiment orchestration for the batch RL loss comparison: configuration,
//! seeded replication grids, confidence-interval summaries, counterexample
//! Monte Carlo sweeps, property checks, and CSV/SVG report emission.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod propcheck;
pub mod summary;

pub use config::{BinPreset, ConfigError, ExperimentConfig};
pub use experiment::{run_pendulum, ExperimentOutput, HarnessError, ResultRow, TimingRow};
pub use summary::{summarize_ci, CiSummary};
