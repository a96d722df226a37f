//! Value-based batch reinforcement learning under three regression losses:
//! squared, binary log-loss, and a reparameterized categorical cross-entropy.
//!
//! The crate is organized around the experiment pipeline:
//!
//! - [`loss`]: the losses, their exponential-family machinery, and the error
//!   metrics (VE_1 / VE_2, triangular deviation, Hellinger).
//! - [`fit`]: empirical-risk solvers over linear-in-features models (closed
//!   form for squared loss, Newton for the logistic GLM, L-BFGS for the
//!   categorical loss).
//! - [`pendulum`]: the inverted-pendulum benchmark with termination below
//!   horizontal and angular-velocity clipping.
//! - [`fourier`]: Fourier basis features over the normalized pendulum state.
//! - [`fqi`]: fitted Q-iteration with a pluggable loss and greedy policies.
//! - [`counterexamples`]: two-context constructions demonstrating the
//!   MAE-vs-rMSE rate separation of the squared- and log-loss ERMs.

pub mod counterexamples;
pub mod fit;
pub mod fourier;
pub mod fqi;
pub mod loss;
pub mod pendulum;
pub mod seeding;
