//! Fitted Q-iteration over a fixed batch of transitions, with a pluggable
//! regression loss.
//!
//! # Target transform
//!
//! The environment pays -1 on failure and 0 otherwise, so discounted returns
//! live in `[-1, 0]`, while every loss here expects labels in `[0, 1]`. Values
//! are therefore represented in the shifted scale `g = 1 + v`. The Bellman
//! backup `v = r + gamma * v'` becomes, for a non-terminal transition with
//! reward 0,
//!
//! ```text
//! g = 1 + gamma * v' = 1 + gamma * (g' - 1) = (1 - gamma) + gamma * g'
//! ```
//!
//! and a terminal transition has `g = 1 + r = 0`. The map is affine and
//! order-preserving, so greedy policies are unchanged, and the optimal value
//! sits near 1 exactly in the regime where the log-loss is expected to help.
//! Every emitted target is clipped to `[0, 1]` to absorb clamp-boundary drift
//! from the squared-loss model.

use crate::fit::{
    fit_cat, fit_log, fit_sq, Design, FitError, LbfgsParams, LinearQModel, LossKind, NewtonParams,
};
use crate::fourier::{CoefficientSet, FourierBasis, FourierError};
use crate::loss::BinSpec;
use crate::pendulum::{collect_episode, Action, PendulumError, PendulumState, Transition, ACTIONS};
use crate::seeding;
use serde::{Deserialize, Serialize};
use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FqiError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("episode {0} does not end in a terminal transition")]
    EpisodeNotTerminal(usize),
    #[error("transition {index} violates the reward contract (reward {reward}, terminal {terminal})")]
    InvalidReward {
        index: usize,
        reward: f64,
        terminal: bool,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Featurize(#[from] FourierError),
    #[error("solver failed at iteration {iteration}, action {action}: {source}")]
    Solver {
        iteration: usize,
        action: usize,
        source: FitError,
    },
    #[error(transparent)]
    Pendulum(#[from] PendulumError),
}

/// A batch of pendulum transitions grouped into episodes, each of which ends
/// in a terminal transition.
#[derive(Debug, Clone)]
pub struct BatchDataset {
    transitions: Vec<Transition>,
    episode_starts: Vec<usize>,
    seed: Option<u64>,
}

impl BatchDataset {
    /// Collects `n_episodes` episodes under the uniform-random behavior
    /// policy. Episode `i` runs on the seed stream `derive(seed, [i])`.
    pub fn collect(n_episodes: usize, seed: u64) -> Self {
        let mut transitions = Vec::new();
        let mut episode_starts = Vec::with_capacity(n_episodes);
        for episode in 0..n_episodes {
            episode_starts.push(transitions.len());
            transitions.extend(collect_episode(seeding::derive(seed, &[episode as u64])));
        }
        Self {
            transitions,
            episode_starts,
            seed: Some(seed),
        }
    }

    pub fn from_episodes(
        episodes: Vec<Vec<Transition>>,
        seed: Option<u64>,
    ) -> Result<Self, FqiError> {
        let mut transitions = Vec::new();
        let mut episode_starts = Vec::with_capacity(episodes.len());
        for (i, episode) in episodes.into_iter().enumerate() {
            match episode.last() {
                Some(last) if last.terminal => {}
                _ => return Err(FqiError::EpisodeNotTerminal(i)),
            }
            episode_starts.push(transitions.len());
            transitions.extend(episode);
        }
        let dataset = Self {
            transitions,
            episode_starts,
            seed,
        };
        dataset.check_rewards()?;
        Ok(dataset)
    }

    fn check_rewards(&self) -> Result<(), FqiError> {
        for (index, t) in self.transitions.iter().enumerate() {
            let ok = (t.terminal && t.reward == -1.0) || (!t.terminal && t.reward == 0.0);
            if !ok {
                return Err(FqiError::InvalidReward {
                    index,
                    reward: t.reward,
                    terminal: t.terminal,
                });
            }
        }
        Ok(())
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn n_episodes(&self) -> usize {
        self.episode_starts.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), FqiError> {
        crate::pendulum::write_transitions_csv(writer, &self.transitions)?;
        Ok(())
    }

    /// Reads the episode CSV schema; episode boundaries are recovered from the
    /// terminal flags.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self, FqiError> {
        let transitions = crate::pendulum::read_transitions_csv(reader)?;
        let mut episodes: Vec<Vec<Transition>> = Vec::new();
        let mut current = Vec::new();
        for t in transitions {
            let terminal = t.terminal;
            current.push(t);
            if terminal {
                episodes.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            return Err(FqiError::EpisodeNotTerminal(episodes.len()));
        }
        Self::from_episodes(episodes, None)
    }
}

/// Fitted Q-iteration settings.
#[derive(Debug, Clone)]
pub struct FqiConfig {
    pub loss: LossKind,
    pub iterations: usize,
    pub gamma: f64,
    pub feature_order: usize,
    pub coefficient_set: CoefficientSet,
    pub l2: f64,
    /// Required for the categorical loss, ignored otherwise.
    pub bins: Option<BinSpec>,
    /// Start each iteration's regression from the previous iterate instead of
    /// zero.
    pub warm_start: bool,
}

impl FqiConfig {
    /// Defaults: 50 iterations, gamma 0.99, order-2 features, cold start, and
    /// a per-loss ridge strength (1e-6 for squared/log, 1e-4 for cat).
    pub fn new(loss: LossKind) -> Self {
        Self {
            loss,
            iterations: 50,
            gamma: 0.99,
            feature_order: 2,
            coefficient_set: CoefficientSet::FullCrossProduct,
            l2: match loss {
                LossKind::Cat => 1e-4,
                _ => 1e-6,
            },
            bins: None,
            warm_start: false,
        }
    }

    pub fn with_bins(mut self, bins: BinSpec) -> Self {
        self.bins = Some(bins);
        self
    }

    pub fn validate(&self) -> Result<(), FqiError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(FqiError::InvalidConfig(format!(
                "gamma must be in [0, 1), got {}",
                self.gamma
            )));
        }
        if self.iterations == 0 {
            return Err(FqiError::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.loss == LossKind::Cat && self.bins.is_none() {
            return Err(FqiError::InvalidConfig(
                "categorical loss requires a BinSpec".into(),
            ));
        }
        Ok(())
    }
}

/// A transition with its states already mapped through a feature basis.
/// `next_features` is `None` exactly for terminal transitions (the failed
/// state lies outside the feature bounds and is never queried).
#[derive(Debug, Clone)]
pub struct FeaturizedTransition {
    pub features: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_features: Option<Vec<f64>>,
}

/// Regression targets in the transformed scale `g = 1 + v`, one per
/// transition, clipped to `[0, 1]`.
///
/// With `model = None` (or equivalently gamma = 0) the targets are the
/// transformed immediate rewards.
pub fn bellman_targets(
    model: Option<&LinearQModel>,
    samples: &[FeaturizedTransition],
    gamma: f64,
) -> Vec<f64> {
    samples
        .iter()
        .map(|t| {
            let mut g = 1.0 + t.reward;
            if let (Some(model), Some(next)) = (model, t.next_features.as_ref()) {
                let best = (0..model.n_actions())
                    .map(|a| model.predict(next, a))
                    .fold(f64::NEG_INFINITY, f64::max);
                g += gamma * (best - 1.0);
            }
            g.clamp(0.0, 1.0)
        })
        .collect()
}

/// Per-(iteration, action) solver diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostic {
    pub iteration: usize,
    pub action: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub solver_iterations: usize,
}

/// Writes the diagnostics CSV
/// (`iteration,action,objective,grad_norm,solver_iterations`).
pub fn write_diagnostics_csv<W: io::Write>(
    writer: W,
    diagnostics: &[FitDiagnostic],
) -> Result<(), csv::Error> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    for d in diagnostics {
        csv_writer.serialize(d)?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Fitted Q-iteration over already-featurized transitions.
///
/// Starts from the all-zero model, so the first targets already differ across
/// losses (each loss's zero model predicts a different constant). Actions that
/// never occur in the dataset keep their zero block. Per-action fits are
/// independent within an iteration.
pub fn run_fqi_featurized(
    samples: &[FeaturizedTransition],
    n_actions: usize,
    dim: usize,
    config: &FqiConfig,
) -> Result<(LinearQModel, Vec<FitDiagnostic>), FqiError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(FqiError::EmptyDataset);
    }
    let mut model = LinearQModel::zeros(config.loss, dim, n_actions, config.bins.clone());
    let mut diagnostics = Vec::new();

    for iteration in 1..=config.iterations {
        let targets = bellman_targets(Some(&model), samples, config.gamma);
        for action in 0..n_actions {
            let mut rows = Vec::new();
            let mut action_targets = Vec::new();
            for (t, target) in samples.iter().zip(&targets) {
                if t.action == action {
                    rows.push(t.features.clone());
                    action_targets.push(*target);
                }
            }
            if rows.is_empty() {
                continue;
            }
            let design = Design::new(rows, action_targets, config.l2)
                .map_err(|source| FqiError::Solver {
                    iteration,
                    action,
                    source,
                })?;
            let init = config.warm_start.then(|| model.block(action).to_vec());
            let (params, report) = match config.loss {
                LossKind::Squared => fit_sq(&design),
                LossKind::Log => fit_log(&design, init.as_deref(), &NewtonParams::default()),
                LossKind::Cat => {
                    let bins = config.bins.as_ref().expect("validated above");
                    fit_cat(&design, bins, init.as_deref(), &LbfgsParams::default())
                }
            }
            .map_err(|source| FqiError::Solver {
                iteration,
                action,
                source,
            })?;
            diagnostics.push(FitDiagnostic {
                iteration,
                action,
                objective: report.final_objective,
                grad_norm: report.grad_norm,
                solver_iterations: report.iterations,
            });
            model
                .set_block(action, params)
                .map_err(|source| FqiError::Solver {
                    iteration,
                    action,
                    source,
                })?;
        }
    }
    Ok((model, diagnostics))
}

/// Greedy policy over a fitted model and the feature basis it was trained
/// with. Deterministic; ties break toward the lowest action index.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    model: LinearQModel,
    basis: FourierBasis,
}

impl GreedyPolicy {
    pub fn new(model: LinearQModel, basis: FourierBasis) -> Self {
        Self { model, basis }
    }

    pub fn model(&self) -> &LinearQModel {
        &self.model
    }

    pub fn act(&self, state: &PendulumState) -> Action {
        let phi = self
            .basis
            .featurize(state)
            .expect("non-terminal pendulum states lie inside the feature bounds");
        ACTIONS[greedy_action_index(&self.model, &phi)]
    }
}

/// Index of the argmax action; ties break toward the lowest index.
pub fn greedy_action_index(model: &LinearQModel, features: &[f64]) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for action in 0..model.n_actions() {
        let value = model.predict(features, action);
        if value > best_value {
            best = action;
            best_value = value;
        }
    }
    best
}

/// Featurizes a batch dataset and runs fitted Q-iteration on it.
pub fn run_fqi(
    data: &BatchDataset,
    config: &FqiConfig,
) -> Result<(GreedyPolicy, Vec<FitDiagnostic>), FqiError> {
    config.validate()?;
    let basis = FourierBasis::with_coefficients(config.feature_order, config.coefficient_set)?;
    let samples: Vec<FeaturizedTransition> = data
        .transitions()
        .iter()
        .map(|t| -> Result<FeaturizedTransition, FqiError> {
            Ok(FeaturizedTransition {
                features: basis.featurize(&t.state)?,
                action: t.action.index(),
                reward: t.reward,
                next_features: if t.terminal {
                    None
                } else {
                    Some(basis.featurize(&t.next_state)?)
                },
            })
        })
        .collect::<Result<_, _>>()?;
    let (model, diagnostics) =
        run_fqi_featurized(&samples, ACTIONS.len(), basis.dim(), config)?;
    Ok((GreedyPolicy::new(model, basis), diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn featurized(action: usize, reward: f64, terminal: bool) -> FeaturizedTransition {
        FeaturizedTransition {
            features: vec![1.0],
            action,
            reward,
            next_features: (!terminal).then(|| vec![1.0]),
        }
    }

    #[test]
    fn bellman_target_examples() {
        let gamma = 0.99;
        // Terminal transition: g = 1 + (-1) = 0 regardless of the model.
        let mut model = LinearQModel::zeros(LossKind::Squared, 1, 1, None);
        let samples = vec![featurized(0, -1.0, true)];
        assert_eq!(bellman_targets(Some(&model), &samples, gamma), vec![0.0]);

        // Next-state prediction g' = 1 gives target (1 - gamma) + gamma = 1.
        model.set_block(0, vec![2.0]).unwrap(); // clamped to 1
        let samples = vec![featurized(0, 0.0, false)];
        assert_eq!(bellman_targets(Some(&model), &samples, gamma), vec![1.0]);

        // g' = 0 gives target 1 - gamma = 0.01.
        model.set_block(0, vec![-1.0]).unwrap(); // clamped to 0
        let targets = bellman_targets(Some(&model), &samples, gamma);
        assert_relative_eq!(targets[0], 0.01, epsilon = 1e-12);

        // No model: transformed immediate reward.
        assert_eq!(bellman_targets(None, &samples, gamma), vec![1.0]);
    }

    #[test]
    fn targets_always_in_unit_interval() {
        let data = BatchDataset::collect(20, 99);
        for loss in [LossKind::Squared, LossKind::Log] {
            let config = FqiConfig {
                iterations: 5,
                ..FqiConfig::new(loss)
            };
            let basis = FourierBasis::new(2).unwrap();
            let samples: Vec<FeaturizedTransition> = data
                .transitions()
                .iter()
                .map(|t| FeaturizedTransition {
                    features: basis.featurize(&t.state).unwrap(),
                    action: t.action.index(),
                    reward: t.reward,
                    next_features: (!t.terminal).then(|| basis.featurize(&t.next_state).unwrap()),
                })
                .collect();
            let (model, _) = run_fqi_featurized(&samples, 3, basis.dim(), &config).unwrap();
            for targets in [
                bellman_targets(None, &samples, config.gamma),
                bellman_targets(Some(&model), &samples, config.gamma),
            ] {
                for g in targets {
                    assert!((0.0..=1.0).contains(&g));
                }
            }
        }
    }

    #[test]
    fn gamma_zero_fits_mean_transformed_reward() {
        // Intercept-only features: with gamma = 0 the squared-loss action
        // value is the per-action empirical mean of 1 + r.
        let samples = vec![
            featurized(0, 0.0, false),
            featurized(0, -1.0, true),
            featurized(0, 0.0, false),
            featurized(1, -1.0, true),
        ];
        let config = FqiConfig {
            gamma: 0.0,
            iterations: 3,
            l2: 0.0,
            ..FqiConfig::new(LossKind::Squared)
        };
        let (model, _) = run_fqi_featurized(&samples, 2, 1, &config).unwrap();
        assert_relative_eq!(model.predict(&[1.0], 0), 2.0 / 3.0, epsilon = 1e-10);
        assert_relative_eq!(model.predict(&[1.0], 1), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn unseen_action_keeps_prior() {
        let samples = vec![featurized(0, -1.0, true), featurized(1, -1.0, true)];
        let config = FqiConfig {
            iterations: 2,
            ..FqiConfig::new(LossKind::Log)
        };
        let (model, _) = run_fqi_featurized(&samples, 3, 1, &config).unwrap();
        assert_eq!(model.block(2), &[0.0]);
        assert_relative_eq!(model.predict(&[1.0], 2), 0.5);
    }

    #[test]
    fn greedy_tie_breaks_to_lowest_index() {
        let model = LinearQModel::zeros(LossKind::Log, 2, 3, None);
        // All actions predict 0.5.
        assert_eq!(greedy_action_index(&model, &[1.0, 0.0]), 0);
    }

    #[test]
    fn greedy_picks_dominant_action() {
        let mut model = LinearQModel::zeros(LossKind::Log, 1, 3, None);
        model.set_block(1, vec![3.0]).unwrap();
        assert_eq!(greedy_action_index(&model, &[1.0]), 1);
    }

    #[test]
    fn greedy_invariant_under_shared_offset() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        // Log-loss scores are monotone in the linear score, so adding the same
        // state-only offset to every action's block leaves the argmax alone.
        for _ in 0..50 {
            let d = 3;
            let mut base = LinearQModel::zeros(LossKind::Log, d, 3, None);
            let mut shifted = LinearQModel::zeros(LossKind::Log, d, 3, None);
            let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            for a in 0..3 {
                let block: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let with_offset: Vec<f64> =
                    block.iter().zip(&offset).map(|(b, o)| b + o).collect();
                base.set_block(a, block).unwrap();
                shifted.set_block(a, with_offset).unwrap();
            }
            let phi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert_eq!(
                greedy_action_index(&base, &phi),
                greedy_action_index(&shifted, &phi)
            );
        }
    }

    #[test]
    fn fqi_is_deterministic() {
        let data = BatchDataset::collect(15, 7);
        let config = FqiConfig {
            iterations: 5,
            ..FqiConfig::new(LossKind::Log)
        };
        let (a, _) = run_fqi(&data, &config).unwrap();
        let (b, _) = run_fqi(&data, &config).unwrap();
        for action in 0..3 {
            assert_eq!(a.model().block(action), b.model().block(action));
        }
    }

    #[test]
    fn config_validation() {
        let mut config = FqiConfig::new(LossKind::Cat);
        assert!(config.validate().is_err()); // missing bins
        config.bins = Some(BinSpec::new(vec![0.5]).unwrap());
        assert!(config.validate().is_ok());
        config.gamma = 1.0;
        assert!(config.validate().is_err());
        config.gamma = 0.99;
        config.iterations = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn dataset_csv_round_trip() {
        let data = BatchDataset::collect(8, 3);
        let mut buffer = Vec::new();
        data.write_csv(&mut buffer).unwrap();
        let back = BatchDataset::read_csv(buffer.as_slice()).unwrap();
        assert_eq!(back.n_episodes(), 8);
        assert_eq!(back.transitions().len(), data.transitions().len());
        for (a, b) in data.transitions().iter().zip(back.transitions()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dataset_rejects_untermin_episode() {
        let episode = vec![Transition {
            state: PendulumState::new(0.0, 0.0),
            action: Action::Left,
            reward: 0.0,
            next_state: PendulumState::new(0.0, -0.88),
            terminal: false,
        }];
        assert!(matches!(
            BatchDataset::from_episodes(vec![episode], None),
            Err(FqiError::EpisodeNotTerminal(0))
        ));
    }
}
