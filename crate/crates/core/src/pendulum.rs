//! Inverted pendulum on a cart, with termination below horizontal and
//! angular-velocity clipping.
//!
//! Dynamics follow the classical cart-pole balancing benchmark: a 2 kg
//! pendulum of length 0.5 m on an 8 kg cart, forces of +/-50 N (or none) with
//! additive Uniform[-10, 10] N noise, Euler integration at dt = 0.1 s. The
//! angular acceleration is
//!
//! ```text
//! accel = (g sin(a) - alpha m l w^2 sin(2a)/2 - alpha cos(a) u)
//!         / (4l/3 - alpha m l cos^2(a))
//! ```
//!
//! with `alpha = 1/(m + M)`. Two departures from the classical setup: the
//! episode terminates once the pendulum falls below horizontal
//! (`|angle| > pi/2`), with reward -1 on that transition and 0 otherwise; and
//! the angular velocity is clipped to `[-5, 5]` after every step so that the
//! state stays inside a fixed box. Integration is semi-implicit Euler by
//! default (see [`IntegrationOrder`]).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::io;
use thiserror::Error;

pub const GRAVITY: f64 = 9.8;
pub const PENDULUM_MASS: f64 = 2.0;
pub const CART_MASS: f64 = 8.0;
pub const LENGTH: f64 = 0.5;
pub const FORCE_MAGNITUDE: f64 = 50.0;
pub const NOISE_MAGNITUDE: f64 = 10.0;
pub const TIME_STEP: f64 = 0.1;
pub const VELOCITY_LIMIT: f64 = 5.0;
/// Initial angle and velocity are drawn uniformly from this box.
pub const INIT_RANGE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum PendulumError {
    #[error("cannot step a terminal state (angle {0})")]
    SteppedTerminalState(f64),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid action index {0} (must be 0, 1, or 2)")]
    InvalidAction(u8),
}

/// Pendulum state: angle in radians (0 = upright) and angular velocity in
/// radians per second. Terminal once `|angle| > pi/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub angle: f64,
    pub angular_velocity: f64,
}

impl PendulumState {
    pub fn new(angle: f64, angular_velocity: f64) -> Self {
        Self {
            angle,
            angular_velocity,
        }
    }

    #[inline]
    pub fn is_terminal(&self) -> bool {
        self.angle.abs() > FRAC_PI_2
    }
}

/// The three forces available to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Left = 0,
    Right = 1,
    DoNothing = 2,
}

pub const ACTIONS: [Action; 3] = [Action::Left, Action::Right, Action::DoNothing];

impl Action {
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: u8) -> Result<Self, PendulumError> {
        match index {
            0 => Ok(Action::Left),
            1 => Ok(Action::Right),
            2 => Ok(Action::DoNothing),
            other => Err(PendulumError::InvalidAction(other)),
        }
    }

    /// Applied force in newtons.
    #[inline]
    pub fn force(self) -> f64 {
        match self {
            Action::Left => -FORCE_MAGNITUDE,
            Action::Right => FORCE_MAGNITUDE,
            Action::DoNothing => 0.0,
        }
    }
}

/// One environment sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: PendulumState,
    pub action: Action,
    /// -1 on the failing transition, 0 otherwise.
    pub reward: f64,
    pub next_state: PendulumState,
    pub terminal: bool,
}

/// Which velocity enters the angle update. The default is semi-implicit
/// Euler (velocity first, then angle with the fresh clipped velocity), under
/// which uncontrolled episodes last about 8 steps; the explicit-Euler
/// alternative advances the angle with the stale velocity and stretches them
/// past 10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegrationOrder {
    /// Angle advances with the pre-update velocity (explicit Euler).
    PreUpdateVelocity,
    /// Angle advances with the freshly clipped velocity.
    #[default]
    PostUpdateVelocity,
}

#[inline]
fn angular_acceleration(state: &PendulumState, force: f64) -> f64 {
    let alpha = 1.0 / (PENDULUM_MASS + CART_MASS);
    let (sin, cos) = state.angle.sin_cos();
    let w = state.angular_velocity;
    let numerator = GRAVITY * sin
        - alpha * PENDULUM_MASS * LENGTH * w * w * (2.0 * state.angle).sin() / 2.0
        - alpha * cos * force;
    let denominator = 4.0 * LENGTH / 3.0 - alpha * PENDULUM_MASS * LENGTH * cos * cos;
    numerator / denominator
}

/// Advances one step with an explicit noise force (drawn externally from
/// Uniform[-10, 10]). Pure: the same (state, action, noise) always yields the
/// same transition. Stepping a terminal state is a contract violation.
pub fn step_with_order(
    state: PendulumState,
    action: Action,
    noise: f64,
    order: IntegrationOrder,
) -> Result<Transition, PendulumError> {
    if state.is_terminal() {
        return Err(PendulumError::SteppedTerminalState(state.angle));
    }
    let accel = angular_acceleration(&state, action.force() + noise);
    let new_velocity = (state.angular_velocity + TIME_STEP * accel)
        .clamp(-VELOCITY_LIMIT, VELOCITY_LIMIT);
    let advance_velocity = match order {
        IntegrationOrder::PreUpdateVelocity => state.angular_velocity,
        IntegrationOrder::PostUpdateVelocity => new_velocity,
    };
    let next_state = PendulumState::new(state.angle + TIME_STEP * advance_velocity, new_velocity);
    let terminal = next_state.is_terminal();
    Ok(Transition {
        state,
        action,
        reward: if terminal { -1.0 } else { 0.0 },
        next_state,
        terminal,
    })
}

pub fn step(state: PendulumState, action: Action, noise: f64) -> Result<Transition, PendulumError> {
    step_with_order(state, action, noise, IntegrationOrder::default())
}

fn initial_state(rng: &mut ChaCha8Rng) -> PendulumState {
    PendulumState::new(
        rng.random_range(-INIT_RANGE..=INIT_RANGE),
        rng.random_range(-INIT_RANGE..=INIT_RANGE),
    )
}

#[inline]
fn draw_noise(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-NOISE_MAGNITUDE..=NOISE_MAGNITUDE)
}

/// Runs the uniform-random behavior policy from a fresh initial state until
/// failure and returns every transition. The last transition is terminal.
pub fn collect_episode(seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial_state(&mut rng);
    let mut episode = Vec::new();
    loop {
        let action = ACTIONS[rng.random_range(0..ACTIONS.len())];
        let noise = draw_noise(&mut rng);
        let transition =
            step(state, action, noise).expect("collect_episode never steps a terminal state");
        let terminal = transition.terminal;
        state = transition.next_state;
        episode.push(transition);
        if terminal {
            return episode;
        }
    }
}

/// Fraction of seeded rollouts that fall before reaching `horizon` steps.
pub fn evaluate_policy(
    policy: impl Fn(&PendulumState) -> Action,
    horizon: usize,
    n_rollouts: usize,
    seed: u64,
) -> f64 {
    let mut failures = 0usize;
    for rollout in 0..n_rollouts {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seeding::derive(seed, &[rollout as u64]));
        let mut state = initial_state(&mut rng);
        for _ in 0..horizon {
            let noise = draw_noise(&mut rng);
            let transition = step(state, policy(&state), noise)
                .expect("evaluation never steps a terminal state");
            if transition.terminal {
                failures += 1;
                break;
            }
            state = transition.next_state;
        }
    }
    failures as f64 / n_rollouts as f64
}

#[derive(Debug, Serialize, Deserialize)]
struct TransitionRow {
    angle: f64,
    velocity: f64,
    action: u8,
    reward: f64,
    next_angle: f64,
    next_velocity: f64,
    terminal: bool,
}

/// Writes transitions in the episode CSV schema
/// (`angle,velocity,action,reward,next_angle,next_velocity,terminal`).
pub fn write_transitions_csv<W: io::Write>(
    writer: W,
    transitions: &[Transition],
) -> Result<(), PendulumError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    for t in transitions {
        csv_writer.serialize(TransitionRow {
            angle: t.state.angle,
            velocity: t.state.angular_velocity,
            action: t.action.index() as u8,
            reward: t.reward,
            next_angle: t.next_state.angle,
            next_velocity: t.next_state.angular_velocity,
            terminal: t.terminal,
        })?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Reads transitions written by [`write_transitions_csv`].
pub fn read_transitions_csv<R: io::Read>(reader: R) -> Result<Vec<Transition>, PendulumError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut transitions = Vec::new();
    for row in csv_reader.deserialize() {
        let row: TransitionRow = row?;
        transitions.push(Transition {
            state: PendulumState::new(row.angle, row.velocity),
            action: Action::from_index(row.action)?,
            reward: row.reward,
            next_state: PendulumState::new(row.next_angle, row.next_velocity),
            terminal: row.terminal,
        });
    }
    Ok(transitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn upright_equilibrium_is_fixed_point() {
        let state = PendulumState::new(0.0, 0.0);
        let t = step(state, Action::DoNothing, 0.0).unwrap();
        assert_eq!(t.next_state, state);
        assert_eq!(t.reward, 0.0);
        assert!(!t.terminal);
    }

    #[test]
    fn rightward_force_from_upright() {
        // accel = (-alpha * 50) / (4l/3 - alpha m l) = -5 / 0.566667
        let accel = angular_acceleration(&PendulumState::new(0.0, 0.0), 50.0);
        assert_relative_eq!(accel, -8.82353, epsilon = 1e-5);
        let t = step(PendulumState::new(0.0, 0.0), Action::Right, 0.0).unwrap();
        assert_relative_eq!(t.next_state.angular_velocity, -0.882353, epsilon = 1e-6);
        // Under explicit Euler the angle advances with the pre-update
        // velocity, which was zero.
        let t = step_with_order(
            PendulumState::new(0.0, 0.0),
            Action::Right,
            0.0,
            IntegrationOrder::PreUpdateVelocity,
        )
        .unwrap();
        assert_eq!(t.next_state.angle, 0.0);
        assert_relative_eq!(t.next_state.angular_velocity, -0.882353, epsilon = 1e-6);
    }

    #[test]
    fn below_horizontal_terminates() {
        let t = step(PendulumState::new(1.5, 5.0), Action::DoNothing, 0.0).unwrap();
        assert!(t.terminal);
        assert_eq!(t.reward, -1.0);
        assert!(PendulumState::new(1.6, 0.0).is_terminal());
        // Ties at exactly pi/2 are non-terminal.
        assert!(!PendulumState::new(FRAC_PI_2, 0.0).is_terminal());
    }

    #[test]
    fn stepping_terminal_state_is_an_error() {
        let terminal = PendulumState::new(1.6, 0.0);
        assert!(matches!(
            step(terminal, Action::Left, 0.0),
            Err(PendulumError::SteppedTerminalState(_))
        ));
    }

    #[test]
    fn velocity_clip_holds() {
        let mut state = PendulumState::new(0.3, 4.9);
        for _ in 0..20 {
            if state.is_terminal() {
                break;
            }
            let t = step(state, Action::Left, 10.0).unwrap();
            assert!(t.next_state.angular_velocity.abs() <= VELOCITY_LIMIT);
            state = t.next_state;
        }
    }

    #[test]
    fn integration_order_flag() {
        let state = PendulumState::new(0.1, 1.0);
        let pre = step_with_order(state, Action::Left, 0.0, IntegrationOrder::PreUpdateVelocity)
            .unwrap();
        let post = step_with_order(state, Action::Left, 0.0, IntegrationOrder::PostUpdateVelocity)
            .unwrap();
        assert_relative_eq!(pre.next_state.angle, 0.1 + 0.1 * 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            post.next_state.angle,
            0.1 + 0.1 * post.next_state.angular_velocity,
            epsilon = 1e-15
        );
        // Velocity update is shared.
        assert_eq!(
            pre.next_state.angular_velocity,
            post.next_state.angular_velocity
        );
    }

    #[test]
    fn episodes_replay_identically() {
        let a = collect_episode(42);
        let b = collect_episode(42);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
        let c = collect_episode(43);
        assert!(a != c);
    }

    #[test]
    fn every_episode_ends_terminal_with_failure_reward() {
        for seed in 0..200 {
            let episode = collect_episode(seed);
            let last = episode.last().unwrap();
            assert!(last.terminal);
            assert_eq!(last.reward, -1.0);
            for t in &episode[..episode.len() - 1] {
                assert!(!t.terminal);
                assert_eq!(t.reward, 0.0);
            }
        }
    }

    #[test]
    fn random_episode_length_is_short() {
        let total: usize = (0..10_000).map(|seed| collect_episode(seed).len()).sum();
        let mean = total as f64 / 10_000.0;
        assert!(
            (4.0..=10.0).contains(&mean),
            "mean random-policy episode length {mean}"
        );
    }

    #[test]
    fn uncontrolled_pendulum_always_fails() {
        let rate = evaluate_policy(|_| Action::DoNothing, 3000, 100, 7);
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn one_step_horizon_never_fails_from_upright() {
        // |initial angle| <= 0.05 and |velocity| <= 5 give |angle after one
        // step| <= 0.05 + 0.1 * 5 < pi/2.
        let rate = evaluate_policy(|_| Action::Right, 1, 200, 11);
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let a = evaluate_policy(|_| Action::Left, 50, 64, 123);
        let b = evaluate_policy(|_| Action::Left, 50, 64, 123);
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip() {
        let episode = collect_episode(5);
        let mut buffer = Vec::new();
        write_transitions_csv(&mut buffer, &episode).unwrap();
        let text = String::from_utf8(buffer.clone()).unwrap();
        assert!(text.starts_with(
            "angle,velocity,action,reward,next_angle,next_velocity,terminal"
        ));
        let back = read_transitions_csv(buffer.as_slice()).unwrap();
        assert_eq!(episode.len(), back.len());
        for (a, b) in episode.iter().zip(&back) {
            assert_eq!(a, b);
        }
    }
}
