//! Fourier basis features over the normalized pendulum state.
//!
//! Each state coordinate is mapped affinely onto `[0, 1]` (angle from
//! `[-pi/2, pi/2]`, velocity from `[-5, 5]`; the termination rule and the
//! velocity clip guarantee those ranges), and the feature for coefficient
//! vector `c` is `cos(pi * c . s)`. The full basis enumerates all coefficient
//! vectors in `{0, ..., order}^2` in lexicographic order, so the first feature
//! (`c = (0, 0)`) is constantly 1 and the feature count is `(order + 1)^2`.

use crate::pendulum::{PendulumState, VELOCITY_LIMIT};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FourierError {
    #[error("order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("state ({angle}, {velocity}) outside the normalization bounds")]
    StateOutOfBounds { angle: f64, velocity: f64 },
}

/// Coefficient layout of the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientSet {
    /// All of `{0..order}^2`: `(order + 1)^2` features.
    #[default]
    FullCrossProduct,
    /// Only axis-aligned coefficients (at most one nonzero entry):
    /// `2 * order + 1` features.
    AxisAligned,
}

#[derive(Debug, Clone)]
pub struct FourierBasis {
    order: usize,
    coefficients: Vec<[f64; 2]>,
}

impl FourierBasis {
    pub fn new(order: usize) -> Result<Self, FourierError> {
        Self::with_coefficients(order, CoefficientSet::FullCrossProduct)
    }

    pub fn with_coefficients(order: usize, set: CoefficientSet) -> Result<Self, FourierError> {
        if order == 0 {
            return Err(FourierError::InvalidOrder(order));
        }
        let mut coefficients = Vec::new();
        for c1 in 0..=order {
            for c2 in 0..=order {
                let keep = match set {
                    CoefficientSet::FullCrossProduct => true,
                    CoefficientSet::AxisAligned => c1 == 0 || c2 == 0,
                };
                if keep {
                    coefficients.push([c1 as f64, c2 as f64]);
                }
            }
        }
        Ok(Self {
            order,
            coefficients,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of features.
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[[f64; 2]] {
        &self.coefficients
    }

    /// Feature vector `cos(pi * c . s)` over the normalized state. All
    /// entries lie in `[-1, 1]`; the first is exactly 1.
    pub fn featurize(&self, state: &PendulumState) -> Result<Vec<f64>, FourierError> {
        let angle_norm = (state.angle + FRAC_PI_2) / PI;
        let velocity_norm = (state.angular_velocity + VELOCITY_LIMIT) / (2.0 * VELOCITY_LIMIT);
        if !(0.0..=1.0).contains(&angle_norm) || !(0.0..=1.0).contains(&velocity_norm) {
            return Err(FourierError::StateOutOfBounds {
                angle: state.angle,
                velocity: state.angular_velocity,
            });
        }
        Ok(self
            .coefficients
            .iter()
            .map(|c| (PI * (c[0] * angle_norm + c[1] * velocity_norm)).cos())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn feature_counts() {
        assert_eq!(FourierBasis::new(2).unwrap().dim(), 9);
        assert_eq!(FourierBasis::new(3).unwrap().dim(), 16);
        assert_eq!(
            FourierBasis::with_coefficients(2, CoefficientSet::AxisAligned)
                .unwrap()
                .dim(),
            5
        );
        assert!(FourierBasis::new(0).is_err());
    }

    #[test]
    fn all_ones_at_lower_corner() {
        let basis = FourierBasis::new(2).unwrap();
        let phi = basis
            .featurize(&PendulumState::new(-FRAC_PI_2, -VELOCITY_LIMIT))
            .unwrap();
        for f in phi {
            assert_relative_eq!(f, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_feature_and_bounds() {
        let basis = FourierBasis::new(3).unwrap();
        for angle in [-1.5, -0.3, 0.0, 0.7, 1.5] {
            for velocity in [-5.0, -1.0, 0.0, 2.5, 5.0] {
                let phi = basis
                    .featurize(&PendulumState::new(angle, velocity))
                    .unwrap();
                assert_eq!(phi[0], 1.0);
                for f in &phi {
                    assert!(f.abs() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn coefficients_are_lexicographic() {
        let basis = FourierBasis::new(2).unwrap();
        let expected: Vec<[f64; 2]> = vec![
            [0.0, 0.0],
            [0.0, 1.0],
            [0.0, 2.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [2.0, 2.0],
        ];
        assert_eq!(basis.coefficients(), expected.as_slice());
    }

    #[test]
    fn out_of_bounds_state_errors() {
        let basis = FourierBasis::new(2).unwrap();
        assert!(matches!(
            basis.featurize(&PendulumState::new(2.0, 0.0)),
            Err(FourierError::StateOutOfBounds { .. })
        ));
        assert!(matches!(
            basis.featurize(&PendulumState::new(0.0, 5.5)),
            Err(FourierError::StateOutOfBounds { .. })
        ));
    }

    #[test]
    fn featurize_is_deterministic() {
        let basis = FourierBasis::new(2).unwrap();
        let s = PendulumState::new(0.25, -1.75);
        assert_eq!(basis.featurize(&s).unwrap(), basis.featurize(&s).unwrap());
    }
}
