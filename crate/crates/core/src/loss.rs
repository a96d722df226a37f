//! Regression losses over `[0, 1]` targets and the error metrics built on them.
//!
//! Three losses share the same prediction domain: the squared loss, the binary
//! log-loss (cross-entropy for a Bernoulli model), and a reparameterized
//! categorical cross-entropy (`loss_cat`) whose sufficient statistic embeds the
//! raw target so that its population minimizer still recovers the mean. The
//! module also provides the diagnostic error metrics (`ve_errors`, triangular
//! deviation, squared Hellinger distance) used by the counterexample and
//! rate-sweep experiments.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("bin boundaries must be strictly increasing inside (0, 1); got {0:?}")]
    InvalidBoundaries(Vec<f64>),
    #[error("context weights must be nonnegative; weight[{index}] = {value}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("context weights must sum to 1; got {0}")]
    UnnormalizedWeights(f64),
}

/// A real number in `[0, 1]`: a prediction or a label for any of the losses.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self, LossError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(LossError::ProbabilityOutOfRange(value))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Self(0.0)
        } else {
            Self(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Squared loss `(x - y)^2`.
#[inline]
pub fn loss_sq(x: Probability, y: Probability) -> f64 {
    let d = x.get() - y.get();
    d * d
}

/// Binary log-loss `y log(1/x) + (1-y) log(1/(1-x))`.
///
/// Uses the convention `0 * log(inf) = 0`: a term whose coefficient is zero is
/// dropped even when its logarithm diverges. Returns `+inf` when `y > 0, x = 0`
/// or `y < 1, x = 1`; infinity is a legal value (empirical-risk comparisons
/// over finite classes must handle it).
pub fn loss_log(x: Probability, y: Probability) -> f64 {
    let (x, y) = (x.get(), y.get());
    let mut total = 0.0;
    if y > 0.0 {
        total += y * -x.ln();
    }
    if y < 1.0 {
        total += (1.0 - y) * -(1.0 - x).ln();
    }
    total
}

/// Binary Kullback-Leibler divergence `kl(p, q)` with `0 log 0 = 0`.
///
/// Infinite when `q` sits on the boundary and `p` disagrees with it.
pub fn binary_kl(p: Probability, q: Probability) -> f64 {
    let (p, q) = (p.get(), q.get());
    let mut total = 0.0;
    if p > 0.0 {
        total += p * (p / q).ln();
    }
    if p < 1.0 {
        total += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    total
}

/// Pointwise triangular deviation `(p - q)^2 / (p + q)`, with `0/0 := 0` by
/// continuous extension along `p = q`.
pub fn triangular_deviation(p: Probability, q: Probability) -> f64 {
    let (p, q) = (p.get(), q.get());
    let num = (p - q) * (p - q);
    if num == 0.0 {
        0.0
    } else {
        num / (p + q)
    }
}

/// Squared binary Hellinger distance
/// `h^2(p, q) = (sqrt(p) - sqrt(q))^2 / 2 + (sqrt(1-p) - sqrt(1-q))^2 / 2`.
pub fn hellinger(p: Probability, q: Probability) -> f64 {
    let (p, q) = (p.get(), q.get());
    let a = p.sqrt() - q.sqrt();
    let b = (1.0 - p).sqrt() - (1.0 - q).sqrt();
    0.5 * a * a + 0.5 * b * b
}

/// Prediction-error report over a weighted context distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// Mean absolute error (VE_1).
    pub ve1: f64,
    /// Mean squared error (VE_2).
    pub ve2: f64,
    /// Root mean squared error, `sqrt(ve2)`.
    pub rmse: f64,
}

/// Exact weighted VE_1 / VE_2 / rMSE of `f` against `fstar` over a finite
/// context distribution. Weights must be nonnegative and sum to 1.
pub fn ve_errors<C>(
    f: impl Fn(&C) -> f64,
    fstar: impl Fn(&C) -> f64,
    contexts: &[(C, f64)],
) -> Result<ErrorReport, LossError> {
    let mut sum = 0.0;
    for (index, (_, w)) in contexts.iter().enumerate() {
        if *w < 0.0 {
            return Err(LossError::NegativeWeight { index, value: *w });
        }
        sum += w;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(LossError::UnnormalizedWeights(sum));
    }
    let mut ve1 = 0.0;
    let mut ve2 = 0.0;
    for (c, w) in contexts {
        let gap = (f(c) - fstar(c)).abs();
        ve1 += w * gap;
        ve2 += w * gap * gap;
    }
    Ok(ErrorReport {
        ve1,
        ve2,
        rmse: ve2.sqrt(),
    })
}

/// Bin boundaries `0 < v_1 < ... < v_{K-1} < 1` defining the K categories of
/// the categorical loss. An empty boundary list is allowed and gives `K = 1`,
/// for which the categorical loss reduces to the binary log-loss.
///
/// Bin membership uses closed-right intervals: `[0, v_1], (v_1, v_2], ...,
/// (v_{K-1}, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSpec {
    boundaries: Vec<f64>,
}

impl BinSpec {
    pub fn new(boundaries: Vec<f64>) -> Result<Self, LossError> {
        let ok = boundaries.iter().all(|b| b.is_finite() && *b > 0.0 && *b < 1.0)
            && boundaries.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self { boundaries })
        } else {
            Err(LossError::InvalidBoundaries(boundaries))
        }
    }

    /// Number of categories `K` (boundary count + 1).
    #[inline]
    pub fn k(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Index of the bin containing `y`: the number of boundaries strictly
    /// below `y`.
    #[inline]
    pub fn bin_index(&self, y: Probability) -> usize {
        let y = y.get();
        self.boundaries.partition_point(|b| *b < y)
    }

    /// Sufficient statistic `y * T(y)`: a length-K vector whose only nonzero
    /// entry is `y` in the slot of the bin containing `y`.
    pub fn sufficient_stat(&self, y: Probability) -> Vec<f64> {
        let mut t = vec![0.0; self.k()];
        t[self.bin_index(y)] = y.get();
        t
    }

    /// Weight of natural parameter `j` inside the partition sum:
    /// `v_{j+1}` for the first `K - 1` slots, 1 for the last.
    #[inline]
    fn stat_scale(&self, j: usize) -> f64 {
        if j + 1 < self.k() {
            self.boundaries[j]
        } else {
            1.0
        }
    }

    /// Log-partition function
    /// `A(theta) = log(1 + sum_{i<K} exp(v_i theta_i) + exp(theta_K))`.
    ///
    /// The leading 1 is a reference category with zero natural parameter.
    /// Computed as a max-shifted log-sum-exp so that extreme `theta` neither
    /// overflows nor flushes to zero.
    pub fn log_partition(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.k(), "theta length must equal K");
        // Logits of the K + 1 partition terms; the reference term has logit 0.
        let logit = |i: usize| {
            if i == 0 {
                0.0
            } else {
                self.stat_scale(i - 1) * theta[i - 1]
            }
        };
        let mut argmax = 0;
        for i in 1..=theta.len() {
            if logit(i) > logit(argmax) {
                argmax = i;
            }
        }
        let max = logit(argmax);
        // The argmax term contributes exp(0) = 1 after the shift; summing the
        // remaining terms separately and using ln_1p keeps tiny tails (e.g.
        // A = log(1 + e^-40)) from flushing to zero.
        let mut others = 0.0;
        for i in 0..=theta.len() {
            if i != argmax {
                others += (logit(i) - max).exp();
            }
        }
        max + others.ln_1p()
    }

    /// Gradient of the log-partition function. Entry `j` is
    /// `v_j exp(v_j theta_j) / Z` for `j < K` and `exp(theta_K) / Z` for the
    /// last slot, `Z` the partition sum.
    pub fn log_partition_grad(&self, theta: &[f64]) -> Vec<f64> {
        self.scaled_softmax(theta)
            .into_iter()
            .enumerate()
            .map(|(j, p)| self.stat_scale(j) * p)
            .collect()
    }

    /// Hessian of the log-partition function:
    /// `H = C (diag(p) - p p^T) C` with `C = diag(scales)`. Positive
    /// semidefinite for every `theta`.
    pub fn log_partition_hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let k = self.k();
        let p = self.scaled_softmax(theta);
        let mut h = DMatrix::zeros(k, k);
        for j in 0..k {
            let cj = self.stat_scale(j);
            for l in 0..k {
                let cl = self.stat_scale(l);
                let delta = if j == l { p[j] } else { 0.0 };
                h[(j, l)] = cj * cl * (delta - p[j] * p[l]);
            }
        }
        h
    }

    /// Categorical cross-entropy loss
    /// `loss_cat(theta, y) = A(theta) - (y T(y))^T theta`.
    ///
    /// Convex in `theta`; for `K = 1` it equals
    /// `loss_log(sigmoid(theta_1), y)`.
    pub fn loss_cat(&self, theta: &[f64], y: Probability) -> f64 {
        self.log_partition(theta) - y.get() * theta[self.bin_index(y)]
    }

    /// Gradient of `loss_cat` in `theta`: `grad A(theta) - y T(y)`.
    pub fn loss_cat_grad(&self, theta: &[f64], y: Probability) -> Vec<f64> {
        let mut g = self.log_partition_grad(theta);
        g[self.bin_index(y)] -= y.get();
        g
    }

    /// Mean recovered from the natural parameters: `(grad A(theta))^T 1`.
    ///
    /// The raw sum lies in `[0, 1]` up to floating-point noise (each term is a
    /// sub-probability scaled by a value at most 1); the result is clamped so
    /// downstream regression targets stay in domain.
    pub fn predicted_mean(&self, theta: &[f64]) -> Probability {
        let sum: f64 = self.log_partition_grad(theta).iter().sum();
        Probability::clamped(sum)
    }

    /// Probabilities `exp(v_j theta_j) / Z` of the K non-reference partition
    /// terms (they sum to less than 1; the remainder is the reference term).
    fn scaled_softmax(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.k(), "theta length must equal K");
        let mut max = 0.0f64;
        for (j, t) in theta.iter().enumerate() {
            max = max.max(self.stat_scale(j) * t);
        }
        let mut z = (-max).exp();
        let exps: Vec<f64> = theta
            .iter()
            .enumerate()
            .map(|(j, t)| (self.stat_scale(j) * t - max).exp())
            .collect();
        z += exps.iter().sum::<f64>();
        exps.into_iter().map(|e| e / z).collect()
    }
}

/// Logistic function `1 / (1 + exp(-z))`, evaluated without overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow; equals `loss_log(sigmoid(z), 0)`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// The composite `loss_log(sigmoid(z), y)`, evaluated in logit space as
/// `softplus(z) - y z`.
///
/// This is the accurate route for the composite: a probability rounded to
/// f64 near 1 loses the tail that the complement term `log(1/(1-x))` needs,
/// so `loss_log(sigmoid(z), y)` computed through the probability drifts once
/// `z` exceeds about 10, while this form is exact over the whole range.
#[inline]
pub fn loss_log_logit(z: f64, y: Probability) -> f64 {
    softplus(z) - y.get() * z
}
