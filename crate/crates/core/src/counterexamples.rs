//! Two-context constructions where the squared-loss ERM suffers a
//! `1/sqrt(n)` mean absolute error while the log-loss ERM's MAE decays at
//! `1/n` (with its rMSE still stuck at `1/(2 sqrt(n))`), plus the Monte Carlo
//! experiments that verify the constant-probability bad events and the rate
//! separation.
//!
//! The instance: contexts `x` (probability `1 - 1/n`) and `x'` (probability
//! `1/n`); labels are deterministic `1 - 1/(2n)` at `x` and Bernoulli(1/2) at
//! `x'`. Both two-function classes contain the regression function `f*`
//! (realizability). The competing function is
//!
//! - squared variant: `psi(x) = 1 - 1/(2n) - 1/(3 sqrt(n))`, `psi(x') = 0`;
//! - log variant: `phi(x) = f*(x)`, `phi(x') = 0`.
//!
//! When the dataset contains exactly one `x'` observation and its label is 0
//! (an event of probability at least `1/(2e)` for every `n`), the squared-loss
//! ERM deterministically returns `psi` and the log-loss ERM returns `phi`.

use crate::loss::{loss_log, loss_sq, ve_errors, ErrorReport, Probability};
use crate::seeding;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CounterexampleError {
    #[error("sample size n must be >= 1")]
    InvalidSampleSize,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// The two contexts of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Context {
    /// `x`, probability `1 - 1/n`.
    Common,
    /// `x'`, probability `1/n`.
    Rare,
}

/// Which two-function class the instance carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `{f*, psi}`, paired with the squared loss.
    Squared,
    /// `{f*, phi}`, paired with the log-loss.
    Log,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Squared => "sq",
            Variant::Log => "log",
        }
    }
}

/// The candidate the empirical risk minimizer picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chosen {
    Fstar,
    /// `psi` (squared variant) or `phi` (log variant).
    Alternative,
}

#[derive(Debug, Clone, Copy)]
pub struct TwoPointInstance {
    n: usize,
    variant: Variant,
}

impl TwoPointInstance {
    pub fn new(n: usize, variant: Variant) -> Result<Self, CounterexampleError> {
        if n == 0 {
            return Err(CounterexampleError::InvalidSampleSize);
        }
        Ok(Self { n, variant })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// The regression function: `1 - 1/(2n)` at `x`, `1/2` at `x'`.
    pub fn fstar(&self, context: Context) -> f64 {
        match context {
            Context::Common => 1.0 - 1.0 / (2.0 * self.n as f64),
            Context::Rare => 0.5,
        }
    }

    /// The competing function of the class (`psi` or `phi`).
    pub fn alternative(&self, context: Context) -> f64 {
        let n = self.n as f64;
        match (self.variant, context) {
            (Variant::Squared, Context::Common) => 1.0 - 1.0 / (2.0 * n) - 1.0 / (3.0 * n.sqrt()),
            (Variant::Log, Context::Common) => self.fstar(Context::Common),
            (_, Context::Rare) => 0.0,
        }
    }

    /// Context distribution as (context, weight) pairs.
    pub fn context_weights(&self) -> [(Context, f64); 2] {
        let p_rare = 1.0 / self.n as f64;
        [(Context::Common, 1.0 - p_rare), (Context::Rare, p_rare)]
    }

    /// `1 - integral of f* dP_X`; equals `1/n - 1/(2n^2)`, strictly below
    /// `1/n`.
    pub fn suboptimality(&self) -> f64 {
        let [(_, w_common), (_, w_rare)] = self.context_weights();
        1.0 - (w_common * self.fstar(Context::Common) + w_rare * self.fstar(Context::Rare))
    }

    /// Prediction error of the alternative against `f*` over the context
    /// distribution: the error an ERM run pays exactly when it picks the bad
    /// function.
    pub fn alternative_errors(&self) -> ErrorReport {
        ve_errors(
            |c| self.alternative(*c),
            |c| self.fstar(*c),
            &self.context_weights(),
        )
        .expect("instance weights are normalized")
    }
}

/// Draws `n` i.i.d. context-label pairs from the instance's law.
pub fn sample_instance(instance: &TwoPointInstance, seed: u64) -> Vec<(Context, f64)> {
    let n = instance.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_rare = 1.0 / n as f64;
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < p_rare {
                let label = if rng.random::<bool>() { 1.0 } else { 0.0 };
                (Context::Rare, label)
            } else {
                (Context::Common, instance.fstar(Context::Common))
            }
        })
        .collect()
}

/// Which empirical loss the ERM compares under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErmLoss {
    Squared,
    Log,
}

/// Outcome of one exact two-function empirical risk minimization.
#[derive(Debug, Clone)]
pub struct ErmOutcome {
    pub chosen: Chosen,
    /// Empirical loss of `f*` (always finite for this construction).
    pub loss_fstar: f64,
    /// Empirical loss of the alternative; `+inf` is a legal value and loses.
    pub loss_alternative: f64,
    /// Number of `x'` observations.
    pub n_rare: usize,
    /// Number of `x'` observations with label 1.
    pub rare_ones: usize,
}

/// Exact ERM over the instance's two-function class. Extended-real empirical
/// losses are compared without any clamping; ties go to `f*`.
pub fn erm(dataset: &[(Context, f64)], instance: &TwoPointInstance, loss: ErmLoss) -> ErmOutcome {
    let pointwise = |prediction: f64, label: f64| -> f64 {
        let x = Probability::new(prediction).expect("class functions map into [0, 1]");
        let y = Probability::new(label).expect("labels lie in [0, 1]");
        match loss {
            ErmLoss::Squared => loss_sq(x, y),
            ErmLoss::Log => loss_log(x, y),
        }
    };
    let mut loss_fstar = 0.0;
    let mut loss_alternative = 0.0;
    let mut n_rare = 0;
    let mut rare_ones = 0;
    for (context, label) in dataset {
        loss_fstar += pointwise(instance.fstar(*context), *label);
        loss_alternative += pointwise(instance.alternative(*context), *label);
        if *context == Context::Rare {
            n_rare += 1;
            if *label == 1.0 {
                rare_ones += 1;
            }
        }
    }
    let chosen = if loss_alternative < loss_fstar {
        Chosen::Alternative
    } else {
        Chosen::Fstar
    };
    ErmOutcome {
        chosen,
        loss_fstar,
        loss_alternative,
        n_rare,
        rare_ones,
    }
}

/// One Monte Carlo cell: bad-selection frequency and ERM error statistics at
/// one sample size.
#[derive(Debug, Clone, Serialize)]
pub struct McCell {
    pub variant: &'static str,
    pub n: usize,
    pub trials: usize,
    /// Empirical probability that the ERM picked the bad function.
    pub p_bad: f64,
    pub p_bad_se: f64,
    pub mae_mean: f64,
    pub mae_se: f64,
    pub rmse_mean: f64,
    pub rmse_se: f64,
    /// Mean MAE over bad-selection trials only (deterministic given the
    /// event).
    pub conditional_mae: f64,
    pub conditional_rmse: f64,
    /// Empirical probability of the specific event {N2 = 1 and its label is
    /// 0}; at least `1/(2e)` for every `n`. Not part of the CSV schema.
    #[serde(skip)]
    pub p_single_zero: f64,
}

/// Runs `trials` independent sample-then-ERM experiments at each sample size.
/// Trial seeds derive from `(seed, n, trial)`, so results are independent of
/// execution order.
pub fn mc_verify(
    variant: Variant,
    sample_sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<McCell>, CounterexampleError> {
    let loss = match variant {
        Variant::Squared => ErmLoss::Squared,
        Variant::Log => ErmLoss::Log,
    };
    let mut cells = Vec::with_capacity(sample_sizes.len());
    for &n in sample_sizes {
        let instance = TwoPointInstance::new(n, variant)?;
        struct Trial {
            bad: bool,
            single_zero: bool,
            mae: f64,
            rmse: f64,
        }
        let outcomes: Vec<Trial> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let trial_seed = seeding::derive(seed, &[n as u64, trial as u64]);
                let dataset = sample_instance(&instance, trial_seed);
                let outcome = erm(&dataset, &instance, loss);
                let bad = outcome.chosen == Chosen::Alternative;
                let errors = if bad {
                    instance.alternative_errors()
                } else {
                    ErrorReport {
                        ve1: 0.0,
                        ve2: 0.0,
                        rmse: 0.0,
                    }
                };
                Trial {
                    bad,
                    single_zero: outcome.n_rare == 1 && outcome.rare_ones == 0,
                    mae: errors.ve1,
                    rmse: errors.rmse,
                }
            })
            .collect();

        let t = trials as f64;
        let bad_count = outcomes.iter().filter(|o| o.bad).count();
        let single_zero_count = outcomes.iter().filter(|o| o.single_zero).count();
        let p_bad = bad_count as f64 / t;
        let mean = |f: &dyn Fn(&Trial) -> f64| outcomes.iter().map(|o| f(o)).sum::<f64>() / t;
        let mae_mean = mean(&|o| o.mae);
        let rmse_mean = mean(&|o| o.rmse);
        let var = |f: &dyn Fn(&Trial) -> f64, m: f64| {
            outcomes.iter().map(|o| (f(o) - m).powi(2)).sum::<f64>() / (t - 1.0)
        };
        let conditional = |f: &dyn Fn(&Trial) -> f64| {
            if bad_count == 0 {
                f64::NAN
            } else {
                outcomes.iter().filter(|o| o.bad).map(|o| f(o)).sum::<f64>() / bad_count as f64
            }
        };
        cells.push(McCell {
            variant: variant.as_str(),
            n,
            trials,
            p_bad,
            p_bad_se: (p_bad * (1.0 - p_bad) / t).sqrt(),
            mae_mean,
            mae_se: (var(&|o| o.mae, mae_mean) / t).sqrt(),
            rmse_mean,
            rmse_se: (var(&|o| o.rmse, rmse_mean) / t).sqrt(),
            conditional_mae: conditional(&|o| o.mae),
            conditional_rmse: conditional(&|o| o.rmse),
            p_single_zero: single_zero_count as f64 / t,
        });
    }
    Ok(cells)
}

/// Writes the Monte Carlo results CSV
/// (`variant,n,trials,p_bad,p_bad_se,mae_mean,mae_se,rmse_mean,rmse_se,conditional_mae,conditional_rmse`).
pub fn write_mc_csv<W: io::Write>(writer: W, cells: &[McCell]) -> Result<(), CounterexampleError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    for cell in cells {
        csv_writer.serialize(cell)?;
    }
    csv_writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Least-squares slope of `ln(y)` against `ln(x)`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (k * sxy - sx * sy) / (k * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn realizability_and_class_shape() {
        for variant in [Variant::Squared, Variant::Log] {
            let instance = TwoPointInstance::new(100, variant).unwrap();
            // f* belongs to the class by construction; the log variant's
            // alternative agrees with f* on the common context.
            assert_relative_eq!(instance.fstar(Context::Common), 1.0 - 1.0 / 200.0);
            assert_eq!(instance.fstar(Context::Rare), 0.5);
            assert_eq!(instance.alternative(Context::Rare), 0.0);
        }
        let log_instance = TwoPointInstance::new(50, Variant::Log).unwrap();
        assert_eq!(
            log_instance.alternative(Context::Common),
            log_instance.fstar(Context::Common)
        );
    }

    #[test]
    fn suboptimality_is_below_one_over_n() {
        for n in [1usize, 2, 5, 25, 100, 400, 1600] {
            let instance = TwoPointInstance::new(n, Variant::Squared).unwrap();
            let nf = n as f64;
            let expected = 1.0 / nf - 1.0 / (2.0 * nf * nf);
            assert_relative_eq!(instance.suboptimality(), expected, epsilon = 1e-15);
            assert!(instance.suboptimality() < 1.0 / nf);
        }
    }

    #[test]
    fn sample_instance_n1_is_always_rare() {
        let instance = TwoPointInstance::new(1, Variant::Log).unwrap();
        for seed in 0..20 {
            let dataset = sample_instance(&instance, seed);
            assert_eq!(dataset.len(), 1);
            assert_eq!(dataset[0].0, Context::Rare);
        }
    }

    #[test]
    fn rare_count_statistics() {
        let instance = TwoPointInstance::new(100, Variant::Squared).unwrap();
        let replays = 100_000;
        let mut total_rare = 0usize;
        let mut exactly_one = 0usize;
        for seed in 0..replays {
            let n_rare = sample_instance(&instance, seed as u64)
                .iter()
                .filter(|(c, _)| *c == Context::Rare)
                .count();
            total_rare += n_rare;
            if n_rare == 1 {
                exactly_one += 1;
            }
        }
        let mean = total_rare as f64 / replays as f64;
        assert!((mean - 1.0).abs() <= 0.03, "Binomial(n, 1/n) mean: {mean}");
        let p_one = exactly_one as f64 / replays as f64;
        assert!(
            p_one >= 1.0 / std::f64::consts::E - 0.01,
            "P(N2 = 1) = {p_one}"
        );
    }

    #[test]
    fn log_erm_rejects_phi_on_rare_one() {
        // A single (x', 1) observation gives phi infinite empirical loss.
        let instance = TwoPointInstance::new(100, Variant::Log).unwrap();
        let dataset = vec![(Context::Rare, 1.0)];
        let outcome = erm(&dataset, &instance, ErmLoss::Log);
        assert_eq!(outcome.loss_alternative, f64::INFINITY);
        assert_eq!(outcome.chosen, Chosen::Fstar);
    }

    #[test]
    fn sq_erm_picks_psi_on_single_rare_zero() {
        let n = 100;
        let instance = TwoPointInstance::new(n, Variant::Squared).unwrap();
        let mut dataset =
            vec![(Context::Common, instance.fstar(Context::Common)); n - 1];
        dataset.push((Context::Rare, 0.0));
        let outcome = erm(&dataset, &instance, ErmLoss::Squared);
        assert_eq!(outcome.chosen, Chosen::Alternative);
        // Loss gap 1/4 - (n-1)/(9n) >= 1/4 - 1/9 > 0.
        let gap = outcome.loss_fstar - outcome.loss_alternative;
        let nf = n as f64;
        assert_relative_eq!(gap, 0.25 - (nf - 1.0) / (9.0 * nf), epsilon = 1e-10);
        assert!(gap > 0.25 - 1.0 / 9.0 - 1e-12);
    }

    #[test]
    fn log_erm_picks_phi_on_single_rare_zero() {
        let n = 100;
        let instance = TwoPointInstance::new(n, Variant::Log).unwrap();
        let mut dataset =
            vec![(Context::Common, instance.fstar(Context::Common)); n - 1];
        dataset.push((Context::Rare, 0.0));
        let outcome = erm(&dataset, &instance, ErmLoss::Log);
        assert_eq!(outcome.chosen, Chosen::Alternative);
        assert_relative_eq!(
            outcome.loss_fstar - outcome.loss_alternative,
            2.0f64.ln(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn empty_rare_observations_keep_fstar() {
        let n = 50;
        for variant in [Variant::Squared, Variant::Log] {
            let instance = TwoPointInstance::new(n, variant).unwrap();
            let dataset =
                vec![(Context::Common, instance.fstar(Context::Common)); n];
            let outcome = erm(
                &dataset,
                &instance,
                match variant {
                    Variant::Squared => ErmLoss::Squared,
                    Variant::Log => ErmLoss::Log,
                },
            );
            // f* fits the common labels exactly; ties also resolve to f*.
            assert_eq!(outcome.chosen, Chosen::Fstar);
            assert!(outcome.loss_fstar <= outcome.loss_alternative);
        }
    }

    #[test]
    fn conditional_error_formulas() {
        for n in [25usize, 100, 400] {
            let nf = n as f64;
            let sq = TwoPointInstance::new(n, Variant::Squared).unwrap();
            let errors = sq.alternative_errors();
            assert_relative_eq!(
                errors.ve1,
                (1.0 - 1.0 / nf) / (3.0 * nf.sqrt()) + 1.0 / (2.0 * nf),
                epsilon = 1e-14
            );
            let log = TwoPointInstance::new(n, Variant::Log).unwrap();
            let errors = log.alternative_errors();
            assert_relative_eq!(errors.rmse, 1.0 / (2.0 * nf.sqrt()), epsilon = 1e-14);
            assert_relative_eq!(errors.ve1, 1.0 / (2.0 * nf), epsilon = 1e-14);
        }
    }

    #[test]
    fn mc_smoke_run_jensen_holds() {
        for variant in [Variant::Squared, Variant::Log] {
            let cells = mc_verify(variant, &[25, 100], 2000, 7).unwrap();
            for cell in cells {
                assert!(cell.mae_mean <= cell.rmse_mean + 1e-12);
                assert!(cell.p_bad > 0.0 && cell.p_bad < 1.0);
                assert!(cell.p_single_zero > 0.0);
            }
        }
    }

    #[test]
    fn mc_is_order_independent_and_seeded() {
        let a = mc_verify(Variant::Log, &[50], 500, 3).unwrap();
        let b = mc_verify(Variant::Log, &[50], 500, 3).unwrap();
        assert_eq!(a[0].p_bad, b[0].p_bad);
        assert_eq!(a[0].mae_mean, b[0].mae_mean);
    }

    #[test]
    fn csv_schema() {
        let cells = mc_verify(Variant::Squared, &[25], 200, 5).unwrap();
        let mut buffer = Vec::new();
        write_mc_csv(&mut buffer, &cells).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.starts_with(
            "variant,n,trials,p_bad,p_bad_se,mae_mean,mae_se,rmse_mean,rmse_se,conditional_mae,conditional_rmse"
        ));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let points: Vec<(f64, f64)> =
            [25.0, 100.0, 400.0].iter().map(|n| (*n, 3.0 / n)).collect();
        assert_relative_eq!(log_log_slope(&points), -1.0, epsilon = 1e-12);
        let points: Vec<(f64, f64)> = [25.0f64, 100.0, 400.0]
            .iter()
            .map(|n| (*n, 0.4 / n.sqrt()))
            .collect();
        assert_relative_eq!(log_log_slope(&points), -0.5, epsilon = 1e-12);
    }
}
