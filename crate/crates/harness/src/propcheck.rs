//! Runtime verification of the core loss identities: the proper-scoring
//! identity of the log-loss, mean recovery of the categorical loss, the K=1
//! reduction, the triangular-deviation/Hellinger chain, and the analytic
//! gradient of the log-partition function.
//!
//! Produces a machine-readable pass/fail table; a failed check carries the
//! counterexample inputs.

use qloss::fit::{minimize, LbfgsParams};
use qloss::loss::{
    binary_kl, hellinger, loss_log, loss_log_logit, triangular_deviation, BinSpec, Probability,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Fault injection for testing the checker itself.
#[derive(Debug, Clone, Copy, Default)]
pub enum Fault {
    #[default]
    None,
    /// Adds the given offset to the first component of the analytic
    /// log-partition gradient before the finite-difference comparison.
    PerturbLogPartitionGrad(f64),
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub max_err: f64,
    pub tol: f64,
    /// Inputs of the worst case, for diagnosis on failure.
    pub worst_case: String,
}

impl CheckResult {
    fn from_worst(name: &'static str, tol: f64, worst: (f64, String)) -> Self {
        Self {
            name,
            passed: worst.0 <= tol,
            max_err: worst.0,
            tol,
            worst_case: worst.1,
        }
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// Renders one `check=... status=... max_err=... tol=...` line per check.
pub fn render_table(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "check={} status={} max_err={:.3e} tol={:.1e}",
            r.name,
            if r.passed { "pass" } else { "fail" },
            r.max_err,
            r.tol
        ));
        if !r.passed {
            out.push_str(&format!(" counterexample=[{}]", r.worst_case));
        }
        out.push('\n');
    }
    out
}

/// A random discrete distribution on `[0, 1]` with 1..=8 support points.
fn random_distribution(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let support = rng.random_range(1..=8);
    let values: Vec<f64> = (0..support).map(|_| rng.random::<f64>()).collect();
    let raw: Vec<f64> = (0..support).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    values.into_iter().zip(raw.into_iter().map(|w| w / total)).collect()
}

fn check_kl_identity(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = (0.0, String::new());
    for _ in 0..500 {
        let dist = random_distribution(rng);
        let mu: f64 = dist.iter().map(|(y, w)| y * w).sum();
        let expected_at = |q: f64| -> f64 {
            dist.iter()
                .map(|(y, w)| {
                    w * loss_log(Probability::new(q).unwrap(), Probability::new(*y).unwrap())
                })
                .sum()
        };
        for _ in 0..50 {
            let x = rng.random_range(1e-3..1.0 - 1e-3);
            let excess = expected_at(x) - expected_at(mu);
            let kl = binary_kl(
                Probability::clamped(mu),
                Probability::new(x).unwrap(),
            );
            let err = (excess - kl).abs();
            if err > worst.0 {
                worst = (err, format!("mu={mu} x={x}"));
            }
        }
    }
    CheckResult::from_worst("kl_identity", 1e-10, worst)
}

/// Minimizes the population categorical risk `A(theta) - sbar . theta` and
/// checks that the recovered mean equals the distribution mean.
fn check_mean_recovery(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = (0.0, String::new());
    for _ in 0..200 {
        let k = rng.random_range(1..=10usize);
        let mut boundaries: Vec<f64> = (0..k - 1)
            .map(|_| rng.random_range(0.01..0.99))
            .collect();
        boundaries.sort_by(|a, b| a.partial_cmp(b).unwrap());
        boundaries.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let bins = BinSpec::new(boundaries).expect("valid boundaries");
        let k = bins.k();
        let dist = random_distribution(rng);
        let mu: f64 = dist.iter().map(|(y, w)| y * w).sum();
        let mut sbar = vec![0.0; k];
        for (y, w) in &dist {
            let stat = bins.sufficient_stat(Probability::new(*y).unwrap());
            for (s, t) in sbar.iter_mut().zip(&stat) {
                *s += w * t;
            }
        }
        let objective = |theta: &[f64]| {
            let value = bins.log_partition(theta)
                - sbar.iter().zip(theta).map(|(s, t)| s * t).sum::<f64>();
            let grad: Vec<f64> = bins
                .log_partition_grad(theta)
                .iter()
                .zip(&sbar)
                .map(|(g, s)| g - s)
                .collect();
            (value, grad)
        };
        let params = LbfgsParams {
            tol: 1e-8,
            max_iter: 2000,
            ..LbfgsParams::default()
        };
        // Bins with zero mass have no finite minimizer (their natural
        // parameters run to -inf), so the solver may stop at a numerical
        // optimum short of tol; the carried iterate is still accurate.
        let theta = match minimize(objective, vec![0.0; k], &params) {
            Ok((theta, _)) => theta,
            Err(qloss::fit::FitError::LineSearchFailed { last, .. }) => last,
            Err(err) => panic!("population risk minimization: {err}"),
        };
        let recovered = bins.predicted_mean(&theta).get();
        let err = (recovered - mu).abs();
        if err > worst.0 {
            worst = (err, format!("K={k} mu={mu} recovered={recovered}"));
        }
    }
    CheckResult::from_worst("mean_recovery", 1e-6, worst)
}

fn check_k1_reduction() -> CheckResult {
    let bins = BinSpec::new(vec![]).unwrap();
    let mut worst = (0.0, String::new());
    for i in 0..=600 {
        let theta = -30.0 + 0.1 * i as f64;
        for j in 0..=20 {
            let y = Probability::new(j as f64 / 20.0).unwrap();
            let err = (bins.loss_cat(&[theta], y) - loss_log_logit(theta, y)).abs();
            if err > worst.0 {
                worst = (err, format!("theta={theta} y={}", y.get()));
            }
        }
    }
    CheckResult::from_worst("k1_reduction", 1e-12, worst)
}

fn check_metric_chain() -> CheckResult {
    let mut worst = (0.0, String::new());
    for i in 0..=200 {
        for j in 0..=200 {
            let p = Probability::new(i as f64 / 200.0).unwrap();
            let q = Probability::new(j as f64 / 200.0).unwrap();
            let quarter_delta = 0.25 * triangular_deviation(p, q);
            let mid = 0.5 * (p.get().sqrt() - q.get().sqrt()).powi(2);
            let h = hellinger(p, q);
            let violation = (quarter_delta - mid).max(mid - h).max(0.0);
            if violation > worst.0 {
                worst = (violation, format!("p={} q={}", p.get(), q.get()));
            }
        }
    }
    CheckResult::from_worst("metric_chain", 1e-15, worst)
}

fn check_log_partition_grad(rng: &mut ChaCha8Rng, fault: Fault) -> CheckResult {
    let mut worst = (0.0, String::new());
    for &k in &[1usize, 2, 5, 10] {
        let boundaries: Vec<f64> = (1..k).map(|i| i as f64 / k as f64).collect();
        let bins = BinSpec::new(boundaries).unwrap();
        for _ in 0..25 {
            let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-4.0..4.0)).collect();
            let mut analytic = bins.log_partition_grad(&theta);
            if let Fault::PerturbLogPartitionGrad(eps) = fault {
                analytic[0] += eps;
            }
            let mut probe = theta.clone();
            for slot in 0..k {
                let h = 1e-6 * theta[slot].abs().max(1.0);
                probe[slot] = theta[slot] + h;
                let up = bins.log_partition(&probe);
                probe[slot] = theta[slot] - h;
                let down = bins.log_partition(&probe);
                probe[slot] = theta[slot];
                let numeric = (up - down) / (2.0 * h);
                let rel = (analytic[slot] - numeric).abs() / analytic[slot].abs().max(1e-8);
                if rel > worst.0 {
                    worst = (rel, format!("K={k} slot={slot} theta={theta:?}"));
                }
            }
        }
    }
    CheckResult::from_worst("log_partition_grad", 1e-6, worst)
}

pub fn run_propcheck_with_fault(seed: u64, fault: Fault) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        check_kl_identity(&mut rng),
        check_mean_recovery(&mut rng),
        check_k1_reduction(),
        check_metric_chain(),
        check_log_partition_grad(&mut rng, fault),
    ]
}

pub fn run_propcheck(seed: u64) -> Vec<CheckResult> {
    run_propcheck_with_fault(seed, Fault::None)
}
