//! Empirical-risk solvers over linear-in-features models.
//!
//! Each loss gets the solver the problem structure affords: a direct linear
//! solve for the squared loss, damped Newton for the logistic-link GLM, and
//! limited-memory BFGS with a strong-Wolfe line search for the categorical
//! loss. All three minimize a ridge-regularized empirical objective and report
//! iterations, final objective, and gradient norm.

mod lbfgs;

pub use lbfgs::{minimize, LbfgsParams};

use crate::loss::{sigmoid, softplus, BinSpec, Probability};
use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("design has no rows")]
    EmptyDesign,
    #[error("row {0} has {1} features, expected {2}")]
    RaggedRow(usize, usize, usize),
    #[error("target[{index}] = {value} outside [0, 1]")]
    TargetOutOfRange { index: usize, value: f64 },
    #[error("ridge strength must be nonnegative and finite, got {0}")]
    InvalidRidge(f64),
    #[error("normal equations are rank deficient; supply l2 > 0 or full-rank features")]
    RankDeficient,
    #[error("objective became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(
        "line search failed at iteration {iteration} (objective {objective}, grad norm {grad_norm})"
    )]
    LineSearchFailed {
        iteration: usize,
        objective: f64,
        grad_norm: f64,
        /// Parameters at the point of failure.
        last: Vec<f64>,
    },
    #[error("parameter block has wrong length: got {got}, expected {expected}")]
    BadBlockLength { got: usize, expected: usize },
}

/// A regression problem: row-major feature matrix, targets in `[0, 1]`, and a
/// ridge strength.
#[derive(Debug, Clone)]
pub struct Design {
    x: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    d: usize,
    l2: f64,
}

impl Design {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>, l2: f64) -> Result<Self, FitError> {
        if rows.is_empty() {
            return Err(FitError::EmptyDesign);
        }
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(FitError::InvalidRidge(l2));
        }
        let d = rows[0].len();
        let n = rows.len();
        assert_eq!(n, targets.len(), "row count must equal target count");
        for (index, value) in targets.iter().enumerate() {
            if !(0.0..=1.0).contains(value) {
                return Err(FitError::TargetOutOfRange {
                    index,
                    value: *value,
                });
            }
        }
        let mut x = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(FitError::RaggedRow(i, row.len(), d));
            }
            x.extend_from_slice(row);
        }
        Ok(Self {
            x,
            y: targets,
            n,
            d,
            l2,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn l2(&self) -> f64 {
        self.l2
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn target(&self, i: usize) -> f64 {
        self.y[i]
    }
}

/// Solver diagnostics for one fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub iterations: usize,
    pub final_objective: f64,
    pub grad_norm: f64,
    pub converged: bool,
    /// Objective value at each accepted iterate, starting point included.
    pub objective_trace: Vec<f64>,
}

/// Damped-Newton settings for the logistic GLM.
#[derive(Debug, Clone, Copy)]
pub struct NewtonParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Objective and gradient of the regularized squared-loss risk
/// `sum_i (phi_i^T w - y_i)^2 + l2 ||w||^2`.
pub fn sq_objective_grad(design: &Design, w: &[f64]) -> (f64, Vec<f64>) {
    let d = design.dim();
    let mut obj = 0.0;
    let mut grad = vec![0.0; d];
    for i in 0..design.n() {
        let phi = design.row(i);
        let r = dot(phi, w) - design.target(i);
        obj += r * r;
        for j in 0..d {
            grad[j] += 2.0 * r * phi[j];
        }
    }
    for j in 0..d {
        obj += design.l2() * w[j] * w[j];
        grad[j] += 2.0 * design.l2() * w[j];
    }
    (obj, grad)
}

/// Objective and gradient of the logistic-link GLM risk
/// `sum_i loss_log(sigmoid(phi_i^T w), y_i) + (l2/2) ||w||^2`.
///
/// Evaluated through `softplus(z) - y z`, which is the exact log-loss of the
/// linked probability and stays finite for every finite `w` (no probability
/// clamping is needed on this route).
pub fn log_objective_grad(design: &Design, w: &[f64]) -> (f64, Vec<f64>) {
    let d = design.dim();
    let mut obj = 0.0;
    let mut grad = vec![0.0; d];
    for i in 0..design.n() {
        let phi = design.row(i);
        let z = dot(phi, w);
        let y = design.target(i);
        obj += softplus(z) - y * z;
        let g = sigmoid(z) - y;
        for j in 0..d {
            grad[j] += g * phi[j];
        }
    }
    for j in 0..d {
        obj += 0.5 * design.l2() * w[j] * w[j];
        grad[j] += design.l2() * w[j];
    }
    (obj, grad)
}

/// Objective and gradient of the categorical-loss risk
/// `sum_i loss_cat(W phi_i, y_i) + (l2/2) ||W||_F^2` over a row-major
/// `K x d` parameter block `w`.
pub fn cat_objective_grad(design: &Design, bins: &BinSpec, w: &[f64]) -> (f64, Vec<f64>) {
    let d = design.dim();
    let k = bins.k();
    assert_eq!(w.len(), k * d, "parameter block must be K x d");
    let mut obj = 0.0;
    let mut grad = vec![0.0; k * d];
    let mut theta = vec![0.0; k];
    for i in 0..design.n() {
        let phi = design.row(i);
        for (j, t) in theta.iter_mut().enumerate() {
            *t = dot(&w[j * d..(j + 1) * d], phi);
        }
        let y = Probability::clamped(design.target(i));
        obj += bins.loss_cat(&theta, y);
        let g = bins.loss_cat_grad(&theta, y);
        for (j, gj) in g.iter().enumerate() {
            let row = &mut grad[j * d..(j + 1) * d];
            for (c, phc) in phi.iter().enumerate() {
                row[c] += gj * phc;
            }
        }
    }
    for j in 0..w.len() {
        obj += 0.5 * design.l2() * w[j] * w[j];
        grad[j] += design.l2() * w[j];
    }
    (obj, grad)
}

/// Ridge regression by a direct solve of the normal equations
/// `(X^T X + l2 I) w = X^T y`.
pub fn fit_sq(design: &Design) -> Result<(Vec<f64>, FitReport), FitError> {
    let d = design.dim();
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for i in 0..design.n() {
        let phi = design.row(i);
        let y = design.target(i);
        for a in 0..d {
            rhs[a] += phi[a] * y;
            for b in a..d {
                gram[(a, b)] += phi[a] * phi[b];
            }
        }
    }
    for a in 0..d {
        gram[(a, a)] += design.l2();
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let chol = Cholesky::new(gram.clone()).ok_or(FitError::RankDeficient)?;
    let w = chol.solve(&rhs);
    let residual = (&gram * &w - &rhs).norm();
    let w: Vec<f64> = w.iter().cloned().collect();
    let (obj, grad) = sq_objective_grad(design, &w);
    Ok((
        w,
        FitReport {
            iterations: 1,
            final_objective: obj,
            grad_norm: norm(&grad),
            converged: residual <= 1e-8 * (1.0 + rhs.norm()),
            objective_trace: vec![obj],
        },
    ))
}

/// Logistic GLM fit by damped Newton iterations.
///
/// Halves the Newton step until the objective decreases (up to 50 times),
/// falling back to a gradient step when the Newton direction fails; stops when
/// the gradient norm reaches `params.tol` or after `params.max_iter`
/// iterations. Requires `l2 > 0` so the Hessian is positive definite.
pub fn fit_log(
    design: &Design,
    init: Option<&[f64]>,
    params: &NewtonParams,
) -> Result<(Vec<f64>, FitReport), FitError> {
    let d = design.dim();
    let mut w: Vec<f64> = match init {
        Some(w0) => {
            if w0.len() != d {
                return Err(FitError::BadBlockLength {
                    got: w0.len(),
                    expected: d,
                });
            }
            w0.to_vec()
        }
        None => vec![0.0; d],
    };
    let (mut obj, mut grad) = log_objective_grad(design, &w);
    let mut trace = vec![obj];
    let mut iterations = 0;
    for iter in 1..=params.max_iter {
        if !obj.is_finite() {
            return Err(FitError::NonFinite { iteration: iter });
        }
        if norm(&grad) <= params.tol {
            break;
        }
        iterations = iter;
        // Hessian X^T diag(sigma (1 - sigma)) X + l2 I.
        let mut hess = DMatrix::zeros(d, d);
        for i in 0..design.n() {
            let phi = design.row(i);
            let s = sigmoid(dot(phi, &w));
            let weight = s * (1.0 - s);
            for a in 0..d {
                for b in a..d {
                    hess[(a, b)] += weight * phi[a] * phi[b];
                }
            }
        }
        for a in 0..d {
            hess[(a, a)] += design.l2();
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        let g = DVector::from_column_slice(&grad);
        let newton_dir = Cholesky::new(hess).map(|c| -(c.solve(&g)));
        let mut accepted = false;
        let directions: Vec<DVector<f64>> = match newton_dir {
            Some(dir) => vec![dir, -g.clone()],
            None => vec![-g.clone()],
        };
        'outer: for dir in directions {
            let mut step = 1.0;
            for _ in 0..50 {
                let cand: Vec<f64> = w
                    .iter()
                    .zip(dir.iter())
                    .map(|(wi, di)| wi + step * di)
                    .collect();
                let (cand_obj, cand_grad) = log_objective_grad(design, &cand);
                // Near the optimum the per-step decrease drops below f64
                // resolution; equal-objective steps that still shrink the
                // gradient keep Newton contracting instead of stalling.
                let progress = cand_obj < obj
                    || (cand_obj == obj && norm(&cand_grad) < norm(&grad));
                if cand_obj.is_finite() && progress {
                    w = cand;
                    obj = cand_obj;
                    grad = cand_grad;
                    trace.push(obj);
                    accepted = true;
                    break 'outer;
                }
                step *= 0.5;
            }
        }
        if !accepted {
            // No direction produces a decrease at machine precision.
            break;
        }
    }
    let grad_norm = norm(&grad);
    Ok((
        w,
        FitReport {
            iterations,
            final_objective: obj,
            grad_norm,
            converged: grad_norm <= params.tol,
            objective_trace: trace,
        },
    ))
}

/// Categorical-loss fit by L-BFGS over the flattened `K x d` block.
pub fn fit_cat(
    design: &Design,
    bins: &BinSpec,
    init: Option<&[f64]>,
    params: &LbfgsParams,
) -> Result<(Vec<f64>, FitReport), FitError> {
    let len = bins.k() * design.dim();
    let w0: Vec<f64> = match init {
        Some(w) => {
            if w.len() != len {
                return Err(FitError::BadBlockLength {
                    got: w.len(),
                    expected: len,
                });
            }
            w.to_vec()
        }
        None => vec![0.0; len],
    };
    lbfgs::minimize(|w| cat_objective_grad(design, bins, w), w0, params)
}

/// How a linear Q model turns scores into `[0, 1]` predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Squared,
    Log,
    Cat,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Squared => "sq",
            LossKind::Log => "log",
            LossKind::Cat => "cat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sq" => Some(LossKind::Squared),
            "log" => Some(LossKind::Log),
            "cat" => Some(LossKind::Cat),
            _ => None,
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-action linear action-value model. Squared- and log-loss models hold a
/// weight vector per action; categorical models hold a row-major `K x d`
/// matrix per action. Predictions always land in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LinearQModel {
    loss: LossKind,
    dim: usize,
    bins: Option<BinSpec>,
    blocks: Vec<Vec<f64>>,
}

impl LinearQModel {
    /// All-zero model: log predicts 0.5 everywhere, squared predicts 0, cat
    /// predicts its zero-parameter mean.
    pub fn zeros(
        loss: LossKind,
        dim: usize,
        n_actions: usize,
        bins: Option<BinSpec>,
    ) -> Self {
        let block_len = match (loss, &bins) {
            (LossKind::Cat, Some(b)) => b.k() * dim,
            (LossKind::Cat, None) => panic!("categorical model requires a BinSpec"),
            _ => dim,
        };
        Self {
            loss,
            dim,
            bins,
            blocks: vec![vec![0.0; block_len]; n_actions],
        }
    }

    #[inline]
    pub fn loss(&self) -> LossKind {
        self.loss
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.blocks.len()
    }

    pub fn bins(&self) -> Option<&BinSpec> {
        self.bins.as_ref()
    }

    pub fn block(&self, action: usize) -> &[f64] {
        &self.blocks[action]
    }

    pub fn set_block(&mut self, action: usize, params: Vec<f64>) -> Result<(), FitError> {
        let expected = self.blocks[action].len();
        if params.len() != expected {
            return Err(FitError::BadBlockLength {
                got: params.len(),
                expected,
            });
        }
        self.blocks[action] = params;
        Ok(())
    }

    /// Predicted action value in `[0, 1]`: clamped linear score for squared
    /// loss, logistic link for log-loss, recovered mean for categorical loss.
    pub fn predict(&self, phi: &[f64], action: usize) -> f64 {
        debug_assert_eq!(phi.len(), self.dim);
        let block = &self.blocks[action];
        match self.loss {
            LossKind::Squared => dot(block, phi).clamp(0.0, 1.0),
            LossKind::Log => sigmoid(dot(block, phi)),
            LossKind::Cat => {
                let bins = self.bins.as_ref().expect("cat model has bins");
                let k = bins.k();
                let theta: Vec<f64> = (0..k)
                    .map(|j| dot(&block[j * self.dim..(j + 1) * self.dim], phi))
                    .collect();
                bins.predicted_mean(&theta).get()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn intercept_design(targets: &[f64], l2: f64) -> Design {
        Design::new(vec![vec![1.0]; targets.len()], targets.to_vec(), l2).unwrap()
    }

    #[test]
    fn design_validation() {
        assert!(matches!(
            Design::new(vec![], vec![], 0.0),
            Err(FitError::EmptyDesign)
        ));
        assert!(matches!(
            Design::new(vec![vec![1.0]], vec![1.5], 0.0),
            Err(FitError::TargetOutOfRange { .. })
        ));
        assert!(matches!(
            Design::new(vec![vec![1.0]], vec![0.5], -1.0),
            Err(FitError::InvalidRidge(_))
        ));
        assert!(matches!(
            Design::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.5, 0.5], 0.0),
            Err(FitError::RaggedRow(1, 2, 1))
        ));
    }

    #[test]
    fn fit_sq_sample_mean() {
        let design = intercept_design(&[0.2, 0.4], 0.0);
        let (w, report) = fit_sq(&design).unwrap();
        assert_relative_eq!(w[0], 0.3, epsilon = 1e-12);
        assert!(report.converged);
    }

    #[test]
    fn fit_sq_interpolates_identity() {
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let targets = vec![0.1, 0.6, 0.9];
        let design = Design::new(rows, targets.clone(), 0.0).unwrap();
        let (w, _) = fit_sq(&design).unwrap();
        for (wi, yi) in w.iter().zip(&targets) {
            assert_relative_eq!(wi, yi, epsilon = 1e-12);
        }
    }

    #[test]
    fn fit_sq_rank_deficient_errors() {
        // Duplicated column makes X^T X singular with l2 = 0.
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![0.5, 0.5]];
        let design = Design::new(rows, vec![0.1, 0.9, 0.4], 0.0).unwrap();
        assert!(matches!(fit_sq(&design), Err(FitError::RankDeficient)));
    }

    #[test]
    fn fit_sq_normal_equation_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let design = Design::new(rows, targets, 1e-6).unwrap();
        let (w, report) = fit_sq(&design).unwrap();
        assert!(report.converged);
        let (_, grad) = sq_objective_grad(&design, &w);
        assert!(norm(&grad) < 1e-8);
    }

    #[test]
    fn fit_log_intercept_recovers_logit_of_mean() {
        let targets = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.3, 0.7, 1.0, 0.5];
        let m = targets.iter().sum::<f64>() / targets.len() as f64;
        let design = intercept_design(&targets, 1e-10);
        let params = NewtonParams {
            tol: 1e-12,
            max_iter: 200,
        };
        let (w, report) = fit_log(&design, None, &params).unwrap();
        assert!(report.converged);
        assert_relative_eq!(sigmoid(w[0]), m, epsilon = 1e-8);
        assert_relative_eq!(w[0], (m / (1.0 - m)).ln(), epsilon = 1e-8);
    }

    #[test]
    fn fit_log_symmetric_targets_zero_gradient_at_origin() {
        let design = intercept_design(&[0.5; 8], 1e-4);
        let (_, grad) = log_objective_grad(&design, &[0.0]);
        assert_eq!(grad[0], 0.0);
        let (w, _) = fit_log(&design, None, &NewtonParams::default()).unwrap();
        assert_relative_eq!(w[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_log_trace_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let design = Design::new(rows, targets, 1e-6).unwrap();
        let (_, report) = fit_log(&design, None, &NewtonParams::default()).unwrap();
        assert!(report.converged);
        for pair in report.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn fit_cat_k1_intercept_recovers_mean() {
        let targets = [0.9, 0.1, 0.9, 0.9, 0.5, 0.7];
        let m = targets.iter().sum::<f64>() / targets.len() as f64;
        let design = intercept_design(&targets, 1e-10);
        let bins = BinSpec::new(vec![]).unwrap();
        let params = LbfgsParams {
            tol: 1e-7,
            ..LbfgsParams::default()
        };
        let (w, report) = fit_cat(&design, &bins, None, &params).unwrap();
        assert!(report.converged);
        assert_relative_eq!(bins.predicted_mean(&w).get(), m, epsilon = 1e-6);
    }

    #[test]
    fn fit_cat_two_point_targets_recover_mean() {
        // Empirical distribution on {0.1, 0.9} with mean 0.5.
        let targets = [0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1, 0.9];
        let design = intercept_design(&targets, 1e-10);
        let bins = BinSpec::new(vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let params = LbfgsParams {
            tol: 1e-7,
            ..LbfgsParams::default()
        };
        let (w, report) = fit_cat(&design, &bins, None, &params).unwrap();
        assert!(report.converged);
        assert_relative_eq!(bins.predicted_mean(&w).get(), 0.5, epsilon = 1e-5);
    }

    #[test]
    fn fit_cat_k1_matches_fit_log_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let rows: Vec<Vec<f64>> = (0..30)
                .map(|_| vec![1.0, rng.random_range(-1.0..1.0)])
                .collect();
            let targets: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
            let l2 = 1e-4;
            let design = Design::new(rows.clone(), targets, l2).unwrap();
            let bins = BinSpec::new(vec![]).unwrap();
            let (w_log, _) = fit_log(
                &design,
                None,
                &NewtonParams {
                    tol: 1e-10,
                    max_iter: 200,
                },
            )
            .unwrap();
            let (w_cat, _) = fit_cat(
                &design,
                &bins,
                None,
                &LbfgsParams {
                    tol: 1e-7,
                    ..LbfgsParams::default()
                },
            )
            .unwrap();
            for row in &rows {
                let p_log = sigmoid(dot(&w_log, row));
                let p_cat = bins.predicted_mean(&[dot(&w_cat, row)]).get();
                assert!(
                    (p_log - p_cat).abs() <= 1e-5,
                    "prediction mismatch: {p_log} vs {p_cat}"
                );
            }
        }
    }

    #[test]
    fn fit_cat_trace_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
        let design = Design::new(rows, targets, 1e-4).unwrap();
        let bins = BinSpec::new(vec![0.5, 0.8, 0.95, 0.99]).unwrap();
        let (_, report) = fit_cat(&design, &bins, None, &LbfgsParams::default()).unwrap();
        assert!(report.converged);
        for pair in report.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    fn central_diff_grad(f: impl Fn(&[f64]) -> f64, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; w.len()];
        let mut t = w.to_vec();
        for j in 0..w.len() {
            let h = 1e-6 * w[j].abs().max(1.0);
            t[j] = w[j] + h;
            let up = f(&t);
            t[j] = w[j] - h;
            let dn = f(&t);
            t[j] = w[j];
            g[j] = (up - dn) / (2.0 * h);
        }
        g
    }

    #[test]
    fn objective_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..25)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..25).map(|_| rng.random_range(0.05..0.95)).collect();
        let design = Design::new(rows, targets, 1e-3).unwrap();
        let bins = BinSpec::new(vec![0.3, 0.7]).unwrap();

        let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = sq_objective_grad(&design, &w);
        let fd = central_diff_grad(|w| sq_objective_grad(&design, w).0, &w);
        for (a, b) in g.iter().zip(&fd) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-8);
        }

        let (_, g) = log_objective_grad(&design, &w);
        let fd = central_diff_grad(|w| log_objective_grad(&design, w).0, &w);
        for (a, b) in g.iter().zip(&fd) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-8);
        }

        let wk: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = cat_objective_grad(&design, &bins, &wk);
        let fd = central_diff_grad(|w| cat_objective_grad(&design, &bins, w).0, &wk);
        for (a, b) in g.iter().zip(&fd) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-8);
        }
    }

    #[test]
    fn predict_ranges() {
        let model = LinearQModel::zeros(LossKind::Log, 2, 3, None);
        assert_relative_eq!(model.predict(&[1.0, 0.5], 0), 0.5);

        let mut model = LinearQModel::zeros(LossKind::Squared, 2, 3, None);
        model.set_block(0, vec![1.0, 1.0]).unwrap();
        assert_eq!(model.predict(&[1.0, 0.7], 0), 1.0); // clamped from 1.7
        model.set_block(1, vec![-1.0, 0.0]).unwrap();
        assert_eq!(model.predict(&[1.0, 0.7], 1), 0.0);

        let bins = BinSpec::new(vec![0.5]).unwrap();
        let model = LinearQModel::zeros(LossKind::Cat, 2, 3, Some(bins));
        assert_relative_eq!(model.predict(&[1.0, 1.0], 2), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn set_block_validates_length() {
        let mut model = LinearQModel::zeros(LossKind::Log, 3, 2, None);
        assert!(matches!(
            model.set_block(0, vec![0.0; 4]),
            Err(FitError::BadBlockLength { .. })
        ));
    }
}
