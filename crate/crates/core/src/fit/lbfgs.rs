//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion over the last `memory` curvature pairs, initial Hessian
//! scaling `s^T y / y^T y`, and the bracket/zoom line search of Nocedal &
//! Wright (Algorithms 3.5 and 3.6).

use super::{FitError, FitReport};
use std::collections::VecDeque;

/// L-BFGS settings.
#[derive(Debug, Clone, Copy)]
pub struct LbfgsParams {
    /// Number of curvature pairs kept.
    pub memory: usize,
    /// Gradient-norm stopping tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the Wolfe conditions.
    pub c1: f64,
    /// Curvature constant of the Wolfe conditions.
    pub c2: f64,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        Self {
            memory: 10,
            tol: 1e-6,
            max_iter: 500,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Search direction `-H g` from the two-loop recursion.
fn direction(grad: &[f64], history: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let alpha = pair.rho * dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (pair, alpha) in history.iter().zip(alphas.iter().rev()) {
        let beta = pair.rho * dot(&pair.y, &q);
        for (qi, si) in q.iter_mut().zip(&pair.s) {
            *qi += (alpha - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

struct Probe {
    alpha: f64,
    value: f64,
    grad: Vec<f64>,
    point: Vec<f64>,
    slope: f64,
}

/// Minimizes `f` (value + gradient) from `x0`. Returns the final point and a
/// report; fails with the last iterate attached when no step direction yields
/// any decrease.
pub fn minimize(
    f: impl Fn(&[f64]) -> (f64, Vec<f64>),
    x0: Vec<f64>,
    params: &LbfgsParams,
) -> Result<(Vec<f64>, FitReport), FitError> {
    let mut x = x0;
    let (mut value, mut grad) = f(&x);
    let mut trace = vec![value];
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(params.memory);
    let mut iterations = 0;
    let mut made_progress = false;

    for iter in 1..=params.max_iter {
        if !value.is_finite() {
            return Err(FitError::NonFinite { iteration: iter });
        }
        if norm(&grad) <= params.tol {
            break;
        }

        let mut dir = direction(&grad, &history);
        if dot(&dir, &grad) >= 0.0 {
            // Curvature history went stale; restart from steepest descent.
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
        }

        // A first-order decrease below objective resolution cannot produce a
        // representable improvement along any step: numerical optimum.
        if -dot(&dir, &grad) <= f64::EPSILON * (1.0 + value.abs()) {
            break;
        }

        let probe = match strong_wolfe(&f, &x, value, &grad, &dir, params) {
            Some(p) => p,
            // No probed step produced a representable decrease. After any
            // successful step this is the resolution floor of the objective;
            // from a pristine start with a meaningful gradient it is a
            // genuine failure.
            None if made_progress => break,
            None => {
                return Err(FitError::LineSearchFailed {
                    iteration: iter,
                    objective: value,
                    grad_norm: norm(&grad),
                    last: x,
                });
            }
        };
        iterations = iter;
        made_progress = true;

        let s: Vec<f64> = probe.point.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = probe.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if history.len() == params.memory {
                history.pop_front();
            }
            history.push_back(Pair {
                rho: 1.0 / sy,
                s,
                y,
            });
        }
        x = probe.point;
        value = probe.value;
        grad = probe.grad;
        trace.push(value);
    }

    let grad_norm = norm(&grad);
    Ok((
        x,
        FitReport {
            iterations,
            final_objective: value,
            grad_norm,
            converged: grad_norm <= params.tol,
            objective_trace: trace,
        },
    ))
}

/// Bracketing strong-Wolfe search. Returns `None` only if no probed step
/// produced even a sufficient-decrease point.
fn strong_wolfe(
    f: &impl Fn(&[f64]) -> (f64, Vec<f64>),
    x: &[f64],
    f0: f64,
    g0: &[f64],
    dir: &[f64],
    params: &LbfgsParams,
) -> Option<Probe> {
    let slope0 = dot(g0, dir);
    debug_assert!(slope0 < 0.0, "search direction must be descent");
    let eval = |alpha: f64| -> Probe {
        let point: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect();
        let (value, grad) = f(&point);
        let slope = dot(&grad, dir);
        Probe {
            alpha,
            value,
            grad,
            point,
            slope,
        }
    };
    let armijo = |p: &Probe| p.value <= f0 + params.c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -params.c2 * slope0;

    let mut prev_alpha = 0.0;
    let mut prev_value = f0;
    let mut alpha = 1.0;
    let mut fallback: Option<Probe> = None;
    for i in 0..20 {
        let probe = eval(alpha);
        if !armijo(&probe) || (probe.value >= prev_value && i > 0) {
            return zoom(f0, slope0, prev_alpha, alpha, &eval, params, fallback);
        }
        if curvature(&probe) {
            return Some(probe);
        }
        if probe.slope >= 0.0 {
            return zoom(f0, slope0, alpha, prev_alpha, &eval, params, Some(probe));
        }
        prev_alpha = alpha;
        prev_value = probe.value;
        fallback = Some(probe);
        alpha *= 2.0;
    }
    fallback
}

fn zoom(
    f0: f64,
    slope0: f64,
    mut lo: f64,
    mut hi: f64,
    eval: &impl Fn(f64) -> Probe,
    params: &LbfgsParams,
    mut fallback: Option<Probe>,
) -> Option<Probe> {
    let armijo = |p: &Probe| p.value <= f0 + params.c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -params.c2 * slope0;
    let mut lo_value = if lo == 0.0 { f0 } else { eval(lo).value };
    for _ in 0..50 {
        let alpha = 0.5 * (lo + hi);
        if (hi - lo).abs() <= 1e-16 * lo.abs().max(1.0) {
            break;
        }
        let probe = eval(alpha);
        if !armijo(&probe) || probe.value >= lo_value {
            hi = alpha;
        } else {
            if curvature(&probe) {
                return Some(probe);
            }
            if probe.slope * (hi - lo) >= 0.0 {
                hi = lo;
            }
            lo = alpha;
            lo_value = probe.value;
            fallback = Some(probe);
        }
    }
    // Wolfe bracket collapsed; accept the best sufficient-decrease point seen.
    fallback.filter(armijo)
}
