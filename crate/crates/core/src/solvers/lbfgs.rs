//! Preconditioned limited-memory BFGS with Armijo backtracking.

use std::collections::VecDeque;

use super::linalg::{axpy_into, dot, pin_boundary, Preconditioner};
use super::SolverConfig;

/// Smallest step tried before a line search gives up.
pub(crate) const MIN_STEP: f64 = 1e-14;
const MEMORY: usize = 12;
/// Consecutive accepted steps without a representable decrease before the
/// run counts as stagnated.
const FLAT_STEPS: usize = 5;

pub(crate) trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    /// Full gradient; the Dirichlet entry is discarded by the caller.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Map back onto the constraint set, if any.
    fn retract(&self, x: Vec<f64>) -> Vec<f64> {
        x
    }
    /// Stationarity measure compared against `grad_tol`.
    fn residual(&self, x: &[f64], g: &[f64]) -> f64;
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
    pub stagnated: bool,
    /// Objective value at the start and after every accepted step.
    #[cfg_attr(not(test), allow(dead_code))]
    pub trace: Vec<f64>,
}

pub(crate) fn minimize(
    obj: &impl Objective,
    x0: Vec<f64>,
    precond: &Preconditioner,
    cfg: &SolverConfig,
    max_iters: usize,
) -> Outcome {
    let mut x = x0;
    pin_boundary(&mut x);
    let mut x = obj.retract(x);
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x);
    pin_boundary(&mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iters = 0;
    let mut flat = 0;
    let mut trace = vec![f];

    loop {
        let residual = obj.residual(&x, &g);
        if residual <= cfg.grad_tol {
            return Outcome {
                x,
                value: f,
                residual,
                iters,
                converged: true,
                stagnated: false,
                trace,
            };
        }
        if iters >= max_iters {
            return Outcome {
                x,
                value: f,
                residual,
                iters,
                converged: false,
                stagnated: false,
                trace,
            };
        }
        iters += 1;

        let mut d = direction(&g, &history, precond);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = precond.solve(&g);
            d.iter_mut().for_each(|v| *v = -*v);
            slope = dot(&g, &d);
        }

        let mut alpha = cfg.armijo.initial_step;
        let accepted = loop {
            let mut trial = x.clone();
            axpy_into(&mut trial, alpha, &d);
            let trial = obj.retract(trial);
            let ft = obj.value(&trial);
            if ft.is_finite() && ft <= f + cfg.armijo.c1 * alpha * slope {
                break Some((trial, ft));
            }
            alpha *= cfg.armijo.shrink;
            if alpha < MIN_STEP {
                break None;
            }
        };
        if let Some((_, ft)) = &accepted {
            flat = if f - ft <= 4.0 * f64::EPSILON * f.abs() {
                flat + 1
            } else {
                0
            };
        }
        let accepted = accepted.filter(|_| flat < FLAT_STEPS);
        let Some((xn, fn_)) = accepted else {
            return Outcome {
                x,
                value: f,
                residual,
                iters,
                converged: false,
                stagnated: true,
                trace,
            };
        };

        let mut gn = obj.gradient(&xn);
        pin_boundary(&mut gn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fn_;
        g = gn;
        trace.push(f);
    }
}

/// Two-loop recursion with `H₀ = γ P⁻¹`.
fn direction(
    g: &[f64],
    history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    precond: &Preconditioner,
) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        axpy_into(&mut q, -a, y);
        alphas.push(a);
    }
    let mut r = precond.solve(&q);
    if let Some((_, y, rho)) = history.back() {
        let py = precond.solve(y);
        let gamma = 1.0 / (rho * dot(y, &py));
        r.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &r);
        axpy_into(&mut r, a - b, s);
    }
    r.iter_mut().for_each(|v| *v = -*v);
    pin_boundary(&mut r);
    r
}
