//! Newton polish of critical points of `Φ`, with MINRES inner solves so
//! that saddle points (indefinite Hessians) are handled too.

use super::linalg::{dot, free_sup, minres, pin_boundary, Preconditioner};
use crate::energy::{grad_phi, hess_phi_apply, NonlinearitySpec};
use crate::grid::RadialFn;

const INNER_RTOL: f64 = 1e-9;
const INNER_ITERS: usize = 600;

pub(crate) fn gradient(u: &RadialFn, f: &NonlinearitySpec) -> Vec<f64> {
    let mut g = grad_phi(u, f).into_values();
    pin_boundary(&mut g);
    g
}

/// Newton direction `H δ = −g` on the free nodes.
pub(crate) fn newton_step(
    u: &RadialFn,
    f: &NonlinearitySpec,
    g: &[f64],
    precond: &Preconditioner,
) -> Vec<f64> {
    let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
    minres(
        |v| {
            let mut hv = hess_phi_apply(u, f, v);
            pin_boundary(&mut hv);
            hv
        },
        |r| precond.solve(r),
        &rhs,
        INNER_RTOL,
        INNER_ITERS,
    )
}

/// Dual norm `√(gᵀ P⁻¹ g)`, the merit function of the polish.
pub(crate) fn merit(g: &[f64], precond: &Preconditioner) -> f64 {
    dot(g, &precond.solve(g)).max(0.0).sqrt()
}

pub(crate) struct Polished {
    pub u: RadialFn,
    pub iters: usize,
    pub converged: bool,
}

/// Damped Newton on `∇Φ = 0` until the free-node sup norm of the gradient
/// is at most `tol`.
pub(crate) fn polish(
    u: RadialFn,
    f: &NonlinearitySpec,
    precond: &Preconditioner,
    tol: f64,
    max_steps: usize,
) -> Polished {
    let mut u = u;
    let mut g = gradient(&u, f);
    let mut m = merit(&g, precond);
    for k in 0..max_steps {
        if free_sup(&g) <= tol {
            return Polished {
                u,
                iters: k,
                converged: true,
            };
        }
        let delta = newton_step(&u, f, &g, precond);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1.0 / 64.0 {
            let trial = u.axpy(alpha, &delta);
            let gt = gradient(&trial, f);
            let mt = merit(&gt, precond);
            if mt.is_finite() && mt < (1.0 - 1e-4 * alpha) * m {
                accepted = Some((trial, gt, mt));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((un, gn, mn)) => {
                u = un;
                g = gn;
                m = mn;
            }
            None => {
                return Polished {
                    u,
                    iters: k,
                    converged: false,
                }
            }
        }
    }
    let converged = free_sup(&g) <= tol;
    Polished {
        u,
        iters: max_steps,
        converged,
    }
}
