//! Vector helpers, the tridiagonal preconditioner and preconditioned MINRES.
//!
//! All vectors live on the full node set; the last node carries the
//! Dirichlet condition and is kept at zero by every routine here.

use crate::grid::Grid;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy_into(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Sup norm over the free nodes (all but the Dirichlet node).
pub(crate) fn free_sup(v: &[f64]) -> f64 {
    v[..v.len() - 1].iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn pin_boundary(v: &mut [f64]) {
    if let Some(last) = v.last_mut() {
        *last = 0.0;
    }
}

/// `K + shift · M` with `K` the piecewise-linear stiffness on the mapped
/// grid and `M = diag(w)`, restricted to the free nodes and factored once.
pub(crate) struct Preconditioner {
    diag: Vec<f64>,
    // off-diagonal entry between free nodes i and i + 1
    off: Vec<f64>,
    // LDLᵀ of the tridiagonal matrix: unit lower band and pivots
    lower: Vec<f64>,
    pivots: Vec<f64>,
}

impl Preconditioner {
    pub(crate) fn new(grid: &Grid, shift: f64) -> Self {
        let n = grid.n();
        let free = n - 1;
        let s = grid.stiffness();
        let w = grid.weights();
        let diag: Vec<f64> = (0..free)
            .map(|i| {
                let left = if i > 0 { s[i - 1] } else { 0.0 };
                left + s[i] + shift * w[i]
            })
            .collect();
        let off: Vec<f64> = (0..free - 1).map(|i| -s[i]).collect();
        let mut lower = vec![0.0; free];
        let mut pivots = vec![0.0; free];
        pivots[0] = diag[0];
        for i in 1..free {
            lower[i] = off[i - 1] / pivots[i - 1];
            pivots[i] = diag[i] - lower[i] * off[i - 1];
        }
        Self {
            diag,
            off,
            lower,
            pivots,
        }
    }

    /// `vᵀ P v`, an H¹-type squared norm on the free nodes.
    pub(crate) fn norm_sq(&self, v: &[f64]) -> f64 {
        let free = self.diag.len();
        let mut total = 0.0;
        for i in 0..free {
            total += self.diag[i] * v[i] * v[i];
            if i + 1 < free {
                total += 2.0 * self.off[i] * v[i] * v[i + 1];
            }
        }
        total
    }

    /// `P⁻¹ g` on the free nodes, zero on the Dirichlet node.
    pub(crate) fn solve(&self, g: &[f64]) -> Vec<f64> {
        let free = self.pivots.len();
        let mut x = vec![0.0; free + 1];
        x[0] = g[0];
        for i in 1..free {
            x[i] = g[i] - self.lower[i] * x[i - 1];
        }
        for i in 0..free {
            x[i] /= self.pivots[i];
        }
        for i in (0..free - 1).rev() {
            x[i] -= self.lower[i + 1] * x[i + 1];
        }
        x
    }
}

/// Preconditioned MINRES for a symmetric (possibly indefinite) operator,
/// with the SPD preconditioner `m_inv`. Stops when the preconditioned
/// residual drops by `rtol`.
pub(crate) fn minres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    m_inv: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = m_inv(&r1);
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return x;
    }
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = apply(&v);
        if itn >= 2 {
            axpy_into(&mut y, -beta / oldb, &r1);
        }
        let alfa = dot(&v, &y);
        axpy_into(&mut y, -alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, y);
        y = m_inv(&r2);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            // preconditioner lost definiteness numerically
            break;
        }
        beta = bb.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w);
        let mut wn = v;
        for i in 0..n {
            wn[i] = (wn[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy_into(&mut x, phi, &wn);
        w = wn;

        if phibar <= rtol * beta1 || beta == 0.0 {
            break;
        }
    }
    x
}
