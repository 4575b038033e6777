//! Path-peak descent for mountain-pass critical points (Choi–McKenna), with
//! a Newton–MINRES polish once the peak is close to the saddle.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{axpy_into, dot, free_sup, Preconditioner};
use super::newton::{gradient, polish};
use super::{bump, check_inputs, SolveReport, SolverConfig};
use crate::energy::{phi, NonlinearitySpec};
use crate::error::{Result, SpsError};
use crate::grid::{Grid, RadialFn};
use crate::scaling::{classify_nonlinearity, Classification};

const GOLDEN_STEPS: usize = 40;
const POLISH_STEPS: usize = 40;
/// A bump must span this many grid spacings at its half width.
const MIN_RESOLUTION: f64 = 12.0;
/// Redistribute once adjacent segments differ by more than this ratio.
const SPACING_RATIO: f64 = 3.0;
/// Iterations without a relative level decrease of `STALL_DROP` before a
/// polish is attempted.
const STALL_ITERS: usize = 20;
const STALL_DROP: f64 = 1e-9;

struct Path<'a> {
    grid: Arc<Grid>,
    f: &'a NonlinearitySpec,
    nodes: Vec<Vec<f64>>,
    energies: Vec<f64>,
}

impl<'a> Path<'a> {
    fn energy(&self, x: &[f64]) -> f64 {
        phi(&RadialFn::from_parts(self.grid.clone(), x.to_vec()), self.f).total
    }

    fn straight(grid: Arc<Grid>, f: &'a NonlinearitySpec, end: &[f64], count: usize) -> Self {
        let nodes: Vec<Vec<f64>> = (0..count)
            .map(|k| {
                let s = k as f64 / (count - 1) as f64;
                end.iter().map(|v| s * v).collect()
            })
            .collect();
        let mut path = Self {
            grid,
            f,
            nodes,
            energies: Vec::new(),
        };
        path.energies = path.nodes.iter().map(|x| path.energy(x)).collect();
        path
    }

    fn peak(&self) -> usize {
        let last = self.nodes.len() - 1;
        (1..last)
            .max_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]))
            .unwrap_or(1)
    }

    fn point(&self, j: usize, s: f64) -> Vec<f64> {
        // piecewise-linear path through nodes j-1, j, j+1; s ∈ [0, 2]
        let (a, b, s) = if s <= 1.0 {
            (&self.nodes[j - 1], &self.nodes[j], s)
        } else {
            (&self.nodes[j], &self.nodes[j + 1], s - 1.0)
        };
        a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
    }

    /// Golden-section maximum of `Φ` on the two segments around node `j`.
    fn refine_peak(&self, j: usize) -> (Vec<f64>, f64) {
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (0.0, 2.0);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let mut f1 = self.energy(&self.point(j, x1));
        let mut f2 = self.energy(&self.point(j, x2));
        for _ in 0..GOLDEN_STEPS {
            if f1 > f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = self.energy(&self.point(j, x1));
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = self.energy(&self.point(j, x2));
            }
        }
        let best = if f1 > f2 { x1 } else { x2 };
        let candidate = self.point(j, best);
        let e = self.energy(&candidate);
        if e >= self.energies[j] {
            (candidate, e)
        } else {
            (self.nodes[j].clone(), self.energies[j])
        }
    }

    fn segments(&self, precond: &Preconditioner) -> Vec<f64> {
        self.nodes
            .windows(2)
            .map(|p| {
                let d: Vec<f64> = p[1].iter().zip(&p[0]).map(|(a, b)| a - b).collect();
                precond.norm_sq(&d).max(0.0).sqrt()
            })
            .collect()
    }

    fn uneven(&self, precond: &Preconditioner) -> bool {
        let seg = self.segments(precond);
        let lo = seg.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = seg.iter().copied().fold(0.0, f64::max);
        hi > SPACING_RATIO * lo
    }

    /// Re-spaces the interior nodes uniformly in the `P`-norm arclength.
    fn redistribute(&mut self, precond: &Preconditioner) {
        let count = self.nodes.len();
        let mut arc = vec![0.0; count];
        for (k, len) in self.segments(precond).into_iter().enumerate() {
            arc[k + 1] = arc[k] + len;
        }
        let total = arc[count - 1];
        if !(total > 0.0) {
            return;
        }
        let mut fresh = Vec::with_capacity(count);
        fresh.push(self.nodes[0].clone());
        let mut seg = 1;
        for k in 1..count - 1 {
            let target = total * k as f64 / (count - 1) as f64;
            while seg < count - 1 && arc[seg] < target {
                seg += 1;
            }
            let span = arc[seg] - arc[seg - 1];
            let s = if span > 0.0 {
                (target - arc[seg - 1]) / span
            } else {
                0.0
            };
            let a = &self.nodes[seg - 1];
            let b = &self.nodes[seg];
            fresh.push(a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect());
        }
        fresh.push(self.nodes[count - 1].clone());
        self.nodes = fresh;
        self.energies = self.nodes.iter().map(|x| self.energy(x)).collect();
    }
}

/// Endpoint with `Φ < 0`: dilate a random bump `A t² e^{−(t r)²/2}` with
/// growing `t` until the energy turns negative, as long as the bump stays
/// resolved by the grid.
fn endpoint(f: &NonlinearitySpec, grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Option<RadialFn> {
    let nodes = grid.nodes();
    for _ in 0..8 {
        let amplitude = rng.gen_range(0.5..2.0);
        let mut t: f64 = rng.gen_range(0.5..1.0);
        loop {
            let width = 1.0 / t;
            let i = nodes.partition_point(|&r| r < width).max(1);
            let h = nodes[i] - nodes[i - 1];
            if width < MIN_RESOLUTION * h || width > 0.25 * grid.r_max() {
                break;
            }
            let u = bump(grid, amplitude, t);
            if phi(&u, f).total < 0.0 {
                return Some(u);
            }
            t *= 1.25;
        }
    }
    None
}

/// Mountain-pass critical point of `Φ` for superscaled nonlinearities.
pub fn mountain_pass(
    f: &NonlinearitySpec,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    check_inputs(grid, cfg)?;
    if classify_nonlinearity(f)? != Classification::Superscaled {
        return Err(SpsError::Classification(
            "mountain pass needs a superscaled nonlinearity with positive leading coefficient"
                .into(),
        ));
    }
    let precond = Preconditioner::new(grid, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let end = endpoint(f, grid, &mut rng).ok_or_else(|| {
        SpsError::Geometry("no resolvable endpoint with negative energy along the dilation".into())
    })?;
    let mut path = Path::straight(grid.clone(), f, end.values(), cfg.path_nodes);
    let scale = end.sup_norm();

    let mut switch_tol: Option<f64> = None;
    let mut warnings = Vec::new();
    let mut best_level = f64::INFINITY;
    let mut stalled = 0;
    for iter in 1..=cfg.max_iters {
        let j = path.peak();
        let (peak, level) = path.refine_peak(j);
        if level < best_level * (1.0 - STALL_DROP) {
            best_level = level;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if !(level > 0.0) || free_sup(&peak) <= 1e-8 * scale {
            return Err(SpsError::Geometry(format!(
                "path collapsed onto the origin at iteration {iter} (peak level {level:.3e})"
            )));
        }
        let g = gradient(&RadialFn::from_parts(grid.clone(), peak.clone()), f);
        let res = free_sup(&g);
        let tol = *switch_tol.get_or_insert(1e-2 * res);
        if res <= tol.max(cfg.grad_tol) || stalled >= STALL_ITERS {
            stalled = 0;
            let start = RadialFn::from_parts(grid.clone(), peak.clone());
            let p = polish(start, f, &precond, cfg.grad_tol, POLISH_STEPS);
            let e = phi(&p.u, f).total;
            if p.converged && e > 0.0 && e <= level * (1.0 + 1e-6) && p.u.sup_norm() > 1e-6 * scale
            {
                return Ok(SolveReport::assemble(
                    p.u,
                    f,
                    None,
                    iter + p.iters,
                    true,
                    warnings,
                    cfg,
                ));
            }
            switch_tol = Some(0.1 * tol.min(res));
        }

        let mut d = precond.solve(&g);
        d.iter_mut().for_each(|v| *v = -*v);
        let slope = dot(&g, &d);
        // never move the peak further than a local path segment
        let seg = path.segments(&precond);
        let local = 0.5 * (seg[j - 1] + seg[j]);
        let mut alpha = cfg
            .armijo
            .initial_step
            .min(local / precond.norm_sq(&d).max(f64::MIN_POSITIVE).sqrt());
        let moved = loop {
            let mut trial = peak.clone();
            axpy_into(&mut trial, alpha, &d);
            let e = path.energy(&trial);
            if e.is_finite() && e <= level + cfg.armijo.c1 * alpha * slope {
                break Some((trial, e));
            }
            alpha *= cfg.armijo.shrink;
            if alpha < super::lbfgs::MIN_STEP {
                break None;
            }
        };
        let Some((moved, e)) = moved else {
            warnings.push(format!(
                "stagnation: peak descent stalled at residual {res:.3e}"
            ));
            break;
        };
        path.nodes[j] = moved;
        path.energies[j] = e;
        if path.uneven(&precond) {
            path.redistribute(&precond);
        }
    }

    let j = path.peak();
    let (peak, _) = path.refine_peak(j);
    let p = polish(
        RadialFn::from_parts(grid.clone(), peak),
        f,
        &precond,
        cfg.grad_tol,
        POLISH_STEPS,
    );
    warnings.push(format!(
        "path descent ended after {} iterations",
        cfg.max_iters
    ));
    Ok(SolveReport::assemble(
        p.u,
        f,
        None,
        cfg.max_iters,
        p.converged,
        warnings,
        cfg,
    ))
}
