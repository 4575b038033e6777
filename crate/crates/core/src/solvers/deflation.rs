//! Deflated Newton search for several distinct critical points.
//!
//! The residual `∇Φ(u)` is multiplied by `M(u) = Π_j (1/‖u − u_j‖² + α)^p`
//! over the known solutions (both signs, and the origin), so Newton can no
//! longer converge to them. The deflated Newton step is the plain one
//! rescaled by `1 / (1 − ⟨∇ log M, δ⟩)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{dot, free_sup, pin_boundary, Preconditioner};
use super::newton::{gradient, merit, newton_step, polish};
use super::{
    check_inputs, check_resolved, minimize_global, mountain_pass, rms_radius, SolveReport,
    SolverConfig,
};
use crate::energy::{phi, NonlinearitySpec};
use crate::error::{Result, SpsError};
use crate::grid::{Grid, RadialFn};
use crate::scaling::{classify_nonlinearity, Classification};

/// Minimum weighted L² distance between reported solutions (and their
/// sign flips).
pub const MIN_SEPARATION: f64 = 1e-2;
const SEEDS: usize = 24;
const NEWTON_STEPS: usize = 80;
const POLISH_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflatedSearch {
    pub reports: Vec<SolveReport>,
    /// Fewer than the requested number of solutions were found.
    pub exhausted: bool,
    /// Weighted L² distances between the reported solutions, taken as the
    /// minimum over the sign of the second argument.
    pub distances: Vec<Vec<f64>>,
}

struct Deflation<'a> {
    known: &'a [RadialFn],
    weights: &'a [f64],
    shift: f64,
    power: f64,
}

impl Deflation<'_> {
    fn targets(&self) -> impl Iterator<Item = (f64, &RadialFn)> {
        self.known.iter().flat_map(|u| [(1.0, u), (-1.0, u)])
    }

    fn dist_sq(&self, x: &[f64], sign: f64, u: &RadialFn) -> f64 {
        x.iter()
            .zip(u.values())
            .zip(self.weights)
            .map(|((a, b), w)| w * (a - sign * b).powi(2))
            .sum()
    }

    fn origin_sq(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.weights).map(|(a, w)| w * a * a).sum()
    }

    fn factor(&self, x: &[f64]) -> f64 {
        let mut m = (1.0 / self.origin_sq(x) + self.shift).powf(self.power);
        for (sign, u) in self.targets() {
            m *= (1.0 / self.dist_sq(x, sign, u) + self.shift).powf(self.power);
        }
        m
    }

    /// `∇ log M` in node coordinates.
    fn log_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let mut add = |d2: f64, diff: &dyn Fn(usize) -> f64| {
            let c = -2.0 * self.power / (d2 * (1.0 + self.shift * d2));
            for (i, o) in out.iter_mut().enumerate() {
                *o += c * self.weights[i] * diff(i);
            }
        };
        add(self.origin_sq(x), &|i| x[i]);
        for (sign, u) in self.targets() {
            let d2 = self.dist_sq(x, sign, u);
            let v = u.values();
            add(d2, &|i| x[i] - sign * v[i]);
        }
        out
    }
}

/// Deflated Newton from `seed`; returns the end point if the plain
/// gradient dropped to `tol`.
fn deflated_newton(
    seed: RadialFn,
    f: &NonlinearitySpec,
    deflation: &Deflation,
    precond: &Preconditioner,
    tol: f64,
) -> Option<RadialFn> {
    let mut u = seed;
    let mut g = gradient(&u, f);
    let mut score = deflation.factor(u.values()) * merit(&g, precond);
    for _ in 0..NEWTON_STEPS {
        if free_sup(&g) <= tol {
            return Some(u);
        }
        let delta = newton_step(&u, f, &g, precond);
        let eta = deflation.log_gradient(u.values());
        let beta = 1.0 / (1.0 - dot(&eta, &delta));
        let beta = if beta.is_finite() {
            beta.clamp(-1e3, 1e3)
        } else {
            1.0
        };
        let mut alpha = 1.0;
        let mut next = None;
        while alpha >= 1.0 / 256.0 {
            let trial = u.axpy(alpha * beta, &delta);
            let gt = gradient(&trial, f);
            let st = deflation.factor(trial.values()) * merit(&gt, precond);
            if st.is_finite() && st < score {
                next = Some((trial, gt, st));
                break;
            }
            alpha *= 0.5;
        }
        let (un, gn, sn) = next?;
        u = un;
        g = gn;
        score = sn;
    }
    (free_sup(&g) <= tol).then_some(u)
}

/// Seeds near the size of the known solutions: positive bumps, bumps with
/// one sign change, and dilated or amplified copies of known solutions.
fn seeds(grid: &Arc<Grid>, known: &[RadialFn], rng: &mut ChaCha8Rng) -> Vec<RadialFn> {
    let (amp, width) = match known.first() {
        Some(u) => (u.sup_norm(), rms_radius(u) / 3f64.sqrt()),
        None => (1.0, 1.0),
    };
    let width = width.min(grid.r_max() / 5.0);
    let mut out = Vec::with_capacity(SEEDS);
    for k in 0..SEEDS {
        let a = amp * rng.gen_range(0.5..2.0);
        let s = width * rng.gen_range(0.6..1.8);
        let node = s * rng.gen_range(0.5..1.5);
        let u = match k % 3 {
            0 => RadialFn::from_fn(grid.clone(), |r| a * (-(r * r) / (2.0 * s * s)).exp()),
            1 => RadialFn::from_fn(grid.clone(), |r| {
                a * (1.0 - (r / node).powi(2)) * (-(r * r) / (2.0 * s * s)).exp()
            }),
            _ => match known.get((k / 3) % known.len().max(1)) {
                // flip the sign of a known solution inside r < node
                Some(base) => {
                    let c = rng.gen_range(0.5..1.5);
                    let v = base
                        .values()
                        .iter()
                        .zip(grid.nodes())
                        .map(|(u, r)| if *r < node { -c * u } else { c * u })
                        .collect();
                    Ok(RadialFn::from_parts(grid.clone(), v))
                }
                None => RadialFn::from_fn(grid.clone(), |r| a * (-(r * r) / (2.0 * s * s)).exp()),
            },
        };
        if let Ok(u) = u {
            let mut v = u.into_values();
            pin_boundary(&mut v);
            out.push(RadialFn::from_parts(grid.clone(), v));
        }
    }
    out
}

fn separation(a: &RadialFn, b: &RadialFn) -> f64 {
    let w = a.grid().weights();
    let d = |sign: f64| {
        a.values()
            .iter()
            .zip(b.values())
            .zip(w)
            .map(|((x, y), w)| w * (x - sign * y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    d(1.0).min(d(-1.0))
}

/// Up to `k` distinct solutions: the base solver for the class of `f`
/// (global minimization or mountain pass) followed by deflated Newton runs
/// from deterministic seeds. When the base solution is a minimizer at a
/// negative level, only further solutions with negative energy are kept.
pub fn deflated_search(
    f: &NonlinearitySpec,
    k: usize,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<DeflatedSearch> {
    check_inputs(grid, cfg)?;
    if k == 0 {
        return Err(SpsError::Config("deflated search needs k ≥ 1".into()));
    }
    let base = if classify_nonlinearity(f)? == Classification::Superscaled {
        mountain_pass(f, grid, cfg)?
    } else {
        minimize_global(f, grid, cfg)?
    };
    deflated_search_from(f, k, grid, cfg, Some(base))
}

/// Deflated Newton search around an optional first solution. Without one,
/// every reported solution comes from deflated Newton; this is the route
/// for energies with no usable minimizer or mountain-pass geometry.
pub fn deflated_search_from(
    f: &NonlinearitySpec,
    k: usize,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    base: Option<SolveReport>,
) -> Result<DeflatedSearch> {
    check_inputs(grid, cfg)?;
    if k == 0 {
        return Err(SpsError::Config("deflated search needs k ≥ 1".into()));
    }
    let superscaled = classify_nonlinearity(f)? == Classification::Superscaled;
    // below a negative-level minimizer only further negative levels count
    let negative_only = base
        .as_ref()
        .is_some_and(|b| !superscaled && !b.trivial && b.energy.total < 0.0);
    let mut known: Vec<RadialFn> = Vec::new();
    let mut reports = Vec::new();
    if let Some(base) = base {
        if !base.trivial {
            known.push(base.solution.clone());
        }
        reports.push(base);
    }

    if reports.len() < k {
        let precond = Preconditioner::new(grid, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0005_eed0_fdef_1a7e);
        let weights = grid.weights().to_vec();
        let mut pool = seeds(grid, &known, &mut rng);
        let mut next = 0;
        while reports.len() < k && next < pool.len() {
            let seed = pool[next].clone();
            next += 1;
            let deflation = Deflation {
                known: &known,
                weights: &weights,
                shift: cfg.deflation.shift,
                power: cfg.deflation.power,
            };
            let Some(found) = deflated_newton(seed, f, &deflation, &precond, cfg.grad_tol) else {
                continue;
            };
            let p = polish(found, f, &precond, cfg.grad_tol, POLISH_STEPS);
            let scale = known.first().map_or(1.0, RadialFn::sup_norm);
            if !p.converged || p.u.sup_norm() <= 1e-6 * scale {
                continue;
            }
            if known.iter().any(|u| separation(u, &p.u) < MIN_SEPARATION) {
                continue;
            }
            if negative_only && phi(&p.u, f).total >= 0.0 {
                continue;
            }
            if check_resolved(&p.u).is_err() {
                continue;
            }
            if known.is_empty() {
                // first nontrivial solution sets the seed scale
                pool.extend(seeds(grid, std::slice::from_ref(&p.u), &mut rng));
            }
            known.push(p.u.clone());
            let mut report = SolveReport::assemble(p.u, f, None, p.iters, true, Vec::new(), cfg);
            report.warnings.push("found by deflated Newton".into());
            reports.push(report);
        }
    }

    let exhausted = reports.len() < k;
    let distances = reports
        .iter()
        .map(|a| {
            reports
                .iter()
                .map(|b| separation(&a.solution, &b.solution))
                .collect()
        })
        .collect();
    Ok(DeflatedSearch {
        reports,
        exhausted,
        distances,
    })
}
