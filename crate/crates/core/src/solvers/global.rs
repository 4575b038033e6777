use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lbfgs::{self, Objective};
use super::linalg::{free_sup, pin_boundary, Preconditioner};
use super::newton::polish;
use super::{bump, check_inputs, check_resolved, SolveReport, SolverConfig};
use crate::energy::{grad_phi, phi, NonlinearitySpec};
use crate::error::{Result, SpsError};
use crate::grid::{Grid, RadialFn};
use crate::scaling::{classify_nonlinearity, Classification};

pub(crate) struct PhiObjective<'a> {
    pub grid: Arc<Grid>,
    pub f: &'a NonlinearitySpec,
}

impl PhiObjective<'_> {
    fn wrap(&self, x: &[f64]) -> RadialFn {
        RadialFn::from_parts(self.grid.clone(), x.to_vec())
    }
}

impl Objective for PhiObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        phi(&self.wrap(x), self.f).total
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        grad_phi(&self.wrap(x), self.f).into_values()
    }

    fn residual(&self, _x: &[f64], g: &[f64]) -> f64 {
        free_sup(g)
    }
}

/// `F ≤ 0` everywhere, so `Φ ≥ Φ(0) = 0`.
fn nonpositive_primitive(f: &NonlinearitySpec) -> bool {
    f.terms.iter().all(|t| t.coef <= 0.0) && f.saturating.is_none_or(|l| l <= 0.0)
}

fn require_coercive(f: &NonlinearitySpec) -> Result<()> {
    match classify_nonlinearity(f)? {
        Classification::Superscaled => Err(SpsError::Classification(
            "superscaled nonlinearity: Φ is unbounded below; use the mountain-pass solver".into(),
        )),
        _ => Ok(()),
    }
}

/// Lowest-energy Gaussian bump over a jittered (amplitude, dilation) table.
pub(crate) fn negative_seed(
    f: &NonlinearitySpec,
    grid: &Arc<Grid>,
    rng: &mut ChaCha8Rng,
) -> Option<RadialFn> {
    let t_min = 4.0 / grid.r_max();
    let mut best: Option<(f64, RadialFn)> = None;
    for k in 0..12 {
        let t = 2.0 * 0.7f64.powi(k) * rng.gen_range(0.9..1.1);
        if t < t_min {
            break;
        }
        for m in 0..10 {
            let amplitude = 0.02 * 2f64.powi(m) * rng.gen_range(0.9..1.1) / (t * t);
            let u = bump(grid, amplitude, t);
            let e = phi(&u, f).total;
            if e < 0.0 && best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, u));
            }
        }
    }
    best.map(|(_, u)| u)
}

fn trivial_report(
    grid: &Arc<Grid>,
    f: &NonlinearitySpec,
    cfg: &SolverConfig,
    why: &str,
) -> SolveReport {
    let zero = RadialFn::zeros(grid.clone());
    SolveReport::assemble(
        zero,
        f,
        None,
        0,
        true,
        vec![format!("trivial solution: {why}")],
        cfg,
    )
}

/// Global minimizer of `Φ` for coercive (non-superscaled) nonlinearities,
/// started from the lowest-energy bump found with `cfg.seed`.
pub fn minimize_global(
    f: &NonlinearitySpec,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    check_inputs(grid, cfg)?;
    require_coercive(f)?;
    if nonpositive_primitive(f) {
        return Ok(trivial_report(
            grid,
            f,
            cfg,
            "F ≤ 0, so 0 is the global minimizer",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match negative_seed(f, grid, &mut rng) {
        Some(u0) => minimize_global_from(f, &u0, cfg),
        None => Ok(trivial_report(
            grid,
            f,
            cfg,
            "no bump with negative energy; descent would end at 0",
        )),
    }
}

/// Armijo-backtracked L-BFGS descent on `Φ` from `initial`, followed by a
/// Newton polish if the line search stalls before `grad_tol`.
pub fn minimize_global_from(
    f: &NonlinearitySpec,
    initial: &RadialFn,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let grid = initial.grid().clone();
    check_inputs(&grid, cfg)?;
    require_coercive(f)?;
    let obj = PhiObjective {
        grid: grid.clone(),
        f,
    };
    let precond = Preconditioner::new(&grid, 1.0);
    let mut x0 = initial.values().to_vec();
    pin_boundary(&mut x0);
    let out = lbfgs::minimize(&obj, x0, &precond, cfg, cfg.max_iters);
    if !out.value.is_finite() {
        return Err(SpsError::DegenerateDescent("energy diverged".into()));
    }
    let mut warnings = Vec::new();
    let mut u = RadialFn::from_parts(grid.clone(), out.x);
    let mut iters = out.iters;
    let mut converged = out.converged;
    if !converged {
        let p = polish(u, f, &precond, cfg.grad_tol, 30);
        u = p.u;
        iters += p.iters;
        converged = p.converged;
        if !converged {
            warnings.push(if out.stagnated {
                format!(
                    "stagnation: line search failed at residual {:.3e}",
                    out.residual
                )
            } else {
                format!(
                    "max_iters = {} reached at residual {:.3e}",
                    cfg.max_iters, out.residual
                )
            });
        }
    }
    if u.sup_norm() <= 1e-8 * initial.sup_norm().max(1e-300) {
        warnings.push("trivial solution: descent collapsed to 0".into());
    } else if let Err(why) = check_resolved(&u) {
        return Err(SpsError::DegenerateDescent(format!(
            "descent concentrated below the grid resolution ({why}); \
             the energy is unbounded below along dilations"
        )));
    }
    Ok(SolveReport::assemble(
        u, f, None, iters, converged, warnings, cfg,
    ))
}
