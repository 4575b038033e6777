//! Numerical realizations of the solution regimes: the first scaled
//! eigenvalue, negative-energy minimizers, mountain-pass critical points
//! and a deflated search for several distinct solutions.
//!
//! Every solve is single-threaded and deterministic given its inputs. The
//! last grid node carries the Dirichlet condition `u(r_max) = 0`; the
//! stationarity test runs over the remaining (free) nodes.

mod deflation;
mod eigen;
mod global;
mod lbfgs;
mod linalg;
mod mountain;
mod newton;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::energy::{
    grad_phi, identity_residuals, phi, EnergyBreakdown, IdentityResiduals, NonlinearitySpec,
};
use crate::error::{Result, SpsError};
use crate::grid::{Grid, RadialFn};

pub use deflation::{deflated_search, deflated_search_from, DeflatedSearch, MIN_SEPARATION};
pub use eigen::{
    eigen_family_check, minimize_eigen, minimize_eigen_from, FamilyMember, FamilyReport,
};
pub use global::{minimize_global, minimize_global_from};
pub use mountain::mountain_pass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmijoConfig {
    pub initial_step: f64,
    pub shrink: f64,
    pub c1: f64,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            c1: 1e-4,
        }
    }
}

/// Deflation factor `Π_j (1/‖u − u_j‖² + shift)^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeflationConfig {
    pub shift: f64,
    pub power: f64,
}

impl Default for DeflationConfig {
    fn default() -> Self {
        Self {
            shift: 1.0,
            power: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Sup-norm bound on the gradient over the free nodes.
    pub grad_tol: f64,
    pub armijo: ArmijoConfig,
    pub seed: u64,
    pub path_nodes: usize,
    pub deflation: DeflationConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 4000,
            grad_tol: 1e-6,
            armijo: ArmijoConfig::default(),
            seed: 0,
            path_nodes: 16,
            deflation: DeflationConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SpsError::Config(msg));
        if self.max_iters < 1 {
            return bad("solver.max_iters must be at least 1".into());
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return bad(format!(
                "solver.grad_tol = {} must be positive",
                self.grad_tol
            ));
        }
        let a = &self.armijo;
        if !(a.initial_step.is_finite() && a.initial_step > 0.0) {
            return bad(format!(
                "solver.armijo.initial_step = {} must be positive",
                a.initial_step
            ));
        }
        if !(a.shrink > 0.0 && a.shrink < 1.0) {
            return bad(format!(
                "solver.armijo.shrink = {} must lie in (0, 1)",
                a.shrink
            ));
        }
        if !(a.c1 > 0.0 && a.c1 < 1.0) {
            return bad(format!("solver.armijo.c1 = {} must lie in (0, 1)", a.c1));
        }
        if self.path_nodes < 8 {
            return bad(format!(
                "solver.path_nodes = {} must be at least 8",
                self.path_nodes
            ));
        }
        let d = &self.deflation;
        if !(d.shift.is_finite() && d.shift >= 0.0) {
            return bad(format!(
                "solver.deflation.shift = {} must be nonnegative",
                d.shift
            ));
        }
        if !(d.power.is_finite() && d.power > 0.0) {
            return bad(format!(
                "solver.deflation.power = {} must be positive",
                d.power
            ));
        }
        Ok(())
    }
}

/// Relative bound on the tested and Pohožaev residuals of a solution.
pub const RESIDUAL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: RadialFn,
    pub energy: EnergyBreakdown,
    pub lambda: Option<f64>,
    /// `"lambda_1"` for the constrained minimum; other eigenvalues found
    /// by the searches are unindexed.
    pub label: Option<String>,
    pub grad_sup_norm: f64,
    pub residuals: IdentityResiduals,
    pub iters: usize,
    pub converged: bool,
    /// The zero function was returned.
    pub trivial: bool,
    pub warnings: Vec<String>,
}

impl SolveReport {
    fn assemble(
        u: RadialFn,
        f: &NonlinearitySpec,
        lambda: Option<f64>,
        iters: usize,
        converged: bool,
        warnings: Vec<String>,
        cfg: &SolverConfig,
    ) -> Self {
        let mut g = grad_phi(&u, f).into_values();
        linalg::pin_boundary(&mut g);
        let grad_sup_norm = linalg::free_sup(&g);
        let energy = phi(&u, f);
        let residuals = identity_residuals(&u, f, lambda);
        let trivial = u.is_zero();
        let converged = converged && grad_sup_norm <= cfg.grad_tol;
        let mut warnings = warnings;
        let worst = residuals.tested_rel.max(residuals.pohozaev_rel);
        if converged && !trivial && worst > RESIDUAL_TOL {
            warnings.push(format!(
                "truncation: identity residual {worst:.3e} exceeds {RESIDUAL_TOL:e}; \
                 the solution has not decayed by r_max = {}",
                u.grid().r_max()
            ));
        }
        Self {
            energy,
            lambda,
            label: None,
            grad_sup_norm,
            residuals,
            iters,
            converged,
            trivial,
            warnings,
            solution: u,
        }
    }
}

/// A solution whose root-mean-square radius spans fewer grid spacings than
/// this is a grid artefact.
const MIN_RMS_SPACINGS: f64 = 4.0;

/// Root-mean-square radius `(∫ r² u² / ∫ u²)^{1/2}`.
pub(crate) fn rms_radius(u: &RadialFn) -> f64 {
    let g = u.grid();
    let m: f64 = g.integrate_unchecked(u.values().iter().map(|v| v * v));
    let r2: f64 =
        g.integrate_unchecked(u.values().iter().zip(g.nodes()).map(|(v, r)| v * v * r * r));
    (r2 / m).sqrt()
}

/// `Err` with the offending radius and spacing if `u` concentrates below
/// the grid resolution.
pub(crate) fn check_resolved(u: &RadialFn) -> std::result::Result<(), String> {
    let rms = rms_radius(u);
    let nodes = u.grid().nodes();
    let i = nodes
        .partition_point(|&r| r < rms)
        .clamp(1, nodes.len() - 1);
    let h = nodes[i] - nodes[i - 1];
    if rms >= MIN_RMS_SPACINGS * h {
        Ok(())
    } else {
        Err(format!("rms radius {rms:.3e} against grid spacing {h:.3e}"))
    }
}

/// `A t² exp(−(t r)² / 2)`, with the value at `r_max` pinned to zero.
pub(crate) fn bump(grid: &Arc<Grid>, amplitude: f64, t: f64) -> RadialFn {
    let mut v: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|r| amplitude * t * t * (-(t * r) * (t * r) / 2.0).exp())
        .collect();
    linalg::pin_boundary(&mut v);
    RadialFn::from_parts(grid.clone(), v)
}

/// Random bump parameters `(amplitude, t)` in the validated scaling range.
pub(crate) fn random_bump(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> RadialFn {
    let t = rng.gen_range(0.5..2.0);
    let amplitude = rng.gen_range(0.5..1.5);
    bump(grid, amplitude, t)
}

fn check_inputs(grid: &Grid, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if grid.n() < 16 {
        return Err(SpsError::Config("grid too small for the solvers".into()));
    }
    Ok(())
}
