use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lbfgs::{self, Objective};
use super::linalg::{free_sup, pin_boundary, Preconditioner};
use super::{check_inputs, random_bump, SolveReport, SolverConfig};
use crate::energy::{
    coulomb, dirichlet, grad_coulomb, grad_dirichlet, grad_j_s, grad_phi, i_s, j_s,
    NonlinearitySpec,
};
use crate::error::{Result, SpsError};
use crate::grid::{Grid, RadialFn};
use crate::scaling::{scale_with_loss, COMPOSED_RANGE};

/// `G(u) = 1 / J_s(τ(u) u)` where `τ(u) u` is the amplitude normalization
/// onto `{I_s = 1}`. Invariant under `u ↦ c u`, so iterates are renormalized
/// after every step without changing the objective.
struct EigenObjective {
    grid: Arc<Grid>,
}

struct Parts {
    a: f64,
    c: f64,
    j: f64,
    tau: f64,
}

impl EigenObjective {
    fn wrap(&self, x: &[f64]) -> RadialFn {
        RadialFn::from_parts(self.grid.clone(), x.to_vec())
    }

    fn parts(&self, u: &RadialFn) -> Parts {
        let a = dirichlet(u);
        let c = coulomb(u);
        let j = j_s(u);
        let tau = (2.0 / (a + (a * a + 4.0 * c).sqrt())).sqrt();
        Parts { a, c, j, tau }
    }
}

/// Lagrange multiplier of `max J_s` on `{I_s = 1}` at `u`: pairing the
/// stationarity condition `∇I_s = λ ∇J_s` with `u` gives
/// `λ = (2a + 4c) / (3 J_s)`.
fn multiplier(a: f64, c: f64, j: f64) -> f64 {
    (2.0 * a + 4.0 * c) / (3.0 * j)
}

impl Objective for EigenObjective {
    fn value(&self, x: &[f64]) -> f64 {
        let p = self.parts(&self.wrap(x));
        if p.j == 0.0 || !p.tau.is_finite() {
            return f64::INFINITY;
        }
        1.0 / (p.tau.powi(3) * p.j)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let u = self.wrap(x);
        let Parts { a, c, j, tau } = self.parts(&u);
        let g_val = 1.0 / (tau.powi(3) * j);
        let ga = grad_dirichlet(&u);
        let gc = grad_coulomb(&u);
        let gj = grad_j_s(&u);
        let t2 = tau * tau;
        let t4 = t2 * t2;
        let denom = 2.0 * tau * a + 4.0 * tau * t2 * c;
        (0..x.len())
            .map(|i| {
                let dtau = -(t2 * ga[i] + t4 * gc[i]) / denom;
                let dh = 3.0 * t2 * j * dtau + tau * t2 * gj[i];
                -g_val * g_val * dh
            })
            .collect()
    }

    fn retract(&self, x: Vec<f64>) -> Vec<f64> {
        let u = self.wrap(&x);
        let p = self.parts(&u);
        if p.a + p.c == 0.0 || !p.tau.is_finite() {
            return x;
        }
        x.into_iter().map(|v| v * p.tau).collect()
    }

    fn residual(&self, x: &[f64], _g: &[f64]) -> f64 {
        let u = self.wrap(x);
        let Parts { a, c, j, .. } = self.parts(&u);
        if j == 0.0 {
            return f64::INFINITY;
        }
        let lambda = multiplier(a, c, j);
        let mut g = grad_phi(&u, &NonlinearitySpec::eigen(lambda)).into_values();
        pin_boundary(&mut g);
        free_sup(&g)
    }
}

/// First scaled eigenvalue from a random Gaussian bump drawn with
/// `cfg.seed`.
pub fn minimize_eigen(grid: &Arc<Grid>, cfg: &SolverConfig) -> Result<SolveReport> {
    check_inputs(grid, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = random_bump(grid, &mut rng);
    minimize_eigen_from(&u0, cfg)
}

/// Maximizes `J_s` on `{I_s = 1}` starting from `initial`.
///
/// The reported `lambda` is the Lagrange multiplier, so the returned
/// gradient is that of `Φ_λ` with `f(t) = λ|t|t`. It agrees with
/// `1 / J_s(u*)` up to the discretization error of the scaling identity,
/// which the `h12` residual measures.
pub fn minimize_eigen_from(initial: &RadialFn, cfg: &SolverConfig) -> Result<SolveReport> {
    let grid = initial.grid().clone();
    check_inputs(&grid, cfg)?;
    let mut x0 = initial.values().to_vec();
    pin_boundary(&mut x0);
    if x0.iter().all(|v| *v == 0.0) {
        return Err(SpsError::Degenerate(
            "initial guess vanishes on the free nodes".into(),
        ));
    }
    let obj = EigenObjective { grid: grid.clone() };
    let precond = Preconditioner::new(&grid, 1.0);
    let out = lbfgs::minimize(&obj, x0, &precond, cfg, cfg.max_iters);

    let u = RadialFn::from_parts(grid, out.x);
    let (a, c, j) = (dirichlet(&u), coulomb(&u), j_s(&u));
    if u.is_zero() || j == 0.0 || !(a + c).is_finite() {
        return Err(SpsError::DegenerateDescent(
            "eigen iteration collapsed to the zero function".into(),
        ));
    }
    let lambda = multiplier(a, c, j);
    let mut warnings = Vec::new();
    if out.stagnated {
        warnings.push(format!(
            "stagnation: line search failed after {} iterations at residual {:.3e}",
            out.iters, out.residual
        ));
    } else if !out.converged {
        warnings.push(format!(
            "max_iters = {} reached at residual {:.3e}",
            cfg.max_iters, out.residual
        ));
    }
    let f = NonlinearitySpec::eigen(lambda);
    let mut report =
        SolveReport::assemble(u, &f, Some(lambda), out.iters, out.converged, warnings, cfg);
    report.label = Some("lambda_1".into());
    Ok(report)
}

/// Residual of the eigenvalue equation at one dilated eigenfunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub t: f64,
    pub grad_sup_norm: f64,
    /// `5e-3 · max(1, sup|v|)`.
    pub bound: f64,
    pub i_s_rel_error: f64,
    pub lost_mass: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub lambda: f64,
    pub members: Vec<FamilyMember>,
    pub warnings: Vec<String>,
    pub all_pass: bool,
}

const FAMILY_TOL: f64 = 5e-3;
const FAMILY_I_TOL: f64 = 1e-4;

/// Checks that `scale(u*, t)` solves the eigenvalue equation with the same
/// `λ`. Parameters outside the validated range are skipped with a warning.
pub fn eigen_family_check(u_star: &RadialFn, lambda: f64, ts: &[f64]) -> Result<FamilyReport> {
    if !lambda.is_finite() {
        return Err(SpsError::Domain(format!("lambda = {lambda} is not finite")));
    }
    let f = NonlinearitySpec::eigen(lambda);
    let i0 = i_s(u_star);
    let mut members = Vec::new();
    let mut warnings = Vec::new();
    for &t in ts {
        if !(t >= COMPOSED_RANGE.0 && t <= COMPOSED_RANGE.1) {
            warnings.push(format!(
                "t = {t} is outside the validated range [{}, {}]; skipped",
                COMPOSED_RANGE.0, COMPOSED_RANGE.1
            ));
            continue;
        }
        let scaled = scale_with_loss(u_star, t)?;
        if let Some(w) = &scaled.warning {
            warnings.push(w.clone());
        }
        let v = scaled.function;
        let mut g = grad_phi(&v, &f).into_values();
        pin_boundary(&mut g);
        let grad_sup_norm = free_sup(&g);
        let bound = FAMILY_TOL * v.sup_norm().max(1.0);
        let expect = t.powi(3) * i0;
        let i_s_rel_error = (i_s(&v) - expect).abs() / expect;
        members.push(FamilyMember {
            t,
            grad_sup_norm,
            bound,
            i_s_rel_error,
            lost_mass: scaled.lost_mass,
            pass: grad_sup_norm <= bound && i_s_rel_error <= FAMILY_I_TOL,
        });
    }
    let all_pass = members.iter().all(|m| m.pass);
    Ok(FamilyReport {
        lambda,
        members,
        warnings,
        all_pass,
    })
}
