//! Browser bindings for three demo operations: the λ₁ ground state, the
//! energy along a dilation ray, and classify-then-solve.
//!
//! Each operation has a plain Rust entry point returning a JSON string,
//! which is what the page parses; the `#[wasm_bindgen]` wrappers only turn
//! errors into JavaScript exceptions. Build with
//! `wasm-pack build crates/wasm --target web --out-dir www/pkg`.

use serde::Serialize;
use sps_core::energy::{phi, NonlinearitySpec};
use sps_core::scaling::{classify_nonlinearity, scale_with_loss, Classification};
use sps_core::solvers::{deflated_search, deflated_search_from, minimize_eigen, SolverConfig};
use sps_core::{GridSpec, RadialFn};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request; keeps a solve under a second.
pub const MAX_NODES: usize = 4096;

fn build_grid(n: usize, r_max: f64) -> Result<std::sync::Arc<sps_core::Grid>, String> {
    if n > MAX_NODES {
        return Err(format!("n = {n} exceeds the demo limit of {MAX_NODES}"));
    }
    GridSpec {
        n,
        r_max,
        stretch: 1.0,
    }
    .build()
    .map_err(|e| e.to_string())
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct Profile<'a> {
    r: &'a [f64],
    u: &'a [f64],
}

impl<'a> From<&'a RadialFn> for Profile<'a> {
    fn from(u: &'a RadialFn) -> Self {
        Profile {
            r: u.grid().nodes(),
            u: u.values(),
        }
    }
}

#[derive(Serialize)]
struct EigenOut<'a> {
    lambda: f64,
    converged: bool,
    grad_sup_norm: f64,
    worst_residual: f64,
    profile: Profile<'a>,
}

pub fn eigen_json(n: usize, r_max: f64, seed: u64) -> Result<String, String> {
    let grid = build_grid(n, r_max)?;
    let cfg = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    let r = minimize_eigen(&grid, &cfg).map_err(|e| e.to_string())?;
    json(&EigenOut {
        lambda: r.lambda.unwrap_or(f64::NAN),
        converged: r.converged,
        grad_sup_norm: r.grad_sup_norm,
        worst_residual: r.residuals.worst_relative(),
        profile: (&r.solution).into(),
    })
}

#[derive(Serialize)]
struct RayOut {
    t: Vec<f64>,
    phi: Vec<f64>,
    lost_mass: Vec<f64>,
}

/// `Φ(u_t)` for the unit Gaussian seed over `samples` log-spaced values
/// of `t` in `[t_min, t_max]`.
pub fn dilation_ray_json(
    n: usize,
    r_max: f64,
    nonlinearity: &str,
    t_min: f64,
    t_max: f64,
    samples: usize,
) -> Result<String, String> {
    let grid = build_grid(n, r_max)?;
    let f: NonlinearitySpec = serde_json::from_str(nonlinearity).map_err(|e| e.to_string())?;
    f.validate().map_err(|e| e.to_string())?;
    if !(t_min > 0.0 && t_max > t_min && t_max <= 4.0) || samples < 2 {
        return Err("need 0 < t_min < t_max <= 4 and at least 2 samples".into());
    }
    let u = RadialFn::from_fn(grid, |r| (-r * r / 2.0).exp()).map_err(|e| e.to_string())?;
    let step = (t_max / t_min).ln() / (samples - 1) as f64;
    let mut out = RayOut {
        t: Vec::new(),
        phi: Vec::new(),
        lost_mass: Vec::new(),
    };
    for k in 0..samples {
        let t = t_min * (step * k as f64).exp();
        let s = scale_with_loss(&u, t).map_err(|e| e.to_string())?;
        out.t.push(t);
        out.phi.push(phi(&s.function, &f).total);
        out.lost_mass.push(s.lost_mass);
    }
    json(&out)
}

#[derive(Serialize)]
struct SolveOut<'a> {
    classification: Classification,
    energy: f64,
    converged: bool,
    trivial: bool,
    grad_sup_norm: f64,
    pohozaev_rel: f64,
    warnings: &'a [String],
    profile: Profile<'a>,
}

pub fn solve_json(n: usize, r_max: f64, nonlinearity: &str) -> Result<String, String> {
    let grid = build_grid(n, r_max)?;
    let f: NonlinearitySpec = serde_json::from_str(nonlinearity).map_err(|e| e.to_string())?;
    f.validate().map_err(|e| e.to_string())?;
    let class = classify_nonlinearity(&f).map_err(|e| e.to_string())?;
    let cfg = SolverConfig::default();
    let search = match class {
        Classification::AsymptoticallyScaled { lambda } => {
            let l1 = minimize_eigen(&grid, &cfg)
                .map_err(|e| e.to_string())?
                .lambda;
            if l1.is_some_and(|l1| lambda >= l1) {
                deflated_search_from(&f, 1, &grid, &cfg, None)
            } else {
                deflated_search(&f, 1, &grid, &cfg)
            }
        }
        _ => deflated_search(&f, 1, &grid, &cfg),
    }
    .map_err(|e| e.to_string())?;
    let r = search
        .reports
        .first()
        .ok_or("no solution found; the energy has no usable minimizer or saddle here")?;
    json(&SolveOut {
        classification: class,
        energy: r.energy.total,
        converged: r.converged,
        trivial: r.trivial,
        grad_sup_norm: r.grad_sup_norm,
        pohozaev_rel: r.residuals.pohozaev_rel,
        warnings: &r.warnings,
        profile: (&r.solution).into(),
    })
}

#[wasm_bindgen]
pub fn eigen(n: usize, r_max: f64, seed: u64) -> Result<String, JsError> {
    eigen_json(n, r_max, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn dilation_ray(
    n: usize,
    r_max: f64,
    nonlinearity: &str,
    t_min: f64,
    t_max: f64,
    samples: usize,
) -> Result<String, JsError> {
    dilation_ray_json(n, r_max, nonlinearity, t_min, t_max, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve(n: usize, r_max: f64, nonlinearity: &str) -> Result<String, JsError> {
    solve_json(n, r_max, nonlinearity).map_err(|e| JsError::new(&e))
}
