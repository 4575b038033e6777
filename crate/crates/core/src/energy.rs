//! Discrete energy functionals, their exact gradients, and the algebraic
//! identities satisfied by solutions.
//!
//! Everything here is a function of the node values alone:
//!
//! * `dirichlet = ½ Σ_m s_m (D u)_m²`, a fourth-order staggered form;
//! * `coulomb = D(u) / 16π` with the quartic form of [`crate::hartree`];
//! * `nonlinear = Σ_i w_i F(u_i)`.
//!
//! [`grad_phi`] differentiates these sums exactly, so stationary points of
//! the discrete energy are exactly the zeros of the returned vector.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};
use crate::grid::RadialFn;
use crate::hartree::{coulomb_energy, coulomb_field};

/// Smallest admissible exponent (the optimal embedding threshold).
pub const EXPONENT_FLOOR: f64 = 18.0 / 7.0;
pub const EXPONENT_CEIL: f64 = 6.0;

/// One term `coef · |t|^{exponent − 2} t` of the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
}

/// Autonomous odd nonlinearity `f(t) = Σ a_i |t|^{q_i − 2} t` plus an
/// optional saturating part `λ |t| t / (1 + |t|)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    #[serde(default)]
    pub terms: Vec<PowerTerm>,
    #[serde(default)]
    pub saturating: Option<f64>,
}

impl NonlinearitySpec {
    pub fn new(terms: Vec<PowerTerm>, saturating: Option<f64>) -> Result<Self> {
        let spec = Self { terms, saturating };
        spec.validate()?;
        Ok(spec)
    }

    /// `coef · |t|^{q−2} t`.
    pub fn power(coef: f64, exponent: f64) -> Result<Self> {
        Self::new(vec![PowerTerm { coef, exponent }], None)
    }

    /// `λ |t| t`, the right-hand side of the scaled eigenvalue problem.
    pub fn eigen(lambda: f64) -> Self {
        Self {
            terms: vec![PowerTerm {
                coef: lambda,
                exponent: 3.0,
            }],
            saturating: None,
        }
    }

    pub fn saturating(lambda: f64) -> Result<Self> {
        Self::new(Vec::new(), Some(lambda))
    }

    /// Thomas–Fermi–Dirac–von Weizsäcker type `|t|^{σ−2} t − |t|^{q−2} t`.
    pub fn tfdw(sigma: f64, q: f64) -> Result<Self> {
        Self::new(
            vec![
                PowerTerm {
                    coef: 1.0,
                    exponent: sigma,
                },
                PowerTerm {
                    coef: -1.0,
                    exponent: q,
                },
            ],
            None,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (i, term) in self.terms.iter().enumerate() {
            if !term.coef.is_finite() {
                return Err(SpsError::Config(format!(
                    "nonlinearity.terms[{i}].coef = {} is not finite",
                    term.coef
                )));
            }
            if !(term.exponent > EXPONENT_FLOOR && term.exponent <= EXPONENT_CEIL) {
                return Err(SpsError::Config(format!(
                    "nonlinearity.terms[{i}].exponent = {} must lie in (18/7, 6]",
                    term.exponent
                )));
            }
        }
        if let Some(l) = self.saturating {
            if !l.is_finite() {
                return Err(SpsError::Config(format!(
                    "nonlinearity.saturating = {l} is not finite"
                )));
            }
        }
        Ok(())
    }

    /// `f(t)`.
    pub fn value(&self, t: f64) -> f64 {
        let a = t.abs();
        let mut out = 0.0;
        for term in &self.terms {
            out += term.coef * a.powf(term.exponent - 2.0) * t;
        }
        if let Some(l) = self.saturating {
            out += l * a * t / (1.0 + a);
        }
        out
    }

    /// `F(t) = ∫_0^t f`.
    pub fn primitive(&self, t: f64) -> f64 {
        let a = t.abs();
        let mut out = 0.0;
        for term in &self.terms {
            out += term.coef / term.exponent * a.powf(term.exponent);
        }
        if let Some(l) = self.saturating {
            out += l * (0.5 * a * a - a + a.ln_1p());
        }
        out
    }

    /// `f'(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        let a = t.abs();
        let mut out = 0.0;
        for term in &self.terms {
            out += term.coef * (term.exponent - 1.0) * a.powf(term.exponent - 2.0);
        }
        if let Some(l) = self.saturating {
            out += l * (a * a + 2.0 * a) / ((1.0 + a) * (1.0 + a));
        }
        out
    }

    /// Largest exponent with a nonzero coefficient, and that coefficient
    /// (summed over repeated exponents).
    pub fn leading_term(&self) -> Option<(f64, f64)> {
        let q = self
            .terms
            .iter()
            .filter(|t| t.coef != 0.0)
            .map(|t| t.exponent)
            .fold(None, |m: Option<f64>, q| Some(m.map_or(q, |m| m.max(q))))?;
        let coef: f64 = self
            .terms
            .iter()
            .filter(|t| t.exponent == q)
            .map(|t| t.coef)
            .sum();
        Some((q, coef))
    }
}

/// Parts of `Φ(u) = ½∫|∇u|² + (1/16π) D(u) − ∫F(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub coulomb: f64,
    pub nonlinear: f64,
    pub total: f64,
}

/// Residuals of the tested identity, the Pohožaev identity and (for eigen
/// pairs) `I_s(u) = λ J_s(u)`, raw and relative to their largest term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub tested: f64,
    pub pohozaev: f64,
    pub h12: Option<f64>,
    pub tested_rel: f64,
    pub pohozaev_rel: f64,
    pub h12_rel: Option<f64>,
}

impl IdentityResiduals {
    /// Largest relative residual among those present.
    pub fn worst_relative(&self) -> f64 {
        self.tested_rel
            .max(self.pohozaev_rel)
            .max(self.h12_rel.unwrap_or(0.0))
    }
}

/// `½ ∫ |∇u|² dx`.
pub fn dirichlet(u: &RadialFn) -> f64 {
    let g = u.grid();
    let du = g.cell_derivative(u.values());
    0.5 * g
        .stiffness()
        .iter()
        .zip(&du)
        .map(|(s, d)| s * d * d)
        .sum::<f64>()
}

/// `(1/16π) D(u)`.
pub fn coulomb(u: &RadialFn) -> f64 {
    coulomb_energy(u) / (16.0 * PI)
}

/// `∫ F(u) dx`.
pub fn nonlinear(u: &RadialFn, f: &NonlinearitySpec) -> f64 {
    u.grid()
        .integrate_unchecked(u.values().iter().map(|&v| f.primitive(v)))
}

/// `I_s(u) = ½∫|∇u|² + (1/16π) D(u)`.
pub fn i_s(u: &RadialFn) -> f64 {
    dirichlet(u) + coulomb(u)
}

/// `J_s(u) = (1/3) ∫ |u|³`.
pub fn j_s(u: &RadialFn) -> f64 {
    u.grid()
        .integrate_unchecked(u.values().iter().map(|v| v.abs().powi(3)))
        / 3.0
}

pub fn phi(u: &RadialFn, f: &NonlinearitySpec) -> EnergyBreakdown {
    let dirichlet = dirichlet(u);
    let coulomb = coulomb(u);
    let nonlinear = nonlinear(u, f);
    EnergyBreakdown {
        dirichlet,
        coulomb,
        nonlinear,
        total: dirichlet + coulomb - nonlinear,
    }
}

pub(crate) fn grad_dirichlet(u: &RadialFn) -> Vec<f64> {
    let g = u.grid();
    let du = g.cell_derivative(u.values());
    let flux: Vec<f64> = g.stiffness().iter().zip(&du).map(|(s, d)| s * d).collect();
    g.cell_derivative_transpose(&flux)
}

pub(crate) fn grad_coulomb(u: &RadialFn) -> Vec<f64> {
    let field = coulomb_field(u);
    let w = u.grid().weights();
    u.values()
        .iter()
        .zip(w)
        .zip(&field)
        .map(|((v, w), f)| w * v * f / (4.0 * PI))
        .collect()
}

/// Gradient of `I_s`.
pub(crate) fn grad_i_s(u: &RadialFn) -> Vec<f64> {
    let mut g = grad_dirichlet(u);
    for (a, b) in g.iter_mut().zip(grad_coulomb(u)) {
        *a += b;
    }
    g
}

/// Gradient of `J_s`.
pub(crate) fn grad_j_s(u: &RadialFn) -> Vec<f64> {
    u.grid()
        .weights()
        .iter()
        .zip(u.values())
        .map(|(w, v)| w * v.abs() * v)
        .collect()
}

/// Exact gradient of `phi(·, f).total` with respect to the node values.
pub fn grad_phi(u: &RadialFn, f: &NonlinearitySpec) -> RadialFn {
    let mut g = grad_i_s(u);
    for ((gi, w), v) in g.iter_mut().zip(u.grid().weights()).zip(u.values()) {
        *gi -= w * f.value(*v);
    }
    RadialFn::from_parts(u.grid().clone(), g)
}

/// Hessian of `phi(·, f).total` at `u` applied to `v`.
pub(crate) fn hess_phi_apply(u: &RadialFn, f: &NonlinearitySpec, v: &[f64]) -> Vec<f64> {
    let g = u.grid();
    let w = g.weights();
    let dv = g.cell_derivative(v);
    let flux: Vec<f64> = g.stiffness().iter().zip(&dv).map(|(s, d)| s * d).collect();
    let mut out = g.cell_derivative_transpose(&flux);

    let field = coulomb_field(u);
    let cross: Vec<f64> = (0..g.n()).map(|i| w[i] * u.values()[i] * v[i]).collect();
    let cross_field = g.kernel_apply(&cross);
    for i in 0..g.n() {
        let ui = u.values()[i];
        out[i] += (w[i] * field[i] * v[i] + 2.0 * w[i] * ui * cross_field[i]) / (4.0 * PI);
        out[i] -= w[i] * f.derivative(ui) * v[i];
    }
    out
}

fn relative(raw: f64, terms: &[f64]) -> f64 {
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if scale == 0.0 {
        raw.abs()
    } else {
        raw.abs() / scale
    }
}

/// Tested identity `∫|∇u|² + D/4π − ∫f(u)u`, Pohožaev identity
/// `½∫|∇u|² + 5D/16π − 3∫F(u)`, and `I_s − λ J_s` when `lambda` is given.
pub fn identity_residuals(
    u: &RadialFn,
    f: &NonlinearitySpec,
    lambda: Option<f64>,
) -> IdentityResiduals {
    let a = dirichlet(u);
    let c = coulomb(u);
    let big_f = nonlinear(u, f);
    let fu = u
        .grid()
        .integrate_unchecked(u.values().iter().map(|&v| f.value(v) * v));

    // ∫|∇u|² = 2a, D/4π = 4c, 5D/16π = 5c
    let tested = 2.0 * a + 4.0 * c - fu;
    let pohozaev = a + 5.0 * c - 3.0 * big_f;
    let tested_rel = relative(tested, &[2.0 * a, 4.0 * c, fu]);
    let pohozaev_rel = relative(pohozaev, &[a, 5.0 * c, 3.0 * big_f]);
    let (h12, h12_rel) = match lambda {
        Some(l) => {
            let i = a + c;
            let lj = l * j_s(u);
            let h = i - lj;
            (Some(h), Some(relative(h, &[i, lj])))
        }
        None => (None, None),
    };
    IdentityResiduals {
        tested,
        pohozaev,
        h12,
        tested_rel,
        pohozaev_rel,
        h12_rel,
    }
}

/// `Ψ̃(u) = 1 / J_s(u)`.
pub fn psi_tilde(u: &RadialFn) -> Result<f64> {
    let j = j_s(u);
    if j == 0.0 {
        return Err(SpsError::Degenerate(
            "J_s(u) = 0: the reciprocal is undefined".into(),
        ));
    }
    Ok(1.0 / j)
}
