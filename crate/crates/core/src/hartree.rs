//! Newton potential of a radial density and the Coulomb double integral.
//!
//! For a radial density `u²`, Newton's theorem gives
//!
//! ```text
//! V(r) = (1/(4π|x|) ⋆ u²)(r) = (1/r) ∫_0^r u²(s) s² ds + ∫_r^∞ u²(s) s ds,
//! ```
//!
//! i.e. the kernel `1/max(r, s)` against the shell density. On the grid this
//! is `V_i = (1/4π) Σ_j K_ij w_j u_j²` evaluated with two cumulative sums.
//! The diagonal of `K` carries the Euler–Maclaurin correction for the kink of
//! `1/max(r, s)` at `s = r`, which lifts the trapezoid sum from second to
//! fourth order. `D(u) = Σ_ij ρ_i K_ij ρ_j` with `ρ = w u²` is then an exact
//! quartic form in the node values, so its gradient is available in closed
//! form.

use std::f64::consts::PI;

use crate::grid::RadialFn;

/// Shell densities `ρ_i = w_i u_i²`.
pub(crate) fn shell_density(u: &RadialFn) -> Vec<f64> {
    u.grid()
        .weights()
        .iter()
        .zip(u.values())
        .map(|(w, v)| w * v * v)
        .collect()
}

/// `W = 4π V = K ρ`, the potential without the `1/4π` prefactor.
pub(crate) fn coulomb_field(u: &RadialFn) -> Vec<f64> {
    u.grid().kernel_apply(&shell_density(u))
}

/// `V = (1/(4π|x|)) ⋆ u²` at the grid nodes.
pub fn newton_potential(u: &RadialFn) -> RadialFn {
    let field = coulomb_field(u);
    RadialFn::from_parts(
        u.grid().clone(),
        field.into_iter().map(|v| v / (4.0 * PI)).collect(),
    )
}

/// `D(u) = ∫∫ u²(x) u²(y) / |x − y| dx dy`.
pub fn coulomb_energy(u: &RadialFn) -> f64 {
    let rho = shell_density(u);
    let field = u.grid().kernel_apply(&rho);
    rho.iter().zip(&field).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grid};
    use crate::scaling::scale;
    use std::sync::Arc;

    fn grid(n: usize, r_max: f64, stretch: f64) -> Arc<Grid> {
        Arc::new(make_grid(n, r_max, stretch).unwrap())
    }

    fn gaussian(g: &Arc<Grid>) -> RadialFn {
        RadialFn::from_fn(g.clone(), |r| (-r * r / 2.0).exp()).unwrap()
    }

    /// O(n²) double sum with the same kernel, written out directly.
    fn direct_double_sum(u: &RadialFn) -> f64 {
        let g = u.grid();
        let (r, w, jac) = (g.nodes(), g.weights(), g.jacobian());
        let mut total = 0.0;
        for i in 1..g.n() {
            for j in 1..g.n() {
                let k = if i == j {
                    1.0 / r[i] - jac[i] / (12.0 * r[i] * r[i])
                } else {
                    1.0 / r[i].max(r[j])
                };
                total += w[i] * u.values()[i].powi(2) * k * w[j] * u.values()[j].powi(2);
            }
        }
        total
    }

    #[test]
    fn zero_density() {
        let g = grid(64, 5.0, 1.0);
        let z = RadialFn::zeros(g);
        assert!(newton_potential(&z).values().iter().all(|&v| v == 0.0));
        assert_eq!(coulomb_energy(&z), 0.0);
    }

    #[test]
    fn gaussian_self_energy() {
        let g = grid(4096, 25.0, 1.0);
        let d = coulomb_energy(&gaussian(&g));
        let exact = 2f64.sqrt() * PI.powf(2.5);
        assert!((d - exact).abs() <= 1e-6 * exact, "{d} vs {exact}");
    }

    #[test]
    fn gaussian_far_field() {
        let g = grid(2048, 20.0, 1.0);
        let v = newton_potential(&gaussian(&g));
        let far = v.values()[g.n() - 1] * g.r_max();
        let exact = PI.powf(1.5) / (4.0 * PI);
        assert!((far - exact).abs() <= 1e-5, "{far} vs {exact}");
    }

    #[test]
    fn uniform_ball_exterior_law() {
        let g = grid(2001, 4.0, 1.0);
        // u² = 1 on [0, 0.95], smooth step to 0 at r = 1
        let density = |r: f64| {
            let s = ((r - 0.95) / 0.05).clamp(0.0, 1.0);
            1.0 - s * s * (3.0 - 2.0 * s)
        };
        let u = RadialFn::from_fn(g.clone(), |r| density(r).sqrt()).unwrap();
        let mass = u.l2_norm().powi(2);
        // composite Simpson for 4π ∫_0^1 r² u² dr
        let m = 20_000;
        let h = 1.0 / m as f64;
        let simpson: f64 = (0..=m)
            .map(|k| {
                let r = k as f64 * h;
                let c = if k == 0 || k == m {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * r * r * density(r)
            })
            .sum::<f64>()
            * h
            / 3.0
            * 4.0
            * PI;
        let v = newton_potential(&u);
        for (r, vi) in g.nodes().iter().zip(v.values()) {
            if *r >= 1.0 {
                assert!((vi * r - mass / (4.0 * PI)).abs() <= 1e-12);
                assert!((vi * r - simpson / (4.0 * PI)).abs() <= 1e-6);
            }
        }
        // nonincreasing outside the support
        let outside: Vec<f64> = g
            .nodes()
            .iter()
            .zip(v.values())
            .filter(|(r, _)| **r >= 1.0)
            .map(|(_, v)| *v)
            .collect();
        assert!(outside.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn potential_path_matches_double_sum() {
        for stretch in [1.0, 1.04] {
            let g = grid(64, 6.0, stretch);
            let u =
                RadialFn::from_fn(g.clone(), |r| (1.0 - 0.3 * r) * (-r * r / 3.0).exp()).unwrap();
            let fast = coulomb_energy(&u);
            let slow = direct_double_sum(&u);
            assert!((fast - slow).abs() <= 1e-10 * slow, "{fast} vs {slow}");
        }
    }

    #[test]
    fn quartic_homogeneity_and_positivity() {
        let g = grid(200, 8.0, 1.0);
        let u = RadialFn::from_fn(g.clone(), |r| (r - 2.0) * (-r * r / 4.0).exp()).unwrap();
        let d = coulomb_energy(&u);
        assert!(d > 0.0);
        for tau in [-2.0, 0.5, 3.0] {
            let dt = coulomb_energy(&u.scaled_by(tau));
            assert!((dt - tau.powi(4) * d).abs() <= 1e-13 * dt.abs().max(d));
        }
    }

    #[test]
    fn dilation_law() {
        let g = grid(4096, 25.0, 1.0);
        let u = gaussian(&g);
        let d = coulomb_energy(&u);
        for t in [0.5, 0.8, 1.25, 2.0] {
            let dt = coulomb_energy(&scale(&u, t).unwrap().function);
            let expect = t.powi(3) * d;
            assert!((dt - expect).abs() <= 1e-4 * expect, "t = {t}");
        }
    }
}
