use std::sync::Arc;

use proptest::prelude::*;
use sps_core::energy::{i_s, phi, NonlinearitySpec};
use sps_core::scaling::scale;
use sps_core::solvers::*;
use sps_core::{Grid, GridSpec, RadialFn, SpsError};

fn grid(n: usize, r_max: f64, stretch: f64) -> Arc<Grid> {
    GridSpec { n, r_max, stretch }.build().unwrap()
}

fn gaussian(g: &Arc<Grid>, amplitude: f64, width: f64) -> RadialFn {
    let mut v: Vec<f64> = g
        .nodes()
        .iter()
        .map(|r| amplitude * (-(r * r) / (2.0 * width * width)).exp())
        .collect();
    *v.last_mut().unwrap() = 0.0;
    RadialFn::new(g.clone(), v).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn assert_certified(r: &SolveReport) {
    assert!(r.converged, "{:?}", r.warnings);
    assert!(r.grad_sup_norm <= 1e-6);
    assert!(r.residuals.tested_rel <= RESIDUAL_TOL, "{:?}", r.residuals);
    assert!(
        r.residuals.pohozaev_rel <= RESIDUAL_TOL,
        "{:?}",
        r.residuals
    );
    assert!(r.energy.total.is_finite());
}

fn sign_changes(u: &RadialFn) -> usize {
    u.values().windows(2).filter(|p| p[0] * p[1] < 0.0).count()
}

#[test]
fn lambda_one_is_positive_and_seed_independent() {
    let g = grid(2048, 25.0, 1.0);
    let a = minimize_eigen(&g, &SolverConfig::default()).unwrap();
    let b = minimize_eigen(
        &g,
        &SolverConfig {
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert_certified(&a);
    assert_certified(&b);
    assert_eq!(a.label.as_deref(), Some("lambda_1"));
    let (la, lb) = (a.lambda.unwrap(), b.lambda.unwrap());
    assert!(la > 0.0);
    assert!(rel(la, lb) <= 1e-4, "{la} vs {lb}");
    assert!(a.residuals.h12_rel.unwrap() <= 1e-3, "{:?}", a.residuals);
}

#[test]
fn lambda_one_drifts_less_than_a_percent_under_refinement() {
    let cfg = SolverConfig::default();
    let coarse = minimize_eigen(&grid(1024, 25.0, 1.0), &cfg).unwrap();
    let fine = minimize_eigen(&grid(2048, 25.0, 1.0), &cfg).unwrap();
    assert!(coarse.converged && fine.converged);
    let drift = rel(coarse.lambda.unwrap(), fine.lambda.unwrap());
    assert!(drift < 1e-2, "{drift}");
}

#[test]
fn lambda_one_ignores_a_dilated_initial_guess() {
    let g = grid(2048, 25.0, 1.0);
    let cfg = SolverConfig::default();
    let u0 = gaussian(&g, 0.8, 1.3);
    let base = minimize_eigen_from(&u0, &cfg).unwrap().lambda.unwrap();
    for t in [0.5, 2.0] {
        let v = scale(&u0, t).unwrap().function;
        let l = minimize_eigen_from(&v, &cfg).unwrap().lambda.unwrap();
        assert!(rel(l, base) <= 1e-4, "t = {t}: {l} vs {base}");
    }
}

#[test]
fn zero_initial_guess_is_degenerate() {
    let g = grid(256, 25.0, 1.0);
    let err = minimize_eigen_from(&RadialFn::zeros(g), &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, SpsError::Degenerate(_)));
}

#[test]
fn solvers_are_odd_in_the_initial_guess() {
    let g = grid(1024, 25.0, 1.0);
    let cfg = SolverConfig::default();
    let u0 = gaussian(&g, 0.8, 1.3);
    let neg = u0.scaled_by(-1.0);

    let a = minimize_eigen_from(&u0, &cfg).unwrap();
    let b = minimize_eigen_from(&neg, &cfg).unwrap();
    assert!((a.energy.total - b.energy.total).abs() <= 1e-12);
    assert_eq!(a.lambda, b.lambda);
    assert_eq!(a.solution.scaled_by(-1.0).values(), b.solution.values());

    let f = NonlinearitySpec::tfdw(8.0 / 3.0, 10.0 / 3.0).unwrap();
    let w0 = gaussian(&g, 0.03, 4.0);
    let a = minimize_global_from(&f, &w0, &cfg).unwrap();
    let b = minimize_global_from(&f, &w0.scaled_by(-1.0), &cfg).unwrap();
    assert!((a.energy.total - b.energy.total).abs() <= 1e-12);
    assert_eq!(a.solution.scaled_by(-1.0).values(), b.solution.values());
}

#[test]
fn dilated_eigenfunctions_share_the_eigenvalue() {
    let g = grid(2048, 120.0, 1.002);
    let r = minimize_eigen(&g, &SolverConfig::default()).unwrap();
    let lambda = r.lambda.unwrap();
    let fam = eigen_family_check(&r.solution, lambda, &[0.5, 1.0, 2.0, 8.0]).unwrap();
    assert_eq!(fam.members.len(), 3);
    assert!(fam.all_pass, "{:?}", fam.members);
    let unit = &fam.members[1];
    assert_eq!(unit.t, 1.0);
    assert!((unit.grad_sup_norm - r.grad_sup_norm).abs() <= 1e-12);
    assert!(fam.warnings.iter().any(|w| w.contains("t = 8")));
}

#[test]
fn compressing_an_undecayed_eigenfunction_exposes_the_boundary() {
    // on a 25-radius ball u*'(r_max) is not negligible; t = 2 moves that
    // kink to r = 12.5 where it is no longer a boundary condition
    let g = grid(2048, 25.0, 1.0);
    let r = minimize_eigen(&g, &SolverConfig::default()).unwrap();
    let fam = eigen_family_check(&r.solution, r.lambda.unwrap(), &[2.0]).unwrap();
    assert!(!fam.all_pass);
    assert!(fam.members[0].grad_sup_norm > fam.members[0].bound);
}

#[test]
fn subscaled_minimizer_sits_at_a_negative_level() {
    let g = grid(2048, 25.0, 1.0);
    let f = NonlinearitySpec::power(1.0, 2.7).unwrap();
    let r = minimize_global(&f, &g, &SolverConfig::default()).unwrap();
    assert!(r.converged && !r.trivial);
    assert!(r.energy.total < 0.0);
    assert!(r.grad_sup_norm <= 1e-6);
}

#[test]
fn subscaled_minimizer_satisfies_the_identities_on_a_wide_ball() {
    let g = grid(2048, 120.0, 1.002);
    let cfg = SolverConfig::default();
    for f in [
        NonlinearitySpec::power(1.0, 2.7).unwrap(),
        NonlinearitySpec::tfdw(8.0 / 3.0, 10.0 / 3.0).unwrap(),
    ] {
        let r = minimize_global(&f, &g, &cfg).unwrap();
        assert_certified(&r);
        assert!(r.energy.total < 0.0);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    }
}

#[test]
fn truncated_minimizer_is_flagged() {
    let g = grid(1024, 25.0, 1.0);
    let f = NonlinearitySpec::power(1.0, 2.7).unwrap();
    let r = minimize_global(&f, &g, &SolverConfig::default()).unwrap();
    assert!(r.residuals.pohozaev_rel > RESIDUAL_TOL);
    assert!(r.warnings.iter().any(|w| w.starts_with("truncation")));
}

#[test]
fn nonpositive_primitive_gives_the_trivial_solution() {
    let g = grid(512, 25.0, 1.0);
    let f = NonlinearitySpec::new(
        vec![
            sps_core::energy::PowerTerm {
                coef: -1.0,
                exponent: 2.7,
            },
            sps_core::energy::PowerTerm {
                coef: -0.5,
                exponent: 3.0,
            },
        ],
        None,
    )
    .unwrap();
    let r = minimize_global(&f, &g, &SolverConfig::default()).unwrap();
    assert!(r.trivial && r.converged);
    assert_eq!(r.energy.total, 0.0);
}

#[test]
fn global_solver_rejects_superscaled_input() {
    let g = grid(512, 25.0, 1.0);
    let f = NonlinearitySpec::power(1.0, 4.5).unwrap();
    let err = minimize_global(&f, &g, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, SpsError::Classification(_)));
}

#[test]
fn mountain_pass_reaches_a_positive_level() {
    let g = grid(2048, 25.0, 1.0);
    let f = NonlinearitySpec::power(1.0, 4.5).unwrap();
    let r = mountain_pass(&f, &g, &SolverConfig::default()).unwrap();
    assert_certified(&r);
    assert!(!r.trivial && r.energy.total > 0.0);

    // any point of a small sphere {I_s = ρ³} bounds the sphere's infimum
    // from above, and the pass level must sit above that infimum
    let rho: f64 = 0.1;
    let c = (rho.powi(3) / i_s(&r.solution)).sqrt();
    let v = r.solution.scaled_by(c);
    let on_sphere = phi(&v, &f).total;
    assert!((i_s(&v) / rho.powi(3) - 1.0).abs() < 0.5);
    assert!(
        r.energy.total >= on_sphere,
        "{} < {on_sphere}",
        r.energy.total
    );
}

#[test]
fn mountain_pass_below_the_first_eigenvalue() {
    let g = grid(2048, 25.0, 1.0);
    let cfg = SolverConfig::default();
    let l1 = minimize_eigen(&g, &cfg).unwrap().lambda.unwrap();
    let f = NonlinearitySpec::new(
        vec![
            sps_core::energy::PowerTerm {
                coef: 0.5 * l1,
                exponent: 3.0,
            },
            sps_core::energy::PowerTerm {
                coef: 1.0,
                exponent: 4.5,
            },
        ],
        None,
    )
    .unwrap();
    let r = mountain_pass(&f, &g, &cfg).unwrap();
    assert_certified(&r);
    assert!(!r.trivial && r.energy.total > 0.0);
}

#[test]
fn mountain_pass_rejects_subscaled_input() {
    let g = grid(512, 25.0, 1.0);
    let f = NonlinearitySpec::power(1.0, 2.7).unwrap();
    let err = mountain_pass(&f, &g, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, SpsError::Classification(_)));
}

#[test]
fn deflation_finds_two_negative_tfdw_solutions() {
    let g = grid(4096, 250.0, 1.0015);
    let f = NonlinearitySpec::tfdw(8.0 / 3.0, 10.0 / 3.0).unwrap();
    let found = deflated_search(&f, 2, &g, &SolverConfig::default()).unwrap();
    assert!(!found.exhausted);
    assert_eq!(found.reports.len(), 2);
    for r in &found.reports {
        assert_certified(r);
        assert!(r.energy.total < 0.0);
    }
    assert!(found.distances[0][1] >= MIN_SEPARATION);
    assert_eq!(found.distances[0][1], found.distances[1][0]);
    assert_eq!(sign_changes(&found.reports[0].solution), 0);
    assert_eq!(sign_changes(&found.reports[1].solution), 1);
}

#[test]
fn single_deflated_solution_is_the_base_solve() {
    let g = grid(1024, 25.0, 1.0);
    let cfg = SolverConfig::default();
    let f = NonlinearitySpec::tfdw(8.0 / 3.0, 10.0 / 3.0).unwrap();
    let found = deflated_search(&f, 1, &g, &cfg).unwrap();
    assert_eq!(found.reports, vec![minimize_global(&f, &g, &cfg).unwrap()]);
    let f = NonlinearitySpec::power(1.0, 4.5).unwrap();
    let found = deflated_search(&f, 1, &g, &cfg).unwrap();
    assert_eq!(found.reports, vec![mountain_pass(&f, &g, &cfg).unwrap()]);
    assert!(matches!(
        deflated_search(&f, 0, &g, &cfg),
        Err(SpsError::Config(_))
    ));
}

#[test]
fn nothing_nontrivial_below_the_first_eigenvalue() {
    let g = grid(1024, 25.0, 1.0);
    let cfg = SolverConfig::default();
    let l1 = minimize_eigen(&g, &cfg).unwrap().lambda.unwrap();
    let found = deflated_search(&NonlinearitySpec::eigen(0.5 * l1), 2, &g, &cfg).unwrap();
    assert!(found.exhausted);
    assert_eq!(found.reports.len(), 1);
    assert!(found.reports[0].trivial);
}

#[test]
fn solver_config_invariants() {
    assert!(SolverConfig::default().validate().is_ok());
    let bad = [
        SolverConfig {
            max_iters: 0,
            ..Default::default()
        },
        SolverConfig {
            grad_tol: 0.0,
            ..Default::default()
        },
        SolverConfig {
            grad_tol: f64::NAN,
            ..Default::default()
        },
        SolverConfig {
            path_nodes: 7,
            ..Default::default()
        },
        SolverConfig {
            armijo: ArmijoConfig {
                shrink: 1.0,
                ..Default::default()
            },
            ..Default::default()
        },
        SolverConfig {
            armijo: ArmijoConfig {
                c1: 0.0,
                ..Default::default()
            },
            ..Default::default()
        },
        SolverConfig {
            deflation: DeflationConfig {
                power: 0.0,
                ..Default::default()
            },
            ..Default::default()
        },
    ];
    for cfg in bad {
        assert!(
            matches!(cfg.validate(), Err(SpsError::Config(_))),
            "{cfg:?}"
        );
    }
    let g = grid(256, 25.0, 1.0);
    let cfg = SolverConfig {
        path_nodes: 4,
        ..Default::default()
    };
    assert!(matches!(minimize_eigen(&g, &cfg), Err(SpsError::Config(_))));
}

#[test]
fn solver_config_json() {
    let cfg: SolverConfig =
        serde_json::from_str(r#"{"max_iters": 50, "armijo": {"shrink": 0.3}}"#).unwrap();
    assert_eq!(cfg.max_iters, 50);
    assert_eq!(cfg.armijo.shrink, 0.3);
    assert_eq!(cfg.armijo.c1, 1e-4);
    assert!(serde_json::from_str::<SolverConfig>(r#"{"max_iter": 50}"#).is_err());
}

#[test]
fn reports_round_trip_through_json() {
    let g = grid(512, 25.0, 1.0);
    let r = minimize_eigen(&g, &SolverConfig::default()).unwrap();
    let back: SolveReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let g = grid(512, 25.0, 1.0);
    let cfg = SolverConfig {
        max_iters: 2,
        ..Default::default()
    };
    let r = minimize_eigen(&g, &cfg).unwrap();
    assert!(!r.converged);
    assert!(r.warnings.iter().any(|w| w.contains("max_iters")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn eigen_minimum_does_not_depend_on_the_seed(seed in 2u64..1_000_000) {
        let g = grid(512, 25.0, 1.0);
        let reference = minimize_eigen(&g, &SolverConfig::default()).unwrap();
        let r = minimize_eigen(&g, &SolverConfig { seed, ..Default::default() }).unwrap();
        prop_assert!(r.converged);
        prop_assert!(rel(r.lambda.unwrap(), reference.lambda.unwrap()) <= 1e-4);
    }

    #[test]
    fn converged_reports_meet_the_gradient_bound(seed in 0u64..1_000_000, q in 3.6f64..5.0) {
        let g = grid(512, 25.0, 1.0);
        let cfg = SolverConfig { seed, ..Default::default() };
        let f = NonlinearitySpec::power(1.0, q).unwrap();
        if let Ok(r) = mountain_pass(&f, &g, &cfg) {
            prop_assert!(!r.converged || r.grad_sup_norm <= cfg.grad_tol);
            prop_assert!(r.energy.total.is_finite());
        }
    }
}

#[test]
fn descent_past_the_first_eigenvalue_is_rejected() {
    let g = grid(1024, 25.0, 1.0);
    let cfg = SolverConfig::default();
    let l1 = minimize_eigen(&g, &cfg).unwrap().lambda.unwrap();
    let err = minimize_global(&NonlinearitySpec::eigen(1.5 * l1), &g, &cfg).unwrap_err();
    assert!(matches!(err, SpsError::DegenerateDescent(_)), "{err}");
}
