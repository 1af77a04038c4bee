use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dsl::parse;

fn dirichlet_space(n: usize) -> Arc<FeSpace> {
    Arc::new(FeSpace::new(Mesh1D::unit(n).unwrap(), BoundaryCondition::Dirichlet))
}

fn neumann_space(n: usize) -> Arc<FeSpace> {
    Arc::new(FeSpace::new(Mesh1D::unit(n).unwrap(), BoundaryCondition::Neumann))
}

fn hat() -> DiscreteFn {
    DiscreteFn::new(dirichlet_space(2), vec![1.0]).unwrap()
}

/// Composite midpoint rule on a fine grid; independent of the Gauss path.
fn midpoint_oracle(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| g(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

fn hat_fn(x: f64) -> f64 {
    if x < 0.5 {
        2.0 * x
    } else {
        2.0 - 2.0 * x
    }
}

#[test]
fn psi_of_the_midpoint_hat() {
    let m2 = EnergyModel::dirichlet(2.0, parse("0").unwrap()).unwrap();
    let m3 = EnergyModel::dirichlet(3.0, parse("0").unwrap()).unwrap();
    let oracle2 = midpoint_oracle(|x| if x < 0.5 { 4.0 } else { 4.0 }, 0.0, 1.0, 1000);
    assert!((assemble_psi(&m2, &hat()).unwrap() - 4.0).abs() < 1e-14);
    assert!((oracle2 - 4.0).abs() < 1e-12);
    assert!((assemble_psi(&m3, &hat()).unwrap() - 8.0).abs() < 1e-14);
    assert_eq!(assemble_psi(&m2, &DiscreteFn::zero(dirichlet_space(2))).unwrap(), 0.0);
}

#[test]
fn phi_of_the_midpoint_hat() {
    let m = EnergyModel::dirichlet(2.0, parse("xi").unwrap()).unwrap();
    let oracle = -midpoint_oracle(|x| hat_fn(x).powi(2) / 2.0, 0.0, 1.0, 20_000);
    let phi = assemble_phi(&m, &hat()).unwrap();
    assert!((phi + 1.0 / 6.0).abs() < 1e-14);
    assert!((phi - oracle).abs() < 1e-8);

    // constant source: Φ(u) = -∫u
    let load = EnergyModel::dirichlet(2.0, parse("1").unwrap()).unwrap();
    let u = DiscreteFn::interpolate(dirichlet_space(16), |x| x * (1.0 - x) * (3.0 + x));
    let int_u = midpoint_oracle(|x| x * (1.0 - x) * (3.0 + x), 0.0, 1.0, 200_000);
    // the interpolant differs from the smooth function; compare on the P1 function itself
    let nodal = u.nodal_values();
    let trapezoid: f64 = nodal.windows(2).map(|w| (w[0] + w[1]) / 32.0).sum();
    assert!((assemble_phi(&load, &u).unwrap() + trapezoid).abs() < 1e-14);
    assert!((trapezoid - int_u).abs() < 1e-2);
}

#[test]
fn quadratic_gradient_is_stiffness_action() {
    let n = 8;
    let space = dirichlet_space(n);
    let model = EnergyModel::dirichlet(2.0, parse("0").unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u: Vec<f64> = (0..space.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = grad_energy(&model, &DiscreteFn::new(space.clone(), u.clone()).unwrap(), 1.0).unwrap();
    let h = 1.0 / n as f64;
    for i in 0..u.len() {
        let left = if i > 0 { u[i - 1] } else { 0.0 };
        let right = if i + 1 < u.len() { u[i + 1] } else { 0.0 };
        let ku = (2.0 * u[i] - left - right) / h;
        assert!((g[i] - 2.0 * ku).abs() < 1e-12);
    }
}

#[test]
fn zero_state_has_zero_gradient() {
    let model = EnergyModel::dirichlet(3.0, parse("xi^3 + sin(xi)").unwrap()).unwrap();
    let g = grad_energy(&model, &DiscreteFn::zero(dirichlet_space(10)), 0.7).unwrap();
    assert!(g.iter().all(|v| *v == 0.0));
}

fn fd_check(model: &EnergyModel, space: Arc<FeSpace>, mu: f64, seed: u64, tol: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..space.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let energy = |v: &[f64]| {
        let parts = energy_parts(model, &space, v, false).unwrap();
        parts.phi + mu * parts.psi
    };
    let g = grad_energy(model, &DiscreteFn::new(space.clone(), u.clone()).unwrap(), mu).unwrap();
    let step = 1e-6;
    let mut fd = vec![0.0; u.len()];
    for i in 0..u.len() {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[i] += step;
        dn[i] -= step;
        fd[i] = (energy(&up) - energy(&dn)) / (2.0 * step);
    }
    let scale = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12);
    for i in 0..u.len() {
        let rel = (g[i] - fd[i]).abs() / scale;
        assert!(rel <= tol, "entry {i}: analytic {} vs fd {} (rel {rel})", g[i], fd[i]);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let f = parse("xi^3").unwrap();
    for (p, tol) in [(2.0, 1e-6), (3.0, 1e-4)] {
        for n in [8, 32] {
            let model = EnergyModel::dirichlet(p, f.clone()).unwrap();
            for seed in 0..20 {
                fd_check(&model, dirichlet_space(n), 1.0, seed, tol);
            }
        }
    }
}

#[test]
fn neumann_gradient_matches_finite_differences() {
    let model = EnergyModel::neumann(
        2.0,
        parse("distosc(2)").unwrap(),
        parse("-xi").unwrap(),
        parse("1 + x").unwrap(),
        parse("0.5").unwrap(),
        parse("1").unwrap(),
    )
    .unwrap();
    for seed in 0..5 {
        fd_check(&model, neumann_space(16), 1.0, 100 + seed, 1e-6);
    }
}

/// Solves `-u'' = 1` with the assembled stiffness matrix and load.
fn poisson_unit_load(n: usize) -> DiscreteFn {
    let space = dirichlet_space(n);
    let model = EnergyModel::dirichlet(2.0, parse("1").unwrap()).unwrap();
    let zero = vec![0.0; space.dim()];
    let jac = defect_jacobian(&model, &space, &zero, 1.0).unwrap();
    let rhs = weak_defect(&model, &space, &zero, 1.0).unwrap();
    let sol = jac.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
    DiscreteFn::new(space, sol.iter().map(|v| -v).collect()).unwrap()
}

#[test]
fn linear_problem_is_nodally_exact() {
    let model = EnergyModel::dirichlet(2.0, parse("1").unwrap()).unwrap();
    for n in [64, 128] {
        let u = poisson_unit_load(n);
        let nodes = u.space().mesh().nodes().to_vec();
        for (x, v) in nodes.iter().zip(u.nodal_values()) {
            assert!((v - x * (1.0 - x) / 2.0).abs() <= 1e-8);
        }
        assert!(residual(&model, &u, 1.0).unwrap() <= 1e-12);
    }
}

#[test]
fn interpolated_sine_has_small_defect() {
    let model = EnergyModel::dirichlet(2.0, parse("pi^2 * sin(pi * x)").unwrap()).unwrap();
    let u = DiscreteFn::interpolate(dirichlet_space(64), |x| (std::f64::consts::PI * x).sin());
    let r = residual(&model, &u, 1.0).unwrap();
    assert!(r <= 1e-3, "residual {r}");
    let zero_model = EnergyModel::dirichlet(2.0, parse("xi^3").unwrap()).unwrap();
    assert_eq!(residual(&zero_model, &DiscreteFn::zero(dirichlet_space(8)), 1.0).unwrap(), 0.0);
}

#[test]
fn residual_is_scaled_gradient() {
    // Dirichlet: grad(Φ + μΨ) = μp · defect(scale = 1/(μp))
    let model = EnergyModel::dirichlet(3.0, parse("xi^3 - x").unwrap()).unwrap();
    let space = dirichlet_space(12);
    let u = DiscreteFn::interpolate(space.clone(), |x| (5.0 * x).sin());
    let mu = 0.8;
    let g = grad_energy(&model, &u, mu).unwrap();
    let d = weak_defect(&model, &space, u.coeffs(), 1.0 / (mu * 3.0)).unwrap();
    for (a, b) in g.iter().zip(&d) {
        assert!((a - mu * 3.0 * b).abs() < 1e-12);
    }
}

#[test]
fn jacobian_matches_finite_differences_of_defect() {
    let model = EnergyModel::dirichlet(2.0, parse("xi^3 + 0.2*xi^0.5").unwrap())
        .unwrap()
        .with_negative_truncation();
    let space = dirichlet_space(10);
    let u: Vec<f64> = DiscreteFn::interpolate(space.clone(), |x| 0.3 + x * (1.0 - x)).into_coeffs();
    let jac = defect_jacobian(&model, &space, &u, 1.0).unwrap();
    for j in 0..u.len() {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[j] += 1e-6;
        dn[j] -= 1e-6;
        let a = weak_defect(&model, &space, &up, 1.0).unwrap();
        let b = weak_defect(&model, &space, &dn, 1.0).unwrap();
        for i in 0..u.len() {
            let fd = (a[i] - b[i]) / 2e-6;
            assert!((jac[(i, j)] - fd).abs() < 1e-5, "({i},{j}) {} vs {fd}", jac[(i, j)]);
        }
    }
}

#[test]
fn norms_of_simple_functions() {
    let n = norms(&hat(), 2.0);
    assert!((n.c1proxy - 3.0).abs() < 1e-15);
    assert!((n.w1p - 2.0).abs() < 1e-14);
    let z = norms(&DiscreteFn::zero(dirichlet_space(4)), 2.0);
    assert_eq!((z.lp, z.w1p, z.c1proxy), (0.0, 0.0, 0.0));
    let one = DiscreteFn::interpolate(neumann_space(5), |_| 1.0);
    let o = norms(&one, 2.0);
    assert!((o.lp - 1.0).abs() < 1e-14);
    assert!((o.w1p - 1.0).abs() < 1e-14);
}

#[test]
fn model_validation() {
    assert!(EnergyModel::dirichlet(1.5, parse("xi").unwrap()).is_err());
    let bad = EnergyModel::neumann(
        2.0,
        parse("xi").unwrap(),
        parse("0").unwrap(),
        parse("1").unwrap(),
        parse("0").unwrap(),
        parse("x - 0.5").unwrap(),
    )
    .unwrap();
    assert!(bad.validate(&neumann_space(8)).is_err());
    let d = EnergyModel::dirichlet(2.0, parse("xi").unwrap()).unwrap();
    assert!(d.validate(&neumann_space(8)).is_err());
    assert!(assemble_psi(&d, &DiscreteFn::zero(neumann_space(4))).is_err());
}

#[test]
fn distosc_energy_is_exact_for_constant_states() {
    // constant u = c on (0,1): Φ = -F(c) exactly, even with band kinks inside elements
    let model = EnergyModel::neumann(
        2.0,
        parse("distosc(2)").unwrap(),
        parse("0").unwrap(),
        parse("1").unwrap(),
        parse("0").unwrap(),
        parse("1").unwrap(),
    )
    .unwrap();
    let space = neumann_space(8);
    let prim = crate::dsl::Primitive::new(&parse("distosc(2)").unwrap());
    for c in [1.5, 5.0, 110.0] {
        let u = DiscreteFn::interpolate(space.clone(), |_| c);
        let phi = assemble_phi(&model, &u).unwrap();
        assert!((phi + prim.eval(0.0, c).unwrap()).abs() < 1e-12 * (1.0 + phi.abs()));
    }
    // a ramp crossing several band ends: compare against a fine midpoint rule
    let u = DiscreteFn::interpolate(space.clone(), |x| 0.5 + 7.0 * x);
    let oracle = -midpoint_oracle(|x| prim.eval(x, 0.5 + 7.0 * x).unwrap(), 0.0, 1.0, 200_000);
    assert!((assemble_phi(&model, &u).unwrap() - oracle).abs() < 1e-8);
}

proptest! {
    #[test]
    fn dirichlet_psi_is_midpoint_convex(a in prop::collection::vec(-3.0..3.0f64, 7), b in prop::collection::vec(-3.0..3.0f64, 7)) {
        let model = EnergyModel::dirichlet(2.0, parse("0").unwrap()).unwrap();
        let space = dirichlet_space(8);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let psi = |v: &[f64]| energy_parts(&model, &space, v, false).unwrap().psi;
        prop_assert!(psi(&mid) <= 0.5 * (psi(&a) + psi(&b)) + 1e-12);
    }
}
