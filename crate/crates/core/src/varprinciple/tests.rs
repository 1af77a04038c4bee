use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::dsl::parse;
use crate::fem::{BoundaryCondition, EnergyModel, FeSpace, Mesh1D};

/// Brute-force `φ(ρ)` for a 1-D pair on a uniform grid of step `h`.
fn grid_oracle(phi: impl Fn(f64) -> f64, psi: impl Fn(f64) -> f64, radius: f64, rho: f64, h: f64) -> (f64, f64) {
    let n = (2.0 * radius / h).round() as i64;
    let xs: Vec<f64> = (0..=n).map(|i| -radius + i as f64 * h).collect();
    let m = xs.iter().filter(|x| psi(**x) <= rho).map(|x| phi(*x)).fold(f64::INFINITY, f64::min);
    let q = xs
        .iter()
        .filter(|x| psi(**x) < rho)
        .map(|x| (phi(*x) - m) / (rho - psi(*x)))
        .fold(f64::INFINITY, f64::min);
    (m, q)
}

#[test]
fn neg_linear_sublevel_infimum() {
    let pair = AnalyticPair::neg_linear();
    let r = inf_phi_on_sublevel(&pair, 1.0, &Multistart::default()).unwrap();
    let (m, _) = grid_oracle(|x| -x, |x| x * x, 1.5, 1.0, 1e-4);
    assert!((r.value + 1.0).abs() < 1e-12);
    assert!((m + 1.0).abs() < 1e-9);
    assert!((r.point[0] - 1.0).abs() < 1e-12 && r.point[0] <= 1.0);
}

#[test]
fn constant_and_shared_pairs() {
    let c = inf_phi_on_sublevel(&AnalyticPair::constant(3.5, 2), 2.0, &Multistart::default()).unwrap();
    assert_eq!(c.value, 3.5);
    let s = inf_phi_on_sublevel(&AnalyticPair::shared_quadratic(), 4.0, &Multistart::default()).unwrap();
    assert!(s.value.abs() < 1e-18 && s.point[0].abs() < 1e-9);
    let p = phi_of_rho(&AnalyticPair::constant(-2.0, 3), 1.0, &Multistart::default()).unwrap();
    assert_eq!(p.phi_hat, 0.0);
}

#[test]
fn neg_linear_quotient_matches_closed_form_and_grid() {
    let pair = AnalyticPair::neg_linear();
    for rho in [0.25, 1.0, 4.0, 100.0] {
        let p = phi_of_rho(&pair, rho, &Multistart::default()).unwrap();
        let exact = 1.0 / (2.0 * f64::sqrt(rho));
        let (_, q) = grid_oracle(|x| -x, |x| x * x, rho.sqrt(), rho, 1e-4 * rho.sqrt().max(1.0));
        assert!((p.phi_hat - exact).abs() <= 1e-4, "ρ={rho}: {} vs {exact}", p.phi_hat);
        assert!((q - exact).abs() <= 1e-3, "grid oracle {q} vs {exact}");
        assert!(recheck_point(&pair, &p).unwrap() <= 1e-8);
        assert!(p.psi_at_cert < rho);
        assert_eq!(p.flag, RunFlag::Ok);
    }
}

#[test]
fn thresholds_on_neg_linear() {
    let pair = AnalyticPair::neg_linear();
    let opts = Multistart {
        budget: 4,
        ..Multistart::default()
    };
    let tail = thresholds(&pair, &geometric_grid(1.0, 1e4, 9).unwrap(), 3, &opts).unwrap();
    assert!(tail.gamma_hat <= 0.005 + 1e-6, "γ̂ = {}", tail.gamma_hat);
    assert!(tail.monotone_nonincreasing);
    assert!(tail.sup_i.is_none());
    let head = thresholds(&pair, &geometric_grid(0.01, 1.0, 5).unwrap(), 1, &opts).unwrap();
    assert!(head.delta_hat >= 5.0 - 1e-4, "δ̂ = {}", head.delta_hat);
    let flat = thresholds(&AnalyticPair::constant(1.0, 1), &[0.5, 1.0, 2.0], 2, &opts).unwrap();
    assert_eq!((flat.gamma_hat, flat.delta_hat), (0.0, 0.0));
}

#[test]
fn lambda_star_of_convex_toys() {
    let opts = Multistart::default();
    let grid = geometric_grid(0.1, 1e4, 6).unwrap();
    let l = lambda_star(&AnalyticPair::square_abs(), &grid, &opts).unwrap();
    assert!(l.abs() <= 1e-4, "λ̂* = {l}");
    let l = lambda_star(&AnalyticPair::neg_linear(), &geometric_grid(1.0, 1e8, 5).unwrap(), &opts).unwrap();
    assert!(l <= 1e-4 + 1e-6);
    assert_eq!(lambda_star(&AnalyticPair::constant(2.0, 1), &grid, &opts).unwrap(), 0.0);
    assert!(lambda_star(&AnalyticPair::double_well(), &grid, &opts).is_err());
}

#[test]
fn infeasible_levels_are_rejected() {
    let pair = AnalyticPair::neg_linear();
    assert!(matches!(
        inf_phi_on_sublevel(&pair, 0.0, &Multistart::default()),
        Err(Error::Precondition(_))
    ));
    assert!(phi_of_rho(&pair, 1e-12, &Multistart::default()).is_err());
}

#[test]
fn shift_leaves_the_quotient_unchanged() {
    let shifted = AnalyticPair::new(
        "shifted",
        1,
        Arc::new(|x: &[f64]| (-x[0] + 7.25, vec![-1.0])),
        Arc::new(|x: &[f64]| (x[0] * x[0], vec![2.0 * x[0]])),
        f64::sqrt,
    );
    for rho in [0.5, 3.0] {
        let a = phi_of_rho(&AnalyticPair::neg_linear(), rho, &Multistart::default()).unwrap();
        let b = phi_of_rho(&shifted, rho, &Multistart::default()).unwrap();
        assert_eq!(a.certificate_x, b.certificate_x);
        // the only difference left is rounding in Φ - m̂, amplified by 1/(ρ - Ψ)
        let rounding = 8.0 * f64::EPSILON * (b.m_hat.abs() + 1.0) / (rho - b.psi_at_cert);
        assert!((a.phi_hat - b.phi_hat).abs() <= 1e-10_f64.max(rounding));
    }
}

fn cubic_dirichlet_pair(n: usize) -> FemPair {
    let space = Arc::new(FeSpace::new(Mesh1D::unit(n).unwrap(), BoundaryCondition::Dirichlet));
    FemPair::new(EnergyModel::dirichlet(2.0, parse("xi^3").unwrap()).unwrap(), space).unwrap()
}

#[test]
fn fem_pair_certificate_reproduces() {
    let pair = cubic_dirichlet_pair(32);
    let opts = Multistart {
        budget: 6,
        ..Multistart::default()
    };
    let p = phi_of_rho(&pair, 1.0, &opts).unwrap();
    assert!(recheck_point(&pair, &p).unwrap() <= 1e-8);
    assert!(p.phi_hat >= 0.0);
    assert!(pair.psi(&p.certificate_infx).unwrap().0 <= 1.0 + 1e-10);
}

#[test]
fn fem_samples_stay_inside_the_level() {
    let pair = cubic_dirichlet_pair(16);
    for i in 0..10 {
        let mut rng = restart_rng(5, 0, i);
        let x = pair.sample(2.0, i, &mut rng).unwrap();
        assert!(pair.psi(&x).unwrap().0 <= 2.0);
    }
    let neumann = FemPair::new(
        EnergyModel::neumann(
            2.0,
            parse("distosc(2)").unwrap(),
            parse("0").unwrap(),
            parse("1").unwrap(),
            parse("0").unwrap(),
            parse("1").unwrap(),
        )
        .unwrap(),
        Arc::new(FeSpace::new(Mesh1D::unit(8).unwrap(), BoundaryCondition::Neumann)),
    )
    .unwrap();
    let d = neumann.direction(0, &mut restart_rng(0, 0, 0));
    assert!(d.iter().all(|v| *v == 1.0));
}

#[test]
fn restart_results_do_not_depend_on_thread_count() {
    let pair = cubic_dirichlet_pair(16);
    let opts = Multistart {
        budget: 8,
        ..Multistart::default()
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| phi_of_rho(&pair, 0.5, &opts)).unwrap();
    let b = many.install(|| phi_of_rho(&pair, 0.5, &opts)).unwrap();
    assert_eq!(a.phi_hat.to_bits(), b.phi_hat.to_bits());
    assert_eq!(a.certificate_x, b.certificate_x);
}

#[test]
fn csv_layout() {
    let p = phi_of_rho(&AnalyticPair::neg_linear(), 1.0, &Multistart::default()).unwrap();
    let csv = phi_curve_csv(&[p]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(PHI_CURVE_HEADER));
    assert_eq!(lines.next().unwrap().split(',').count(), 7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn larger_budgets_never_raise_the_infimum(seed in 0u64..1000, extra in 1usize..6) {
        let pair = AnalyticPair::double_well();
        let small = Multistart { budget: 2, seed, ..Multistart::default() };
        let large = Multistart { budget: 2 + extra, seed, ..Multistart::default() };
        let a = inf_phi_on_sublevel(&pair, 3.0, &small).unwrap();
        let b = inf_phi_on_sublevel(&pair, 3.0, &large).unwrap();
        prop_assert!(b.value <= a.value);
    }

    #[test]
    fn quotient_is_nonnegative(rho in 0.05f64..50.0) {
        let p = phi_of_rho(&AnalyticPair::double_well(), rho, &Multistart { budget: 4, ..Multistart::default() }).unwrap();
        prop_assert!(p.phi_hat >= 0.0);
        prop_assert!(p.psi_at_cert < rho);
    }
}
