use std::sync::Arc;

use super::*;
use crate::dsl::parse;
use crate::fem::{BoundaryCondition, EnergyModel, FeSpace, Mesh1D};
use crate::varprinciple::{phi_of_rho, AnalyticPair, FemPair};

fn toy_opts() -> MinOptions {
    MinOptions::for_backing(Backing::AnalyticToy)
}

fn hunt_opts(budget: usize, tol: Tolerances) -> HuntOptions {
    HuntOptions::new(
        Multistart {
            budget,
            ..Multistart::default()
        },
        tol,
    )
}

#[test]
fn neg_linear_sublevel_minimizer() {
    let pair = AnalyticPair::neg_linear();
    let m = minimize_sublevel(&pair, 1.0, 1.0, &[-0.3], &toy_opts()).unwrap();
    assert!((m.point[0] - 0.5).abs() <= 1e-8);
    assert!((m.energy + 0.25).abs() <= 1e-12);
    assert!(m.interior && m.certified(&Tolerances::TOY));
    assert_eq!(m.status, Status::Converged);
}

#[test]
fn large_weight_pulls_to_the_psi_minimizer() {
    let pair = AnalyticPair::neg_linear();
    let m = minimize_sublevel(&pair, 1e3, 1.0, &[0.9], &toy_opts()).unwrap();
    assert!(m.point[0].abs() <= 1e-3);
    let s = minimize_sublevel(&AnalyticPair::shared_quadratic(), 2.0, 1.0, &[0.5], &toy_opts()).unwrap();
    assert!(s.point[0].abs() <= 1e-9 && s.interior);
}

#[test]
fn infeasible_start_is_rejected() {
    let pair = AnalyticPair::neg_linear();
    assert!(minimize_sublevel(&pair, 1.0, 1.0, &[1.0], &toy_opts()).is_err());
}

#[test]
fn weight_above_the_quotient_gives_interior_minima() {
    let opts = Multistart::default();
    for name in ["neg-linear", "square-abs", "shared-quadratic", "double-well"] {
        let pair = AnalyticPair::named(name).unwrap();
        for rho in [0.5, 2.0] {
            let mu = phi_of_rho(&pair, rho, &opts).unwrap().phi_hat + 0.1;
            let start = pair.origin();
            let m = minimize_sublevel(&pair, mu, rho, &start, &toy_opts()).unwrap();
            assert!(m.interior, "{name} at ρ={rho}, μ={mu}: Ψ={}", m.psi);
        }
    }
}

#[test]
fn certificate_flags_a_saddle() {
    let pair = AnalyticPair::double_well();
    let c = certify(&pair, 0.0, 10.0, &[0.0, 0.0], 0).unwrap();
    assert_eq!(c.grad_norm, 0.0);
    assert!(!c.curvature_ok && !c.certified(&Tolerances::TOY));
    let m = certify(&pair, 0.0, 10.0, &[1.0, 0.0], 0).unwrap();
    assert!(m.curvature_ok && m.certified(&Tolerances::TOY));
}

#[test]
fn increasing_hunt_on_neg_linear_finds_the_global_minimum() {
    let pair = AnalyticPair::neg_linear();
    let ladder = Ladder::new(1.0, 4.0, 8).unwrap();
    let r = hunt_increasing(&pair, 0.1, &ladder, &hunt_opts(6, Tolerances::TOY)).unwrap();
    assert_eq!(r.accepted.len(), 1);
    assert!((r.accepted[0].point[0] - 5.0).abs() <= 1e-6);
    assert!(r.invariants_hold());
    assert!(r.rows.iter().any(|row| row.reject_reason == Some(RejectReason::Boundary)));
    assert!(r.rows.iter().any(|row| row.reject_reason == Some(RejectReason::Duplicate)));
    assert_eq!(r.stop, StopReason::Stagnation);
}

#[test]
fn constant_pair_accepts_one_point() {
    let pair = AnalyticPair::constant(2.0, 1);
    let ladder = Ladder::new(0.5, 4.0, 4).unwrap();
    let r = hunt_increasing(&pair, 1.0, &ladder, &hunt_opts(4, Tolerances::TOY)).unwrap();
    assert_eq!(r.accepted.len(), 1);
    assert!(r.accepted[0].point[0].abs() <= 1e-9);
}

#[test]
fn increasing_hunt_needs_coercivity() {
    let pair = AnalyticPair::double_well().with_flags(false, false);
    let ladder = Ladder::new(1.0, 4.0, 2).unwrap();
    assert!(hunt_increasing(&pair, 0.0, &ladder, &hunt_opts(2, Tolerances::TOY)).is_err());
    assert!(Ladder::new(1.0, 1.0, 3).is_err());
    assert!(Ladder::new(0.0, 4.0, 3).is_err());
}

#[test]
fn decreasing_hunts() {
    let ladder = Ladder::new(1.0, 2.0, 8).unwrap();
    let opts = hunt_opts(6, Tolerances::TOY);

    let r = hunt_decreasing(&AnalyticPair::shared_quadratic(), 1.0, &ladder, &opts).unwrap();
    assert!(r.accepted.is_empty());
    assert!(r.rows.iter().all(|row| row.reject_reason.is_some()));

    let r = hunt_decreasing(&AnalyticPair::neg_linear(), 1.0, &ladder, &opts).unwrap();
    assert!(r.invariants_hold());
    assert!((r.accepted[0].point[0] - 0.5).abs() <= 1e-8);

    let r = hunt_decreasing(&AnalyticPair::oscillating(), 0.0, &ladder, &opts).unwrap();
    assert!(r.invariants_hold());
    assert!(r.accepted.iter().all(|m| m.point[0].abs() > 1e-9));
}

#[test]
fn hunt_csv_layout() {
    let pair = AnalyticPair::neg_linear();
    let ladder = Ladder::new(1.0, 4.0, 3).unwrap();
    let r = hunt_increasing(&pair, 0.1, &ladder, &hunt_opts(2, Tolerances::TOY)).unwrap();
    let csv = hunt_csv(&r);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(HUNT_HEADER));
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert!(fields[6].is_empty());
        assert!(fields[7] == "0" || fields[7] == "1");
    }
}

fn oscillating_neumann(n: usize) -> FemPair {
    let model = EnergyModel::neumann(
        2.0,
        parse("distosc(2)").unwrap(),
        parse("0").unwrap(),
        parse("1").unwrap(),
        parse("0").unwrap(),
        parse("1").unwrap(),
    )
    .unwrap();
    FemPair::new(model, Arc::new(FeSpace::new(Mesh1D::unit(n).unwrap(), BoundaryCondition::Neumann))).unwrap()
}

#[test]
fn oscillating_neumann_hunt_recertifies() {
    let pair = oscillating_neumann(64);
    let ladder = Ladder::new(400.0, 4.0, 6).unwrap();
    let r = hunt_increasing(&pair, 1.0, &ladder, &hunt_opts(4, Tolerances::FEM)).unwrap();
    assert!(r.invariants_hold());
    // the zero state and the constant wells near 109.6 and 693.7
    let levels: Vec<f64> = r.accepted.iter().map(|m| m.point[0]).collect();
    assert_eq!(levels.len(), 3, "{levels:?}");
    assert!(levels[0].abs() < 1e-6 && (levels[1] - 109.6).abs() < 0.5 && (levels[2] - 693.7).abs() < 0.5);
    for m in &r.accepted {
        let again = certify(&pair, 1.0, m.rho, &m.point, 0).unwrap();
        assert!(again.grad_norm <= 1e-6 && again.interior);
        assert!(again.residual.unwrap() <= 1e-6);
    }
}

#[test]
fn hunts_are_reproducible() {
    let pair = oscillating_neumann(16);
    let ladder = Ladder::new(400.0, 4.0, 3).unwrap();
    let opts = hunt_opts(3, Tolerances::FEM);
    let a = hunt_increasing(&pair, 1.0, &ladder, &opts).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| hunt_increasing(&pair, 1.0, &ladder, &opts))
        .unwrap();
    assert_eq!(hunt_csv(&a), hunt_csv(&b));
}

#[test]
fn double_well_saddle() {
    let pair = AnalyticPair::double_well();
    let r = mountain_pass(&pair, 0.0, &[-1.0, 0.0], &[1.0, 0.0], &PassOptions::default()).unwrap();
    assert_eq!(r.status, PassStatus::Success);
    assert!(sup_norm(&r.saddle) <= 1e-3);
    assert!(r.grad_norm <= 1e-6);
    assert!((r.saddle_energy - 1.0).abs() <= 1e-9);
    assert_eq!(r.path.len(), 33);
    assert!(r.saddle_energy >= r.elevation[0].max(r.elevation[32]) - 1e-12);
}

#[test]
fn identical_endpoints_collapse() {
    let pair = AnalyticPair::double_well();
    let r = mountain_pass(&pair, 0.0, &[1.0, 0.0], &[1.0, 0.0], &PassOptions::default()).unwrap();
    assert_eq!(r.status, PassStatus::Collapse);
    assert_eq!(r.sweeps, 0);
    // no barrier between 0 and 1 on the shared quadratic
    let q = AnalyticPair::shared_quadratic();
    let r = mountain_pass(&q, 1.0, &[0.0], &[1.0], &PassOptions::default()).unwrap();
    assert_eq!(r.status, PassStatus::Collapse);
}

#[test]
fn cubic_dirichlet_pass_has_small_residual() {
    let space = Arc::new(FeSpace::new(Mesh1D::unit(32).unwrap(), BoundaryCondition::Dirichlet));
    let pair = FemPair::new(EnergyModel::dirichlet(2.0, parse("xi^3").unwrap()).unwrap(), space.clone()).unwrap();
    let mu = 1.0;
    let zero = vec![0.0; pair.dim()];
    let nodes = space.mesh().nodes().to_vec();
    let shape: Vec<f64> = nodes[1..nodes.len() - 1].iter().map(|x| (std::f64::consts::PI * x).sin()).collect();
    let far: Vec<f64> = shape.iter().map(|v| 8.0 * v).collect();
    assert!(pair.energy(&far, mu).unwrap().0 < 0.0);
    let opts = PassOptions {
        tol: 1e-4,
        ..PassOptions::default()
    };
    let r = mountain_pass(&pair, mu, &zero, &far, &opts).unwrap();
    assert_eq!(r.status, PassStatus::Success);
    assert!(r.residual.unwrap() <= 1e-4);
    assert!(sup_norm(&r.saddle) > 1.0);
    assert!(r.saddle_energy > 0.0);
}
