use super::*;
use crate::dsl::parse;
use crate::varprinciple::geometric_grid;

fn corollary(elements: usize) -> BranchModel {
    BranchModel::power(Expr::Const(1.0), 3.0, Expr::Const(1.0), 0.5, elements).unwrap()
}

#[test]
fn single_solve_is_nonnegative_and_certified() {
    let m = corollary(64);
    let p = solve_plambda(&m, 0.05, &m.initial_guess(0.05), &SolveOptions::default()).unwrap();
    assert_eq!(p.flag, PointFlag::Ok, "{p:?}");
    assert!(p.residual <= 1e-8 && p.min_value >= 0.0);
    assert!(p.u.iter().fold(0.0_f64, |a, v| a.max(v.abs())) > 0.0);
    assert!(p.energy < 0.0);
    assert!(recertify(&m, &p).unwrap().matches(&p));
}

#[test]
fn solution_matches_a_shooting_oracle() {
    // −w'' = √w, w(0)=w(1)=0 by shooting on w'(0); u ≈ λ²w for small λ
    let shoot = |slope: f64| {
        let n = 20000;
        let h = 1.0 / n as f64;
        let (mut w, mut v) = (0.0_f64, slope);
        let rhs = |w: f64| -w.max(0.0).sqrt();
        for _ in 0..n {
            let (k1w, k1v) = (v, rhs(w));
            let (k2w, k2v) = (v + 0.5 * h * k1v, rhs(w + 0.5 * h * k1w));
            let (k3w, k3v) = (v + 0.5 * h * k2v, rhs(w + 0.5 * h * k2w));
            let (k4w, k4v) = (v + h * k3v, rhs(w + h * k3w));
            w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        w
    };
    let (mut lo, mut hi) = (1e-4, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if shoot(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // the peak of w from the bisected initial slope
    let slope = 0.5 * (lo + hi);
    let n = 20000;
    let h = 1.0 / n as f64;
    let (mut w, mut v, mut peak) = (0.0_f64, slope, 0.0_f64);
    for _ in 0..n {
        v -= h * w.max(0.0).sqrt();
        w += h * v;
        peak = peak.max(w);
    }
    let lambda = 0.01;
    let m = corollary(256);
    let p = solve_plambda(&m, lambda, &m.initial_guess(lambda), &SolveOptions::default()).unwrap();
    let umax = p.u.iter().fold(0.0_f64, |a, b| a.max(*b));
    let predicted = lambda * lambda * peak;
    assert!((umax / predicted - 1.0).abs() < 2e-3, "{umax} vs {predicted}");
}

#[test]
fn zero_warm_start_without_sublinear_term() {
    let m = BranchModel::new(parse("xi^3").unwrap(), parse("0").unwrap(), 3.0, 0.5, 32).unwrap();
    let zero = vec![0.0; m.space().dim()];
    let p = solve_plambda(&m, 0.1, &zero, &SolveOptions::default()).unwrap();
    assert_eq!(p.flag, PointFlag::ConvergedToZero);
    assert_eq!(p.residual, 0.0);
}

#[test]
fn preconditions() {
    let f = parse("xi^3").unwrap();
    assert!(BranchModel::new(f.clone(), parse("1").unwrap(), 3.0, 0.0, 16).is_err());
    assert!(BranchModel::new(f.clone(), parse("xi^0.5").unwrap(), 1.0, 0.5, 16).is_err());
    let m = corollary(16);
    assert!(solve_plambda(&m, 0.0, &m.initial_guess(0.1), &SolveOptions::default()).is_err());
    assert!(continue_branch(&m, &[0.1], &SolveOptions::default()).is_err());
    assert!(continue_branch(&m, &geometric_grid(0.002, 0.2, 12).unwrap(), &SolveOptions::default()).is_err());
}

#[test]
fn corollary_branch_passes_every_verdict() {
    let m = corollary(64);
    let grid = geometric_grid(0.2, 0.002, 12).unwrap();
    let b = continue_branch(&m, &grid, &SolveOptions::default()).unwrap();
    assert!(!b.lost);
    assert_eq!(b.points.len(), 12);
    for p in &b.points {
        assert!(p.certified(), "{p:?}");
        assert!(recertify(&m, p).unwrap().matches(p));
    }
    let v = &b.verdicts;
    assert!(v.applicable && v.energy_negative && v.energy_decreasing && v.norms_to_zero, "{v:?}");
    assert!(v.ratio_bounded && v.ratio_spread > 1.0, "{v:?}");
    assert_eq!(b.lambda_star_lower, Some(0.2));
    let ev = bifurcation_evidence(&b.points);
    assert_eq!(ev.evidence, Evidence::Yes);
    assert_eq!(ev.tail.len(), 6);
    assert!(b.conditions.iter().all(|c| c.status == crate::hypotheses::Status::Holds));
}

#[test]
fn halving_the_grid_spacing_keeps_norms() {
    let m = corollary(64);
    let coarse = continue_branch(&m, &geometric_grid(0.2, 0.002, 8).unwrap(), &SolveOptions::default()).unwrap();
    let fine = continue_branch(&m, &geometric_grid(0.2, 0.002, 15).unwrap(), &SolveOptions::default()).unwrap();
    for (i, p) in coarse.points.iter().enumerate() {
        let q = &fine.points[2 * i];
        assert!((p.lambda - q.lambda).abs() <= 1e-15 * p.lambda);
        assert!((p.c1proxy / q.c1proxy - 1.0).abs() <= 0.01);
    }
}

#[test]
fn negative_sublinear_term_collapses() {
    let m = BranchModel::new(parse("xi^3").unwrap(), parse("-xi^0.5").unwrap(), 3.0, 0.5, 32).unwrap();
    let b = continue_branch(&m, &geometric_grid(0.2, 0.002, 8).unwrap(), &SolveOptions::default()).unwrap();
    assert!(b.lost);
    assert!(!b.verdicts.applicable);
    assert_eq!(b.lambda_star_lower, None);
    let blowup = b.conditions.iter().find(|c| c.condition == crate::hypotheses::G_BLOWUP).unwrap();
    assert_eq!(blowup.status, crate::hypotheses::Status::Fails);
}

#[test]
fn evidence_fixtures() {
    assert_eq!(bifurcation_evidence(&[]).evidence, Evidence::Inconclusive);
    let m = corollary(16);
    let p = solve_plambda(&m, 0.1, &m.initial_guess(0.1), &SolveOptions::default()).unwrap();
    let constant: Vec<BranchPoint> = [0.1, 0.05, 0.02, 0.01]
        .iter()
        .map(|l| BranchPoint { lambda: *l, ..p.clone() })
        .collect();
    assert_eq!(bifurcation_evidence(&constant).evidence, Evidence::No);
}

#[test]
fn branch_csv_layout() {
    let m = corollary(16);
    let b = continue_branch(&m, &geometric_grid(0.2, 0.01, 8).unwrap(), &SolveOptions::default()).unwrap();
    let csv = branch_csv(&b);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(BRANCH_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.split(',').count() == 8 && r.ends_with(",ok")));
}
