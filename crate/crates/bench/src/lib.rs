//! Shared fixtures for the criterion benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use varlab_core::varprinciple::FemPair;
use varlab_core::{parse, BoundaryCondition, EnergyModel, FeSpace, Mesh1D};

pub fn dirichlet_space(n: usize) -> Arc<FeSpace> {
    Arc::new(FeSpace::new(Mesh1D::unit(n).expect("n > 0"), BoundaryCondition::Dirichlet))
}

/// `-Δ_p u = u³` with Dirichlet conditions on `n` elements.
pub fn cubic_pair(p: f64, n: usize) -> FemPair {
    let model = EnergyModel::dirichlet(p, parse("xi^3").expect("valid expression")).expect("valid model");
    FemPair::new(model, dirichlet_space(n)).expect("valid pair")
}

/// A smooth, non-symmetric state with `n - 1` free coefficients.
pub fn bump(n: usize) -> Vec<f64> {
    (1..n)
        .map(|i| {
            let x = i as f64 / n as f64;
            2.0 * (PI * x).sin() + 0.3 * (3.0 * PI * x).sin()
        })
        .collect()
}

/// `ξ` values spread over `[-10, 10]`.
pub fn xi_samples(count: usize) -> Vec<f64> {
    (0..count).map(|i| -10.0 + 20.0 * i as f64 / (count - 1) as f64).collect()
}
