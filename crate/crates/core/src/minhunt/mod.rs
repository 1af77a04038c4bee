//! Local minima of `Φ + μΨ` on sublevel sets `{Ψ < ρ}`, ladders of them at
//! growing or shrinking levels, and mountain-pass critical points between
//! two minima.
//!
//! A discrete local minimum is certified by a small gradient together with a
//! curvature spot check: the energy must not drop along `2m` random
//! directions at step `1e-4`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{precondition, Result};
use crate::optim::{descend, sup_norm, DescentOptions, Region, Status};
use crate::varprinciple::{best_index, restart_rng, run_restarts, Backing, EnergyPair, Multistart};

mod hunt;
mod pass;
#[cfg(test)]
mod tests;

pub use hunt::{
    hunt_csv, hunt_decreasing, hunt_increasing, HuntOptions, HuntReport, HuntRow, Ladder, Mode, RejectReason,
    StopReason, HUNT_HEADER,
};
pub use pass::{mountain_pass, MountainPassResult, PassOptions, PassStatus};

/// Certification thresholds for local minima.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Tolerances {
    /// Sup-norm bound on the gradient of `Φ + μΨ`.
    pub grad: f64,
    /// Bound on the weak-form residual (FEM pairs only).
    pub residual: f64,
}

impl Tolerances {
    pub const TOY: Tolerances = Tolerances {
        grad: 1e-8,
        residual: 1e-8,
    };
    pub const FEM: Tolerances = Tolerances {
        grad: 1e-6,
        residual: 1e-6,
    };

    pub fn for_backing(backing: Backing) -> Tolerances {
        match backing {
            Backing::AnalyticToy => Tolerances::TOY,
            Backing::Fem => Tolerances::FEM,
        }
    }
}

/// Descent target relative to the certification tolerance.
pub const POLISH_FACTOR: f64 = 1e-3;
/// Step of the curvature spot check.
pub const CURVATURE_STEP: f64 = 1e-4;
/// Displacement cap of sublevel descents relative to `1 + ‖x‖∞`, so a run
/// settles in the well it starts in instead of jumping to a deeper one.
pub const MAX_REL_STEP: f64 = 0.05;
/// Relative gap below the generating level required for the interior flag.
pub const INTERIOR_GAP: f64 = 1e-8;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LocalMin {
    pub point: Vec<f64>,
    pub psi: f64,
    pub phi: f64,
    pub energy: f64,
    pub mu: f64,
    /// Generating sublevel.
    pub rho: f64,
    pub grad_norm: f64,
    pub interior: bool,
    pub curvature_ok: bool,
    pub residual: Option<f64>,
    pub iterations: usize,
    pub status: Status,
}

impl LocalMin {
    /// Whether the stored numbers meet `tol` (gradient, curvature, interior
    /// flag consistency and residual).
    pub fn certified(&self, tol: &Tolerances) -> bool {
        self.grad_norm <= tol.grad
            && self.curvature_ok
            && (!self.interior || self.psi < self.rho)
            && self.residual.is_none_or(|r| r <= tol.residual)
    }
}

/// Recomputes every certificate of a candidate minimizer from its
/// coordinates alone.
pub fn certify<P: EnergyPair + ?Sized>(pair: &P, mu: f64, rho: f64, x: &[f64], seed: u64) -> Result<LocalMin> {
    let (phi, _) = pair.phi(x)?;
    let (psi, _) = pair.psi(x)?;
    let (energy, grad) = pair.energy(x, mu)?;
    Ok(LocalMin {
        point: x.to_vec(),
        psi,
        phi,
        energy,
        mu,
        rho,
        grad_norm: sup_norm(&grad),
        interior: psi < rho - INTERIOR_GAP * rho.abs().max(1e-300),
        curvature_ok: curvature_check(pair, mu, x, energy, seed)?,
        residual: pair.weak_residual(x, mu)?,
        iterations: 0,
        status: Status::Converged,
    })
}

/// Energy must not decrease by more than `1e-12(1 + |E|)` along `2m` random
/// unit directions at step [`CURVATURE_STEP`].
pub fn curvature_check<P: EnergyPair + ?Sized>(pair: &P, mu: f64, x: &[f64], energy: f64, seed: u64) -> Result<bool> {
    let m = x.len();
    let mut rng = restart_rng(seed, u64::from(u32::MAX), m);
    let slack = 1e-12 * (1.0 + energy.abs());
    for _ in 0..2 * m {
        let mut d: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        for v in d.iter_mut() {
            *v *= CURVATURE_STEP / n;
        }
        let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        if pair.energy(&y, mu)?.0 < energy - slack {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Settings for one sublevel minimization.
#[derive(Debug, Clone, Copy)]
pub struct MinOptions {
    pub tol: Tolerances,
    pub max_iter: usize,
    /// Seed of the curvature spot check.
    pub seed: u64,
}

impl MinOptions {
    pub fn for_backing(backing: Backing) -> MinOptions {
        MinOptions {
            tol: Tolerances::for_backing(backing),
            max_iter: 5000,
            seed: 0,
        }
    }

    pub fn descent(&self) -> DescentOptions {
        DescentOptions {
            tol: self.tol.grad * POLISH_FACTOR,
            max_iter: self.max_iter,
            max_rel_step: MAX_REL_STEP,
            ..DescentOptions::default()
        }
    }
}

/// Descends `Φ + μΨ` from `start` inside `{Ψ ≤ ρ}`; trial points leaving the
/// set are pulled back toward the origin.
pub fn minimize_sublevel<P: EnergyPair + ?Sized>(
    pair: &P,
    mu: f64,
    rho: f64,
    start: &[f64],
    opts: &MinOptions,
) -> Result<LocalMin> {
    let psi_start = pair.psi(start)?.0;
    if !(psi_start < rho) {
        return Err(precondition(format!("infeasible start: Ψ(start) = {psi_start} is not below ρ = {rho}")));
    }
    run_sublevel(pair, mu, rho, start, opts)
}

fn run_sublevel<P: EnergyPair + ?Sized>(pair: &P, mu: f64, rho: f64, start: &[f64], opts: &MinOptions) -> Result<LocalMin> {
    let origin = pair.origin();
    let psi = |x: &[f64]| pair.psi(x);
    let energy = |x: &[f64]| pair.energy(x, mu);
    let region = Region {
        psi: &psi,
        bound: rho,
        center: &origin,
    };
    let run = descend(&energy, Some(&region), start, &opts.descent())?;
    let mut min = certify(pair, mu, rho, &run.x, opts.seed)?;
    min.iterations = run.iterations;
    min.status = run.status;
    Ok(min)
}

/// Best of a multistart unconstrained minimization of `Φ + μΨ`, with the
/// smallest one-sided directional slope at the result.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GlobalMin {
    pub point: Vec<f64>,
    pub energy: f64,
    pub grad_norm: f64,
    /// `min_d (E(x + h·d) - E(x))/h` over `±` coordinate directions; a
    /// non-negative value (up to `O(h)`) certifies `0 ∈ ∂E(x)` for convex `E`.
    pub min_slope: f64,
    pub status: Status,
}

pub const SLOPE_STEP: f64 = 1e-7;

/// Multistart unconstrained minimization with starts drawn from `{Ψ ≤ spread}`.
pub fn minimize_global<P: EnergyPair + ?Sized>(pair: &P, mu: f64, spread: f64, opts: &Multistart) -> Result<GlobalMin> {
    let energy = |x: &[f64]| pair.energy(x, mu);
    let mut runs = run_restarts(opts.budget, |i| {
        let mut rng = restart_rng(opts.seed, 3, i);
        let start = pair.sample(spread, i, &mut rng)?;
        descend(&energy, None, &start, &opts.descent)
    })?;
    let best = best_index(runs.iter().map(|r| r.value)).ok_or_else(|| precondition("restart budget is 0"))?;
    let run = runs.swap_remove(best);
    Ok(GlobalMin {
        min_slope: one_sided_slope(pair, mu, &run.x, SLOPE_STEP)?,
        grad_norm: sup_norm(&run.grad),
        energy: run.value,
        point: run.x,
        status: run.status,
    })
}

/// Smallest forward difference quotient of `Φ + μΨ` along `±e_j`.
pub fn one_sided_slope<P: EnergyPair + ?Sized>(pair: &P, mu: f64, x: &[f64], h: f64) -> Result<f64> {
    let e0 = pair.energy(x, mu)?.0;
    let mut min = f64::INFINITY;
    let mut y = x.to_vec();
    for j in 0..x.len() {
        for s in [h, -h] {
            y[j] = x[j] + s;
            min = min.min((pair.energy(&y, mu)?.0 - e0) / h);
        }
        y[j] = x[j];
    }
    Ok(min)
}

/// `‖a - b‖∞ / (1 + max(‖a‖∞, ‖b‖∞))`.
pub fn relative_distance(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    d / (1.0 + sup_norm(a).max(sup_norm(b)))
}

/// Points closer than this (in [`relative_distance`]) are the same minimum.
pub const DEDUP_TOL: f64 = 1e-6;
