//! The threshold quotient
//!
//! ```text
//! φ(ρ) = inf_{Ψ(x) < ρ} (Φ(x) - inf_{Ψ ≤ ρ} Φ) / (ρ - Ψ(x))
//! ```
//!
//! its head/tail estimates `δ̂`, `γ̂` on a geometric `ρ`-grid, and the
//! convex-case threshold `λ*`. Sublevel infima are taken over the closed set
//! `{Ψ ≤ ρ}` and estimated by multistart descent, so every value is an upper
//! bound backed by a stored point.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{precondition, Error, Result};
use crate::numfmt::sig17;
use crate::optim::{descend, DescentOptions, DescentResult, Region, Status};

mod pairs;
#[cfg(test)]
mod tests;

pub use pairs::{AnalyticPair, Backing, EnergyPair, Evaluator, FemPair, SAMPLE_MODES};

/// Restart budget, seed and per-run descent settings.
#[derive(Debug, Clone, Copy)]
pub struct Multistart {
    pub budget: usize,
    pub seed: u64,
    pub descent: DescentOptions,
}

impl Default for Multistart {
    fn default() -> Self {
        Multistart {
            budget: 16,
            seed: 0,
            descent: DescentOptions {
                tol: 1e-10,
                max_iter: 3000,
                ..DescentOptions::default()
            },
        }
    }
}

/// Independent generator for restart `index` of search `stage`.
pub fn restart_rng(seed: u64, stage: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stage << 32) | index as u64);
    rng
}

/// Runs `run` for every restart index concurrently and returns the results
/// in index order.
pub fn run_restarts<T: Send>(budget: usize, run: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..budget).into_par_iter().map(&run).collect()
}

/// Index of the smallest key; ties go to the lowest index.
pub fn best_index(keys: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, k) in keys.into_iter().enumerate() {
        if k.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| k < b) {
            best = Some((i, k));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunFlag {
    Ok,
    /// The winning restart hit the iteration cap or stalled above tolerance.
    NonConvergence,
}

impl RunFlag {
    pub fn from_status(status: Status) -> RunFlag {
        match status {
            Status::Converged => RunFlag::Ok,
            _ => RunFlag::NonConvergence,
        }
    }

    pub fn and(self, other: RunFlag) -> RunFlag {
        if self == RunFlag::Ok { other } else { self }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunFlag::Ok => "ok",
            RunFlag::NonConvergence => "non_convergence",
        }
    }
}

/// Best point of a sublevel-constrained minimization of `Φ`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SublevelMin {
    pub value: f64,
    pub point: Vec<f64>,
    pub flag: RunFlag,
}

fn check_level<P: EnergyPair + ?Sized>(pair: &P, rho: f64, margin: f64) -> Result<f64> {
    let psi0 = pair.psi(&pair.origin())?.0;
    if !(rho > psi0 + margin) {
        return Err(precondition(format!(
            "infeasible start: ρ = {rho} does not exceed Ψ(x₀) = {psi0} by {margin}"
        )));
    }
    Ok(psi0)
}

/// Estimates `inf {Φ(x) : Ψ(x) ≤ ρ}` by multistart projected descent.
pub fn inf_phi_on_sublevel<P: EnergyPair + ?Sized>(pair: &P, rho: f64, opts: &Multistart) -> Result<SublevelMin> {
    check_level(pair, rho, 0.0)?;
    let runs = sublevel_runs(pair, &|x| pair.phi(x), rho, 0, opts)?;
    let best = best_index(runs.iter().map(|r| r.value)).ok_or_else(|| Error::Input("restart budget is 0".into()))?;
    let r = &runs[best];
    Ok(SublevelMin {
        value: r.value,
        point: r.x.clone(),
        flag: RunFlag::from_status(r.status),
    })
}

fn sublevel_runs<P: EnergyPair + ?Sized>(
    pair: &P,
    objective: &(dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Sync),
    bound: f64,
    stage: u64,
    opts: &Multistart,
) -> Result<Vec<DescentResult>> {
    let origin = pair.origin();
    let psi = |x: &[f64]| pair.psi(x);
    let region = Region {
        psi: &psi,
        bound,
        center: &origin,
    };
    run_restarts(opts.budget, |i| {
        let mut rng = restart_rng(opts.seed, stage, i);
        let start = pair.sample(bound, i, &mut rng)?;
        descend(objective, Some(&region), &start, &opts.descent)
    })
}

/// One sampled value of the threshold quotient with its certificates.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PhiCurvePoint {
    pub rho: f64,
    pub phi_hat: f64,
    pub m_hat: f64,
    /// Arg-min of the quotient; `Ψ < ρ` there.
    pub certificate_x: Vec<f64>,
    /// Arg-min of `Φ` over `{Ψ ≤ ρ}`.
    pub certificate_infx: Vec<f64>,
    pub psi_at_cert: f64,
    pub phi_value_at_cert: f64,
    pub restarts: usize,
    pub flag: RunFlag,
}

/// `(Φ(x) - m) / (ρ - Ψ(x))`.
pub fn quotient<P: EnergyPair + ?Sized>(pair: &P, x: &[f64], rho: f64, m: f64) -> Result<f64> {
    let phi = pair.phi(x)?.0;
    let psi = pair.psi(x)?.0;
    Ok((phi - m) / (rho - psi))
}

/// Relative width of the boundary strip excluded from the quotient search.
pub const BOUNDARY_GUARD: f64 = 1e-6;
/// Default distance `ρ` must keep from `Ψ(x₀)`.
pub const LEVEL_MARGIN: f64 = 1e-9;
const MAX_REFINEMENTS: usize = 3;

/// Two-stage estimate of `φ(ρ)`: the sublevel infimum `m̂`, then the
/// quotient minimized over `{Ψ ≤ ρ - 1e-6·ρ}`.
pub fn phi_of_rho<P: EnergyPair + ?Sized>(pair: &P, rho: f64, opts: &Multistart) -> Result<PhiCurvePoint> {
    let psi0 = check_level(pair, rho, LEVEL_MARGIN)?;
    let inf = inf_phi_on_sublevel(pair, rho, opts)?;
    let mut m_hat = inf.value;
    let mut infx = inf.point;
    let mut flag = inf.flag;
    let bound = (rho - BOUNDARY_GUARD * rho.abs()).max(0.5 * (rho + psi0));
    let origin = pair.origin();

    for round in 0.. {
        let m = m_hat;
        let q = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (phi, gphi) = pair.phi(x)?;
            let (psi, gpsi) = pair.psi(x)?;
            let den = rho - psi;
            let num = phi - m;
            let g = gphi.iter().zip(&gpsi).map(|(a, b)| (a * den + num * b) / (den * den)).collect();
            Ok((num / den, g))
        };
        let mut runs = sublevel_runs(pair, &q, bound, 1, opts)?;
        // the centre itself is always a candidate
        let psi = |x: &[f64]| pair.psi(x);
        let region = Region {
            psi: &psi,
            bound,
            center: &origin,
        };
        runs.push(descend(&q, Some(&region), &origin, &opts.descent)?);
        let best = best_index(runs.iter().map(|r| r.value)).expect("at least one run");
        let cert = runs.swap_remove(best);
        let phi_cert = pair.phi(&cert.x)?.0;
        if phi_cert < m_hat && round < MAX_REFINEMENTS {
            // the quotient search found a lower Φ; the sublevel infimum was not tight
            m_hat = phi_cert;
            infx = cert.x;
            continue;
        }
        if phi_cert < m_hat {
            m_hat = phi_cert;
            infx = cert.x.clone();
        }
        flag = flag.and(RunFlag::from_status(cert.status));
        let phi_hat = quotient(pair, &cert.x, rho, m_hat)?;
        let psi_at_cert = pair.psi(&cert.x)?.0;
        return Ok(PhiCurvePoint {
            rho,
            phi_hat,
            m_hat,
            certificate_x: cert.x,
            certificate_infx: infx,
            psi_at_cert,
            phi_value_at_cert: phi_cert,
            restarts: opts.budget,
            flag,
        });
    }
    unreachable!()
}

/// Recomputes a point's quotient and infimum from its certificates and
/// returns the larger of the two discrepancies.
pub fn recheck_point<P: EnergyPair + ?Sized>(pair: &P, point: &PhiCurvePoint) -> Result<f64> {
    let q = quotient(pair, &point.certificate_x, point.rho, point.m_hat)?;
    let m = pair.phi(&point.certificate_infx)?.0;
    let psi_inf = pair.psi(&point.certificate_infx)?.0;
    let psi_cert = pair.psi(&point.certificate_x)?.0;
    if !(psi_cert < point.rho) || psi_inf > point.rho + 1e-10 {
        return Ok(f64::INFINITY);
    }
    Ok((q - point.phi_hat).abs().max((m - point.m_hat).abs()))
}

/// `n` geometrically spaced values from `a` to `b` inclusive.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Input(format!("invalid geometric grid {a} → {b} with {n} points")));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let r = (b / a).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| a * (r * i as f64).exp()).collect();
    g[n - 1] = b;
    Ok(g)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ThresholdReport {
    pub grid: Vec<f64>,
    pub window: usize,
    pub points: Vec<PhiCurvePoint>,
    /// Minimum of `φ̂` over the last `window` grid points.
    pub gamma_hat: f64,
    /// Minimum of `φ̂` over the first `window` grid points.
    pub delta_hat: f64,
    /// Minimum of `φ̂` over the whole grid (meaningful for convex pairs).
    pub lambda_star_hat: f64,
    /// `min_{j ≥ i} φ̂(ρ_j)`: the lower envelope seen from the right.
    pub tail_envelope: Vec<f64>,
    /// Whether `φ̂` is non-increasing along the grid.
    pub monotone_nonincreasing: bool,
    pub inf_psi: f64,
    /// `None` stands for `+∞` (coercive `Ψ`).
    pub sup_i: Option<f64>,
    pub convex: bool,
}

/// Samples `φ̂` on an increasing `ρ`-grid and forms the window estimates.
pub fn thresholds<P: EnergyPair + ?Sized>(
    pair: &P,
    grid: &[f64],
    window: usize,
    opts: &Multistart,
) -> Result<ThresholdReport> {
    if grid.is_empty() {
        return Err(Error::Input("empty ρ-grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Input("the ρ-grid must be strictly increasing".into()));
    }
    if window == 0 {
        return Err(Error::Input("the tail window must be positive".into()));
    }
    let inf_psi = pair.psi(&pair.origin())?.0;
    let mut points = Vec::with_capacity(grid.len());
    for &rho in grid {
        points.push(phi_of_rho(pair, rho, opts)?);
    }
    let phis: Vec<f64> = points.iter().map(|p| p.phi_hat).collect();
    let w = window.min(phis.len());
    let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    let mut tail_envelope = phis.clone();
    for i in (0..phis.len().saturating_sub(1)).rev() {
        tail_envelope[i] = tail_envelope[i].min(tail_envelope[i + 1]);
    }
    Ok(ThresholdReport {
        grid: grid.to_vec(),
        window,
        gamma_hat: min(&phis[phis.len() - w..]),
        delta_hat: min(&phis[..w]),
        lambda_star_hat: min(&phis),
        monotone_nonincreasing: phis.windows(2).all(|p| p[1] <= p[0]),
        tail_envelope,
        points,
        inf_psi,
        sup_i: if pair.coercive() { None } else { Some(grid[grid.len() - 1]) },
        convex: pair.convex(),
    })
}

/// `λ̂* = min_ρ φ̂(ρ)` over the grid, with the sublevel closure `{Ψ ≤ ρ}`.
pub fn lambda_star<P: EnergyPair + ?Sized>(pair: &P, grid: &[f64], opts: &Multistart) -> Result<f64> {
    if !pair.convex() {
        return Err(precondition("λ* is defined for pairs declared convex"));
    }
    if grid.is_empty() {
        return Err(Error::Input("empty ρ-grid".into()));
    }
    let mut best = f64::INFINITY;
    for &rho in grid {
        best = best.min(phi_of_rho(pair, rho, opts)?.phi_hat);
    }
    Ok(best)
}

pub const PHI_CURVE_HEADER: &str = "rho,phi_hat,m_hat,psi_at_cert,phi_value_at_cert,restarts,flag";

pub fn phi_curve_csv(points: &[PhiCurvePoint]) -> String {
    let mut out = String::from(PHI_CURVE_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sig17(p.rho),
            sig17(p.phi_hat),
            sig17(p.m_hat),
            sig17(p.psi_at_cert),
            sig17(p.phi_value_at_cert),
            p.restarts,
            p.flag.as_str()
        );
    }
    out
}
