use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numfmt::sig17;
use crate::optim::Status;
use crate::varprinciple::{restart_rng, run_restarts, EnergyPair, Multistart};

use super::{relative_distance, run_sublevel, LocalMin, MinOptions, Tolerances, DEDUP_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Levels grow toward `sup I`.
    Increasing,
    /// Levels shrink toward `inf Ψ`.
    Decreasing,
}

/// Geometric ladder `ρ_k = start·factor^{±k}`, `k = 0..levels`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Ladder {
    pub start: f64,
    pub factor: f64,
    pub levels: usize,
}

impl Ladder {
    pub fn new(start: f64, factor: f64, levels: usize) -> Result<Ladder> {
        if !(start > 0.0 && start.is_finite()) || !(factor > 1.0 && factor.is_finite()) || levels == 0 {
            return Err(Error::Input(format!(
                "invalid ladder: start {start}, factor {factor}, {levels} levels"
            )));
        }
        Ok(Ladder { start, factor, levels })
    }

    pub fn rhos(&self, mode: Mode) -> Vec<f64> {
        (0..self.levels)
            .map(|k| match mode {
                Mode::Increasing => self.start * self.factor.powi(k as i32),
                Mode::Decreasing => self.start / self.factor.powi(k as i32),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HuntOptions {
    /// Sampled restarts per level (warm starts come on top), seed and
    /// per-run iteration cap.
    pub multistart: Multistart,
    pub tol: Tolerances,
    /// Consecutive levels without a new acceptance, counted from the first
    /// acceptance, before stopping.
    pub stagnation: usize,
    /// In decreasing mode, points within this sup-distance of the origin
    /// are rejected as trivial.
    pub nonzero: f64,
}

impl HuntOptions {
    pub fn new(multistart: Multistart, tol: Tolerances) -> HuntOptions {
        HuntOptions {
            multistart,
            tol,
            stagnation: 3,
            nonzero: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Gradient, curvature or residual certificate failed.
    NotCertified,
    /// The point sits on the sublevel boundary.
    Boundary,
    /// Same minimum as an accepted point.
    Duplicate,
    /// Accepting would break strict monotonicity of the `Ψ` sequence.
    NotMonotone,
    /// The trivial point in decreasing mode.
    Zero,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NotCertified => "not_certified",
            RejectReason::Boundary => "boundary",
            RejectReason::Duplicate => "duplicate",
            RejectReason::NotMonotone => "not_monotone",
            RejectReason::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HuntRow {
    pub level_index: usize,
    pub rho: f64,
    pub psi: f64,
    pub phi: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub residual: Option<f64>,
    pub accepted: bool,
    pub reject_reason: Option<RejectReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LadderEnd,
    Stagnation,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HuntReport {
    pub mode: Mode,
    pub mu: f64,
    pub ladder: Vec<f64>,
    pub levels_run: usize,
    pub accepted: Vec<LocalMin>,
    /// Level index at which each accepted point was found.
    pub accepted_levels: Vec<usize>,
    pub rows: Vec<HuntRow>,
    pub stop: StopReason,
}

impl HuntReport {
    /// Strict monotonicity of accepted `Ψ` values and pairwise distinctness.
    pub fn invariants_hold(&self) -> bool {
        let monotone = self.accepted.windows(2).all(|w| match self.mode {
            Mode::Increasing => w[1].psi > w[0].psi,
            Mode::Decreasing => w[1].psi < w[0].psi,
        });
        let distinct = self.accepted.iter().enumerate().all(|(i, a)| {
            self.accepted[i + 1..]
                .iter()
                .all(|b| relative_distance(&a.point, &b.point) > DEDUP_TOL)
        });
        monotone && distinct
    }
}

/// Ladder of minima at growing `Ψ`-levels.
pub fn hunt_increasing<P: EnergyPair + ?Sized>(pair: &P, mu: f64, ladder: &Ladder, opts: &HuntOptions) -> Result<HuntReport> {
    if !pair.coercive() {
        return Err(crate::error::precondition("increasing hunts need a coercive Ψ"));
    }
    hunt(pair, mu, ladder, Mode::Increasing, opts)
}

/// Ladder of nonzero minima at shrinking `Ψ`-levels.
pub fn hunt_decreasing<P: EnergyPair + ?Sized>(pair: &P, mu: f64, ladder: &Ladder, opts: &HuntOptions) -> Result<HuntReport> {
    hunt(pair, mu, ladder, Mode::Decreasing, opts)
}

fn hunt<P: EnergyPair + ?Sized>(pair: &P, mu: f64, ladder: &Ladder, mode: Mode, opts: &HuntOptions) -> Result<HuntReport> {
    let rhos = ladder.rhos(mode);
    let origin = pair.origin();
    let psi0 = pair.psi(&origin)?.0;
    let min_opts = MinOptions {
        tol: opts.tol,
        max_iter: opts.multistart.descent.max_iter,
        seed: opts.multistart.seed,
    };
    let mut accepted: Vec<LocalMin> = Vec::new();
    let mut accepted_levels = Vec::new();
    let mut rows = Vec::new();
    let mut warm: Vec<Vec<f64>> = Vec::new();
    let mut idle = 0;
    let mut stop = StopReason::LadderEnd;
    let mut levels_run = 0;

    for (k, &rho) in rhos.iter().enumerate() {
        if !(rho > psi0) {
            break;
        }
        levels_run += 1;
        let budget = opts.multistart.budget;
        let mut starts = warm.clone();
        for i in 0..budget {
            let mut rng = restart_rng(opts.multistart.seed, 16 + k as u64, i);
            starts.push(pair.sample(rho, i, &mut rng)?);
        }
        let mut found: Vec<(usize, LocalMin)> = run_restarts(starts.len(), |i| run_sublevel(pair, mu, rho, &starts[i], &min_opts))?
            .into_iter()
            .enumerate()
            .collect();
        // order by Ψ in the ladder direction so several minima can enter per level
        found.sort_by(|(ia, a), (ib, b)| {
            let ord = match mode {
                Mode::Increasing => a.psi.total_cmp(&b.psi),
                Mode::Decreasing => b.psi.total_cmp(&a.psi),
            };
            ord.then(ia.cmp(ib))
        });

        let mut new_here = 0;
        let mut next_warm: Vec<Vec<f64>> = Vec::new();
        for (_, cand) in &found {
            let reason = if !cand.interior {
                Some(RejectReason::Boundary)
            } else if !cand.certified(&opts.tol) {
                Some(RejectReason::NotCertified)
            } else if mode == Mode::Decreasing && sup_distance(&cand.point, &origin) <= opts.nonzero {
                Some(RejectReason::Zero)
            } else if accepted.iter().any(|a| relative_distance(&a.point, &cand.point) <= DEDUP_TOL) {
                Some(RejectReason::Duplicate)
            } else if accepted.last().is_some_and(|last| match mode {
                Mode::Increasing => !(cand.psi > last.psi),
                Mode::Decreasing => !(cand.psi < last.psi),
            }) {
                Some(RejectReason::NotMonotone)
            } else {
                None
            };
            rows.push(HuntRow {
                level_index: k,
                rho,
                psi: cand.psi,
                phi: cand.phi,
                energy: cand.energy,
                grad_norm: cand.grad_norm,
                residual: cand.residual,
                accepted: reason.is_none(),
                reject_reason: reason,
            });
            match reason {
                None => {
                    accepted.push(cand.clone());
                    accepted_levels.push(k);
                    new_here += 1;
                }
                Some(RejectReason::Boundary) | Some(RejectReason::NotMonotone)
                    // descent was cut short by the level or may lead elsewhere next level
                    if next_warm.len() < budget
                        && next_warm.iter().all(|w| relative_distance(w, &cand.point) > DEDUP_TOL)
                        && cand.status != Status::MaxIter
                    => {
                        next_warm.push(cand.point.clone());
                    }
                _ => {}
            }
        }
        warm = next_warm;
        if new_here == 0 {
            // levels climbing toward the first minimum do not count as idle
            if accepted.is_empty() {
                continue;
            }
            idle += 1;
            if idle >= opts.stagnation {
                stop = StopReason::Stagnation;
                break;
            }
        } else {
            idle = 0;
        }
    }
    Ok(HuntReport {
        mode,
        mu,
        ladder: rhos,
        levels_run,
        accepted,
        accepted_levels,
        rows,
        stop,
    })
}

pub const HUNT_HEADER: &str = "level_index,rho,psi,phi,energy,grad_norm,residual,accepted,reject_reason";

pub fn hunt_csv(report: &HuntReport) -> String {
    let mut out = String::from(HUNT_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.level_index,
            sig17(r.rho),
            sig17(r.psi),
            sig17(r.phi),
            sig17(r.energy),
            sig17(r.grad_norm),
            r.residual.map(sig17).unwrap_or_default(),
            r.accepted as u8,
            r.reject_reason.map(RejectReason::as_str).unwrap_or("")
        );
    }
    out
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
