//! Continuation of the non-negative solution branch of
//! `−u'' = f(x, u) + λ g(x, u)` on `(0, 1)` with `u(0) = u(1) = 0`, for a
//! superlinear `f` (exponent `s > 1`) and a sublinear `g` (exponent
//! `0 < q < 1`), as `λ → 0⁺`.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dsl::Expr;
use crate::error::{precondition, Result};
use crate::fem::{defect_jacobian, energy_parts, norms, weak_defect, BoundaryCondition, DiscreteFn, EnergyModel, FeSpace, Mesh1D};
use crate::hypotheses::{check_small_data, Grid, Verdict};
use crate::numfmt::sig17;
use crate::optim::{descend, sup_norm, DescentOptions};

#[cfg(test)]
mod tests;

/// Residual a branch point must reach.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Lowest admissible nodal value.
pub const SIGN_TOL: f64 = 1e-10;
/// Largest admissible max/min spread of the tail ratios.
pub const RATIO_SPREAD: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct BranchModel {
    pub f: Expr,
    pub g: Expr,
    pub s: f64,
    pub q: f64,
    space: Arc<FeSpace>,
}

impl BranchModel {
    pub fn new(f: Expr, g: Expr, s: f64, q: f64, elements: usize) -> Result<BranchModel> {
        if !(s > 1.0) || !s.is_finite() {
            return Err(precondition(format!("s must exceed 1, got {s}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(precondition(format!("q must lie in (0, 1), got {q}")));
        }
        let space = Arc::new(FeSpace::new(Mesh1D::unit(elements)?, BoundaryCondition::Dirichlet));
        Ok(BranchModel { f, g, s, q, space })
    }

    /// `f = α·ξ^s`, `g = β·ξ^q`.
    pub fn power(alpha: Expr, s: f64, beta: Expr, q: f64, elements: usize) -> Result<BranchModel> {
        let pw = |c: Expr, e: f64| {
            Expr::mul(c, Expr::binary(crate::dsl::BinOp::Pow, Expr::xi(), Expr::Const(e)))
        };
        BranchModel::new(pw(alpha, s), pw(beta, q), s, q, elements)
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    /// Right-hand side `f + λg`, truncated to 0 for negative states.
    pub fn energy_model(&self, lambda: f64) -> Result<EnergyModel> {
        let rhs = Expr::add(self.f.clone(), Expr::mul(Expr::Const(lambda), self.g.clone()));
        Ok(EnergyModel::dirichlet(2.0, rhs)?.with_negative_truncation())
    }

    /// `q/(1−q)`, the power of `λ` the `C¹` norm is compared with.
    pub fn ratio_exponent(&self) -> f64 {
        self.q / (1.0 - self.q)
    }

    /// Amplitude of the one-mode Galerkin solution of `−u'' = λ g₀ u^q` with
    /// `g₀ = |g(½, 1)|`: `u ≈ (2λg₀S/π²)^{1/(1−q)}`, `S = ∫ sin^{1+q}(πx)`.
    pub fn amplitude(&self, lambda: f64) -> f64 {
        let g0 = self.g.eval(0.5, 1.0).map(f64::abs).unwrap_or(1.0);
        let g0 = if g0 > 0.0 && g0.is_finite() { g0 } else { 1.0 };
        let m = 2000;
        let s: f64 = (0..m)
            .map(|i| (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).sin().powf(1.0 + self.q))
            .sum::<f64>()
            / m as f64;
        let pi2 = std::f64::consts::PI.powi(2);
        (2.0 * lambda * g0 * s / pi2).powf(1.0 / (1.0 - self.q))
    }

    /// The one-mode guess `amplitude(λ)·sin(πx)` on the free nodes.
    pub fn initial_guess(&self, lambda: f64) -> Vec<f64> {
        let a = self.amplitude(lambda);
        DiscreteFn::interpolate(self.space.clone(), |x| a * (std::f64::consts::PI * x).sin()).into_coeffs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    Ok,
    /// The solve ended at the trivial solution.
    ConvergedToZero,
    /// Newton did not improve on the descent result, which is reported.
    DescentOnly,
    /// The residual stayed above tolerance.
    NotConverged,
}

impl PointFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointFlag::Ok => "ok",
            PointFlag::ConvergedToZero => "converged_to_zero",
            PointFlag::DescentOnly => "descent_only",
            PointFlag::NotConverged => "not_converged",
        }
    }

    /// A nontrivial point with a certified residual.
    pub fn converged(self) -> bool {
        matches!(self, PointFlag::Ok | PointFlag::DescentOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: f64,
    /// Nodal values, boundary nodes included.
    pub u: Vec<f64>,
    pub c1proxy: f64,
    /// `c1proxy / λ^{q/(1−q)}`.
    pub ratio: f64,
    /// `½∫u'² − ∫F − λ∫G`.
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Smallest interior nodal value.
    pub min_value: f64,
    pub flag: PointFlag,
}

impl BranchPoint {
    fn coeffs(&self) -> Vec<f64> {
        self.u[1..self.u.len() - 1].to_vec()
    }

    pub fn certified(&self) -> bool {
        self.flag.converged() && self.residual <= RESIDUAL_TOL && self.min_value >= -SIGN_TOL
    }
}

/// Values recomputed from a point's nodal data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recertification {
    pub residual: f64,
    pub min_value: f64,
    pub energy: f64,
    pub ratio: f64,
    pub c1proxy: f64,
}

impl Recertification {
    /// Agreement with the stored values to 1e-10.
    pub fn matches(&self, p: &BranchPoint) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()));
        close(self.energy, p.energy) && close(self.ratio, p.ratio) && close(self.c1proxy, p.c1proxy)
            && close(self.min_value, p.min_value)
            && close(self.residual, p.residual)
    }
}

struct Measured {
    energy: f64,
    residual: f64,
    c1proxy: f64,
    min_value: f64,
    nodal: Vec<f64>,
}

fn measure(model: &BranchModel, em: &EnergyModel, coeffs: &[f64]) -> Result<Measured> {
    let space = &model.space;
    let parts = energy_parts(em, space, coeffs, false)?;
    let defect = weak_defect(em, space, coeffs, 1.0)?;
    let u = DiscreteFn::new(space.clone(), coeffs.to_vec())?;
    let nodal = u.nodal_values();
    Ok(Measured {
        energy: parts.phi + 0.5 * parts.psi,
        residual: sup_norm(&defect),
        c1proxy: norms(&u, 2.0).c1proxy,
        min_value: coeffs.iter().copied().fold(f64::INFINITY, f64::min),
        nodal,
    })
}

/// Recomputes residual, sign, energy and ratio from the stored nodal values.
pub fn recertify(model: &BranchModel, p: &BranchPoint) -> Result<Recertification> {
    if p.u.len() != model.space.mesh().nodes().len() {
        return Err(precondition("nodal vector does not match the mesh"));
    }
    let em = model.energy_model(p.lambda)?;
    let m = measure(model, &em, &p.coeffs())?;
    Ok(Recertification {
        residual: m.residual,
        min_value: m.min_value,
        energy: m.energy,
        ratio: m.c1proxy / p.lambda.powf(model.ratio_exponent()),
        c1proxy: m.c1proxy,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub descent_iter: usize,
    pub newton_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            descent_iter: 4000,
            newton_iter: 50,
        }
    }
}

/// Energy descent from `warm` in variables scaled by the natural amplitude,
/// then Newton's method on the weak-form system.
pub fn solve_plambda(model: &BranchModel, lambda: f64, warm: &[f64], opts: &SolveOptions) -> Result<BranchPoint> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(precondition(format!("λ must be positive, got {lambda}")));
    }
    let space = &model.space;
    if warm.len() != space.dim() {
        return Err(precondition("warm start does not match the space"));
    }
    let em = model.energy_model(lambda)?;
    let sigma = model.amplitude(lambda);
    // E(σw)/σ² keeps energies and gradients of order one
    let obj = |w: &[f64]| -> Result<(f64, Vec<f64>)> {
        let u: Vec<f64> = w.iter().map(|v| sigma * v).collect();
        let p = energy_parts(&em, space, &u, true)?;
        let g = p.grad_phi.iter().zip(&p.grad_psi).map(|(a, b)| (a + 0.5 * b) / sigma).collect();
        Ok(((p.phi + 0.5 * p.psi) / (sigma * sigma), g))
    };
    let start: Vec<f64> = warm.iter().map(|v| v / sigma).collect();
    let d = descend(
        &obj,
        None,
        &start,
        &DescentOptions {
            tol: 1e-10,
            max_iter: opts.descent_iter,
            memory: 8,
            max_rel_step: 0.05,
        },
    )?;
    let descended: Vec<f64> = d.x.iter().map(|v| sigma * v).collect();
    let mut iterations = d.iterations;

    if sup_norm(&descended) <= 1e-6 * sigma {
        return finish(model, &em, lambda, &descended, iterations, PointFlag::ConvergedToZero);
    }
    let (polished, newton_iters) = newton(&em, space, &descended, opts.newton_iter)?;
    iterations += newton_iters;
    let r_desc = sup_norm(&weak_defect(&em, space, &descended, 1.0)?);
    let r_newt = sup_norm(&weak_defect(&em, space, &polished, 1.0)?);
    let (coeffs, mut flag) = if r_newt <= r_desc && polished.iter().all(|v| v.is_finite()) {
        (polished, PointFlag::Ok)
    } else {
        (descended, PointFlag::DescentOnly)
    };
    if sup_norm(&coeffs) <= 1e-6 * sigma {
        flag = PointFlag::ConvergedToZero;
    }
    finish(model, &em, lambda, &coeffs, iterations, flag)
}

fn finish(model: &BranchModel, em: &EnergyModel, lambda: f64, coeffs: &[f64], iterations: usize, flag: PointFlag) -> Result<BranchPoint> {
    let m = measure(model, em, coeffs)?;
    let flag = if flag.converged() && m.residual > RESIDUAL_TOL {
        PointFlag::NotConverged
    } else {
        flag
    };
    Ok(BranchPoint {
        lambda,
        u: m.nodal,
        c1proxy: m.c1proxy,
        ratio: m.c1proxy / lambda.powf(model.ratio_exponent()),
        energy: m.energy,
        residual: m.residual,
        iterations,
        min_value: m.min_value,
        flag,
    })
}

/// Newton's method on the weak defect with backtracking on its 2-norm.
fn newton(em: &EnergyModel, space: &FeSpace, start: &[f64], iters: usize) -> Result<(Vec<f64>, usize)> {
    let norm2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut u = start.to_vec();
    let mut d = weak_defect(em, space, &u, 1.0)?;
    let mut done = 0;
    for _ in 0..iters {
        if sup_norm(&d) <= 1e-15 * (1.0 + sup_norm(&u)) * 1e-3 {
            break;
        }
        let jac = defect_jacobian(em, space, &u, 1.0)?;
        let Some(step) = jac.lu().solve(&-DVector::from_column_slice(&d)) else {
            break;
        };
        let d0 = norm2(&d);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let Ok(dt) = weak_defect(em, space, &trial, 1.0) {
                if norm2(&dt) < d0 {
                    u = trial;
                    d = dt;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        done += 1;
        if !improved {
            break;
        }
    }
    Ok((u, done))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchVerdicts {
    pub energy_negative: bool,
    /// Energy strictly decreasing in `λ` across converged points.
    pub energy_decreasing: bool,
    pub ratio_bounded: bool,
    /// max/min of the ratio over the converged tail.
    pub ratio_spread: f64,
    pub norms_to_zero: bool,
    /// False when no point converged to a nontrivial solution.
    pub applicable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub f: String,
    pub g: String,
    pub s: f64,
    pub q: f64,
    pub lambdas: Vec<f64>,
    pub points: Vec<BranchPoint>,
    pub verdicts: BranchVerdicts,
    /// Small-`ξ` conditions of `f`, `g` on the whole interval.
    pub conditions: Vec<Verdict>,
    /// The solve fell to the trivial solution before the grid ended.
    pub lost: bool,
    /// Largest grid `λ` with a converged point: an empirical lower bound for
    /// the range of existence, not the threshold itself.
    pub lambda_star_lower: Option<f64>,
}

/// Strictly decreasing grid of at least 8 positive values.
pub fn check_lambda_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 8 {
        return Err(precondition(format!("λ grid needs at least 8 points, got {}", grid.len())));
    }
    if !grid.iter().all(|l| *l > 0.0 && l.is_finite()) || !grid.windows(2).all(|w| w[1] < w[0]) {
        return Err(precondition("λ grid must be positive and strictly decreasing"));
    }
    Ok(())
}

/// Solves along a decreasing `λ` grid, warm-starting each point from the
/// previous solution rescaled by the amplitude ratio.
pub fn continue_branch(model: &BranchModel, grid: &[f64], opts: &SolveOptions) -> Result<Branch> {
    check_lambda_grid(grid)?;
    let conditions = check_small_data(&model.f, &model.g, model.s, model.q, (0.0, 1.0), (0.0, 1.0), &Grid::default())?;
    let mut points: Vec<BranchPoint> = Vec::with_capacity(grid.len());
    let mut warm = model.initial_guess(grid[0]);
    let mut lost = false;
    for (i, &lambda) in grid.iter().enumerate() {
        if i > 0 {
            let prev = points.last().unwrap();
            let k = model.amplitude(lambda) / model.amplitude(prev.lambda);
            warm = prev.coeffs().iter().map(|v| k * v).collect();
        }
        let p = solve_plambda(model, lambda, &warm, opts)?;
        let stop = p.flag == PointFlag::ConvergedToZero;
        points.push(p);
        if stop {
            lost = true;
            break;
        }
    }
    let verdicts = branch_verdicts(&points);
    let lambda_star_lower = points.iter().find(|p| p.certified()).map(|p| p.lambda);
    Ok(Branch {
        f: model.f.to_string(),
        g: model.g.to_string(),
        s: model.s,
        q: model.q,
        lambdas: grid.to_vec(),
        points,
        verdicts,
        conditions,
        lost,
        lambda_star_lower,
    })
}

fn tail<T>(v: &[T]) -> &[T] {
    &v[v.len() / 2..]
}

fn branch_verdicts(points: &[BranchPoint]) -> BranchVerdicts {
    let ok: Vec<&BranchPoint> = points.iter().filter(|p| p.certified()).collect();
    if ok.len() < 2 {
        return BranchVerdicts {
            energy_negative: false,
            energy_decreasing: false,
            ratio_bounded: false,
            ratio_spread: f64::NAN,
            norms_to_zero: false,
            applicable: false,
        };
    }
    // points run toward smaller λ, so energies must increase along the list
    let energy_negative = ok.iter().all(|p| p.energy < 0.0);
    let energy_decreasing = ok.windows(2).all(|w| w[1].energy > w[0].energy);
    let t = tail(&ok);
    let (lo, hi) = t.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), p| (lo.min(p.ratio), hi.max(p.ratio)));
    let ratio_spread = hi / lo;
    let norms_to_zero = t.windows(2).all(|w| w[1].c1proxy < w[0].c1proxy) && t[t.len() - 1].c1proxy < t[0].c1proxy;
    BranchVerdicts {
        energy_negative,
        energy_decreasing,
        ratio_bounded: ratio_spread <= RATIO_SPREAD,
        ratio_spread,
        norms_to_zero,
        applicable: true,
    }
}

pub const BRANCH_HEADER: &str = "lambda,c1proxy,ratio,energy,residual,min_value,iters,flag";

pub fn branch_csv(b: &Branch) -> String {
    let mut out = String::from(BRANCH_HEADER);
    out.push('\n');
    for p in &b.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            sig17(p.lambda),
            sig17(p.c1proxy),
            sig17(p.ratio),
            sig17(p.energy),
            sig17(p.residual),
            sig17(p.min_value),
            p.iterations,
            p.flag.as_str()
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Yes,
    No,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationEvidence {
    pub evidence: Evidence,
    /// `(c1proxy, λ)` over the converged tail.
    pub tail: Vec<(f64, f64)>,
    /// `(c1proxy, λ)` for every converged point.
    pub pairs: Vec<(f64, f64)>,
}

/// `(‖u_λ‖, λ) → (0, 0)`: both coordinates strictly decrease along the
/// converged tail and the norm at least halves across it.
pub fn bifurcation_evidence(points: &[BranchPoint]) -> BifurcationEvidence {
    let pairs: Vec<(f64, f64)> = points.iter().filter(|p| p.certified()).map(|p| (p.c1proxy, p.lambda)).collect();
    if pairs.len() < 2 {
        return BifurcationEvidence {
            evidence: Evidence::Inconclusive,
            tail: pairs.clone(),
            pairs,
        };
    }
    let t = tail(&pairs).to_vec();
    let monotone = t.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
    let shrinks = t[t.len() - 1].0 <= 0.5 * t[0].0;
    BifurcationEvidence {
        evidence: if monotone && shrinks { Evidence::Yes } else { Evidence::No },
        tail: t,
        pairs,
    }
}
