use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{precondition, Result};
use crate::fem::{energy_parts, weak_defect, BoundaryCondition, EnergyModel, FeSpace};

/// A finite-dimensional pair `(Φ, Ψ)` on `ℝ^m`.
///
/// Evaluators must be pure so restarts can run on any thread.
pub trait EnergyPair: Sync {
    fn dim(&self) -> usize;

    /// `Φ(x)` and its gradient.
    fn phi(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// `Ψ(x)` and its gradient.
    fn psi(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// A point where `Ψ` attains its infimum; sublevel sets are assumed
    /// star-shaped around it.
    fn origin(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Whether `Ψ` is coercive, so that `sup I = +∞`.
    fn coercive(&self) -> bool;

    /// Whether `Φ` and `Ψ` are declared convex (needed for `λ*`).
    fn convex(&self) -> bool {
        false
    }

    /// A starting point inside `{Ψ ≤ rho}` for restart `index`.
    fn sample(&self, rho: f64, index: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;

    fn backing(&self) -> Backing;

    /// Sup-norm of the weak-form defect of `Φ + μΨ` at `x`, for pairs that
    /// come from a boundary value problem.
    fn weak_residual(&self, _x: &[f64], _mu: f64) -> Result<Option<f64>> {
        Ok(None)
    }

    /// `Φ + μΨ` with gradient.
    fn energy(&self, x: &[f64], mu: f64) -> Result<(f64, Vec<f64>)> {
        let (a, ga) = self.phi(x)?;
        let (b, gb) = self.psi(x)?;
        Ok((a + mu * b, ga.iter().zip(&gb).map(|(u, v)| u + mu * v).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backing {
    AnalyticToy,
    Fem,
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>;

/// A pair given by closed-form evaluators. Restarts sample uniformly in the
/// box `‖x - x₀‖∞ ≤ R(ρ)` and are pulled into the sublevel set along the
/// segment toward `x₀`.
#[derive(Clone)]
pub struct AnalyticPair {
    pub name: String,
    dim: usize,
    phi: Evaluator,
    psi: Evaluator,
    origin: Vec<f64>,
    radius: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    coercive: bool,
    convex: bool,
}

impl std::fmt::Debug for AnalyticPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticPair").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl AnalyticPair {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        phi: Evaluator,
        psi: Evaluator,
        radius: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> AnalyticPair {
        AnalyticPair {
            name: name.into(),
            dim,
            phi,
            psi,
            origin: vec![0.0; dim],
            radius: Arc::new(radius),
            coercive: true,
            convex: false,
        }
    }

    pub fn with_origin(mut self, origin: Vec<f64>) -> AnalyticPair {
        self.origin = origin;
        self
    }

    pub fn with_flags(mut self, coercive: bool, convex: bool) -> AnalyticPair {
        self.coercive = coercive;
        self.convex = convex;
        self
    }

    /// `Φ = -x`, `Ψ = x²`: `φ(ρ) = 1/(2√ρ)`.
    pub fn neg_linear() -> AnalyticPair {
        AnalyticPair::new("neg-linear", 1, Arc::new(|x| (-x[0], vec![-1.0])), Arc::new(square), f64::sqrt)
            .with_flags(true, true)
    }

    /// `Φ = x²`, `Ψ = |x|`: convex with `λ* = 0`.
    pub fn square_abs() -> AnalyticPair {
        AnalyticPair::new(
            "square-abs",
            1,
            Arc::new(square),
            Arc::new(|x| (x[0].abs(), vec![sign(x[0])])),
            |rho| rho,
        )
        .with_flags(true, true)
    }

    /// `Φ = Ψ = x²`.
    pub fn shared_quadratic() -> AnalyticPair {
        AnalyticPair::new("shared-quadratic", 1, Arc::new(square), Arc::new(square), f64::sqrt).with_flags(true, true)
    }

    /// `Φ ≡ c`, `Ψ = ‖x‖²` on `ℝ^dim`.
    pub fn constant(c: f64, dim: usize) -> AnalyticPair {
        AnalyticPair::new(
            "constant",
            dim,
            Arc::new(move |x| (c, vec![0.0; x.len()])),
            Arc::new(square),
            f64::sqrt,
        )
        .with_flags(true, true)
    }

    /// `Φ = (x² - 1)² + y²`, `Ψ = x² + y²`; minima at `(±1, 0)`, saddle at 0.
    pub fn double_well() -> AnalyticPair {
        AnalyticPair::new(
            "double-well",
            2,
            Arc::new(|x| {
                let w = x[0] * x[0] - 1.0;
                (w * w + x[1] * x[1], vec![4.0 * x[0] * w, 2.0 * x[1]])
            }),
            Arc::new(square),
            f64::sqrt,
        )
    }

    /// `Φ = x⁴ sin²(1/x)` (0 at 0), `Ψ = x²`: local minima accumulate at 0.
    pub fn oscillating() -> AnalyticPair {
        AnalyticPair::new(
            "oscillating",
            1,
            Arc::new(|x| {
                let t = x[0];
                if t == 0.0 {
                    return (0.0, vec![0.0]);
                }
                let (s, c) = (1.0 / t).sin_cos();
                (t.powi(4) * s * s, vec![4.0 * t.powi(3) * s * s - 2.0 * t * t * s * c])
            }),
            Arc::new(square),
            f64::sqrt,
        )
    }

    /// Looks up one of the named toy pairs.
    pub fn named(name: &str) -> Option<AnalyticPair> {
        Some(match name {
            "neg-linear" => AnalyticPair::neg_linear(),
            "square-abs" => AnalyticPair::square_abs(),
            "shared-quadratic" => AnalyticPair::shared_quadratic(),
            "constant" => AnalyticPair::constant(1.0, 1),
            "double-well" => AnalyticPair::double_well(),
            "oscillating" => AnalyticPair::oscillating(),
            _ => return None,
        })
    }

    pub const NAMES: [&'static str; 6] = [
        "neg-linear",
        "square-abs",
        "shared-quadratic",
        "constant",
        "double-well",
        "oscillating",
    ];
}

fn square(x: &[f64]) -> (f64, Vec<f64>) {
    (x.iter().map(|v| v * v).sum(), x.iter().map(|v| 2.0 * v).collect())
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl EnergyPair for AnalyticPair {
    fn dim(&self) -> usize {
        self.dim
    }

    fn phi(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.phi)(x))
    }

    fn psi(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.psi)(x))
    }

    fn origin(&self) -> Vec<f64> {
        self.origin.clone()
    }

    fn coercive(&self) -> bool {
        self.coercive
    }

    fn convex(&self) -> bool {
        self.convex
    }

    fn sample(&self, rho: f64, _index: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let r = (self.radius)(rho);
        let mut x: Vec<f64> = Vec::new();
        for _ in 0..16 {
            x = self.origin.iter().map(|c| c + rng.random_range(-r..=r)).collect();
            if (self.psi)(&x).0 <= rho {
                return Ok(x);
            }
        }
        shrink_into(&*self.psi, &self.origin, &x, rho)
    }

    fn backing(&self) -> Backing {
        Backing::AnalyticToy
    }
}

/// Bisects along the segment from `origin` toward `x` until `Ψ ≤ rho`.
fn shrink_into(psi: &(dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync), origin: &[f64], x: &[f64], rho: f64) -> Result<Vec<f64>> {
    if psi(origin).0 > rho {
        return Err(precondition(format!("Ψ at the origin exceeds {rho}")));
    }
    let at = |t: f64| -> Vec<f64> { origin.iter().zip(x).map(|(c, v)| c + t * (v - c)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if psi(&at(mid)).0 <= rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(lo))
}

/// `(Φ, Ψ)` of a 1-D finite-element energy model over its free coefficients.
///
/// Restarts are drawn on rays from 0 along random smooth mode combinations,
/// at a uniformly distributed `Ψ`-level; restart 0 uses the lowest mode.
#[derive(Debug, Clone)]
pub struct FemPair {
    model: EnergyModel,
    space: Arc<FeSpace>,
}

pub const SAMPLE_MODES: usize = 8;

impl FemPair {
    pub fn new(model: EnergyModel, space: Arc<FeSpace>) -> Result<FemPair> {
        model.validate(&space)?;
        Ok(FemPair { model, space })
    }

    pub fn model(&self) -> &EnergyModel {
        &self.model
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    /// Smooth direction for restart `index`, normalized to unit sup-norm.
    pub fn direction(&self, index: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mesh = self.space.mesh();
        let (a, b) = (mesh.a(), mesh.b());
        let dirichlet = self.space.bc() == BoundaryCondition::Dirichlet;
        let modes: Vec<(f64, f64)> = if index == 0 {
            vec![(if dirichlet { 1.0 } else { 0.0 }, 1.0)]
        } else {
            let first = if dirichlet { 1 } else { 0 };
            (first..=SAMPLE_MODES)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    let j = j as f64;
                    (j, z / (1.0 + (j * PI).powi(2)).sqrt())
                })
                .collect()
        };
        let mut d: Vec<f64> = mesh
            .nodes()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.space.free_index(*i).is_some())
            .map(|(_, &x)| {
                let s = (x - a) / (b - a);
                modes
                    .iter()
                    .map(|(j, c)| c * if dirichlet { (j * PI * s).sin() } else { (j * PI * s).cos() })
                    .sum()
            })
            .collect();
        let n = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if n > 0.0 {
            for v in d.iter_mut() {
                *v /= n;
            }
        }
        d
    }

    fn psi_value(&self, x: &[f64]) -> Result<f64> {
        Ok(energy_parts(&self.model, &self.space, x, false)?.psi)
    }

    /// Largest `t` with `Ψ(t·d) ≤ level`, by doubling then bisection.
    pub fn ray_extent(&self, d: &[f64], level: f64) -> Result<f64> {
        let at = |t: f64| -> Vec<f64> { d.iter().map(|v| t * v).collect() };
        let mut hi = 1.0;
        let mut steps = 0;
        while self.psi_value(&at(hi))? <= level {
            hi *= 2.0;
            steps += 1;
            if steps > 200 {
                return Err(precondition("Ψ does not grow along the sampling ray"));
            }
        }
        let mut lo = 0.0;
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.psi_value(&at(mid))? <= level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

impl EnergyPair for FemPair {
    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn phi(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let parts = energy_parts(&self.model, &self.space, x, true)?;
        Ok((parts.phi, parts.grad_phi))
    }

    fn psi(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let parts = energy_parts(&self.model, &self.space, x, true)?;
        Ok((parts.psi, parts.grad_psi))
    }

    fn energy(&self, x: &[f64], mu: f64) -> Result<(f64, Vec<f64>)> {
        let parts = energy_parts(&self.model, &self.space, x, true)?;
        let g = parts.grad_phi.iter().zip(&parts.grad_psi).map(|(a, b)| a + mu * b).collect();
        Ok((parts.phi + mu * parts.psi, g))
    }

    fn coercive(&self) -> bool {
        true
    }

    fn sample(&self, rho: f64, index: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let d = self.direction(index, rng);
        let u: f64 = if index == 0 { 0.5 } else { rng.random() };
        let t = self.ray_extent(&d, u * rho)?;
        Ok(d.iter().map(|v| t * v).collect())
    }

    fn backing(&self) -> Backing {
        Backing::Fem
    }

    /// Critical points of `Φ + μΨ` solve the weak problem with the right-hand
    /// side scaled by `1/(μp)` (Dirichlet) or `1/μ` (Neumann).
    fn weak_residual(&self, x: &[f64], mu: f64) -> Result<Option<f64>> {
        if !(mu > 0.0) {
            return Ok(None);
        }
        let scale = match self.space.bc() {
            BoundaryCondition::Dirichlet => 1.0 / (mu * self.model.p()),
            BoundaryCondition::Neumann => 1.0 / mu,
        };
        let d = weak_defect(&self.model, &self.space, x, scale)?;
        Ok(Some(d.iter().fold(0.0, |m, v| m.max(v.abs()))))
    }
}
