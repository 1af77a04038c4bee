use nalgebra::DMatrix;

use crate::dsl::spow;
use crate::error::{Error, Result};

use super::model::EnergyModel;
use super::space::{gauss_rule, BoundaryCondition, DiscreteFn, FeSpace};

#[derive(Debug, Clone, Copy)]
struct QuadPoint {
    x: f64,
    u: f64,
    w: f64,
    /// Values of the left and right element hats.
    phi: [f64; 2],
}

/// Quadrature points of one element, split where the integrand has kinks.
fn element_points(model: &EnergyModel, qp: usize, x: [f64; 2], u: [f64; 2], out: &mut Vec<QuadPoint>) {
    out.clear();
    let h = x[1] - x[0];
    let mut cuts = vec![0.0, 1.0];
    if u[0] != u[1] {
        let mut kinks = Vec::new();
        model.kinks(u[0].min(u[1]), u[0].max(u[1]), &mut kinks);
        for k in kinks {
            let t = (k - u[0]) / (u[1] - u[0]);
            if t > 0.0 && t < 1.0 {
                cuts.push(t);
            }
        }
        if cuts.len() > 2 {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
        }
    }
    let (pts, wts) = gauss_rule(qp);
    for seg in cuts.windows(2) {
        let len = seg[1] - seg[0];
        for (g, w) in pts.iter().zip(wts) {
            let t = seg[0] + len * 0.5 * (1.0 + g);
            out.push(QuadPoint {
                x: x[0] + t * h,
                u: u[0] + t * (u[1] - u[0]),
                w: w * 0.5 * len * h,
                phi: [1.0 - t, t],
            });
        }
    }
}

/// `Φ`, `Ψ` and (optionally) their gradients with respect to the free coefficients.
#[derive(Debug, Clone)]
pub struct EnergyParts {
    pub phi: f64,
    pub psi: f64,
    pub grad_phi: Vec<f64>,
    pub grad_psi: Vec<f64>,
}

fn check(model: &EnergyModel, space: &FeSpace, coeffs: &[f64]) -> Result<()> {
    if space.bc() != model.bc() {
        return Err(Error::Mismatch(format!("{:?} model on a {:?} space", model.bc(), space.bc())));
    }
    if coeffs.len() != space.dim() {
        return Err(Error::Mismatch(format!(
            "{} coefficients for a space of dimension {}",
            coeffs.len(),
            space.dim()
        )));
    }
    Ok(())
}

/// Assembles `Φ` and `Ψ`, plus gradients when `with_grad` is set.
pub fn energy_parts(model: &EnergyModel, space: &FeSpace, coeffs: &[f64], with_grad: bool) -> Result<EnergyParts> {
    check(model, space, coeffs)?;
    let p = model.p();
    let neumann = model.bc() == BoundaryCondition::Neumann;
    let psi_scale = if neumann { 1.0 / p } else { 1.0 };
    let nodal = space.nodal_values(coeffs);
    let nodes = space.mesh().nodes();
    let dim = space.dim();
    let mut parts = EnergyParts {
        phi: 0.0,
        psi: 0.0,
        grad_phi: if with_grad { vec![0.0; dim] } else { Vec::new() },
        grad_psi: if with_grad { vec![0.0; dim] } else { Vec::new() },
    };
    let mut qps = Vec::with_capacity(16);
    for e in 0..space.mesh().elements() {
        let x = [nodes[e], nodes[e + 1]];
        let u = [nodal[e], nodal[e + 1]];
        let h = x[1] - x[0];
        let slope = (u[1] - u[0]) / h;
        let idx = [space.free_index(e), space.free_index(e + 1)];

        parts.psi += psi_scale * h * slope.abs().powf(p);
        let mut local_phi = [0.0; 2];
        let mut local_psi = [0.0; 2];
        if with_grad {
            // d/du_b of h|s|^p is p|s|^{p-2}s; d/du_a is its negative
            let d = psi_scale * p * spow(slope, p);
            local_psi = [-d, d];
        }

        element_points(model, space.quad_points(), x, u, &mut qps);
        for q in &qps {
            parts.phi -= q.w * model.rhs_primitive(q.x, q.u)?;
            if neumann {
                let lam = model.lambda_at(q.x)?;
                parts.psi += psi_scale * q.w * lam * q.u.abs().powf(p);
                if with_grad {
                    let d = q.w * lam * spow(q.u, p);
                    local_psi[0] += d * q.phi[0];
                    local_psi[1] += d * q.phi[1];
                }
            }
            if with_grad {
                let r = q.w * model.rhs(q.x, q.u)?;
                local_phi[0] -= r * q.phi[0];
                local_phi[1] -= r * q.phi[1];
            }
        }
        if with_grad {
            for k in 0..2 {
                if let Some(i) = idx[k] {
                    parts.grad_phi[i] += local_phi[k];
                    parts.grad_psi[i] += local_psi[k];
                }
            }
        }
    }
    Ok(parts)
}

/// `Ψ(u)`: `∫|u'|^p` (Dirichlet) or `(∫|u'|^p + ∫λ|u|^p)/p` (Neumann).
pub fn assemble_psi(model: &EnergyModel, u: &DiscreteFn) -> Result<f64> {
    Ok(energy_parts(model, u.space(), u.coeffs(), false)?.psi)
}

/// `Φ(u) = -∫F(x, u(x)) dx` with `F` the primitive of the right-hand side.
pub fn assemble_phi(model: &EnergyModel, u: &DiscreteFn) -> Result<f64> {
    Ok(energy_parts(model, u.space(), u.coeffs(), false)?.phi)
}

/// Gradient of `Φ + μΨ` with respect to the free nodal coefficients.
pub fn grad_energy(model: &EnergyModel, u: &DiscreteFn, mu: f64) -> Result<Vec<f64>> {
    let parts = energy_parts(model, u.space(), u.coeffs(), true)?;
    Ok(parts
        .grad_phi
        .iter()
        .zip(&parts.grad_psi)
        .map(|(a, b)| a + mu * b)
        .collect())
}

/// Weak-form defect against every free hat function:
/// `∫|u'|^{p-2}u'v' (+ ∫λ|u|^{p-2}uv) - scale·∫rhs(x, u)v`.
pub fn weak_defect(model: &EnergyModel, space: &FeSpace, coeffs: &[f64], scale: f64) -> Result<Vec<f64>> {
    check(model, space, coeffs)?;
    let p = model.p();
    let neumann = model.bc() == BoundaryCondition::Neumann;
    let nodal = space.nodal_values(coeffs);
    let nodes = space.mesh().nodes();
    let mut out = vec![0.0; space.dim()];
    let mut qps = Vec::with_capacity(16);
    for e in 0..space.mesh().elements() {
        let x = [nodes[e], nodes[e + 1]];
        let u = [nodal[e], nodal[e + 1]];
        let slope = (u[1] - u[0]) / (x[1] - x[0]);
        let flux = spow(slope, p);
        let mut local = [-flux, flux];
        element_points(model, space.quad_points(), x, u, &mut qps);
        for q in &qps {
            let mut r = -scale * model.rhs(q.x, q.u)?;
            if neumann {
                r += model.lambda_at(q.x)? * spow(q.u, p);
            }
            local[0] += q.w * r * q.phi[0];
            local[1] += q.w * r * q.phi[1];
        }
        for (k, node) in [e, e + 1].into_iter().enumerate() {
            if let Some(i) = space.free_index(node) {
                out[i] += local[k];
            }
        }
    }
    Ok(out)
}

/// Max-norm of [`weak_defect`]; 0 exactly at discrete weak solutions.
pub fn residual(model: &EnergyModel, u: &DiscreteFn, scale: f64) -> Result<f64> {
    let d = weak_defect(model, u.space(), u.coeffs(), scale)?;
    Ok(d.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Jacobian of [`weak_defect`] (tridiagonal, returned dense). The state
/// derivative of the right-hand side is taken by finite differences.
pub fn defect_jacobian(model: &EnergyModel, space: &FeSpace, coeffs: &[f64], scale: f64) -> Result<DMatrix<f64>> {
    check(model, space, coeffs)?;
    let p = model.p();
    let neumann = model.bc() == BoundaryCondition::Neumann;
    let nodal = space.nodal_values(coeffs);
    let nodes = space.mesh().nodes();
    let n = space.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut qps = Vec::with_capacity(16);
    for e in 0..space.mesh().elements() {
        let x = [nodes[e], nodes[e + 1]];
        let h = x[1] - x[0];
        let u = [nodal[e], nodal[e + 1]];
        let slope = (u[1] - u[0]) / h;
        let stiff = (p - 1.0) * slope.abs().powf(p - 2.0) / h;
        let mut local = [[stiff, -stiff], [-stiff, stiff]];
        element_points(model, space.quad_points(), x, u, &mut qps);
        for q in &qps {
            let mut c = -scale * model.rhs_derivative(q.x, q.u)?;
            if neumann {
                c += model.lambda_at(q.x)? * (p - 1.0) * q.u.abs().powf(p - 2.0);
            }
            for a in 0..2 {
                for b in 0..2 {
                    local[a][b] += q.w * c * q.phi[a] * q.phi[b];
                }
            }
        }
        let idx = [space.free_index(e), space.free_index(e + 1)];
        for a in 0..2 {
            for b in 0..2 {
                if let (Some(i), Some(j)) = (idx[a], idx[b]) {
                    jac[(i, j)] += local[a][b];
                }
            }
        }
    }
    Ok(jac)
}

/// Norms of a discrete function.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Norms {
    /// `(∫|u|^p)^{1/p}`.
    pub lp: f64,
    /// `(∫|u'|^p)^{1/p}` on `W^{1,p}_0`; `(∫|u'|^p + ∫|u|^p)^{1/p}` on `W^{1,p}`.
    pub w1p: f64,
    /// `max |u(node)| + max |slope|`, a stand-in for the `C^1` norm.
    pub c1proxy: f64,
}

pub fn norms(u: &DiscreteFn, p: f64) -> Norms {
    let space = u.space();
    let nodal = u.nodal_values();
    let nodes = space.mesh().nodes();
    let (pts, wts) = gauss_rule(space.quad_points());
    let mut int_u = 0.0;
    let mut int_du = 0.0;
    let mut max_u = 0.0_f64;
    let mut max_slope = 0.0_f64;
    for e in 0..space.mesh().elements() {
        let h = nodes[e + 1] - nodes[e];
        let (ua, ub) = (nodal[e], nodal[e + 1]);
        let slope = (ub - ua) / h;
        max_slope = max_slope.max(slope.abs());
        int_du += h * slope.abs().powf(p);
        // split at a sign change so |u|^p is polynomial on each piece for integer p
        let mut cuts = vec![0.0, 1.0];
        if ua * ub < 0.0 {
            cuts.insert(1, ua / (ua - ub));
        }
        for seg in cuts.windows(2) {
            let len = seg[1] - seg[0];
            for (g, w) in pts.iter().zip(wts) {
                let t = seg[0] + len * 0.5 * (1.0 + g);
                let v = ua + t * (ub - ua);
                int_u += w * 0.5 * len * h * v.abs().powf(p);
            }
        }
    }
    for v in &nodal {
        max_u = max_u.max(v.abs());
    }
    let w1 = match space.bc() {
        BoundaryCondition::Dirichlet => int_du,
        BoundaryCondition::Neumann => int_du + int_u,
    };
    Norms {
        lp: int_u.powf(1.0 / p),
        w1p: w1.powf(1.0 / p),
        c1proxy: max_u + max_slope,
    }
}

