use crate::dsl::{Expr, Primitive};
use crate::error::{precondition, Error, Result};

use super::space::{gauss_rule, BoundaryCondition, FeSpace};

/// A nonlinearity together with its primitive in the state variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    pub expr: Expr,
    pub primitive: Primitive,
}

impl Nonlinearity {
    pub fn new(expr: Expr) -> Nonlinearity {
        let primitive = Primitive::new(&expr);
        Nonlinearity { expr, primitive }
    }

    pub fn is_zero(&self) -> bool {
        self.expr == Expr::Const(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    /// `-Δ_p u = f(x, u)`, `u = 0` on the boundary.
    Dirichlet { f: Nonlinearity },
    /// `-Δ_p u + λ(x)|u|^{p-2}u = α(x) f(u) + β(x) g(u)`, natural boundary condition.
    Neumann {
        f: Nonlinearity,
        g: Nonlinearity,
        alpha: Expr,
        beta: Expr,
        lambda: Expr,
    },
}

/// Energy splitting `Φ + μΨ` for the 1-D p-Laplacian problems.
///
/// Dirichlet: `Ψ(u) = ∫|u'|^p`, `Φ(u) = -∫F(x, u)`, so critical points of
/// `Φ + μΨ` solve `-μp Δ_p u = f`; at `p = 2` this is `-u'' = f/(2μ)`.
///
/// Neumann: `Ψ(u) = (∫|u'|^p + ∫λ|u|^p)/p`, `Φ(u) = -∫(αF_f + βF_g)`, and
/// weak solutions are the critical points of `Φ + Ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    p: f64,
    problem: Problem,
    truncate_negative: bool,
}

impl EnergyModel {
    pub fn dirichlet(p: f64, f: Expr) -> Result<EnergyModel> {
        check_exponent(p)?;
        Ok(EnergyModel {
            p,
            problem: Problem::Dirichlet {
                f: Nonlinearity::new(f),
            },
            truncate_negative: false,
        })
    }

    pub fn neumann(p: f64, f: Expr, g: Expr, alpha: Expr, beta: Expr, lambda: Expr) -> Result<EnergyModel> {
        check_exponent(p)?;
        Ok(EnergyModel {
            p,
            problem: Problem::Neumann {
                f: Nonlinearity::new(f),
                g: Nonlinearity::new(g),
                alpha,
                beta,
                lambda,
            },
            truncate_negative: false,
        })
    }

    /// Replaces the right-hand side (and its primitive) by 0 for negative
    /// states. Used by sign-constrained branch solves.
    pub fn with_negative_truncation(mut self) -> EnergyModel {
        self.truncate_negative = true;
        self
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn truncates_negative(&self) -> bool {
        self.truncate_negative
    }

    pub fn bc(&self) -> BoundaryCondition {
        match self.problem {
            Problem::Dirichlet { .. } => BoundaryCondition::Dirichlet,
            Problem::Neumann { .. } => BoundaryCondition::Neumann,
        }
    }

    /// Checks the space matches the boundary condition and, for Neumann
    /// models, that `λ` is positive at every quadrature point.
    pub fn validate(&self, space: &FeSpace) -> Result<()> {
        if space.bc() != self.bc() {
            return Err(Error::Mismatch(format!(
                "{:?} model on a {:?} space",
                self.bc(),
                space.bc()
            )));
        }
        if let Problem::Neumann { lambda, .. } = &self.problem {
            let (pts, _) = gauss_rule(space.quad_points());
            let mut inf = f64::INFINITY;
            for w in space.mesh().nodes().windows(2) {
                for t in pts {
                    let x = 0.5 * (w[0] + w[1]) + 0.5 * (w[1] - w[0]) * t;
                    inf = inf.min(lambda.eval(x, 0.0)?);
                }
            }
            if !(inf > 0.0) {
                return Err(precondition(format!(
                    "the Neumann coefficient λ must have positive infimum (sampled {inf})"
                )));
            }
        }
        Ok(())
    }

    /// Right-hand side `f` (Dirichlet) or `αf + βg` (Neumann) at `(x, ξ)`.
    pub fn rhs(&self, x: f64, xi: f64) -> Result<f64> {
        if self.truncate_negative && xi < 0.0 {
            return Ok(0.0);
        }
        Ok(match &self.problem {
            Problem::Dirichlet { f } => f.expr.eval(x, xi)?,
            Problem::Neumann { f, g, alpha, beta, .. } => {
                let mut v = alpha.eval(x, xi)? * f.expr.eval(x, xi)?;
                if !g.is_zero() {
                    v += beta.eval(x, xi)? * g.expr.eval(x, xi)?;
                }
                v
            }
        })
    }

    /// Primitive of [`EnergyModel::rhs`] in the state variable.
    pub fn rhs_primitive(&self, x: f64, xi: f64) -> Result<f64> {
        if self.truncate_negative && xi <= 0.0 {
            return Ok(0.0);
        }
        Ok(match &self.problem {
            Problem::Dirichlet { f } => f.primitive.eval(x, xi)?,
            Problem::Neumann { f, g, alpha, beta, .. } => {
                let mut v = alpha.eval(x, xi)? * f.primitive.eval(x, xi)?;
                if !g.is_zero() {
                    v += beta.eval(x, xi)? * g.primitive.eval(x, xi)?;
                }
                v
            }
        })
    }

    /// Central finite-difference `∂_ξ rhs`, one-sided near the truncation point.
    pub fn rhs_derivative(&self, x: f64, xi: f64) -> Result<f64> {
        let mut h = 1e-6 * xi.abs().max(1.0);
        if self.truncate_negative {
            if xi < 0.0 {
                return Ok(0.0);
            }
            if xi > 0.0 {
                h = h.min(0.5 * xi);
            } else {
                return Ok((self.rhs(x, h)? - self.rhs(x, 0.0)?) / h);
            }
        }
        Ok((self.rhs(x, xi + h)? - self.rhs(x, xi - h)?) / (2.0 * h))
    }

    /// Coefficient `λ(x)` of the Neumann zero-order term (0 for Dirichlet).
    pub(crate) fn lambda_at(&self, x: f64) -> Result<f64> {
        match &self.problem {
            Problem::Neumann { lambda, .. } => Ok(lambda.eval(x, 0.0)?),
            Problem::Dirichlet { .. } => Ok(0.0),
        }
    }

    /// State values in `(lo, hi)` where the integrand may have kinks.
    pub(crate) fn kinks(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        match &self.problem {
            Problem::Dirichlet { f } => f.expr.kinks(lo, hi, out),
            Problem::Neumann { f, g, .. } => {
                f.expr.kinks(lo, hi, out);
                g.expr.kinks(lo, hi, out);
            }
        }
        if self.truncate_negative && lo < 0.0 && hi > 0.0 {
            out.push(0.0);
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(precondition(format!("energy assembly needs p >= 2, got {p}")));
    }
    Ok(())
}
