//! Numerical laboratory for sublevel-set variational principles.
//!
//! The crate computes the threshold quotient `φ(ρ)` of a pair of functionals
//! `(Φ, Ψ)`, its tail/head estimates `γ`, `δ` and the convex-case threshold
//! `λ*`, hunts ladders of local minima of `Φ + μΨ`, locates mountain-pass
//! critical points, finds fixed points of potential operators, checks the
//! standing hypotheses on user nonlinearities, and continues solution
//! branches of concave–convex Dirichlet problems. All PDE work is done with
//! 1-D P1 finite elements.

pub mod bifurcation;
pub mod dsl;
mod error;
pub mod fem;
pub mod fixedpoint;
pub mod hypotheses;
pub mod minhunt;
pub mod numfmt;
pub mod optim;
pub mod varprinciple;

pub use dsl::{parse, Expr, Primitive};
pub use error::{Error, Result};
pub use fem::{BoundaryCondition, DiscreteFn, EnergyModel, FeSpace, Mesh1D};
pub use minhunt::{HuntReport, LocalMin, MountainPassResult};
pub use varprinciple::{EnergyPair, PhiCurvePoint, ThresholdReport};
