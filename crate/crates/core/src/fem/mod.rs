//! 1-D P1 finite elements for `W^{1,p}(Ω)` and `W^{1,p}_0(Ω)` on an interval.

mod assemble;
mod model;
mod space;

pub use assemble::{
    assemble_phi, assemble_psi, defect_jacobian, energy_parts, grad_energy, norms, residual, weak_defect,
    EnergyParts, Norms,
};
pub use model::{EnergyModel, Nonlinearity, Problem};
pub use space::{BoundaryCondition, DiscreteFn, FeSpace, Mesh1D};

#[cfg(test)]
mod tests;
