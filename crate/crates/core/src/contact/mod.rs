//! Pointwise contact geometry in the global chart.

mod field;
mod forms;
mod hamiltonian;

pub use field::{singular_value_ratio, CoordVectorField, Degeneracy, LinearSystem, Slot, SolvedSystem};
pub use forms::{conformal_factor, contract, exterior_derivative, lie_derivative, CoordOneForm};
pub use hamiltonian::{reeb_field, reeb_vector_field, ContactHamiltonianSystem, CONTACT_TOL};

#[cfg(test)]
mod tests;
