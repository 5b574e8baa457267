//! Sparse Hermitian forms on the cross-section and the axial interval, and
//! their Kronecker composition into the fibre pencil.

mod field;
mod forms;
mod kron;
mod oracle;
mod pencil;
mod sparse;

pub use field::{Field, FieldLayout};
pub(crate) use forms::p1_gradients;
pub use forms::{bloch_stiffness_1d, bloch_stiffness_2d, mass_1d, mass_2d, vertex_mass_2d};
pub use kron::{KronForm, KronTerm};
pub use oracle::{dense_oracle_form, DENSE_CAP};
pub use pencil::{compose_pencil, pencil_from_factors, FibreFactors, Pencil};
pub use sparse::HermitianForm;
