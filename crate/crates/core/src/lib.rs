//! Conditional expectations of finite index on finite-dimensional
//! C*-algebras.
//!
//! The crate builds expectations `E: A → B ⊆ A` on multi-matrix algebras,
//! computes the positivity constant `K(E)`, the complete-positivity constant
//! `L(E)` and the Watatani index, runs the Jones basic construction and
//! tower, and checks the inequalities relating these quantities.

pub mod algebra;
pub mod condexp;
pub mod constants;
pub mod corpus;
pub mod error;
pub mod hilbert;
pub mod inclusion;
pub mod linalg;
pub mod tol;

pub use algebra::{center_basis, generating_set, AlgebraShape, Element, LinearMap, SpectralValue};
pub use error::{Error, Result};
pub use inclusion::{max_orthogonal_family, relative_commutant, Embedding, SubspaceBasis};
pub use tol::Tolerances;
