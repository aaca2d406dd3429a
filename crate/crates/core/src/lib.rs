//! Symmetry-constrained, property-conditioned crystal generation: a
//! language-model stage proposes space groups and Wyckoff assignments, a
//! diffusion model samples lattices and free coordinates under them.

pub mod cli;
pub mod constraint;
pub mod data_io;
pub mod diffusion;
pub mod elements;
pub mod error;
pub mod evaluation;
pub mod par;
pub mod property;
pub mod symmetry;

pub use error::{ConstraintError, DataError, DiffusionError, EvalError, SymmetryError};
pub use par::{derive_seed, Execution};
pub use property::{PropertyKind, PropertyTarget};
