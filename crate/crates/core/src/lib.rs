//! Multidimensional permutations and permutons.
//!
//! * [`perm`]: d-permutations with their patterns and occurrence counts.
//! * [`permuton`]: empirical permutons with distances and convergence diagnostics.
//! * [`schnyder`]: Schnyder woods and their coalescent-walk processes.
//! * [`separable`]: d-separable permutations and their tree encodings.
//! * [`oracle`]: exhaustive enumerators and exact laws used as references.
//! * [`mc`]: seeded random streams shared by all samplers.

pub mod error;
pub mod mc;
pub mod oracle;
pub mod perm;
pub mod permuton;
pub mod schnyder;
pub mod separable;

pub use error::{Error, Result, ValidationError};
pub use perm::{DPermutation, IndexSet, SignSequence};
pub use permuton::EmpiricalPermuton;
