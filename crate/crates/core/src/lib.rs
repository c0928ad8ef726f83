pub mod arith;
pub mod field;
pub mod linalg;
pub mod manin;
pub mod hecke;
pub mod qseries;
pub mod toric;

/// Bumped whenever a change invalidates cached artifacts (disk caches embed it).
pub const CODE_VERSION: u32 = 1;

pub use field::{CycNum, Rat, Scalar};
pub use linalg::{Mat, Subspace};
pub use num::complex::Complex64;
