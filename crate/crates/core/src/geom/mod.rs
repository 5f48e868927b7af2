//! Weighted point sets and the small dense linear algebra shared by every stage.

pub mod linalg;
pub mod subspace;
pub mod weighted;

pub use linalg::{cholesky, PsdMatrix, DEFAULT_EIGEN_FLOOR};
pub use subspace::AffineSubspace;
pub use weighted::WeightedPointSet;
