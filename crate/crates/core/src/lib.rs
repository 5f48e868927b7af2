//! Coresets for Gaussian mixture models.
//!
//! Large weighted point sets are compressed into small weighted subsets
//! whose negative log-likelihood tracks that of the full data for every
//! k-component mixture. Construction runs offline or through a
//! merge-reduce stream, and an evaluation harness fits mixtures on
//! coresets and scores them on the full data.

pub mod error;
pub mod geom;
pub mod gmm;
pub mod pipeline;
pub mod projclust;
pub mod sampler;
pub mod seed;
pub mod sensitivity;
pub mod streaming;

pub use error::{Error, Result};
pub use geom::{AffineSubspace, PsdMatrix, WeightedPointSet};
