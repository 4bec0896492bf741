//! Finite-width ReLU Elman networks next to their infinite-width kernel
//! limits: empirical and analytic neural tangent kernels, kernel degeneracy
//! with depth, concept-class complexity, SGD training and the kernel
//! quadratic forms that control generalization.

pub(crate) mod binfmt;
pub mod bounds;
pub mod concept;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod ntk;
pub mod rng;
pub mod rnn;
pub mod trainer;

pub use error::{LabError, Result};
