//! Finite-width Elman ReLU network, its forward pass and exact gradient.

mod batch;
pub mod checkpoint;
pub mod dense;
mod forward;
mod params;
mod sequence;

pub use batch::output_batch;
pub use checkpoint::{load_params, read_params, save_params, write_params};
pub use forward::{forward, gradient, gradient_dense, output_only, ForwardStates, GradientDecomposition};
pub use params::{init_params, RnnParams};
pub use sequence::InputSequence;
pub(crate) use sequence::inner;
