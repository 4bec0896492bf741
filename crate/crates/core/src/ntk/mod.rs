//! Empirical and infinite-width neural tangent kernels.

mod analytic;
mod degeneracy;
mod empirical;
pub mod io;

pub use analytic::{
    analytic_backward, analytic_forward, analytic_layer_terms, analytic_ntk, analytic_ntk_report, calibrate_scale,
    relative_agreement_error, AnalyticNtk, BackwardKernelSeries, ForwardKernelSeries,
};
pub use degeneracy::{backward_floor_scan, degeneracy_trace, envelope, DegeneracyTrace, FloorScan};
pub(crate) use degeneracy::ls_slope;
pub use empirical::{empirical_decomposition, empirical_ntk, NtkDecomposition};
pub use io::{load_kernel, save_kernel};
