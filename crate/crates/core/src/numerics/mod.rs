//! Scalar special functions, power series and PSD linear algebra.

pub mod dual;
pub mod hermite;
pub mod linalg;
pub mod quadrature;
pub mod series;

pub use dual::{clamp_correlation, gamma_dual, sigma_dual, CLAMP_TOL};
pub use hermite::{hermite_coeffs, hermite_coeffs_quadrature, HermiteTable};
pub use linalg::{
    is_psd, min_eigenvalue, psd_quadratic_form, psd_quadratic_solve, KernelKind, KernelMatrix, QuadraticForm,
};
pub use series::{series_eval, truncated_sum, PowerSeries, SeriesSum};
