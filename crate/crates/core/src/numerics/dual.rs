//! Closed-form dual activations of the √2-scaled ReLU and its derivative.
//!
//! For unit vectors `u, v` with `uᵀv = z` and `w ~ N(0, I)`,
//! `E[√2·relu(wᵀu) · √2·relu(wᵀv)] = gamma_dual(z)` and
//! `E[√2·1{wᵀu>0} · √2·1{wᵀv>0}] = sigma_dual(z)`.

use std::f64::consts::PI;

use crate::error::{LabError, Result};

/// Arguments in `(1, 1 + CLAMP_TOL]` are treated as rounding drift and clamped.
pub const CLAMP_TOL: f64 = 1e-9;

/// Outcome of bringing a correlation back into `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

pub fn clamp_correlation(z: f64, what: &'static str) -> Result<Clamped> {
    if !z.is_finite() || z.abs() > 1.0 + CLAMP_TOL {
        return Err(LabError::Domain { what, value: z });
    }
    if z.abs() > 1.0 {
        Ok(Clamped { value: z.signum(), clamped: true })
    } else {
        Ok(Clamped { value: z, clamped: false })
    }
}

/// `Γ(z) = (√(1−z²) + (π − arccos z)·z) / π`.
pub fn gamma_dual(z: f64) -> Result<f64> {
    let z = clamp_correlation(z, "gamma_dual")?.value;
    Ok(gamma_unchecked(z))
}

/// `Σ(z) = 1/2 + arcsin(z)/π`.
pub fn sigma_dual(z: f64) -> Result<f64> {
    let z = clamp_correlation(z, "sigma_dual")?.value;
    Ok(sigma_unchecked(z))
}

#[inline]
pub(crate) fn gamma_unchecked(z: f64) -> f64 {
    let s = (1.0 - z * z).max(0.0).sqrt();
    ((s + (PI - z.acos()) * z) / PI).clamp(0.0, 1.0)
}

#[inline]
pub(crate) fn sigma_unchecked(z: f64) -> f64 {
    (0.5 + z.asin() / PI).clamp(0.0, 1.0)
}
