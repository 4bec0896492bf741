//! Hermite coefficients of the √2-scaled ReLU.
//!
//! With the orthonormal probabilists' polynomials
//! `h_r(x) = (-1)^r e^{x²/2} dʳ/dxʳ e^{-x²/2} / √(r!)`, the coefficients
//! `μ_r = E[√2·relu(g)·h_r(g)]`, `g ~ N(0,1)`, satisfy `Σ_r μ_r² zʳ = Γ(z)`.

use std::f64::consts::PI;

use super::quadrature;

pub const DEFAULT_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct HermiteTable {
    mu: Vec<f64>,
}

impl HermiteTable {
    pub fn order(&self) -> usize {
        self.mu.len() - 1
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_sq(&self, r: usize) -> f64 {
        self.mu[r] * self.mu[r]
    }

    /// `Σ_{r≤R} μ_r²`, the truncated value of `Γ(1) = 1`.
    pub fn mass(&self) -> f64 {
        self.mu.iter().map(|m| m * m).sum()
    }

    /// Truncated series `Σ_{r≤R} μ_r² zʳ`.
    pub fn reconstruct(&self, z: f64) -> f64 {
        self.mu.iter().rev().fold(0.0, |acc, m| acc * z + m * m)
    }
}

/// Coefficients `μ_0 … μ_R` from the closed form.
///
/// Integrating by parts on the half line gives `μ_0 = 1/√π`, `μ_1 = 1/√2`
/// and, for `r ≥ 2`, `μ_r = h_{r−2}(0)·√((r−2)!/r!)/√π`; odd `r ≥ 3` vanish.
pub fn hermite_coeffs(order: usize) -> HermiteTable {
    assert!(order >= 1, "need at least μ_0 and μ_1");
    let mut mu = vec![0.0; order + 1];
    mu[0] = 1.0 / PI.sqrt();
    mu[1] = 1.0 / 2f64.sqrt();
    // a_r = He_{r-2}(0) / √(r!)
    let mut a = 1.0 / 2f64.sqrt();
    let mut r = 2;
    while r <= order {
        mu[r] = a / PI.sqrt();
        let rf = r as f64;
        a *= -(rf - 1.0) / ((rf + 1.0) * (rf + 2.0)).sqrt();
        r += 2;
    }
    HermiteTable { mu }
}

/// Same coefficients by direct quadrature of `√2·x·h_r(x)·φ(x)` over `[0, 14]`.
///
/// The integrand has a kink at the origin, so a full-line Gauss–Hermite rule
/// converges slowly; a composite Gauss–Legendre rule on the half line does not.
pub fn hermite_coeffs_quadrature(order: usize) -> HermiteTable {
    assert!(order >= 1);
    let norm = 1.0 / (2.0 * PI).sqrt();
    let mu = (0..=order)
        .map(|r| {
            quadrature::integrate(
                |x| 2f64.sqrt() * x * orthonormal_hermite(r, x) * (-x * x / 2.0).exp() * norm,
                0.0,
                14.0,
                56,
                24,
            )
        })
        .collect();
    HermiteTable { mu }
}

/// Orthonormal probabilists' Hermite polynomial `h_r(x)` via the stable recurrence.
pub fn orthonormal_hermite(r: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if r == 0 {
        return h0;
    }
    for k in 1..r {
        let kf = k as f64;
        let h2 = (x * h1 - kf.sqrt() * h0) / (kf + 1.0).sqrt();
        h0 = h1;
        h1 = h2;
    }
    h1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dual::gamma_dual;

    #[test]
    fn low_order_entries() {
        let t = hermite_coeffs(DEFAULT_ORDER);
        assert!((t.mu_sq(0) - gamma_dual(0.0).unwrap()).abs() < 1e-15);
        assert!((t.mu_sq(1) - 0.5).abs() < 1e-15);
        assert!((t.mu_sq(2) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        for r in (3..=DEFAULT_ORDER).step_by(2) {
            assert_eq!(t.mu[r], 0.0);
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let a = hermite_coeffs(DEFAULT_ORDER);
        let b = hermite_coeffs_quadrature(DEFAULT_ORDER);
        for r in 0..=DEFAULT_ORDER {
            assert!((a.mu[r] - b.mu[r]).abs() < 1e-12, "r={r}: {} vs {}", a.mu[r], b.mu[r]);
        }
    }

    #[test]
    fn truncated_mass_below_one() {
        let t = hermite_coeffs(DEFAULT_ORDER);
        let mass = t.mass();
        assert!(mass <= 1.0 + 1e-6);
        // tail beyond r = 64 is about 1.64e-4 (k^{-5/2} decay of μ_{2k}²)
        assert!((1.0 - mass - 1.6417e-4).abs() < 1e-7, "mass {mass}");
        let long = hermite_coeffs(4000);
        assert!(1.0 - long.mass() < 1e-5);
    }

    #[test]
    fn reconstructs_gamma_on_grid() {
        let t = hermite_coeffs(DEFAULT_ORDER);
        for k in 0..100 {
            let z = -0.95 + 1.9 * k as f64 / 99.0;
            let err = (t.reconstruct(z) - gamma_dual(z).unwrap()).abs();
            assert!(err < 1e-4, "z={z} err={err}");
        }
    }

    #[test]
    fn hermite_orthonormality() {
        let norm = 1.0 / (2.0 * PI).sqrt();
        for (i, j) in [(0, 0), (3, 3), (10, 10), (2, 5), (4, 6)] {
            let v = quadrature::integrate(
                |x| orthonormal_hermite(i, x) * orthonormal_hermite(j, x) * (-x * x / 2.0).exp() * norm,
                -14.0,
                14.0,
                56,
                24,
            );
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
    }
}
