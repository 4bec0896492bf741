//! Forward degeneracy of the iterated dual map and the backward floor.
//!
//! Iterates are tracked as `e = 1 − K'` so values near one keep full
//! relative precision.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{LabError, Result};

/// `1 − Γ(1 − e)` without cancellation.
pub fn one_minus_gamma(e: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    let theta = 2.0 * (e / 2.0).sqrt().min(1.0).asin();
    let s = if theta < 0.1 {
        // sin θ − θ cos θ as a series in θ
        let t2 = theta * theta;
        let mut term = theta * t2; // θ^{2k+1}
        let mut fact = 6.0; // (2k+1)!
        let mut sum = 0.0;
        for k in 1..12 {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * 2.0 * kf * term / fact;
            term *= t2;
            fact *= (2.0 * kf + 2.0) * (2.0 * kf + 3.0);
        }
        sum
    } else {
        theta.sin() - theta * theta.cos()
    };
    (PI * e - s) / PI
}

/// `ln Σ(1 − e)` computed as `ln(1 − θ/π)`.
pub fn ln_sigma_near_one(e: f64) -> f64 {
    let theta = 2.0 * (e.max(0.0) / 2.0).sqrt().min(1.0).asin();
    (-theta / PI).ln_1p()
}

/// Envelope `z_l = 1 − cos(π(1 − (l/(l+1))^b))`.
pub fn envelope(l: usize, b: f64) -> f64 {
    let gap = -(-b * (1.0 / l as f64).ln_1p()).exp_m1();
    let half = 0.5 * PI * gap;
    2.0 * half.sin().powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyTrace {
    pub k_init: f64,
    pub b: f64,
    /// `e_l = 1 − K'_l` for `l = 0..=L_max`.
    pub e: Vec<f64>,
    /// `z_l` for `l = 1..=L_max`.
    pub z: Vec<f64>,
    /// `sup_{l≥1} e_l / z_l`.
    pub sup_ratio: f64,
    pub strictly_decreasing: bool,
}

impl DegeneracyTrace {
    pub fn k(&self, l: usize) -> f64 {
        1.0 - self.e[l]
    }

    /// `l² e_l`, whose ratio across decades measures the `1/l²` rate.
    pub fn scaled_gap(&self, l: usize) -> f64 {
        (l as f64).powi(2) * self.e[l]
    }
}

fn check_init(k_init: f64) -> Result<()> {
    if !(k_init > 0.0 && k_init <= 1.0) {
        return Err(LabError::Argument(format!("K_init must lie in (0, 1], got {k_init}")));
    }
    Ok(())
}

pub fn degeneracy_trace(l_max: usize, b: f64, k_init: f64) -> Result<DegeneracyTrace> {
    check_init(k_init)?;
    if !(b > 0.0) {
        return Err(LabError::Argument(format!("envelope exponent must be positive, got {b}")));
    }
    let mut e = Vec::with_capacity(l_max + 1);
    e.push(1.0 - k_init);
    let mut z = Vec::with_capacity(l_max);
    let mut sup_ratio = 0.0f64;
    let mut strictly_decreasing = true;
    for l in 1..=l_max {
        let prev = e[l - 1];
        let next = one_minus_gamma(prev);
        if prev > 0.0 && next >= prev {
            strictly_decreasing = false;
        }
        let zl = envelope(l, b);
        sup_ratio = sup_ratio.max(next / zl);
        e.push(next);
        z.push(zl);
    }
    Ok(DegeneracyTrace { k_init, b, e, z, sup_ratio, strictly_decreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorScan {
    /// `(L, Π_{l=1}^{L} Σ(K'_l))`.
    pub points: Vec<(usize, f64)>,
    /// Least-squares slope of `ln product` against `ln L`.
    pub slope: f64,
}

pub fn backward_floor_scan(lens: &[usize], k_init: f64) -> Result<FloorScan> {
    check_init(k_init)?;
    if lens.len() < 2 || lens.iter().any(|&l| l == 0) {
        return Err(LabError::Argument("need at least two positive lengths".into()));
    }
    let l_max = *lens.iter().max().unwrap_or(&1);
    let mut log_prod = vec![0.0; l_max + 1];
    let mut e = 1.0 - k_init;
    for l in 1..=l_max {
        e = one_minus_gamma(e);
        log_prod[l] = log_prod[l - 1] + ln_sigma_near_one(e);
    }
    let points: Vec<(usize, f64)> = lens.iter().map(|&l| (l, log_prod[l].exp())).collect();
    let xs: Vec<f64> = lens.iter().map(|&l| (l as f64).ln()).collect();
    let ys: Vec<f64> = lens.iter().map(|&l| log_prod[l]).collect();
    Ok(FloorScan { points, slope: ls_slope(&xs, &ys) })
}

pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
