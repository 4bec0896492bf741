//! Truncated power series and the truncation policy shared by every
//! infinite sum in the crate.

use serde::{Deserialize, Serialize};

/// Hard cap on the number of terms of any series.
pub const MAX_TERMS: usize = 500;
/// A term below this fraction of the running sum ends summation.
pub const REL_CUTOFF: f64 = 1e-12;

/// `Σ_{i≤T} c_i zⁱ` with a declared radius of convergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    coefficients: Vec<f64>,
    /// `|z|` beyond which evaluation is refused.
    radius: f64,
    /// Estimated `Σ_{i>T} |c_i|` at `|z| = 1`.
    tail_bound: f64,
}

impl PowerSeries {
    /// A finite polynomial; the tail is exactly zero.
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        assert!(!coefficients.is_empty(), "a series needs c_0");
        assert!(coefficients.iter().all(|c| c.is_finite()));
        PowerSeries { coefficients, radius: f64::INFINITY, tail_bound: 0.0 }
    }

    /// Builds `c_0 … c_T` from a coefficient generator, truncating at
    /// `MAX_TERMS` and dropping trailing zeros.
    pub fn from_fn(radius: f64, mut coeff: impl FnMut(usize) -> f64) -> Self {
        let mut coefficients: Vec<f64> = (0..=MAX_TERMS).map(&mut coeff).collect();
        let exhausted = coefficients[MAX_TERMS - 7..].iter().all(|c| *c == 0.0);
        while coefficients.len() > 1 && *coefficients.last().unwrap() == 0.0 {
            coefficients.pop();
        }
        let tail_bound = if exhausted { 0.0 } else { geometric_tail(&coefficients) };
        PowerSeries { coefficients, radius, tail_bound }
    }

    /// `ψ(z) = z`.
    pub fn identity() -> Self {
        Self::polynomial(vec![0.0, 1.0])
    }

    /// `ψ(z) = zᵖ`.
    pub fn monomial(p: usize) -> Self {
        let mut c = vec![0.0; p + 1];
        c[p] = 1.0;
        Self::polynomial(c)
    }

    /// `ψ(z) = arctan(z/2) = Σ_k (−1)^{k−1} 2^{1−2k} z^{2k−1}/(2k−1)`.
    pub fn arctan_half() -> Self {
        Self::from_fn(2.0, |i| {
            if i % 2 == 0 {
                0.0
            } else {
                let k = (i + 1) / 2;
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * 2f64.powi(-(i as i32)) / i as f64
            }
        })
    }

    /// `ψ(z) = eᶻ`.
    pub fn exp() -> Self {
        let mut c = 1.0;
        Self::from_fn(f64::INFINITY, |i| {
            if i > 0 {
                c /= i as f64;
            }
            c
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, i: usize) -> f64 {
        self.coefficients.get(i).copied().unwrap_or(0.0)
    }

    pub fn truncation_index(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn scaled(&self, t: f64) -> Self {
        PowerSeries {
            coefficients: self.coefficients.iter().map(|c| c * t).collect(),
            radius: self.radius,
            tail_bound: self.tail_bound * t.abs(),
        }
    }
}

/// Horner evaluation of the stored coefficients. The caller is responsible
/// for keeping `|z|` inside the radius.
pub fn series_eval(s: &PowerSeries, z: f64) -> f64 {
    s.coefficients.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

/// Result of summing a nonnegative series under the truncation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSum {
    pub value: f64,
    /// Index of the last term included.
    pub terms_used: usize,
    pub tail_bound: f64,
    /// False when the cap was reached before terms became negligible.
    pub converged: bool,
}

/// Sums `term(start) + term(start+1) + …` for nonnegative terms.
///
/// Stops at the first nonzero term that is below `REL_CUTOFF` of the running
/// sum and smaller than the previous nonzero term, or after index `cap`.
/// Zero terms (e.g. the even coefficients of an odd function) never stop
/// the sum on their own.
pub fn truncated_sum(start: usize, cap: usize, mut term: impl FnMut(usize) -> f64) -> SeriesSum {
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    let mut last = 0.0;
    let mut ratio = f64::NAN;
    for i in start..=cap {
        let t = term(i);
        if !t.is_finite() {
            return SeriesSum { value: f64::INFINITY, terms_used: i, tail_bound: f64::INFINITY, converged: false };
        }
        if t == 0.0 {
            continue;
        }
        sum += t;
        if let Some(p) = prev {
            ratio = t / p;
            if t < REL_CUTOFF * sum && t < p {
                let tail = if ratio < 1.0 { t * ratio / (1.0 - ratio) } else { f64::INFINITY };
                return SeriesSum { value: sum, terms_used: i, tail_bound: tail, converged: true };
            }
        }
        prev = Some(t);
        last = t;
    }
    let tail = if ratio.is_finite() && ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
    // Only an all-zero sequence is known to be exact here. Callers summing a
    // finite polynomial cap at its degree and override the flag.
    let exhausted = prev.is_none();
    SeriesSum { value: sum, terms_used: cap, tail_bound: if exhausted { 0.0 } else { tail }, converged: exhausted }
}

fn geometric_tail(c: &[f64]) -> f64 {
    let nz: Vec<f64> = c.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
    if nz.len() < 2 {
        return 0.0;
    }
    let a = nz[nz.len() - 2];
    let b = nz[nz.len() - 1];
    let r = b / a;
    if r < 1.0 {
        b * r / (1.0 - r)
    } else {
        f64::INFINITY
    }
}
