use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::rng::{derive_seed, fill_normal};

const TAG_W: u64 = 1;
const TAG_A: u64 = 2;
const TAG_B: u64 = 3;
const TAG_M0: u64 = 4;

/// Weights of `h_l = relu(W h_{l−1} + A X_l)`, `h_0 = relu(M0)`, `f = Bᵀh_L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RnnParams {
    pub(crate) m: usize,
    pub(crate) d: usize,
    pub(crate) len: usize,
    pub(crate) seed: u64,
    /// `m×m`, row-major.
    pub(crate) w: Vec<f64>,
    /// `m×d`, row-major.
    pub(crate) a: Vec<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) m0: Vec<f64>,
}

/// Draws `W, M0 ~ N(0, 2/m)`, `A ~ N(0, 2/(L³m))`, `B ~ N(0, 1/m)`.
///
/// Every matrix row is its own ChaCha substream of a per-matrix child seed,
/// so row `k` of `A` (in units of its standard deviation) is the same for
/// every width `m > k`.
pub fn init_params(m: usize, d: usize, len: usize, seed: u64) -> Result<RnnParams> {
    if m == 0 || d == 0 || len == 0 {
        return Err(LabError::Argument(format!("m={m}, d={d}, L={len} must all be positive")));
    }
    let mf = m as f64;
    let w_std = (2.0 / mf).sqrt();
    let a_std = (2.0 / ((len as f64).powi(3) * mf)).sqrt();
    let b_std = (1.0 / mf).sqrt();

    let mut w = vec![0.0; m * m];
    let w_seed = derive_seed(seed, TAG_W);
    w.par_chunks_mut(m).enumerate().for_each(|(k, row)| fill_normal(row, w_seed, k as u64, w_std));

    let mut a = vec![0.0; m * d];
    let a_seed = derive_seed(seed, TAG_A);
    a.chunks_mut(d).enumerate().for_each(|(k, row)| fill_normal(row, a_seed, k as u64, a_std));

    let mut b = vec![0.0; m];
    fill_normal(&mut b, derive_seed(seed, TAG_B), 0, b_std);
    let mut m0 = vec![0.0; m];
    fill_normal(&mut m0, derive_seed(seed, TAG_M0), 0, w_std);

    Ok(RnnParams { m, d, len, seed, w, a, b, m0 })
}

impl RnnParams {
    /// Assembles parameters from raw parts (row-major `W` and `A`).
    pub fn from_parts(
        d: usize,
        len: usize,
        seed: u64,
        w: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        m0: Vec<f64>,
    ) -> Result<Self> {
        let m = b.len();
        if m == 0 || d == 0 || len == 0 {
            return Err(LabError::Argument("empty dimensions".into()));
        }
        if w.len() != m * m || a.len() != m * d || m0.len() != m {
            return Err(LabError::dim(format!(
                "W has {} entries, A {}, M0 {} for m={m}, d={d}",
                w.len(),
                a.len(),
                m0.len()
            )));
        }
        if w.iter().chain(&a).chain(&b).chain(&m0).any(|v| !v.is_finite()) {
            return Err(LabError::Argument("non-finite parameter".into()));
        }
        Ok(RnnParams { m, d, len, seed, w, a, b, m0 })
    }

    pub fn width(&self) -> usize {
        self.m
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn seq_len(&self) -> usize {
        self.len
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn w_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn b_mut(&mut self) -> &mut [f64] {
        &mut self.b
    }

    pub fn m0(&self) -> &[f64] {
        &self.m0
    }

    pub fn m0_mut(&mut self) -> &mut [f64] {
        &mut self.m0
    }

    pub fn w_frobenius_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let p = init_params(4, 2, 3, 99).unwrap();
        let q = init_params(4, 2, 3, 99).unwrap();
        assert_eq!(p, q);
        assert_ne!(p, init_params(4, 2, 3, 100).unwrap());
    }

    #[test]
    fn width_coupling_of_a() {
        let small = init_params(8, 3, 2, 5).unwrap();
        let big = init_params(32, 3, 2, 5).unwrap();
        let ratio = (32.0f64 / 8.0).sqrt();
        for k in 0..8 * 3 {
            assert!((small.a[k] - big.a[k] * ratio).abs() < 1e-14);
        }
    }

    #[test]
    fn variance_bands_at_width_4096() {
        let m = 4096;
        let p = init_params(m, 8, 5, 1).unwrap();
        let wf = p.w_frobenius_sq();
        assert!((wf / m as f64 - 2.0).abs() < 0.1);
        assert!((wf - 2.0 * m as f64).abs() <= 5.0 * (8.0 * m as f64).sqrt());
        let h0: f64 = p.m0.iter().map(|v| v.max(0.0).powi(2)).sum();
        assert!((h0 - 1.0).abs() < 0.1, "‖h_0‖² = {h0}");
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(init_params(0, 1, 1, 0).is_err());
        assert!(RnnParams::from_parts(1, 1, 0, vec![0.0; 4], vec![0.0], vec![0.0], vec![0.0]).is_err());
    }
}
