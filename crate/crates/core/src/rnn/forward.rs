use serde::Serialize;

use super::dense::{matvec, matvec_transposed};
use super::params::RnnParams;
use super::sequence::InputSequence;
use crate::error::{LabError, Result};

/// Hidden states `h_0 … h_L`, gates `D_1 … D_L` and the output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardStates {
    /// `h[l]` is `h_l`, for `l` in `0..=L`.
    pub h: Vec<Vec<f64>>,
    /// `gates[l-1]` is the diagonal of `D_l`.
    pub gates: Vec<Vec<bool>>,
    pub f: f64,
}

impl ForwardStates {
    pub fn state(&self, l: usize) -> &[f64] {
        &self.h[l]
    }

    pub fn gate(&self, l: usize) -> &[bool] {
        &self.gates[l - 1]
    }

    pub fn norms(&self) -> Vec<f64> {
        self.h.iter().map(|h| h.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }

    /// Steps `l ≥ 1` where `‖h_l‖` drops more than `band` (relative) below
    /// the running maximum of earlier norms.
    pub fn norm_growth_violations(&self, band: f64) -> Vec<usize> {
        let norms = self.norms();
        let mut best = norms[0];
        let mut out = Vec::new();
        for (l, &n) in norms.iter().enumerate().skip(1) {
            if n < best * (1.0 - band) {
                out.push(l);
            }
            best = best.max(n);
        }
        out
    }
}

fn check_shape(p: &RnnParams, x: &InputSequence) -> Result<()> {
    if x.dim() != p.d || x.len() != p.len {
        return Err(LabError::dim(format!(
            "input is {}x{} (L x d), network expects {}x{}",
            x.len(),
            x.dim(),
            p.len,
            p.d
        )));
    }
    Ok(())
}

/// One recurrent step. Writes the pre-activation into `pre` and returns
/// nothing; callers apply the gate.
#[inline]
fn preactivation(p: &RnnParams, h_prev: &[f64], x_l: &[f64], pre: &mut [f64]) {
    matvec(&p.w, p.m, h_prev, pre);
    for (k, z) in pre.iter_mut().enumerate() {
        let row = &p.a[k * p.d..(k + 1) * p.d];
        *z += super::dense::dot(row, x_l);
    }
}

fn initial_state(p: &RnnParams) -> Vec<f64> {
    p.m0.iter().map(|v| v.max(0.0)).collect()
}

pub fn forward(p: &RnnParams, x: &InputSequence) -> Result<ForwardStates> {
    check_shape(p, x)?;
    let mut h = Vec::with_capacity(p.len + 1);
    let mut gates = Vec::with_capacity(p.len);
    h.push(initial_state(p));
    let mut pre = vec![0.0; p.m];
    for x_l in x.steps() {
        preactivation(p, h.last().unwrap(), x_l, &mut pre);
        // a pre-activation of exactly 0 closes the gate
        gates.push(pre.iter().map(|&z| z > 0.0).collect());
        h.push(pre.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect());
    }
    let f = super::dense::dot(&p.b, h.last().unwrap());
    Ok(ForwardStates { h, gates, f })
}

/// `f(W, x)` keeping only the current state.
pub fn output_only(p: &RnnParams, x: &InputSequence) -> Result<f64> {
    check_shape(p, x)?;
    let mut h = initial_state(p);
    let mut pre = vec![0.0; p.m];
    for x_l in x.steps() {
        preactivation(p, &h, x_l, &mut pre);
        for (hk, &z) in h.iter_mut().zip(&pre) {
            *hk = if z > 0.0 { z } else { 0.0 };
        }
    }
    Ok(super::dense::dot(&p.b, &h))
}

/// `∂f/∂W = Σ_l (Back_l ∘ D_l) h_{l−1}ᵀ` in factored form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientDecomposition {
    pub states: ForwardStates,
    /// `back[l-1] = Back_l = B D_L W ⋯ D_{l+1} W` (so `Back_L = B`).
    pub back: Vec<Vec<f64>>,
    /// `gated[l-1] = Back_l ∘ D_l`, the error signal at step `l`.
    pub gated: Vec<Vec<f64>>,
}

impl GradientDecomposition {
    pub fn seq_len(&self) -> usize {
        self.back.len()
    }

    pub fn width(&self) -> usize {
        self.states.h[0].len()
    }

    /// `Σ_l (Back_l ∘ D_l) h_{l−1}ᵀ`, row-major `m×m`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let m = self.width();
        let mut g = vec![0.0; m * m];
        for l in 1..=self.seq_len() {
            super::dense::rank_one_update(&mut g, m, 1.0, &self.gated[l - 1], &self.states.h[l - 1]);
        }
        g
    }

    /// `‖∂f/∂W‖_F²` without materializing the matrix.
    pub fn frobenius_sq(&self) -> f64 {
        let len = self.seq_len();
        let mut total = 0.0;
        for l in 1..=len {
            for lp in 1..=len {
                let t = super::dense::dot(&self.gated[l - 1], &self.gated[lp - 1]);
                if t != 0.0 {
                    total += t * super::dense::dot(&self.states.h[l - 1], &self.states.h[lp - 1]);
                }
            }
        }
        total
    }
}

/// Reverse-mode gradient of `f` with respect to `W`, masks held fixed.
pub fn gradient(p: &RnnParams, x: &InputSequence) -> Result<GradientDecomposition> {
    let states = forward(p, x)?;
    let len = p.len;
    let mut back = vec![Vec::new(); len];
    let mut gated = vec![Vec::new(); len];
    let mut current = p.b.clone();
    for l in (1..=len).rev() {
        let g: Vec<f64> =
            current.iter().zip(states.gate(l)).map(|(&v, &open)| if open { v } else { 0.0 }).collect();
        if l > 1 {
            let mut next = vec![0.0; p.m];
            matvec_transposed(&p.w, p.m, &g, &mut next);
            back[l - 1] = std::mem::replace(&mut current, next);
        } else {
            back[l - 1] = std::mem::take(&mut current);
        }
        gated[l - 1] = g;
    }
    Ok(GradientDecomposition { states, back, gated })
}

/// Dense `∂f/∂W` accumulated step by step during the backward sweep.
pub fn gradient_dense(p: &RnnParams, x: &InputSequence) -> Result<Vec<f64>> {
    let states = forward(p, x)?;
    let m = p.m;
    let mut g = vec![0.0; m * m];
    let mut delta: Vec<f64> = p.b.clone();
    for l in (1..=p.len).rev() {
        for (v, &open) in delta.iter_mut().zip(states.gate(l)) {
            if !open {
                *v = 0.0;
            }
        }
        let h_prev = states.state(l - 1);
        for (k, &dk) in delta.iter().enumerate() {
            if dk != 0.0 {
                for (gkj, hj) in g[k * m..(k + 1) * m].iter_mut().zip(h_prev) {
                    *gkj += dk * hj;
                }
            }
        }
        let mut next = vec![0.0; m];
        matvec_transposed(&p.w, m, &delta, &mut next);
        delta = next;
    }
    Ok(g)
}
