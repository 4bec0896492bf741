//! Empirical NTK `H_ij = (1/m)⟨∇_W f(x_i), ∇_W f(x_j)⟩` from factored gradients.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::numerics::{KernelKind, KernelMatrix};
use crate::rnn::dense::dot;
use crate::rnn::{gradient, GradientDecomposition, InputSequence, RnnParams};

/// Per-step factors of one NTK entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NtkDecomposition {
    /// `cross[l-1][l'-1] = (1/m)⟨Back_l∘D_l(x_i), Back_l'∘D'_l'(x_j)⟩`.
    pub cross: Vec<Vec<f64>>,
    /// `forward[l][l'] = ⟨h_l(x_i), h_l'(x_j)⟩` for `l, l'` in `0..=L`.
    pub forward: Vec<Vec<f64>>,
}

impl NtkDecomposition {
    pub fn seq_len(&self) -> usize {
        self.cross.len()
    }

    /// `Σ_{l,l'} cross[l][l'] · forward[l−1][l'−1]`.
    pub fn recompose(&self) -> f64 {
        let len = self.seq_len();
        let mut total = 0.0;
        for l in 1..=len {
            for lp in 1..=len {
                total += self.cross[l - 1][lp - 1] * self.forward[l - 1][lp - 1];
            }
        }
        total
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.seq_len()).map(|l| self.cross[l][l]).collect()
    }

    /// `max_{l≠l'} |cross| / min_l cross[l][l]`.
    pub fn off_diagonal_ratio(&self) -> f64 {
        let len = self.seq_len();
        let mut off = 0.0f64;
        for l in 0..len {
            for lp in 0..len {
                if l != lp {
                    off = off.max(self.cross[l][lp].abs());
                }
            }
        }
        let diag = self.diagonal().into_iter().fold(f64::INFINITY, f64::min);
        off / diag
    }
}

pub(crate) fn decompose_pair(gi: &GradientDecomposition, gj: &GradientDecomposition) -> NtkDecomposition {
    let len = gi.seq_len();
    let inv_m = 1.0 / gi.width() as f64;
    let cross = (0..len)
        .map(|l| (0..len).map(|lp| dot(&gi.gated[l], &gj.gated[lp]) * inv_m).collect())
        .collect();
    let forward = (0..=len)
        .map(|l| (0..=len).map(|lp| dot(&gi.states.h[l], &gj.states.h[lp])).collect())
        .collect();
    NtkDecomposition { cross, forward }
}

pub fn empirical_decomposition(p: &RnnParams, xi: &InputSequence, xj: &InputSequence) -> Result<NtkDecomposition> {
    let gi = gradient(p, xi)?;
    let gj = gradient(p, xj)?;
    Ok(decompose_pair(&gi, &gj))
}

/// NTK entry from two gradients; skips the (exactly zero) products of
/// disjoint gates.
pub(crate) fn ntk_entry(gi: &GradientDecomposition, gj: &GradientDecomposition) -> f64 {
    let len = gi.seq_len();
    let mut total = 0.0;
    for l in 1..=len {
        for lp in 1..=len {
            let back = dot(&gi.gated[l - 1], &gj.gated[lp - 1]);
            if back != 0.0 {
                total += back * dot(&gi.states.h[l - 1], &gj.states.h[lp - 1]);
            }
        }
    }
    total / gi.width() as f64
}

pub fn empirical_ntk(p: &RnnParams, xs: &[InputSequence]) -> Result<KernelMatrix> {
    let grads: Vec<GradientDecomposition> = xs.par_iter().map(|x| gradient(p, x)).collect::<Result<_>>()?;
    let n = grads.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs.par_iter().map(|&(i, j)| ntk_entry(&grads[i], &grads[j])).collect();
    let mut entries = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        entries[i * n + j] = v;
        entries[j * n + i] = v;
    }
    KernelMatrix::from_row_major(n, entries, KernelKind::Empirical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::min_eigenvalue;
    use crate::rnn::{gradient_dense, init_params};

    fn seq(d: usize, len: usize, seed: u64) -> InputSequence {
        let mut v = vec![0.0; d * len];
        crate::rng::fill_normal(&mut v, seed, 1, 1.0);
        InputSequence::new(d, v).unwrap()
    }

    #[test]
    fn single_entry_is_gradient_norm() {
        let p = init_params(32, 3, 4, 2).unwrap();
        let x = seq(3, 4, 1);
        let h = empirical_ntk(&p, std::slice::from_ref(&x)).unwrap();
        let g = gradient_dense(&p, &x).unwrap();
        let norm_sq: f64 = g.iter().map(|v| v * v).sum();
        assert!((h.get(0, 0) - norm_sq / 32.0).abs() < 1e-12 * norm_sq);
        assert!(h.get(0, 0) > 0.0);
    }

    #[test]
    fn duplicates_give_constant_block() {
        let p = init_params(32, 3, 4, 2).unwrap();
        let x = seq(3, 4, 1);
        let h = empirical_ntk(&p, &[x.clone(), x]).unwrap();
        assert_eq!(h.get(0, 0), h.get(0, 1));
        assert_eq!(h.get(1, 1), h.get(0, 1));
    }

    #[test]
    fn matches_dense_gradient_inner_products() {
        let p = init_params(40, 3, 5, 7).unwrap();
        let xs: Vec<_> = (0..3).map(|s| seq(3, 5, 10 + s)).collect();
        let h = empirical_ntk(&p, &xs).unwrap();
        let gs: Vec<Vec<f64>> = xs.iter().map(|x| gradient_dense(&p, x).unwrap()).collect();
        for i in 0..3 {
            for j in 0..3 {
                let want: f64 = gs[i].iter().zip(&gs[j]).map(|(a, b)| a * b).sum::<f64>() / 40.0;
                assert!((h.get(i, j) - want).abs() < 1e-10 * h.get(i, i).abs());
                let dec = empirical_decomposition(&p, &xs[i], &xs[j]).unwrap();
                assert!((dec.recompose() - want).abs() < 1e-10 * want.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn gram_is_psd_and_self_tables_nonnegative() {
        let p = init_params(512, 4, 4, 3).unwrap();
        let xs: Vec<_> = (0..4).map(|s| seq(4, 4, 20 + s)).collect();
        let h = empirical_ntk(&p, &xs).unwrap();
        assert!(min_eigenvalue(&h) >= -1e-10 * h.trace() / 4.0);
        let dec = empirical_decomposition(&p, &xs[0], &xs[0]).unwrap();
        assert!(dec.diagonal().iter().all(|t| *t >= 0.0));
    }
}
