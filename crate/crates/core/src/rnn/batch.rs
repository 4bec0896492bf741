//! Batched forward pass for evaluation, as dense matrix products.

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{LabError, Result};

use super::{InputSequence, RnnParams};

const CHUNK: usize = 256;

/// `f(W, x)` for every sequence. Agrees with `output_only` up to the
/// summation order of the products.
pub fn output_batch(p: &RnnParams, xs: &[InputSequence]) -> Result<Vec<f64>> {
    for x in xs {
        if x.dim() != p.d || x.len() != p.len {
            return Err(LabError::dim(format!(
                "input is {}x{} (L x d), network expects {}x{}",
                x.len(),
                x.dim(),
                p.len,
                p.d
            )));
        }
    }
    let (m, d) = (p.m, p.d);
    // Row-major W and A read column-major are Wᵀ and Aᵀ.
    let wt = DMatrixView::from_slice(&p.w, m, m);
    let at = DMatrixView::from_slice(&p.a, d, m);
    let mut out = Vec::with_capacity(xs.len());
    for chunk in xs.chunks(CHUNK) {
        let n = chunk.len();
        // states are rows: H is n×m
        let h0: Vec<f64> = p.m0.iter().map(|v| v.max(0.0)).collect();
        let mut h = DMatrix::from_fn(n, m, |_, k| h0[k]);
        for l in 1..=p.len {
            let x = DMatrix::from_fn(n, d, |i, c| chunk[i].step(l)[c]);
            let mut pre = &h * wt;
            pre.gemm(1.0, &x, &at, 1.0);
            pre.apply(|z| *z = if *z > 0.0 { *z } else { 0.0 });
            h = pre;
        }
        let b = DMatrixView::from_slice(&p.b, m, 1);
        out.extend((&h * b).iter().copied());
    }
    Ok(out)
}
