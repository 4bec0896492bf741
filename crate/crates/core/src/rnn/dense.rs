//! Row-major dense kernels for the recurrent weight matrix.
//!
//! Each output element is produced by a fixed sequence of floating-point
//! operations, so results do not depend on how rayon splits the work.

use rayon::prelude::*;

const PAR_MIN_ROWS: usize = 256;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out = M x` for `M` with `cols` columns.
pub fn matvec(mat: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(mat.len(), out.len() * cols);
    if out.len() >= PAR_MIN_ROWS {
        out.par_iter_mut().zip(mat.par_chunks(cols)).for_each(|(o, row)| *o = dot(row, x));
    } else {
        out.iter_mut().zip(mat.chunks(cols)).for_each(|(o, row)| *o = dot(row, x));
    }
}

/// `out = Mᵀ x` for a square `n×n` matrix; zero entries of `x` are skipped.
pub fn matvec_transposed(mat: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(mat.len(), n * n);
    const BLOCK: usize = 512;
    let accumulate = |(b, chunk): (usize, &mut [f64])| {
        chunk.iter_mut().for_each(|v| *v = 0.0);
        let lo = b * BLOCK;
        for (k, &xk) in x.iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            let row = &mat[k * n + lo..k * n + lo + chunk.len()];
            for (o, w) in chunk.iter_mut().zip(row) {
                *o += xk * w;
            }
        }
    };
    if n >= PAR_MIN_ROWS {
        out.par_chunks_mut(BLOCK).enumerate().for_each(accumulate);
    } else {
        out.chunks_mut(BLOCK).enumerate().for_each(accumulate);
    }
}

/// `M += alpha · u vᵀ`; rows with `u_k = 0` are untouched.
pub fn rank_one_update(mat: &mut [f64], cols: usize, alpha: f64, u: &[f64], v: &[f64]) {
    let update = |(row, &uk): (&mut [f64], &f64)| {
        if uk == 0.0 {
            return;
        }
        let s = alpha * uk;
        for (w, vj) in row.iter_mut().zip(v) {
            *w += s * vj;
        }
    };
    if u.len() >= PAR_MIN_ROWS {
        mat.par_chunks_mut(cols).zip(u.par_iter()).for_each(update);
    } else {
        mat.chunks_mut(cols).zip(u.iter()).for_each(update);
    }
}
