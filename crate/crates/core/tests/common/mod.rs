#![allow(dead_code)]

use rnn_ntk_lab::rng::fill_normal;
use rnn_ntk_lab::rnn::{forward, gradient, output_only, InputSequence, RnnParams};

/// Gaussian steps rescaled to norm `c`.
pub fn sphere_sequence(d: usize, len: usize, c: f64, seed: u64, stream: u64) -> InputSequence {
    let mut v = vec![0.0; d * len];
    fill_normal(&mut v, seed, stream, 1.0);
    for step in v.chunks_mut(d) {
        let n = step.iter().map(|x| x * x).sum::<f64>().sqrt();
        step.iter_mut().for_each(|x| *x *= c / n);
    }
    InputSequence::new(d, v).unwrap()
}

pub fn sphere_sequences(n: usize, d: usize, len: usize, seed: u64) -> Vec<InputSequence> {
    (0..n as u64).map(|k| sphere_sequence(d, len, 1.0, seed, k)).collect()
}

/// Outcome of comparing reverse-mode against central differences on
/// sampled entries of `W`.
pub struct FdReport {
    pub checked: usize,
    pub passed: usize,
    pub kinks: usize,
}

/// Central differences with step `h` on `coords` entries drawn from
/// `seed`. Entries whose perturbation flips any gate are counted as kinks
/// and skipped.
pub fn finite_difference_oracle(p: &RnnParams, x: &InputSequence, coords: usize, h: f64, seed: u64, tol: f64) -> FdReport {
    let m = p.width();
    let g = gradient(p, x).unwrap().reconstruct();
    let base_gates = forward(p, x).unwrap().gates;
    let mut picks = vec![0.0; 2 * coords];
    fill_normal(&mut picks, seed, 0xFD, 1.0);
    let mut report = FdReport { checked: 0, passed: 0, kinks: 0 };
    let mut q = p.clone();
    for c in 0..coords {
        let u = |v: f64| (((v * 1e6).abs() as u64) % m as u64) as usize;
        let idx = u(picks[2 * c]) * m + u(picks[2 * c + 1]);
        let w0 = q.w()[idx];
        q.w_mut()[idx] = w0 + h;
        let plus = output_only(&q, x).unwrap();
        let kink_plus = forward(&q, x).unwrap().gates != base_gates;
        q.w_mut()[idx] = w0 - h;
        let minus = output_only(&q, x).unwrap();
        let kink_minus = forward(&q, x).unwrap().gates != base_gates;
        q.w_mut()[idx] = w0;
        if kink_plus || kink_minus {
            report.kinks += 1;
            continue;
        }
        let fd = (plus - minus) / (2.0 * h);
        let denom = g[idx].abs().max(fd.abs()).max(1e-10);
        report.checked += 1;
        if (fd - g[idx]).abs() / denom < tol {
            report.passed += 1;
        }
    }
    report
}
