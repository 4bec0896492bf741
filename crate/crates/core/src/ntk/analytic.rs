//! Infinite-width forward and backward kernels and the limiting NTK `H∞`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::numerics::dual::{clamp_correlation, gamma_unchecked, sigma_unchecked};
use crate::numerics::{KernelKind, KernelMatrix};
use crate::rnn::{inner, InputSequence};

/// Forward recursion for one pair of sequences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardKernelSeries {
    /// `K_0..=K_L`, with `K_0 = 1`.
    pub k: Vec<f64>,
    /// `Q_1..=Q_L`.
    pub q: Vec<f64>,
    /// Correlations `Λ_1..=Λ_L` after clamping.
    pub lambda: Vec<f64>,
    /// Per-step `‖X_{i,l}‖²` and `‖X_{j,l}‖²`.
    pub norms_i: Vec<f64>,
    pub norms_j: Vec<f64>,
    pub clamp_events: usize,
}

impl ForwardKernelSeries {
    pub fn seq_len(&self) -> usize {
        self.lambda.len()
    }
}

/// Products `B_l = Π_{a=l}^{L} Σ(Λ_a)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackwardKernelSeries {
    /// `B_1..=B_L`.
    pub b: Vec<f64>,
}

fn check_pair(xi: &InputSequence, xj: &InputSequence) -> Result<()> {
    if xi.dim() != xj.dim() || xi.len() != xj.len() {
        return Err(LabError::Dimension(format!(
            "sequence shapes differ: {}x{} vs {}x{}",
            xi.len(),
            xi.dim(),
            xj.len(),
            xj.dim()
        )));
    }
    if xi.is_empty() {
        return Err(LabError::Dimension("empty sequence".into()));
    }
    Ok(())
}

pub fn analytic_forward(xi: &InputSequence, xj: &InputSequence) -> Result<ForwardKernelSeries> {
    check_pair(xi, xj)?;
    let len = xi.len();
    let scale = (len as f64).powi(-3);
    let same = xi == xj;
    let mut k = Vec::with_capacity(len + 1);
    let mut q = Vec::with_capacity(len);
    let mut lambda = Vec::with_capacity(len);
    let mut clamp_events = 0;
    let norms_i = xi.steps().map(|a| inner(a, a)).collect::<Vec<_>>();
    let norms_j = xj.steps().map(|a| inner(a, a)).collect::<Vec<_>>();
    if norms_i.iter().chain(&norms_j).any(|v| !(*v > 0.0)) {
        return Err(LabError::Precondition("per-step norms must be positive".into()));
    }
    k.push(1.0);
    let (mut si, mut sj) = (1.0, 1.0);
    for l in 1..=len {
        let (a, b) = (xi.step(l), xj.step(l));
        si += scale * norms_i[l - 1];
        sj += scale * norms_j[l - 1];
        let ql = if same { si } else { (si * sj).sqrt() };
        let raw = (scale * inner(a, b) + k[l - 1]) / ql;
        let c = clamp_correlation(raw, "forward correlation")?;
        if c.clamped {
            clamp_events += 1;
        }
        let kl = ql * gamma_unchecked(c.value);
        q.push(ql);
        lambda.push(c.value);
        k.push(kl);
    }
    Ok(ForwardKernelSeries { k, q, lambda, norms_i, norms_j, clamp_events })
}

pub fn analytic_backward(fwd: &ForwardKernelSeries, xi: &InputSequence, xj: &InputSequence) -> Result<BackwardKernelSeries> {
    check_pair(xi, xj)?;
    if fwd.seq_len() != xi.len() {
        return Err(LabError::Dimension(format!(
            "forward series has {} steps, sequences have {}",
            fwd.seq_len(),
            xi.len()
        )));
    }
    Ok(backward_products(fwd))
}

fn backward_products(fwd: &ForwardKernelSeries) -> BackwardKernelSeries {
    let len = fwd.seq_len();
    let mut b = vec![0.0; len];
    let mut acc = 1.0;
    for l in (1..=len).rev() {
        acc *= sigma_unchecked(fwd.lambda[l - 1]);
        b[l - 1] = acc;
    }
    BackwardKernelSeries { b }
}

/// Layer contributions `B_l · K_{l−1}` for `l = 1..=L`.
pub fn analytic_layer_terms(xi: &InputSequence, xj: &InputSequence) -> Result<Vec<f64>> {
    let fwd = analytic_forward(xi, xj)?;
    let bwd = backward_products(&fwd);
    Ok(bwd.b.iter().zip(&fwd.k).map(|(b, k)| b * k).collect())
}

/// `H∞` together with the number of clamped correlations.
#[derive(Debug, Clone)]
pub struct AnalyticNtk {
    pub matrix: KernelMatrix,
    pub clamp_events: usize,
}

pub fn analytic_ntk_report(xs: &[InputSequence]) -> Result<AnalyticNtk> {
    let n = xs.len();
    if n == 0 {
        return Err(LabError::Dimension("no sequences".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<(f64, usize)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let fwd = analytic_forward(&xs[i], &xs[j])?;
            let bwd = backward_products(&fwd);
            let v = bwd.b.iter().zip(&fwd.k).map(|(b, k)| b * k).sum();
            Ok((v, fwd.clamp_events))
        })
        .collect::<Result<_>>()?;
    let mut entries = vec![0.0; n * n];
    let mut clamp_events = 0;
    for (&(i, j), (v, c)) in pairs.iter().zip(values) {
        entries[i * n + j] = v;
        entries[j * n + i] = v;
        clamp_events += c;
    }
    let matrix = KernelMatrix::from_row_major(n, entries, KernelKind::Analytic)?;
    Ok(AnalyticNtk { matrix, clamp_events })
}

pub fn analytic_ntk(xs: &[InputSequence]) -> Result<KernelMatrix> {
    analytic_ntk_report(xs).map(|r| r.matrix)
}

/// Least-squares scalar `c` minimising `‖H_emp − c·H∞‖_F`.
pub fn calibrate_scale(empirical: &KernelMatrix, analytic: &KernelMatrix) -> Result<f64> {
    if empirical.n() != analytic.n() {
        return Err(LabError::Dimension("kernel sizes differ".into()));
    }
    let num: f64 = empirical.entries().iter().zip(analytic.entries()).map(|(a, b)| a * b).sum();
    let den: f64 = analytic.entries().iter().map(|b| b * b).sum();
    if den <= 0.0 {
        return Err(LabError::Precondition("analytic kernel is zero".into()));
    }
    Ok(num / den)
}

/// `max_ij |H_emp − c·H∞| / (c · mean diag H∞)`.
pub fn relative_agreement_error(empirical: &KernelMatrix, analytic: &KernelMatrix, c: f64) -> f64 {
    let scale = c * analytic.mean_diagonal();
    empirical
        .entries()
        .iter()
        .zip(analytic.entries())
        .map(|(e, a)| (e - c * a).abs())
        .fold(0.0, f64::max)
        / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gamma_dual;

    fn unit_seq(d: usize, len: usize, seed: u64) -> InputSequence {
        let mut v = vec![0.0; d * len];
        crate::rng::fill_normal(&mut v, seed, 3, 1.0);
        for step in v.chunks_mut(d) {
            let n = step.iter().map(|x| x * x).sum::<f64>().sqrt();
            step.iter_mut().for_each(|x| *x /= n);
        }
        InputSequence::new(d, v).unwrap()
    }

    #[test]
    fn self_pair_has_unit_correlation() {
        let x = unit_seq(3, 5, 1);
        let fwd = analytic_forward(&x, &x).unwrap();
        assert_eq!(fwd.clamp_events, 0);
        for l in 1..=5 {
            assert!((fwd.lambda[l - 1] - 1.0).abs() < 1e-15);
            let want = 1.0 + l as f64 / 125.0;
            assert!((fwd.k[l] - want).abs() < 1e-14);
        }
        let bwd = analytic_backward(&fwd, &x, &x).unwrap();
        assert!(bwd.b.iter().all(|b| (b - 1.0).abs() < 1e-14));
        let h = analytic_ntk(&[x]).unwrap();
        let want: f64 = (0..5).map(|l| 1.0 + l as f64 / 125.0).sum();
        assert!((h.get(0, 0) - want).abs() < 1e-13);
    }

    #[test]
    fn orthogonal_single_step() {
        let xi = InputSequence::new(2, vec![1.0, 0.0]).unwrap();
        let xj = InputSequence::new(2, vec![0.0, 1.0]).unwrap();
        let fwd = analytic_forward(&xi, &xj).unwrap();
        assert!((fwd.q[0] - 2.0).abs() < 1e-15);
        assert!((fwd.lambda[0] - 0.5).abs() < 1e-15);
        assert!((fwd.k[1] - 2.0 * gamma_dual(0.5).unwrap()).abs() < 1e-14);
        let terms = analytic_layer_terms(&xi, &xj).unwrap();
        assert!((terms[0] - (0.5 + (0.5f64).asin() / std::f64::consts::PI)).abs() < 1e-14);
    }

    #[test]
    fn correlations_stay_in_range() {
        let xs: Vec<_> = (0..6).map(|s| unit_seq(4, 6, 100 + s)).collect();
        for a in &xs {
            for b in &xs {
                let fwd = analytic_forward(a, b).unwrap();
                assert!(fwd.lambda.iter().all(|z| (-1.0..=1.0).contains(z)));
                assert!(fwd.k.iter().all(|k| *k > 0.0));
            }
        }
        let h = analytic_ntk(&xs).unwrap();
        assert!(crate::numerics::min_eigenvalue(&h) >= -1e-10 * h.trace());
    }

    #[test]
    fn calibration_recovers_scale() {
        let xs: Vec<_> = (0..3).map(|s| unit_seq(2, 3, s)).collect();
        let h = analytic_ntk(&xs).unwrap();
        let scaled = h.scaled(0.25);
        let c = calibrate_scale(&scaled, &h).unwrap();
        assert!((c - 0.25).abs() < 1e-15);
        assert!(relative_agreement_error(&scaled, &h, c) < 1e-14);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = unit_seq(2, 3, 1);
        let b = unit_seq(3, 3, 1);
        assert!(matches!(analytic_forward(&a, &b), Err(LabError::Dimension(_))));
    }
}
