//! Complexity functionals `𝒞(ψ,R)`, `𝒞_N(ψ,R)` and the aggregate `𝒞(F*)`.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::numerics::series::MAX_TERMS;
use crate::numerics::{truncated_sum, PowerSeries, SeriesSum};

use super::target::{TargetFunction, TargetKind};

/// Default `C_1`, the smallest integer above 100.
pub const DEFAULT_C1: f64 = 101.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Complexity {
    pub value: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub divergent: bool,
}

impl Complexity {
    fn from_sum(s: SeriesSum) -> Self {
        Complexity { value: 1.0 + s.value, terms_used: s.terms_used, tail_bound: s.tail_bound, divergent: !s.converged }
    }
}

fn ln_factorial(k: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; 2 * MAX_TERMS + 2];
        for i in 1..t.len() {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    match table.get(k) {
        Some(v) => *v,
        None => table[table.len() - 1] + ((table.len()..=k).map(|i| (i as f64).ln()).sum::<f64>()),
    }
}

/// `ln C_{N,i}`, the log of the largest multinomial `i!/(n_1!…n_N!)` with
/// all parts positive; `None` when `i < N`.
pub fn ln_multinomial_max(n: usize, i: usize) -> Option<f64> {
    if n == 0 || i < n {
        return None;
    }
    let (q, r) = (i / n, i % n);
    Some(ln_factorial(i) - r as f64 * ln_factorial(q + 1) - (n - r) as f64 * ln_factorial(q))
}

/// Sums `term(i)` for `i ≥ start` under the crate truncation policy; a
/// finite polynomial is summed up to its degree and counts as exact.
fn sum_series(psi: &PowerSeries, start: usize, cap: usize, term: impl FnMut(usize) -> f64) -> SeriesSum {
    let finite = psi.tail_bound() == 0.0 && psi.truncation_index() <= cap;
    let end = if finite { psi.truncation_index() } else { cap };
    let mut s = truncated_sum(start, end, term);
    if finite && !s.converged && s.value.is_finite() {
        s.converged = true;
        s.tail_bound = 0.0;
    }
    s
}

pub fn complexity_additive(psi: &PowerSeries, r: f64) -> Complexity {
    complexity_additive_truncated(psi, r, MAX_TERMS)
}

/// `𝒞(ψ,R) = 1 + Σ_{i≥1} i·|c_i|·Rⁱ` with at most `cap` terms.
pub fn complexity_additive_truncated(psi: &PowerSeries, r: f64, cap: usize) -> Complexity {
    let s = sum_series(psi, 1, cap, |i| {
        let c = psi.coefficient(i).abs();
        if c == 0.0 {
            0.0
        } else {
            i as f64 * c * r.powi(i as i32)
        }
    });
    Complexity::from_sum(s)
}

pub fn complexity_nvars(psi: &PowerSeries, r: f64, n: usize, len: usize, c1: f64) -> Result<Complexity> {
    complexity_nvars_truncated(psi, r, n, len, c1, MAX_TERMS)
}

/// `𝒞_N(ψ,R) = 1 + Σ_{i≥N} L^{1.5N} C_1^N √C_{N,i} (i/N)^N |c_i| Rⁱ`,
/// summed in log space; terms with `i < N` carry no weight.
pub fn complexity_nvars_truncated(psi: &PowerSeries, r: f64, n: usize, len: usize, c1: f64, cap: usize) -> Result<Complexity> {
    if n == 0 || len == 0 {
        return Err(LabError::Argument("N and L must be positive".into()));
    }
    if !(c1 > 100.0) {
        return Err(LabError::Argument(format!("C1 must exceed 100, got {c1}")));
    }
    if !(r > 0.0) {
        return Err(LabError::Argument(format!("radius must be positive, got {r}")));
    }
    let nf = n as f64;
    let prefactor = 1.5 * nf * (len as f64).ln() + nf * c1.ln();
    let s = sum_series(psi, n, cap, |i| {
        let c = psi.coefficient(i).abs();
        let Some(ln_c) = ln_multinomial_max(n, i) else { return 0.0 };
        if c == 0.0 {
            return 0.0;
        }
        (prefactor + 0.5 * ln_c + nf * (i as f64 / nf).ln() + c.ln() + i as f64 * r.ln()).exp()
    });
    Ok(Complexity::from_sum(s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermComplexity {
    /// `𝒞(ψ, R)` with `R = C_0√L` (additive) or `2^{l_0}C_0√L` (N-variables).
    pub additive_branch: Complexity,
    pub additive_radius: f64,
    /// `L^{3.5}` times the additive branch.
    pub additive_weighted: f64,
    /// `𝒞_N(ψ, C_0√L)` for N-variables terms.
    pub nvars_branch: Option<Complexity>,
    /// `L²` times the N-variables branch.
    pub nvars_weighted: Option<f64>,
    pub contribution: f64,
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub kind: TargetKind,
    pub len: usize,
    pub c0: f64,
    pub c1: f64,
    /// Output scale applied to every `ψ` (margin rescaling).
    pub scale: f64,
    pub radius: f64,
    pub terms: Vec<TermComplexity>,
    pub aggregate: f64,
    /// Largest number of series terms used by any branch.
    pub truncation: usize,
    pub divergent: bool,
    /// `(i, C_{N,i})` for the first few admissible `i` of each distinct N.
    pub multinomials: Vec<(usize, usize, f64)>,
}

pub fn complexity_aggregate(f: &TargetFunction, len: usize, c0: f64) -> Result<ComplexityReport> {
    complexity_aggregate_with(f, len, c0, DEFAULT_C1, 1.0)
}

/// Aggregate complexity of `scale · F*`, applying the N-variables minimum
/// per term.
pub fn complexity_aggregate_with(f: &TargetFunction, len: usize, c0: f64, c1: f64, scale: f64) -> Result<ComplexityReport> {
    if len == 0 || f.max_position() > len {
        return Err(LabError::Argument(format!("L = {len} inconsistent with target positions")));
    }
    if !(c0 > 0.0) {
        return Err(LabError::Argument(format!("C0 must be positive, got {c0}")));
    }
    let lf = len as f64;
    let radius = c0 * lf.sqrt();
    let l35 = lf.powf(3.5);
    let mut terms = Vec::with_capacity(f.terms.len());
    let mut multinomials = Vec::new();
    for term in &f.terms {
        let psi = term.series()?.scaled(scale);
        let tc = match f.kind {
            TargetKind::Additive => {
                let c = complexity_additive(&psi, radius);
                TermComplexity {
                    additive_branch: c,
                    additive_radius: radius,
                    additive_weighted: l35 * c.value,
                    nvars_branch: None,
                    nvars_weighted: None,
                    contribution: l35 * c.value,
                    divergent: c.divergent,
                }
            }
            TargetKind::Nvars => {
                let n = term.positions.len();
                let wide = 2f64.powi(term.span() as i32) * radius;
                let a = complexity_additive(&psi, wide);
                let b = complexity_nvars(&psi, radius, n, len, c1)?;
                let (aw, bw) = (l35 * a.value, lf * lf * b.value);
                let (contribution, divergent) = match (a.divergent, b.divergent) {
                    (false, false) => (aw.min(bw), false),
                    (true, false) => (bw, false),
                    (false, true) => (aw, false),
                    (true, true) => (f64::INFINITY, true),
                };
                if !multinomials.iter().any(|&(nn, _, _)| nn == n) {
                    for i in n..n + 8 {
                        multinomials.push((n, i, ln_multinomial_max(n, i).unwrap_or(f64::NEG_INFINITY).exp().round()));
                    }
                }
                TermComplexity {
                    additive_branch: a,
                    additive_radius: wide,
                    additive_weighted: aw,
                    nvars_branch: Some(b),
                    nvars_weighted: Some(bw),
                    contribution,
                    divergent,
                }
            }
        };
        terms.push(tc);
    }
    let divergent = terms.iter().any(|t| t.divergent);
    let aggregate = if divergent { f64::INFINITY } else { terms.iter().map(|t| t.contribution).sum() };
    let truncation = terms
        .iter()
        .flat_map(|t| std::iter::once(t.additive_branch.terms_used).chain(t.nvars_branch.map(|b| b.terms_used)))
        .max()
        .unwrap_or(0);
    Ok(ComplexityReport {
        kind: f.kind,
        len,
        c0,
        c1,
        scale,
        radius,
        terms,
        aggregate,
        truncation,
        divergent,
        multinomials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::target::{SeriesSpec, TargetTerm};

    #[test]
    fn identity_and_arctan_values() {
        let c = complexity_additive(&PowerSeries::identity(), 1.0);
        assert_eq!(c.value, 2.0);
        assert!(!c.divergent);
        let a = complexity_additive(&PowerSeries::arctan_half(), 1.0);
        assert!((a.value - 5.0 / 3.0).abs() < 1e-9);
        assert!(!a.divergent);
        assert!(complexity_additive(&PowerSeries::arctan_half(), 2.0).divergent);
    }

    #[test]
    fn multinomial_by_enumeration() {
        // all positive compositions of 5 into 2 parts: max of 5!/(a!b!) is 10
        let best = (1..5).map(|a| 120 / (fact(a) * fact(5 - a))).max().unwrap();
        assert_eq!(best, 10);
        assert!((ln_multinomial_max(2, 5).unwrap().exp() - 10.0).abs() < 1e-9);
        assert!(ln_multinomial_max(3, 2).is_none());
        assert_eq!(ln_multinomial_max(1, 7).unwrap(), 0.0);
    }

    fn fact(k: u64) -> u64 {
        (1..=k).product()
    }

    #[test]
    fn nvars_single_variable_collapses() {
        let psi = PowerSeries::arctan_half();
        let (len, c1) = (3, 101.0);
        let got = complexity_nvars(&psi, 1.0, 1, len, c1).unwrap();
        let plain = complexity_additive(&psi, 1.0);
        let want = 1.0 + (len as f64).powf(1.5) * c1 * (plain.value - 1.0);
        assert!((got.value - want).abs() < 1e-9 * want);
    }

    #[test]
    fn nvars_exp_is_stable_in_truncation() {
        let psi = PowerSeries::exp();
        let a = complexity_nvars_truncated(&psi, 1.0, 2, 1, 101.0, 100).unwrap();
        let b = complexity_nvars_truncated(&psi, 1.0, 2, 1, 101.0, 200).unwrap();
        assert!(!a.divergent && !b.divergent);
        assert!((a.value - b.value).abs() < 1e-9);
        assert!(complexity_nvars(&psi, 1.0, 2, 1, 100.0).is_err());
    }

    #[test]
    fn additive_aggregate_example() {
        let f = TargetFunction::additive(vec![TargetTerm::new(vec![1], vec![1.0], SeriesSpec::Identity)]);
        let r = complexity_aggregate(&f, 4, 1.0).unwrap();
        assert!((r.aggregate - 384.0).abs() < 1e-9);
        assert_eq!(r.c1, DEFAULT_C1);
    }

    #[test]
    fn nvars_min_picks_convergent_branch() {
        let beta = vec![0.5, 0.0, 0.5, 0.0];
        // exp over the full span: the 2^{l_0} radius is out of reach
        let f = TargetFunction::nvars(vec![TargetTerm::new(vec![1, 16], beta, SeriesSpec::Exp)]);
        let r = complexity_aggregate(&f, 16, 1.0).unwrap();
        let t = &r.terms[0];
        assert!(t.additive_branch.divergent);
        assert!(!t.nvars_branch.unwrap().divergent);
        assert_eq!(t.contribution, t.nvars_weighted.unwrap());
        assert!(!r.divergent && r.aggregate.is_finite());
    }

    #[test]
    fn zero_span_keeps_radius() {
        let f = TargetFunction::nvars(vec![TargetTerm::new(vec![2], vec![1.0], SeriesSpec::Identity)]);
        let r = complexity_aggregate(&f, 4, 1.0).unwrap();
        assert_eq!(r.terms[0].additive_radius, r.radius);
    }
}
