//! Additive and N-variables target functions.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numerics::{series_eval, PowerSeries};
use crate::rnn::{inner, InputSequence};

/// Named or explicit link function `ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeriesSpec {
    Identity,
    Monomial { power: usize },
    ArctanHalf,
    Exp,
    Polynomial { coefficients: Vec<f64> },
}

impl SeriesSpec {
    pub fn build(&self) -> Result<PowerSeries> {
        Ok(match self {
            SeriesSpec::Identity => PowerSeries::identity(),
            SeriesSpec::Monomial { power } => PowerSeries::monomial(*power),
            SeriesSpec::ArctanHalf => PowerSeries::arctan_half(),
            SeriesSpec::Exp => PowerSeries::exp(),
            SeriesSpec::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(LabError::Config("polynomial needs finite coefficients".into()));
                }
                PowerSeries::polynomial(coefficients.clone())
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Additive,
    Nvars,
}

/// One summand: `ψ(⟨β, ·⟩)` read at the given (1-based) positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetTerm {
    pub positions: Vec<usize>,
    pub beta: Vec<f64>,
    pub psi: SeriesSpec,
    #[serde(skip)]
    series: OnceLock<PowerSeries>,
}

impl PartialEq for TargetTerm {
    fn eq(&self, other: &Self) -> bool {
        self.positions == other.positions && self.beta == other.beta && self.psi == other.psi
    }
}

impl TargetTerm {
    pub fn new(positions: Vec<usize>, beta: Vec<f64>, psi: SeriesSpec) -> Self {
        TargetTerm { positions, beta, psi, series: OnceLock::new() }
    }

    pub fn series(&self) -> Result<&PowerSeries> {
        if let Some(s) = self.series.get() {
            return Ok(s);
        }
        let built = self.psi.build()?;
        Ok(self.series.get_or_init(|| built))
    }

    /// `l_0 = max − min` of the positions.
    pub fn span(&self) -> usize {
        let max = self.positions.iter().max().copied().unwrap_or(0);
        let min = self.positions.iter().min().copied().unwrap_or(0);
        max - min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFunction {
    pub kind: TargetKind,
    pub terms: Vec<TargetTerm>,
}

impl TargetFunction {
    pub fn additive(terms: Vec<TargetTerm>) -> Self {
        TargetFunction { kind: TargetKind::Additive, terms }
    }

    pub fn nvars(terms: Vec<TargetTerm>) -> Self {
        TargetFunction { kind: TargetKind::Nvars, terms }
    }

    /// Checks positions, dimensions and `‖β‖ ≤ 1` against an input shape.
    pub fn validate(&self, d: usize, len: usize) -> Result<()> {
        if self.terms.is_empty() {
            return Err(LabError::Config("target has no terms".into()));
        }
        for (t, term) in self.terms.iter().enumerate() {
            let n = term.positions.len();
            match self.kind {
                TargetKind::Additive if n != 1 => {
                    return Err(LabError::Config(format!("additive term {t} needs exactly one position")));
                }
                TargetKind::Nvars if n == 0 => {
                    return Err(LabError::Config(format!("term {t} has no positions")));
                }
                _ => {}
            }
            if term.positions.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LabError::Config(format!("term {t}: positions must be strictly increasing")));
            }
            if term.positions.iter().any(|&l| l == 0 || l > len) {
                return Err(LabError::Dimension(format!("term {t}: positions must lie in [1, {len}]")));
            }
            if term.beta.len() != d * n {
                return Err(LabError::Dimension(format!(
                    "term {t}: beta has length {}, expected {}",
                    term.beta.len(),
                    d * n
                )));
            }
            let norm = inner(&term.beta, &term.beta).sqrt();
            if !(norm <= 1.0 + 1e-12) {
                return Err(LabError::Config(format!("term {t}: ‖β‖ = {norm} exceeds 1")));
            }
            term.series()?;
        }
        Ok(())
    }

    /// Largest position used by any term.
    pub fn max_position(&self) -> usize {
        self.terms.iter().flat_map(|t| t.positions.iter().copied()).max().unwrap_or(0)
    }
}

fn projection(kind: TargetKind, term: &TargetTerm, x: &InputSequence) -> Result<f64> {
    let d = x.dim();
    let mut dot = 0.0;
    let mut max_norm = 0.0f64;
    for (n, &l) in term.positions.iter().enumerate() {
        if l == 0 || l > x.len() {
            return Err(LabError::Dimension(format!("position {l} outside [1, {}]", x.len())));
        }
        let step = x.step(l);
        dot += inner(&term.beta[n * d..(n + 1) * d], step);
        max_norm = max_norm.max(inner(step, step).sqrt());
    }
    if !(max_norm > 0.0) {
        return Err(LabError::Domain { what: "projection with zero-norm step", value: max_norm });
    }
    Ok(match kind {
        TargetKind::Additive => dot / max_norm,
        TargetKind::Nvars => dot / ((term.positions.len() as f64).sqrt() * max_norm),
    })
}

pub fn eval_target(f: &TargetFunction, x: &InputSequence) -> Result<f64> {
    let mut total = 0.0;
    for term in &f.terms {
        if term.beta.len() != x.dim() * term.positions.len() {
            return Err(LabError::Dimension(format!(
                "beta has length {}, input dimension is {}",
                term.beta.len(),
                x.dim()
            )));
        }
        let z = projection(f.kind, term, x)?;
        let series = term.series()?;
        if z.abs() > series.radius() {
            return Err(LabError::Domain { what: "projection outside the series radius", value: z });
        }
        total += series_eval(series, z);
    }
    Ok(total)
}
