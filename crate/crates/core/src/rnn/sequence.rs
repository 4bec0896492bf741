use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// `x = (X_1, …, X_L)` with every `X_l ∈ ℝ^d`, stored step-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSequence {
    d: usize,
    data: Vec<f64>,
}

impl InputSequence {
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 || data.is_empty() || data.len() % d != 0 {
            return Err(LabError::dim(format!("{} values do not form steps of width {d}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Argument("non-finite input value".into()));
        }
        Ok(InputSequence { d, data })
    }

    pub fn from_steps(steps: &[Vec<f64>]) -> Result<Self> {
        let d = steps.first().map_or(0, Vec::len);
        if steps.iter().any(|s| s.len() != d) {
            return Err(LabError::dim("steps of unequal width"));
        }
        Self::new(d, steps.concat())
    }

    pub fn zeros(d: usize, len: usize) -> Self {
        InputSequence { d, data: vec![0.0; d * len] }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Step `l` in `1..=L`.
    pub fn step(&self, l: usize) -> &[f64] {
        assert!(l >= 1 && l <= self.len(), "step {l} outside 1..={}", self.len());
        &self.data[(l - 1) * self.d..l * self.d]
    }

    pub fn steps(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn step_norms(&self) -> Vec<f64> {
        self.steps().map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }

    /// Checks `c_min ≤ ‖X_l‖ ≤ c_max` for every step, with a relative slack
    /// of a few ulps for values produced by normalization.
    pub fn check_norms(&self, c_min: f64, c_max: f64) -> Result<()> {
        for (l, n) in self.step_norms().into_iter().enumerate() {
            if n < c_min * (1.0 - 1e-12) || n > c_max * (1.0 + 1e-12) {
                return Err(LabError::Precondition(format!(
                    "‖X_{}‖ = {n} outside [{c_min}, {c_max}]",
                    l + 1
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
