//! Symmetric kernel matrices and the PSD utilities used on them.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Default jitter relative to `trace/n`.
pub const JITTER_REL: f64 = 1e-10;
/// Largest jitter tried before giving up, relative to `trace/n`.
pub const JITTER_MAX_REL: f64 = 1e-4;
/// Slack for every PSD dominance check, relative to `trace/n`.
pub const PSD_TOL_REL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Empirical,
    Analytic,
    /// Any symmetric matrix; the positive-diagonal invariant is not enforced.
    Generic,
}

impl KernelKind {
    pub(crate) fn code(self) -> u32 {
        match self {
            KernelKind::Empirical => 0,
            KernelKind::Analytic => 1,
            KernelKind::Generic => 2,
        }
    }

    pub(crate) fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(KernelKind::Empirical),
            1 => Some(KernelKind::Analytic),
            2 => Some(KernelKind::Generic),
            _ => None,
        }
    }
}

/// Dense `n×n` symmetric matrix stored row-major.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    entries: Vec<f64>,
    kind: KernelKind,
    min_eig: OnceLock<f64>,
}

impl PartialEq for KernelMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.kind == other.kind && self.entries == other.entries
    }
}

impl KernelMatrix {
    /// Fills the upper triangle from `f(i, j)` (`i ≤ j`) and mirrors it, so the
    /// result is symmetric bit for bit.
    pub fn from_upper(n: usize, kind: KernelKind, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::from_row_major(n, entries, kind)
    }

    pub fn from_row_major(n: usize, entries: Vec<f64>, kind: KernelKind) -> Result<Self> {
        if entries.len() != n * n {
            return Err(LabError::dim(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(LabError::Precondition(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Precondition("non-finite kernel entry".into()));
        }
        if kind != KernelKind::Generic && (0..n).any(|i| entries[i * n + i] <= 0.0) {
            return Err(LabError::Precondition("kernel diagonal must be positive".into()));
        }
        Ok(KernelMatrix { n, entries, kind, min_eig: OnceLock::new() })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_upper(n, KernelKind::Generic, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap()
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_upper(n, KernelKind::Generic, |i, j| if i == j { d[i] } else { 0.0 }).unwrap()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `trace/n`, the scale every relative tolerance refers to.
    pub fn mean_diagonal(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.trace() / self.n as f64
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        let entries = self.entries.iter().map(|v| v * t).collect();
        KernelMatrix { n: self.n, entries, kind: self.kind, min_eig: OnceLock::new() }
    }

    /// `self − t·other`, tagged generic.
    pub fn minus_scaled(&self, t: f64, other: &KernelMatrix) -> Result<Self> {
        if other.n != self.n {
            return Err(LabError::dim(format!("{}x{} vs {}x{}", self.n, self.n, other.n, other.n)));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - t * b).collect();
        Ok(KernelMatrix { n: self.n, entries, kind: KernelKind::Generic, min_eig: OnceLock::new() })
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &KernelMatrix) -> Result<Self> {
        if other.n != self.n {
            return Err(LabError::dim("hadamard of mismatched sizes"));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).collect();
        Ok(KernelMatrix { n: self.n, entries, kind: KernelKind::Generic, min_eig: OnceLock::new() })
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let entries = self.entries.iter().map(|v| f(*v)).collect();
        KernelMatrix { n: self.n, entries, kind: KernelKind::Generic, min_eig: OnceLock::new() }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    /// Smallest eigenvalue, computed once and cached.
    pub fn min_eig_estimate(&self) -> f64 {
        *self.min_eig.get_or_init(|| min_eigenvalue(self))
    }
}

/// Smallest eigenvalue of a symmetric matrix (symmetric QR iteration).
pub fn min_eigenvalue(m: &KernelMatrix) -> f64 {
    if m.n == 0 {
        return f64::INFINITY;
    }
    let eig = SymmetricEigen::new(m.to_dmatrix());
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `min_eigenvalue(m) ≥ −PSD_TOL_REL·trace/n`.
pub fn is_psd(m: &KernelMatrix) -> bool {
    min_eigenvalue(m) >= -PSD_TOL_REL * m.mean_diagonal().abs()
}

/// A solved quadratic form together with the jitter that made it solvable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub value: f64,
    pub jitter: f64,
}

/// `√(yᵀ(M + jitter·I)⁻¹y)` through a Cholesky factorization.
pub fn psd_quadratic_solve(m: &KernelMatrix, y: &[f64], jitter: f64) -> Result<f64> {
    psd_quadratic_form(m, y, jitter).map(|q| q.value)
}

/// As [`psd_quadratic_solve`], reporting the jitter actually used. When the
/// factorization fails the jitter grows by decades, starting no lower than
/// `JITTER_REL·trace/n`, until `JITTER_MAX_REL·trace/n`.
pub fn psd_quadratic_form(m: &KernelMatrix, y: &[f64], jitter: f64) -> Result<QuadraticForm> {
    if y.len() != m.n {
        return Err(LabError::dim(format!("vector of length {} for {}x{} matrix", y.len(), m.n, m.n)));
    }
    if !(jitter >= 0.0) {
        return Err(LabError::Argument(format!("jitter {jitter} must be nonnegative")));
    }
    let scale = m.mean_diagonal().abs().max(f64::MIN_POSITIVE);
    let jitter_max = JITTER_MAX_REL * scale;
    let base = m.to_dmatrix();
    let rhs = DVector::from_column_slice(y);
    let mut j = jitter;
    loop {
        let mut a = base.clone();
        for i in 0..m.n {
            a[(i, i)] += j;
        }
        if let Some(ch) = Cholesky::new(a) {
            let x = ch.solve(&rhs);
            let q = rhs.dot(&x);
            if q.is_finite() && q >= 0.0 {
                return Ok(QuadraticForm { value: q.sqrt(), jitter: j });
            }
        }
        if j >= jitter_max {
            return Err(LabError::Singular { jitter: j });
        }
        j = (j * 10.0).max(JITTER_REL * scale).min(jitter_max);
    }
}
