//! One-pass SGD on `W` with the logistic loss, and 0-1 evaluation.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concept::LabeledDataset;
use crate::error::{LabError, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::rnn::{gradient, output_batch, InputSequence, RnnParams};

const TAG_SAMPLING: u64 = 21;

/// `ℓ(x) = log(1 + e^{−x})`.
pub fn cross_entropy(margin: f64) -> f64 {
    if margin > 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

/// `ℓ'(x) = −1/(1 + eˣ)`.
pub fn cross_entropy_derivative(margin: f64) -> f64 {
    if margin > 0.0 {
        let e = (-margin).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + margin.exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub eta: f64,
    pub steps: usize,
    pub eval_every: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// `η = 1/m`, `n` steps, twenty checkpoints.
    pub fn new(width: usize, n: usize, seed: u64) -> Self {
        TrainConfig { eta: 1.0 / width as f64, steps: n, eval_every: (n / 20).max(1), holdout_fraction: 0.2, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(LabError::Config(format!("eta must be a finite nonnegative number, got {}", self.eta)));
        }
        if self.steps == 0 || self.eval_every == 0 {
            return Err(LabError::Config("steps and eval_every must be positive".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(LabError::Config(format!("holdout_fraction must lie in (0, 1), got {}", self.holdout_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    /// Mean loss over the steps since the previous checkpoint; at step 0
    /// the mean loss of the initial network on the training set.
    pub train_loss: f64,
    pub holdout_01: f64,
    pub frob_drift: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub checkpoints: Vec<Checkpoint>,
}

impl TrainTrace {
    /// Holdout 0-1 error averaged over all checkpoints.
    pub fn averaged_holdout(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.holdout_01).sum::<f64>() / self.checkpoints.len().max(1) as f64
    }

    pub fn final_holdout(&self) -> f64 {
        self.checkpoints.last().map_or(f64::NAN, |c| c.holdout_01)
    }

    pub fn final_drift(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.frob_drift)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# schema=v1")?;
        writeln!(w, "step,train_loss,holdout_01,frob_drift")?;
        for c in &self.checkpoints {
            writeln!(w, "{},{:e},{:e},{:e}", c.step, c.train_loss, c.holdout_01, c.frob_drift)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trace: TrainTrace,
    pub params: RnnParams,
}

/// Fraction of samples with `y·f ≤ 0`.
pub fn zero_one_error(p: &RnnParams, data: &LabeledDataset) -> Result<f64> {
    zero_one_error_on(p, &data.sequences, &data.labels)
}

pub fn zero_one_error_on(p: &RnnParams, xs: &[InputSequence], labels: &[i8]) -> Result<f64> {
    if xs.len() != labels.len() {
        return Err(LabError::dim("sequences and labels differ in count"));
    }
    if xs.is_empty() {
        return Ok(0.0);
    }
    let f = output_batch(p, xs)?;
    let wrong = f.iter().zip(labels).filter(|(f, &y)| y as f64 * **f <= 0.0).count();
    Ok(wrong as f64 / xs.len() as f64)
}

fn mean_loss(p: &RnnParams, xs: &[InputSequence], labels: &[i8]) -> Result<f64> {
    let f = output_batch(p, xs)?;
    Ok(f.iter().zip(labels).map(|(f, &y)| cross_entropy(y as f64 * f)).sum::<f64>() / xs.len().max(1) as f64)
}

fn drift(w: &[f64], w0: &[f64]) -> f64 {
    // chunk sums are collected in order so the total never depends on scheduling
    let parts: Vec<f64> =
        w.par_chunks(4096).zip(w0.par_chunks(4096)).map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()).collect();
    parts.iter().sum::<f64>().sqrt()
}

/// Splits off the trailing `holdout_fraction` of the samples.
pub fn split_holdout(data: &LabeledDataset, fraction: f64) -> (LabeledDataset, LabeledDataset) {
    let n_hold = ((data.len() as f64) * fraction).round().clamp(1.0, (data.len().max(2) - 1) as f64) as usize;
    let cut = data.len() - n_hold;
    let part = |r: std::ops::Range<usize>| LabeledDataset {
        sequences: data.sequences[r.clone()].to_vec(),
        labels: data.labels[r.clone()].to_vec(),
        values: data.values[r].to_vec(),
        ..data.clone()
    };
    (part(0..cut), part(cut..data.len()))
}

/// Trains on the leading part of `data` and evaluates on the held-out tail.
pub fn sgd_train(p0: &RnnParams, data: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(LabError::Argument("need at least two samples to hold one out".into()));
    }
    let (train, holdout) = split_holdout(data, cfg.holdout_fraction);
    sgd_train_with_holdout(p0, &train, &holdout, cfg)
}

/// `W ← W − η ℓ'(y f) y ∇_W f` on samples drawn with replacement.
pub fn sgd_train_with_holdout(p0: &RnnParams, train: &LabeledDataset, holdout: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(LabError::Argument("empty training set".into()));
    }
    let mut p = p0.clone();
    let m = p.m;
    let mut rng = stream_rng(derive_seed(cfg.seed, TAG_SAMPLING), 0);
    let checkpoint = |p: &RnnParams, step: usize, train_loss: f64| -> Result<Checkpoint> {
        Ok(Checkpoint { step, train_loss, holdout_01: zero_one_error(p, holdout)?, frob_drift: drift(&p.w, &p0.w) })
    };
    let mut trace = TrainTrace { checkpoints: vec![checkpoint(&p, 0, mean_loss(&p, &train.sequences, &train.labels)?)?] };
    let mut window_loss = 0.0;
    let mut window_len = 0usize;
    for t in 1..=cfg.steps {
        let k = rng.random_range(0..train.len());
        let (x, y) = (&train.sequences[k], train.labels[k] as f64);
        let g = gradient(&p, x)?;
        let margin = y * g.states.f;
        let loss = cross_entropy(margin);
        if !loss.is_finite() || !margin.is_finite() {
            return Err(LabError::Divergence { step: t, loss });
        }
        window_loss += loss;
        window_len += 1;
        let coef = -cfg.eta * cross_entropy_derivative(margin) * y;
        if coef != 0.0 {
            // all L rank-one terms in one pass over W
            let len = g.seq_len();
            let finite = p.w.par_chunks_mut(m).enumerate().all(|(i, row)| {
                let mut touched = false;
                for l in 1..=len {
                    let a = coef * g.gated[l - 1][i];
                    if a != 0.0 {
                        touched = true;
                        for (wij, hj) in row.iter_mut().zip(&g.states.h[l - 1]) {
                            *wij += a * hj;
                        }
                    }
                }
                !touched || row.iter().all(|v| v.is_finite())
            });
            // ReLU gates would silently zero out an overflowed W
            if !finite {
                return Err(LabError::Divergence { step: t, loss: f64::INFINITY });
            }
        }
        if t % cfg.eval_every == 0 || t == cfg.steps {
            trace.checkpoints.push(checkpoint(&p, t, window_loss / window_len as f64)?);
            window_loss = 0.0;
            window_len = 0;
        }
    }
    Ok(TrainOutcome { trace, params: p })
}
