//! Labeled datasets satisfying the margin condition, and their files.
//!
//! Files: a JSON manifest, a flat little-endian f64 array (sample-major,
//! then step-major) next to it with extension `f64`, and one signed byte
//! (±1) per label with extension `labels`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::rnn::InputSequence;

use super::target::{eval_target, TargetFunction};

const PILOT_SAMPLES: usize = 1000;
const REJECT_FRACTION: f64 = 0.05;
const REJECT_QUANTILE: f64 = 0.9;
const DRAW_BUDGET: usize = 100;
const TAG_PILOT: u64 = 11;
const TAG_DRAWS: u64 = 12;

/// Draws one input sequence from a stream.
pub trait SequenceSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng, d: usize, len: usize) -> InputSequence;
}

/// Directions uniform on the sphere, norms uniform in `[c_min, c_max]`.
#[derive(Debug, Clone, Copy)]
pub struct SphereSampler {
    pub c_min: f64,
    pub c_max: f64,
}

impl SequenceSampler for SphereSampler {
    fn sample(&self, rng: &mut ChaCha8Rng, d: usize, len: usize) -> InputSequence {
        let mut data = Vec::with_capacity(d * len);
        for _ in 0..len {
            let mut step: Vec<f64>;
            let mut norm;
            loop {
                step = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break;
                }
            }
            let r = if self.c_max > self.c_min { rng.random_range(self.c_min..=self.c_max) } else { self.c_min };
            data.extend(step.iter().map(|v| v / norm * r));
        }
        InputSequence::new(d, data).expect("sampler produces consistent shapes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub sequences: Vec<InputSequence>,
    pub labels: Vec<i8>,
    /// `F*(x_i)` before rescaling.
    pub values: Vec<f64>,
    pub margin_scale: f64,
    pub reject_floor: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub seed: u64,
    /// Candidates drawn to collect the accepted samples.
    pub draws: usize,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn c0(&self) -> f64 {
        self.c_max / self.c_min
    }

    /// `min_i margin_scale · y_i · F*(x_i)`; one by construction.
    pub fn min_margin(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.labels)
            .map(|(v, &y)| self.margin_scale * y as f64 * v)
            .fold(f64::INFINITY, f64::min)
    }

    /// Labels as reals.
    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&y| y as f64).collect()
    }
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let idx = ((v.len() - 1) as f64 * q).round() as usize;
    v[idx]
}

pub fn gen_dataset(f: &TargetFunction, n: usize, d: usize, len: usize, c_min: f64, c_max: f64, seed: u64) -> Result<LabeledDataset> {
    gen_dataset_with(f, n, d, len, &SphereSampler { c_min, c_max }, c_min, c_max, seed)
}

/// Rejection sampling around `|F*| ≥ reject_floor`; sample `k` uses its own
/// substream, so the result does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn gen_dataset_with(
    f: &TargetFunction,
    n: usize,
    d: usize,
    len: usize,
    sampler: &dyn SequenceSampler,
    c_min: f64,
    c_max: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(LabError::Argument("dataset size must be positive".into()));
    }
    if !(c_min > 0.0 && c_min <= c_max) {
        return Err(LabError::Argument(format!("need 0 < C_min ≤ C_max, got {c_min}, {c_max}")));
    }
    f.validate(d, len)?;
    let draw = |tag: u64, k: usize| -> Result<(InputSequence, f64)> {
        let mut rng = stream_rng(derive_seed(seed, tag), k as u64);
        let x = sampler.sample(&mut rng, d, len);
        let v = eval_target(f, &x)?;
        Ok((x, v))
    };
    let pilot: Vec<f64> = (0..PILOT_SAMPLES)
        .into_par_iter()
        .map(|k| draw(TAG_PILOT, k).map(|(_, v)| v.abs()))
        .collect::<Result<_>>()?;
    let reject_floor = REJECT_FRACTION * quantile(pilot, REJECT_QUANTILE);

    let budget = DRAW_BUDGET * n;
    let batch = n.clamp(64, 4096);
    let mut sequences = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut drawn = 0;
    while sequences.len() < n && drawn < budget {
        let end = (drawn + batch).min(budget);
        let candidates: Vec<(InputSequence, f64)> =
            (drawn..end).into_par_iter().map(|k| draw(TAG_DRAWS, k)).collect::<Result<_>>()?;
        for (x, v) in candidates {
            drawn += 1;
            if v.abs() >= reject_floor && v != 0.0 {
                sequences.push(x);
                values.push(v);
                if sequences.len() == n {
                    break;
                }
            }
        }
    }
    if sequences.len() < n {
        return Err(LabError::RejectionBudget { accepted: sequences.len(), drawn });
    }
    let labels = values.iter().map(|v| if *v > 0.0 { 1 } else { -1 }).collect();
    let min_abs = values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    Ok(LabeledDataset { sequences, labels, values, margin_scale: 1.0 / min_abs, reject_floor, c_min, c_max, seed, draws: drawn })
}

/// Contents of the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub len: usize,
    #[serde(rename = "C_min")]
    pub c_min: f64,
    #[serde(rename = "C_max")]
    pub c_max: f64,
    pub seed: u64,
    pub margin_scale: f64,
    pub reject_floor: f64,
    pub target: TargetFunction,
    pub data_file: String,
    pub labels_file: String,
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

pub fn save_dataset(manifest_path: &Path, ds: &LabeledDataset, target: &TargetFunction) -> Result<DatasetManifest> {
    let first = ds.sequences.first().ok_or_else(|| LabError::Argument("empty dataset".into()))?;
    let (d, len) = (first.dim(), first.len());
    let data_path = sibling(manifest_path, "f64");
    let labels_path = sibling(manifest_path, "labels");
    let file_name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = DatasetManifest {
        n: ds.len(),
        d,
        len,
        c_min: ds.c_min,
        c_max: ds.c_max,
        seed: ds.seed,
        margin_scale: ds.margin_scale,
        reject_floor: ds.reject_floor,
        target: target.clone(),
        data_file: file_name(&data_path),
        labels_file: file_name(&labels_path),
    };
    let mut bytes = Vec::with_capacity(ds.len() * d * len * 8);
    for x in &ds.sequences {
        for v in x.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(&data_path, bytes)?;
    fs::write(&labels_path, ds.labels.iter().map(|&y| y as u8).collect::<Vec<u8>>())?;
    fs::write(manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn load_dataset(manifest_path: &Path) -> Result<(LabeledDataset, TargetFunction)> {
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let data = fs::read(dir.join(&manifest.data_file))?;
    let labels = fs::read(dir.join(&manifest.labels_file))?;
    let per = manifest.d * manifest.len;
    if data.len() != manifest.n * per * 8 || labels.len() != manifest.n {
        return Err(LabError::Format("dataset files do not match the manifest sizes".into()));
    }
    let floats: Vec<f64> = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let sequences = floats
        .chunks_exact(per.max(1))
        .map(|c| InputSequence::new(manifest.d, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<i8> = labels.into_iter().map(|b| b as i8).collect();
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(LabError::Format("labels must be ±1".into()));
    }
    manifest.target.validate(manifest.d, manifest.len)?;
    let values = sequences.iter().map(|x| eval_target(&manifest.target, x)).collect::<Result<Vec<_>>>()?;
    let ds = LabeledDataset {
        sequences,
        labels,
        values,
        margin_scale: manifest.margin_scale,
        reject_floor: manifest.reject_floor,
        c_min: manifest.c_min,
        c_max: manifest.c_max,
        seed: manifest.seed,
        draws: 0,
    };
    Ok((ds, manifest.target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::target::{SeriesSpec, TargetTerm};

    fn target(d: usize) -> TargetFunction {
        let mut beta = vec![0.0; d];
        beta[0] = 1.0;
        TargetFunction::additive(vec![
            TargetTerm::new(vec![2], beta.clone(), SeriesSpec::ArctanHalf),
            TargetTerm::new(vec![3], beta, SeriesSpec::Identity),
        ])
    }

    #[test]
    fn deterministic_and_labelled_with_margin() {
        let f = target(4);
        let a = gen_dataset(&f, 50, 4, 3, 0.5, 2.0, 9).unwrap();
        let b = gen_dataset(&f, 50, 4, 3, 0.5, 2.0, 9).unwrap();
        assert_eq!(a, b);
        for (x, &y) in a.sequences.iter().zip(&a.labels) {
            assert!(y as f64 * eval_target(&f, x).unwrap() > 0.0);
            x.check_norms(0.5, 2.0).unwrap();
        }
        assert_eq!(a.min_margin(), 1.0);
        assert_eq!(a.c0(), 4.0);
        let c = gen_dataset(&f, 50, 4, 3, 0.5, 2.0, 10).unwrap();
        assert_ne!(a.sequences, c.sequences);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let f = target(3);
        let a = gen_dataset(&f, 70, 3, 3, 1.0, 1.0, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| gen_dataset(&f, 70, 3, 3, 1.0, 1.0, 5).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn budget_exhaustion_reported() {
        // every draw is orthogonal to β, so F* is identically zero
        struct Fixed;
        impl SequenceSampler for Fixed {
            fn sample(&self, _: &mut ChaCha8Rng, d: usize, len: usize) -> InputSequence {
                let mut v = vec![0.0; d * len];
                v[1] = 1.0;
                InputSequence::new(d, v).unwrap()
            }
        }
        let f = TargetFunction::additive(vec![TargetTerm::new(vec![1], vec![1.0, 0.0], SeriesSpec::Identity)]);
        let err = gen_dataset_with(&f, 3, 2, 1, &Fixed, 1.0, 1.0, 0).unwrap_err();
        assert!(matches!(err, LabError::RejectionBudget { accepted: 0, drawn: 300 }));
    }

    #[test]
    fn files_round_trip() {
        let f = target(2);
        let ds = gen_dataset(&f, 12, 2, 3, 1.0, 1.5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.json");
        let manifest = save_dataset(&path, &ds, &f).unwrap();
        assert_eq!(manifest.data_file, "train.f64");
        assert_eq!(fs::metadata(dir.path().join("train.f64")).unwrap().len(), 12 * 2 * 3 * 8);
        let (back, tf) = load_dataset(&path).unwrap();
        assert_eq!(tf, f);
        assert_eq!(back.sequences, ds.sequences);
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.margin_scale, ds.margin_scale);
    }
}
