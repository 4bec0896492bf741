//! Experiment configuration: strict JSON, per-experiment defaults, flag
//! overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::concept::{SeriesSpec, TargetFunction, TargetTerm};
use crate::error::{LabError, Result};
use crate::rng::fill_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ForwardConvergence,
    BackwardDecay,
    Degeneracy,
    KernelAgreement,
    LearningCurve,
    BoundCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ForwardConvergence => "forward-convergence",
            ExperimentKind::BackwardDecay => "backward-decay",
            ExperimentKind::Degeneracy => "degeneracy",
            ExperimentKind::KernelAgreement => "kernel-agreement",
            ExperimentKind::LearningCurve => "learning-curve",
            ExperimentKind::BoundCheck => "bound-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pass/fail thresholds; unset fields take the experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub max_forward_error: Option<f64>,
    pub max_forward_slope: Option<f64>,
    pub max_offdiag_ratio: Option<f64>,
    pub max_diag_spread: Option<f64>,
    pub max_agreement_error: Option<f64>,
    pub max_gap_ratio: Option<f64>,
    pub envelope_from: Option<usize>,
    pub min_floor_slope: Option<f64>,
    pub max_final_error: Option<f64>,
    pub max_bound_ratio: Option<f64>,
}

/// Thresholds after defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedThresholds {
    pub max_forward_error: f64,
    pub max_forward_slope: f64,
    pub max_offdiag_ratio: f64,
    pub max_diag_spread: f64,
    pub max_agreement_error: f64,
    pub max_gap_ratio: f64,
    pub envelope_from: usize,
    pub min_floor_slope: f64,
    pub max_final_error: f64,
    pub max_bound_ratio: f64,
}

impl Thresholds {
    fn resolve(&self) -> ResolvedThresholds {
        ResolvedThresholds {
            max_forward_error: self.max_forward_error.unwrap_or(0.1),
            max_forward_slope: self.max_forward_slope.unwrap_or(-0.3),
            max_offdiag_ratio: self.max_offdiag_ratio.unwrap_or(0.2),
            max_diag_spread: self.max_diag_spread.unwrap_or(0.25),
            max_agreement_error: self.max_agreement_error.unwrap_or(0.15),
            max_gap_ratio: self.max_gap_ratio.unwrap_or(1.5),
            envelope_from: self.envelope_from.unwrap_or(100),
            min_floor_slope: self.min_floor_slope.unwrap_or(-4.0),
            max_final_error: self.max_final_error.unwrap_or(0.15),
            max_bound_ratio: self.max_bound_ratio.unwrap_or(1.0),
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Option<Vec<usize>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(Option::<OneOrMany>::deserialize(de)?.map(|v| match v {
        OneOrMany::One(n) => vec![n],
        OneOrMany::Many(v) => v,
    }))
}

/// The file as written; every field except `experiment` is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentKind>,
    pub m: Option<Vec<usize>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub n: Option<Vec<usize>>,
    #[serde(rename = "L")]
    pub len: Option<usize>,
    pub d: Option<usize>,
    #[serde(rename = "C_min")]
    pub c_min: Option<f64>,
    #[serde(rename = "C_max")]
    pub c_max: Option<f64>,
    pub target: Option<TargetFunction>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(rename = "L_max")]
    pub l_max: Option<usize>,
    pub b: Option<f64>,
    #[serde(rename = "K_init")]
    pub k_init: Option<f64>,
    #[serde(rename = "L_list")]
    pub l_list: Option<Vec<usize>>,
    pub eta: Option<f64>,
    pub steps: Option<usize>,
    pub eval_every: Option<usize>,
    pub holdout: Option<usize>,
    pub pairs: Option<usize>,
    pub max_degree: Option<usize>,
    pub chain_n: Option<usize>,
    pub thresholds: Option<Thresholds>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    #[serde(rename = "L")]
    pub len: usize,
    pub d: usize,
    #[serde(rename = "C_min")]
    pub c_min: f64,
    #[serde(rename = "C_max")]
    pub c_max: f64,
    pub target: TargetFunction,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub jobs: usize,
    #[serde(rename = "L_max")]
    pub l_max: usize,
    pub b: f64,
    #[serde(rename = "K_init")]
    pub k_init: f64,
    #[serde(rename = "L_list")]
    pub l_list: Vec<usize>,
    /// `None` means `1/m`.
    pub eta: Option<f64>,
    /// `None` means one step per training sample.
    pub steps: Option<usize>,
    pub eval_every: usize,
    pub holdout: usize,
    pub pairs: usize,
    pub max_degree: usize,
    pub chain_n: usize,
    pub thresholds: ResolvedThresholds,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

/// Learning rate of the standard learning-curve task.
pub const STANDARD_ETA: f64 = 0.1;
/// Per-step input norm of the standard learning-curve task.
pub const STANDARD_NORM: f64 = 6.0;
const BETA_SEED: u64 = 0x0B57_A11C;

/// A fixed unit direction in `ℝ^d`.
pub fn standard_direction(d: usize) -> Vec<f64> {
    let mut beta = vec![0.0; d];
    fill_normal(&mut beta, BETA_SEED, d as u64, 1.0);
    let norm = beta.iter().map(|v| v * v).sum::<f64>().sqrt();
    beta.iter_mut().for_each(|v| *v /= norm);
    beta
}

/// `arctan(βᵀX_2/(2‖X_2‖))`, or at step 1 when `L = 1`.
pub fn standard_additive_target(d: usize, len: usize) -> TargetFunction {
    TargetFunction::additive(vec![TargetTerm::new(vec![len.min(2)], standard_direction(d), SeriesSpec::ArctanHalf)])
}

/// `βᵀX_l/‖X_l‖` at the last step.
pub fn linear_additive_target(d: usize, len: usize) -> TargetFunction {
    TargetFunction::additive(vec![TargetTerm::new(vec![len], standard_direction(d), SeriesSpec::Identity)])
}

/// Documented defaults, shown by `--help`.
pub const DEFAULTS_HELP: &str = "\
Config defaults (JSON keys; unknown keys are rejected):
  forward-convergence, backward-decay:
      m=[512,2048,8192] L=6 d=8 seeds=[0..19] C_min=C_max=1 pairs=4
  kernel-agreement:  m=[2048,8192] n=6 L=6 d=8 seeds=[0]
  degeneracy:        L_max=10000 b=4 K_init=0.5 L_list=[100,1000,10000]
  learning-curve:    m=[2048] n=[200,2000] L=5 d=10 seeds=[0..4] C_min=C_max=6
                     eta=0.1 steps=n eval_every=100 holdout=500
                     target: arctan(z/2) of step 2
  bound-check:       n=[32] L=5 d=10 seeds=[0..4] max_degree=3 chain_n=8
                     target: linear in the last step
  all:               seed=0 jobs=1 out=runs/<experiment>
  thresholds:        max_forward_error=0.1 max_forward_slope=-0.3
                     max_offdiag_ratio=0.2 max_diag_spread=0.25
                     max_agreement_error=0.15 max_gap_ratio=1.5 envelope_from=100
                     min_floor_slope=-4 max_final_error=0.15 max_bound_ratio=1";

impl ConfigFile {
    pub fn resolve(self, overrides: &Overrides) -> Result<ExperimentConfig> {
        use ExperimentKind::*;
        let kind = self.experiment.ok_or_else(|| LabError::Config("missing key `experiment`".into()))?;
        let range = |k: u64| (0..k).collect::<Vec<u64>>();
        let (m, n, len, d, seeds) = match kind {
            ForwardConvergence | BackwardDecay => (vec![512, 2048, 8192], vec![2], 6, 8, range(20)),
            KernelAgreement => (vec![2048, 8192], vec![6], 6, 8, range(1)),
            Degeneracy => (vec![1], vec![1], 1, 1, range(1)),
            LearningCurve => (vec![2048], vec![200, 2000], 5, 10, range(5)),
            BoundCheck => (vec![1], vec![32], 5, 10, range(5)),
        };
        let len = self.len.unwrap_or(len);
        let d = self.d.unwrap_or(d);
        let norm = if kind == LearningCurve { STANDARD_NORM } else { 1.0 };
        let target = match (self.target, kind) {
            (Some(t), _) => t,
            (None, BoundCheck) => linear_additive_target(d, len),
            (None, _) => standard_additive_target(d, len),
        };
        let cfg = ExperimentConfig {
            experiment: kind,
            m: self.m.unwrap_or(m),
            n: self.n.unwrap_or(n),
            len,
            d,
            c_min: self.c_min.unwrap_or(norm),
            c_max: self.c_max.unwrap_or(norm),
            target,
            seed: overrides.seed.or(self.seed).unwrap_or(0),
            seeds: self.seeds.unwrap_or(seeds),
            out: overrides.out.clone().or(self.out).unwrap_or_else(|| super::default_out(kind)),
            jobs: overrides.jobs.or(self.jobs).unwrap_or(1),
            l_max: self.l_max.unwrap_or(10_000),
            b: self.b.unwrap_or(4.0),
            k_init: self.k_init.unwrap_or(0.5),
            l_list: self.l_list.unwrap_or_else(|| vec![100, 1000, 10_000]),
            eta: self.eta.or(if kind == LearningCurve { Some(STANDARD_ETA) } else { None }),
            steps: self.steps,
            eval_every: self.eval_every.unwrap_or(100),
            holdout: self.holdout.unwrap_or(500),
            pairs: self.pairs.unwrap_or(4),
            max_degree: self.max_degree.unwrap_or(3),
            chain_n: self.chain_n.unwrap_or(8),
            thresholds: self.thresholds.unwrap_or_default().resolve(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let nonempty = |name: &str, empty: bool| {
            if empty {
                Err(LabError::Config(format!("key `{name}` must be a nonempty list")))
            } else {
                Ok(())
            }
        };
        nonempty("m", self.m.is_empty())?;
        nonempty("n", self.n.is_empty())?;
        nonempty("seeds", self.seeds.is_empty())?;
        nonempty("L_list", self.l_list.is_empty())?;
        let positive = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(LabError::Config(format!("key `{name}` must be positive")))
            }
        };
        positive("m", self.m.iter().all(|&m| m > 0))?;
        positive("n", self.n.iter().all(|&n| n > 0))?;
        positive("L", self.len > 0)?;
        positive("d", self.d > 0)?;
        positive("jobs", self.jobs > 0)?;
        positive("eval_every", self.eval_every > 0)?;
        positive("holdout", self.holdout > 0)?;
        positive("pairs", self.pairs > 0)?;
        positive("max_degree", self.max_degree > 0)?;
        positive("chain_n", self.chain_n > 0)?;
        positive("L_list", self.l_list.iter().all(|&l| l > 0))?;
        if self.l_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::Config("key `L_list` must be increasing".into()));
        }
        if self.experiment == ExperimentKind::Degeneracy && self.l_max < 2 {
            return Err(LabError::Config("key `L_max` must be at least 2".into()));
        }
        if !(self.c_min > 0.0 && self.c_min <= self.c_max) {
            return Err(LabError::Config("keys `C_min`, `C_max` need 0 < C_min ≤ C_max".into()));
        }
        if !(self.k_init > 0.0 && self.k_init <= 1.0) {
            return Err(LabError::Config("key `K_init` must lie in (0, 1]".into()));
        }
        if !(self.b > 0.0) {
            return Err(LabError::Config("key `b` must be positive".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(LabError::Config("key `eta` must be finite and nonnegative".into()));
            }
        }
        if self.steps == Some(0) {
            return Err(LabError::Config("key `steps` must be positive".into()));
        }
        if matches!(self.experiment, ExperimentKind::LearningCurve | ExperimentKind::BoundCheck) {
            self.target.validate(self.d, self.len).map_err(|e| LabError::Config(format!("key `target`: {e}")))?;
        }
        Ok(())
    }
}

pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
    file.resolve(overrides)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config_with(path, &Overrides::default())
}

pub fn parse_config_with(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text, overrides).map_err(|e| match e {
        LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = parse_config_str(r#"{"experiment": "forward-convergence"}"#, &Overrides::default()).unwrap();
        assert_eq!(cfg.m, vec![512, 2048, 8192]);
        assert_eq!(cfg.len, 6);
        assert_eq!(cfg.seeds.len(), 20);
        assert_eq!(cfg.thresholds.max_forward_error, 0.1);
        let lc = parse_config_str(r#"{"experiment": "learning-curve", "n": 300}"#, &Overrides::default()).unwrap();
        assert_eq!(lc.n, vec![300]);
        assert_eq!(lc.eta, Some(STANDARD_ETA));
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = parse_config_str(r#"{"experiment": "degeneracy", "Lmax": 10}"#, &Overrides::default()).unwrap_err();
        match err {
            LabError::Config(msg) => assert!(msg.contains("Lmax") && msg.contains("line"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values() {
        let o = Overrides::default();
        assert!(matches!(parse_config_str(r#"{"experiment": "kernel-agreement", "m": []}"#, &o), Err(LabError::Config(_))));
        assert!(matches!(parse_config_str(r#"{"experiment": "warp-drive"}"#, &o), Err(LabError::Config(_))));
        assert!(matches!(parse_config_str(r#"{"m": [4]}"#, &o), Err(LabError::Config(_))));
    }

    #[test]
    fn flags_override_file() {
        let o = Overrides { out: Some("elsewhere".into()), seed: Some(9), jobs: Some(3) };
        let cfg = parse_config_str(r#"{"experiment": "degeneracy", "seed": 1, "out": "here", "jobs": 2}"#, &o).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.jobs, 3);
        assert_eq!(cfg.out, PathBuf::from("elsewhere"));
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse_config_str(r#"{"experiment": "bound-check"}"#, &Overrides::default()).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
