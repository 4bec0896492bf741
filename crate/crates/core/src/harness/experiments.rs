//! The six experiments. Each one turns a config into metric rows; checks
//! are recomputed from the rows alone, so a saved run can be re-judged.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{standard_direction, ExperimentConfig, ExperimentKind};
use super::metrics::{medians, Aggregate, Check, MetricRow, Relation};
use crate::bounds::{bound_quadratic, max_admissible_scale, proposition_e_oracle, xi_floor_table, FROZEN_C_A, FROZEN_C_B};
use crate::concept::{gen_dataset, SequenceSampler, SphereSampler, TargetFunction, TargetKind};
use crate::error::{LabError, Result};
use crate::ntk::{
    analytic_backward, analytic_forward, analytic_ntk_report, backward_floor_scan, calibrate_scale, degeneracy_trace,
    empirical_decomposition, empirical_ntk, ls_slope, relative_agreement_error,
};
use crate::rng::{derive_seed, stream_rng};
use crate::rnn::dense::dot;
use crate::rnn::{forward, init_params, InputSequence};
use crate::trainer::{sgd_train_with_holdout, TrainConfig, TrainTrace};

const TAG_DATA: u64 = 0xDA7A_0001;
const TAG_HOLDOUT: u64 = 0xDA7A_0002;
const TAG_CHAIN: u64 = 0xDA7A_0003;
const TAG_INIT: u64 = 0x1417_0000;
const TAG_SGD: u64 = 0x5CD0_0000;

/// Seed shared by every run for inputs that must not vary with the run.
pub fn data_seed(master: u64) -> u64 {
    derive_seed(master, TAG_DATA)
}

/// Seed of the run labelled `label`.
pub fn run_seed(master: u64, label: u64) -> u64 {
    derive_seed(master, label)
}

/// A failure inside one run, kept in the report instead of aborting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub seed: Option<u64>,
    pub key: Option<u64>,
    pub message: String,
    pub numerical: bool,
}

impl RunError {
    fn from_lab(seed: Option<u64>, key: Option<u64>, e: &LabError) -> Self {
        RunError { seed, key, message: e.to_string(), numerical: e.is_numerical() }
    }
}

#[derive(Debug, Default)]
pub(crate) struct RunOutput {
    pub rows: Vec<MetricRow>,
    pub traces: Vec<(String, TrainTrace)>,
    pub errors: Vec<RunError>,
}

impl RunOutput {
    fn absorb(&mut self, seed: Option<u64>, key: Option<u64>, r: Result<RunOutput>) {
        match r {
            Ok(mut o) => {
                self.rows.append(&mut o.rows);
                self.traces.append(&mut o.traces);
                self.errors.append(&mut o.errors);
            }
            Err(e) => self.errors.push(RunError::from_lab(seed, key, &e)),
        }
    }
}

fn guarded<T>(f: impl FnOnce() -> Result<T>) -> Result<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(LabError::Precondition(format!("run panicked: {msg}")))
        }
    }
}

/// Runs `f` over `units` in order, concurrently when `jobs > 1`.
fn run_units<U: Sync>(jobs: usize, units: &[U], f: impl Fn(&U) -> Result<RunOutput> + Sync) -> Result<Vec<Result<RunOutput>>> {
    let guarded_f = |u: &U| guarded(|| f(u));
    if jobs <= 1 {
        return Ok(units.iter().map(guarded_f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| LabError::Config(format!("cannot start {jobs} jobs: {e}")))?;
    Ok(pool.install(|| units.par_iter().map(guarded_f).collect()))
}

fn sample_sequences(cfg: &ExperimentConfig, seed: u64, count: usize, offset: u64) -> Vec<InputSequence> {
    let sampler = SphereSampler { c_min: cfg.c_min, c_max: cfg.c_max };
    (0..count as u64).map(|k| sampler.sample(&mut stream_rng(seed, offset + k), cfg.d, cfg.len)).collect()
}

pub(crate) fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.experiment {
        ExperimentKind::ForwardConvergence | ExperimentKind::BackwardDecay => run_width_sweep(cfg),
        ExperimentKind::KernelAgreement => run_kernel_agreement(cfg),
        ExperimentKind::Degeneracy => {
            let mut out = RunOutput::default();
            out.absorb(None, None, guarded(|| run_degeneracy(cfg)));
            Ok(out)
        }
        ExperimentKind::LearningCurve => run_learning_curve(cfg),
        ExperimentKind::BoundCheck => run_bound_check(cfg),
    }
}

fn collect(units: &[(u64, u64)], results: Vec<Result<RunOutput>>, mut out: RunOutput) -> RunOutput {
    for (&(seed, key), r) in units.iter().zip(results) {
        out.absorb(Some(seed), Some(key), r);
    }
    out
}

fn run_width_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let backward = cfg.experiment == ExperimentKind::BackwardDecay;
    let data = data_seed(cfg.seed);
    let pair = sample_sequences(cfg, data, 2, 0);
    let mut out = RunOutput::default();
    let k_l = match analytic_forward(&pair[0], &pair[1]) {
        Ok(f) => f.k[cfg.len],
        Err(e) => {
            out.errors.push(RunError::from_lab(None, None, &e));
            return Ok(out);
        }
    };
    let m_max = *cfg.m.iter().max().expect("validated nonempty");
    let units: Vec<(u64, u64)> = cfg.seeds.iter().flat_map(|&s| cfg.m.iter().map(move |&m| (s, m as u64))).collect();
    let results = run_units(cfg.jobs, &units, |&(s, m)| {
        let p = init_params(m as usize, cfg.d, cfg.len, derive_seed(run_seed(cfg.seed, s), TAG_INIT ^ m))?;
        let mut rows = Vec::new();
        if !backward {
            let hi = forward(&p, &pair[0])?;
            let hj = forward(&p, &pair[1])?;
            let value = dot(hi.state(cfg.len), hj.state(cfg.len));
            rows.push(MetricRow::new("forward_error", m, s, (value - k_l).abs()));
            return Ok(RunOutput { rows, ..Default::default() });
        }
        let dec = empirical_decomposition(&p, &pair[0], &pair[1])?;
        rows.push(MetricRow::new("forward_error", m, s, (dec.forward[cfg.len][cfg.len] - k_l).abs()));
        rows.push(MetricRow::new("offdiag_ratio", m, s, dec.off_diagonal_ratio()));
        if m as usize == m_max && s == cfg.seeds[0] {
            for k in 0..cfg.pairs as u64 {
                let xs = sample_sequences(cfg, data, 2, 2 + 2 * k);
                let dec = empirical_decomposition(&p, &xs[0], &xs[1])?;
                let bwd = analytic_backward(&analytic_forward(&xs[0], &xs[1])?, &xs[0], &xs[1])?;
                for (l, (t, b)) in dec.diagonal().iter().zip(&bwd.b).enumerate() {
                    rows.push(MetricRow::new("diag_ratio", l as u64 + 1, k, t / b));
                }
            }
        }
        Ok(RunOutput { rows, ..Default::default() })
    })?;
    Ok(collect(&units, results, out))
}

fn run_kernel_agreement(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let xs = sample_sequences(cfg, data_seed(cfg.seed), cfg.n[0], 0);
    let mut out = RunOutput::default();
    let ana = match analytic_ntk_report(&xs) {
        Ok(a) => a,
        Err(e) => {
            out.errors.push(RunError::from_lab(None, None, &e));
            return Ok(out);
        }
    };
    out.rows.push(MetricRow::new("clamp_events", 0, 0, ana.clamp_events as f64));
    let m_max = *cfg.m.iter().max().expect("validated nonempty");
    let mut widths = cfg.m.clone();
    widths.sort_unstable();
    widths.dedup();
    let units: Vec<(u64, u64)> = cfg.seeds.iter().map(|&s| (s, m_max as u64)).collect();
    let results = run_units(cfg.jobs, &units, |&(s, _)| {
        let child = run_seed(cfg.seed, s);
        let emp_at = |m: usize| -> Result<_> {
            let p = init_params(m, cfg.d, cfg.len, derive_seed(child, TAG_INIT ^ m as u64))?;
            empirical_ntk(&p, &xs)
        };
        let top = emp_at(m_max)?;
        let c = calibrate_scale(&top, &ana.matrix)?;
        let mut rows = vec![
            MetricRow::new("calibration", m_max as u64, s, c),
            MetricRow::new("calibration_2m", m_max as u64, s, c * 2.0 * m_max as f64),
        ];
        for &m in &widths {
            let err = if m == m_max {
                relative_agreement_error(&top, &ana.matrix, c)
            } else {
                relative_agreement_error(&emp_at(m)?, &ana.matrix, c)
            };
            rows.push(MetricRow::new("agreement_error", m as u64, s, err));
        }
        Ok(RunOutput { rows, ..Default::default() })
    })?;
    Ok(collect(&units, results, out))
}

fn run_degeneracy(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let trace = degeneracy_trace(cfg.l_max, cfg.b, cfg.k_init)?;
    let mut rows = Vec::with_capacity(2 * cfg.l_max + cfg.l_list.len() + 1);
    for l in 1..=cfg.l_max {
        rows.push(MetricRow::new("scaled_gap", l as u64, 0, trace.scaled_gap(l)));
    }
    for l in 1..=cfg.l_max {
        rows.push(MetricRow::new("envelope_ratio", l as u64, 0, trace.e[l] / trace.z[l - 1]));
    }
    let scan = backward_floor_scan(&cfg.l_list, cfg.k_init)?;
    for &(l, v) in &scan.points {
        rows.push(MetricRow::new("floor_product", l as u64, 0, v));
    }
    rows.push(MetricRow::new("floor_slope", 0, 0, scan.slope));
    Ok(RunOutput { rows, ..Default::default() })
}

fn lc_section(name: &str, m: u64) -> String {
    format!("{name}.m{m}")
}

fn run_learning_curve(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let holdout = match gen_dataset(
        &cfg.target,
        cfg.holdout,
        cfg.d,
        cfg.len,
        cfg.c_min,
        cfg.c_max,
        derive_seed(cfg.seed, TAG_HOLDOUT),
    ) {
        Ok(h) => h,
        Err(e) => {
            out.errors.push(RunError::from_lab(None, None, &e));
            return Ok(out);
        }
    };
    let units: Vec<(u64, u64, u64)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.m.iter().flat_map(move |&m| cfg.n.iter().map(move |&n| (s, m as u64, n as u64))))
        .collect();
    let results = run_units(cfg.jobs, &units, |&(s, m, n)| {
        let child = run_seed(cfg.seed, s);
        let train = gen_dataset(&cfg.target, n as usize, cfg.d, cfg.len, cfg.c_min, cfg.c_max, derive_seed(child, n))?;
        let p0 = init_params(m as usize, cfg.d, cfg.len, derive_seed(child, TAG_INIT ^ m))?;
        let tc = TrainConfig {
            eta: cfg.eta.unwrap_or(1.0 / m as f64),
            steps: cfg.steps.unwrap_or(n as usize),
            eval_every: cfg.eval_every,
            holdout_fraction: 0.2,
            seed: derive_seed(child, TAG_SGD ^ n),
        };
        let trace = sgd_train_with_holdout(&p0, &train, &holdout, &tc)?.trace;
        let rows = vec![
            MetricRow::new(lc_section("avg_holdout", m), n, s, trace.averaged_holdout()),
            MetricRow::new(lc_section("final_holdout", m), n, s, trace.final_holdout()),
            MetricRow::new(lc_section("final_drift", m), n, s, trace.final_drift()),
            MetricRow::new(lc_section("margin_scale", m), n, s, train.margin_scale),
        ];
        Ok(RunOutput { rows, traces: vec![(format!("lc_m{m}_n{n}_seed{s}.csv"), trace)], errors: Vec::new() })
    })?;
    for (&(s, _, n), r) in units.iter().zip(results) {
        out.absorb(Some(s), Some(n), r);
    }
    Ok(out)
}

/// Additive targets whose terms read one step each and whose series stop at
/// `max_degree` admit the degree-floor bound.
fn floor_bound_terms(f: &TargetFunction, max_degree: usize) -> Option<Vec<(usize, f64, &crate::numerics::PowerSeries)>> {
    if f.kind != TargetKind::Additive {
        return None;
    }
    f.terms
        .iter()
        .map(|t| {
            let s = t.series().ok()?;
            let finite = s.coefficients().iter().skip(max_degree + 1).all(|c| *c == 0.0) && s.tail_bound() == 0.0;
            (t.positions.len() == 1 && finite).then(|| (t.positions[0], dot(&t.beta, &t.beta).sqrt(), s))
        })
        .collect()
}

fn run_bound_check(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let floors = xi_floor_table(cfg.len, cfg.max_degree, FROZEN_C_A, FROZEN_C_B)?;
    let floor_terms = floor_bound_terms(&cfg.target, cfg.max_degree);
    let units: Vec<(u64, u64)> = cfg.seeds.iter().flat_map(|&s| cfg.n.iter().map(move |&n| (s, n as u64))).collect();
    let results = run_units(cfg.jobs, &units, |&(s, n)| {
        let child = run_seed(cfg.seed, s);
        let ds = gen_dataset(&cfg.target, n as usize, cfg.d, cfg.len, cfg.c_min, cfg.c_max, derive_seed(child, n))?;
        let h = analytic_ntk_report(&ds.sequences)?.matrix;
        let rep = bound_quadratic(&h, &cfg.target, &ds)?;
        let mut rows = vec![
            MetricRow::new("quad_form", n, s, rep.quad_form),
            MetricRow::new("complexity", n, s, rep.complexity),
            MetricRow::new("ratio", n, s, rep.ratio),
        ];
        if let Some(terms) = &floor_terms {
            let bound = ds.margin_scale * terms.iter().map(|(_, bn, psi)| floors.series_bound(psi, *bn)).sum::<f64>();
            rows.push(MetricRow::new("floor_bound", n, s, bound));
            rows.push(MetricRow::new("floor_ratio", n, s, rep.quad_form / bound));
            let mut positions: Vec<usize> = terms.iter().map(|t| t.0).collect();
            positions.sort_unstable();
            positions.dedup();
            for p in 1..=cfg.max_degree {
                let mut worst = f64::INFINITY;
                for &l in &positions {
                    worst = worst.min(max_admissible_scale(&h, &ds.sequences, l, p)? / floors.get(p));
                }
                rows.push(MetricRow::new("floor_margin", p as u64, s, worst));
            }
        }
        if n as usize == cfg.n[0] {
            rows.extend(monomial_chain(cfg, child, s)?);
        }
        Ok(RunOutput { rows, ..Default::default() })
    })?;
    Ok(collect(&units, results, RunOutput::default()))
}

/// `√(yᵀH⁻¹y) ≤ ‖β‖^p/√s` for `y = (βᵀx̂_L)^p`, with `s` the largest scale
/// at which `H ⪰ s·K̂_p` holds.
fn monomial_chain(cfg: &ExperimentConfig, child: u64, s: u64) -> Result<Vec<MetricRow>> {
    let xs = sample_sequences(cfg, derive_seed(child, TAG_CHAIN), cfg.chain_n, 0);
    let h = analytic_ntk_report(&xs)?.matrix;
    let beta = standard_direction(cfg.d);
    let steps: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let v = x.step(cfg.len);
            let norm = dot(v, v).sqrt();
            v.iter().map(|c| c / norm).collect()
        })
        .collect();
    let mut rows = Vec::new();
    for p in 1..=cfg.max_degree {
        let scale = max_admissible_scale(&h, &xs, cfg.len, p)?;
        let check = proposition_e_oracle(&h, &steps, p, (scale * (1.0 - 1e-6)).sqrt(), &beta)?;
        rows.push(MetricRow::new("chain_lhs", p as u64, s, check.lhs));
        rows.push(MetricRow::new("chain_rhs", p as u64, s, check.rhs));
        rows.push(MetricRow::new("chain_ratio", p as u64, s, check.lhs / check.rhs));
    }
    Ok(rows)
}

fn values<'a>(rows: &'a [MetricRow], section: &'a str) -> impl Iterator<Item = f64> + 'a {
    rows.iter().filter(move |r| r.section == section).map(|r| r.value)
}

/// Largest value; NaN if there is none or any is NaN.
fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    let mut acc: Option<f64> = None;
    for v in it {
        acc = Some(match acc {
            _ if v.is_nan() => return f64::NAN,
            None => v,
            Some(a) => a.max(v),
        });
    }
    acc.unwrap_or(f64::NAN)
}

fn min_of(it: impl Iterator<Item = f64>) -> f64 {
    -max_of(it.map(|v| -v))
}

/// `max_k med[k+1]/med[k]`, below one exactly when the medians fall.
fn worst_step_ratio(meds: &[(u64, f64)]) -> f64 {
    max_of(meds.windows(2).map(|w| w[1].1 / w[0].1))
}

fn sweep_checks(checks: &mut Vec<Check>, meds: &[(u64, f64)], name: &str, at_max_threshold: f64) {
    if meds.len() >= 2 {
        checks.push(Check::new(&format!("{name}_decreasing"), worst_step_ratio(meds), Relation::Lt, 1.0));
    }
    let last = meds.last().map_or(f64::NAN, |m| m.1);
    checks.push(Check::new(&format!("{name}_at_max_m"), last, Relation::Lt, at_max_threshold));
}

/// Threshold checks for `kind`, from the rows of a run.
pub fn checks_for(kind: ExperimentKind, cfg: &ExperimentConfig, rows: &[MetricRow], aggs: &[Aggregate]) -> Vec<Check> {
    let t = &cfg.thresholds;
    let mut checks = Vec::new();
    match kind {
        ExperimentKind::ForwardConvergence => {
            let meds = medians(aggs, "forward_error");
            sweep_checks(&mut checks, &meds, "forward_error", t.max_forward_error);
            if meds.len() >= 2 {
                let xs: Vec<f64> = meds.iter().map(|m| (m.0 as f64).ln()).collect();
                let ys: Vec<f64> = meds.iter().map(|m| m.1.ln()).collect();
                checks.push(Check::new("forward_loglog_slope", ls_slope(&xs, &ys), Relation::Le, t.max_forward_slope));
            }
        }
        ExperimentKind::BackwardDecay => {
            let meds = medians(aggs, "offdiag_ratio");
            sweep_checks(&mut checks, &meds, "offdiag_ratio", t.max_offdiag_ratio);
            let mut by_step: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.section == "diag_ratio") {
                by_step.entry(r.key).or_default().push(r.value);
            }
            let spread = max_of(by_step.values().map(|v| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                (max_of(v.iter().copied()) - min_of(v.iter().copied())) / mean
            }));
            checks.push(Check::new("diag_tracking_spread", spread, Relation::Lt, t.max_diag_spread));
        }
        ExperimentKind::KernelAgreement => {
            let last = medians(aggs, "agreement_error").last().map_or(f64::NAN, |m| m.1);
            checks.push(Check::new("agreement_error_at_max_m", last, Relation::Lt, t.max_agreement_error));
        }
        ExperimentKind::Degeneracy => {
            let lo = (cfg.l_max / 10).max(1) as u64;
            let window = || rows.iter().filter(|r| r.section == "scaled_gap" && r.key >= lo).map(|r| r.value);
            let ratio = max_of(window()) / min_of(window());
            checks.push(Check::new("scaled_gap_ratio", ratio, Relation::Lt, t.max_gap_ratio));
            let from = t.envelope_from as u64;
            let env = max_of(rows.iter().filter(|r| r.section == "envelope_ratio" && r.key >= from).map(|r| r.value));
            checks.push(Check::new("envelope_sup_ratio", env, Relation::Le, 1.0));
            let slope = max_of(values(rows, "floor_slope"));
            checks.push(Check::new("floor_slope_lower", slope, Relation::Ge, t.min_floor_slope));
            checks.push(Check::new("floor_slope_negative", slope, Relation::Lt, 0.0));
        }
        ExperimentKind::LearningCurve => {
            let m = *cfg.m.iter().max().expect("validated nonempty") as u64;
            let avg = medians(aggs, &lc_section("avg_holdout", m));
            if avg.len() >= 2 {
                let gain = avg.last().map_or(f64::NAN, |a| a.1) - avg.first().map_or(f64::NAN, |a| a.1);
                checks.push(Check::new("avg_holdout_improves", gain, Relation::Lt, 0.0));
            }
            let last = medians(aggs, &lc_section("final_holdout", m)).last().map_or(f64::NAN, |a| a.1);
            checks.push(Check::new("final_holdout_at_max_n", last, Relation::Lt, t.max_final_error));
        }
        ExperimentKind::BoundCheck => {
            checks.push(Check::new("max_bound_ratio", max_of(values(rows, "ratio")), Relation::Le, t.max_bound_ratio));
            if rows.iter().any(|r| r.section == "floor_ratio") {
                checks.push(Check::new(
                    "max_floor_bound_ratio",
                    max_of(values(rows, "floor_ratio")),
                    Relation::Le,
                    t.max_bound_ratio,
                ));
                checks.push(Check::new("min_floor_margin", min_of(values(rows, "floor_margin")), Relation::Ge, 1.0));
            }
            checks.push(Check::new("max_chain_ratio", max_of(values(rows, "chain_ratio")), Relation::Le, 1.0));
        }
    }
    checks
}
