//! One test per acceptance criterion. Each prints a single PASS/FAIL line
//! straight to stderr so the verdicts show even when output is captured.

mod common;

use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use common::{finite_difference_oracle, sphere_sequence};
use rnn_ntk_lab::bounds::proposition_e_oracle;
use rnn_ntk_lab::concept::{complexity_additive, complexity_nvars_truncated, DEFAULT_C1};
use rnn_ntk_lab::harness::{
    aggregate, checks_for, parse_config_str, read_metrics, run_experiment, Check, ExperimentKind, ExperimentReport,
    MetricRow, Overrides, METRICS_FILE,
};
use rnn_ntk_lab::ntk::analytic_ntk;
use rnn_ntk_lab::numerics::{gamma_dual, hermite_coeffs, min_eigenvalue, KernelKind, KernelMatrix, PowerSeries};
use rnn_ntk_lab::rng::fill_normal;
use rnn_ntk_lab::rnn::init_params;

/// Wide-network criteria run one at a time to bound peak memory.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: &str, ok: bool, detail: String) {
    let line = format!("criterion {id:>3}: {} | {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {id}: {detail}");
}

fn describe(checks: &[Check]) -> String {
    checks
        .iter()
        .map(|c| format!("{}={:.4e}{}{}", c.name, c.value, c.relation.symbol(), c.threshold))
        .collect::<Vec<_>>()
        .join(", ")
}

fn run(json: &str, out: &Path) -> (ExperimentReport, Vec<MetricRow>) {
    let o = Overrides { out: Some(out.to_path_buf()), ..Default::default() };
    let cfg = parse_config_str(json, &o).unwrap();
    let report = run_experiment(&cfg).unwrap();
    let rows = read_metrics(&out.join(METRICS_FILE)).unwrap();
    (report, rows)
}

struct Sweep {
    report: ExperimentReport,
    rows: Vec<MetricRow>,
    elapsed: Duration,
}

/// The width sweep shared by the forward and backward criteria.
fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let (report, rows) = run(r#"{"experiment": "backward-decay"}"#, dir.path());
        Sweep { report, rows, elapsed: start.elapsed() }
    })
}

#[test]
fn criterion_01_gradient_oracle() {
    let start = Instant::now();
    let (mut checked, mut passed, mut kinks) = (0, 0, 0);
    for seed in 0..10 {
        let p = init_params(64, 8, 6, seed).unwrap();
        let x = sphere_sequence(8, 6, 1.0, 1000 + seed, 0);
        let r = finite_difference_oracle(&p, &x, 50, 1e-4, seed, 1e-3);
        checked += r.checked;
        passed += r.passed;
        kinks += r.kinks;
    }
    let frac = passed as f64 / checked as f64;
    let t = start.elapsed();
    verdict(
        "1",
        checked > 0 && frac >= 0.95 && t < Duration::from_secs(60),
        format!("{passed}/{checked} non-kink coordinates within 1e-3 ({kinks} kinks), {t:.1?}"),
    );
}

#[test]
fn criterion_02_forward_kernel_convergence() {
    let _g = heavy();
    let s = sweep();
    let checks = checks_for(ExperimentKind::ForwardConvergence, &s.report.config, &s.rows, &aggregate(&s.rows));
    let ok = s.report.errors.is_empty() && checks.len() == 3 && checks.iter().all(|c| c.passed);
    verdict("2", ok && s.elapsed < Duration::from_secs(300), format!("{}, {:.1?}", describe(&checks), s.elapsed));
}

#[test]
fn criterion_03_backward_off_diagonal_decay() {
    let _g = heavy();
    let s = sweep();
    let checks: Vec<Check> = s.report.checks.iter().filter(|c| c.name.starts_with("offdiag")).cloned().collect();
    let ok = s.report.errors.is_empty() && checks.len() == 2 && checks.iter().all(|c| c.passed);
    verdict("3", ok && s.elapsed < Duration::from_secs(600), format!("{}, {:.1?}", describe(&checks), s.elapsed));
}

#[test]
fn criterion_04_kernel_agreement() {
    let _g = heavy();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (report, _) = run(r#"{"experiment": "kernel-agreement", "m": [8192], "n": 6, "L": 6}"#, dir.path());
    let t = start.elapsed();
    let c = report.aggregate("calibration_2m", 8192).map_or(f64::NAN, |a| a.median);
    verdict(
        "4",
        report.passed && t < Duration::from_secs(600),
        format!("{}, c·2m={c:.4}, {t:.1?}", describe(&report.checks)),
    );
}

#[test]
fn criterion_05_degeneracy_law() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (report, _) = run(r#"{"experiment": "degeneracy", "L_max": 10000, "K_init": 0.5, "b": 4}"#, dir.path());
    let t = start.elapsed();
    let checks: Vec<Check> =
        report.checks.iter().filter(|c| c.name == "scaled_gap_ratio" || c.name == "envelope_sup_ratio").cloned().collect();
    let ok = report.errors.is_empty() && checks.len() == 2 && checks.iter().all(|c| c.passed);
    verdict("5", ok && t < Duration::from_secs(5), format!("{}, {t:.1?}", describe(&checks)));
}

#[test]
fn criterion_06_backward_floor() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (report, _) = run(r#"{"experiment": "degeneracy", "L_max": 100, "L_list": [100, 1000, 10000]}"#, dir.path());
    let t = start.elapsed();
    let checks: Vec<Check> = report.checks.iter().filter(|c| c.name.starts_with("floor_slope")).cloned().collect();
    let ok = report.errors.is_empty() && checks.len() == 2 && checks.iter().all(|c| c.passed);
    verdict("6", ok && t < Duration::from_secs(5), format!("{}, {t:.1?}", describe(&checks)));
}

#[test]
fn criterion_07_complexity_calculator() {
    let start = Instant::now();
    // i|c_i|R^i = (R/2)^i on odd i, a geometric series in (R/2)²
    let q: f64 = 0.5;
    let oracle = 1.0 + q / (1.0 - q * q);
    let at_one = complexity_additive(&PowerSeries::arctan_half(), 1.0);
    let at_two = complexity_additive(&PowerSeries::arctan_half(), 2.0);
    let exp = PowerSeries::exp();
    let t100 = complexity_nvars_truncated(&exp, 1.0, 2, 1, DEFAULT_C1, 100).unwrap();
    let t200 = complexity_nvars_truncated(&exp, 1.0, 2, 1, DEFAULT_C1, 200).unwrap();
    let t = start.elapsed();
    let ok = (at_one.value - oracle).abs() <= 1e-9
        && !at_one.divergent
        && at_two.divergent
        && (t100.value - t200.value).abs() < 1e-9
        && !t200.divergent
        && t < Duration::from_secs(1);
    verdict(
        "7",
        ok,
        format!(
            "C(atan,1)={:.12} (oracle {oracle:.12}), C(atan,2) divergent={}, C2(exp) T100={:.12} T200={:.12}",
            at_one.value, at_two.divergent, t100.value, t200.value
        ),
    );
}

#[test]
fn criterion_08a_hermite_mass() {
    let table = hermite_coeffs(64);
    let mass = table.mass();
    verdict("8a", (mass - 1.0).abs() <= 1e-6, format!("sum of mu_r^2 over r<=64 = {mass:.9}, |1 - sum| = {:.3e}", (1.0 - mass).abs()));
}

#[test]
fn criterion_08b_hermite_reconstruction() {
    let start = Instant::now();
    let table = hermite_coeffs(64);
    let worst = (0..100)
        .map(|k| -0.95 + 1.9 * k as f64 / 99.0)
        .map(|z| (table.reconstruct(z) - gamma_dual(z).unwrap()).abs())
        .fold(0.0, f64::max);
    let t = start.elapsed();
    verdict("8b", worst < 1e-4 && t < Duration::from_secs(1), format!("max |sum mu_r^2 z^r - Gamma(z)| on [-0.95, 0.95] = {worst:.3e}"));
}

#[test]
fn criterion_09_psd_suite() {
    let start = Instant::now();
    let mut worst_eig = f64::INFINITY;
    for inst in 0..50u64 {
        let n = 1 + (inst % 8) as usize;
        let len = 1 + (inst % 7) as usize;
        let xs: Vec<_> = (0..n as u64).map(|k| sphere_sequence(4, len, 0.5 + (inst % 5) as f64 * 0.5, inst, k)).collect();
        let h = analytic_ntk(&xs).unwrap();
        worst_eig = worst_eig.min(min_eigenvalue(&h) / (1e-8 * h.mean_diagonal()));
    }
    let mut holds = 0;
    for inst in 0..50u64 {
        let (n, d, p) = (6, 3, 1 + (inst % 3) as usize);
        let mut raw = vec![0.0; n * d + n * n + d];
        fill_normal(&mut raw, inst, 31, 1.0);
        let xs: Vec<Vec<f64>> = raw[..n * d].chunks(d).map(|c| c.to_vec()).collect();
        let noise = &raw[n * d..n * d + n * n];
        let beta = &raw[n * d + n * n..];
        let alpha = 0.5 + (inst % 4) as f64;
        let m = KernelMatrix::from_upper(n, KernelKind::Generic, |i, j| {
            let kp = xs[i].iter().zip(&xs[j]).map(|(a, b)| a * b).sum::<f64>().powi(p as i32);
            let nn: f64 = (0..n).map(|c| noise[i * n + c] * noise[j * n + c]).sum();
            alpha * alpha * kp + 0.1 * nn
        })
        .unwrap();
        if proposition_e_oracle(&m, &xs, p, alpha, beta).is_ok_and(|c| c.holds) {
            holds += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        "9",
        worst_eig >= -1.0 && holds == 50 && t < Duration::from_secs(60),
        format!("worst min_eig/(1e-8 trace/n) = {worst_eig:.3e}, proposition held on {holds}/50, {t:.1?}"),
    );
}

#[test]
fn criterion_10_learning_curve() {
    let _g = heavy();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (report, _) = run(r#"{"experiment": "learning-curve"}"#, dir.path());
    let t = start.elapsed();
    let m = report.config.m[0];
    let med = |s: &str, n: u64| report.aggregate(&format!("{s}.m{m}"), n).map_or(f64::NAN, |a| a.median);
    verdict(
        "10",
        report.passed && t < Duration::from_secs(900),
        format!(
            "{}, avg@200={:.3} avg@2000={:.3} final@2000={:.3}, errors={}, {t:.1?}",
            describe(&report.checks),
            med("avg_holdout", 200),
            med("avg_holdout", 2000),
            med("final_holdout", 2000),
            report.errors.len()
        ),
    );
}

#[test]
fn criterion_11_bound_sanity() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (report, _) = run(r#"{"experiment": "bound-check", "n": 32, "L": 5}"#, dir.path());
    let t = start.elapsed();
    verdict("11", report.passed && t < Duration::from_secs(120), format!("{}, {t:.1?}", describe(&report.checks)));
}
