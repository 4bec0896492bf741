mod common;

use common::{sphere_sequence, sphere_sequences};
use proptest::prelude::*;
use rnn_ntk_lab::bounds::{
    bound_quadratic, calibrate_xi, calibration_points, max_admissible_scale, max_admissible_scale_gram,
    normalized_power_gram_multi, proposition_e_oracle, xi_floor_table, FROZEN_C_A, FROZEN_C_B,
};
use rnn_ntk_lab::concept::{gen_dataset, SeriesSpec, TargetFunction, TargetTerm};
use rnn_ntk_lab::ntk::analytic_ntk;
use rnn_ntk_lab::numerics::{psd_quadratic_solve, KernelKind, KernelMatrix};
use rnn_ntk_lab::rnn::InputSequence;

fn unit_step(x: &InputSequence, l: usize) -> Vec<f64> {
    let s = x.step(l);
    let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    s.iter().map(|v| v / n).collect()
}

fn beta_of(d: usize, seed: u64) -> Vec<f64> {
    let mut b = vec![0.0; d];
    rnn_ntk_lab::rng::fill_normal(&mut b, seed, 5, 1.0);
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monomial_chain_holds(n in 2usize..=8, p in 1usize..=3, seed in any::<u64>()) {
        let (d, len) = (4, 4);
        let xs: Vec<_> = (0..n as u64).map(|k| sphere_sequence(d, len, 1.0, seed, k)).collect();
        let h = analytic_ntk(&xs).unwrap();
        let beta = beta_of(d, seed);
        let s = max_admissible_scale(&h, &xs, len, p).unwrap();
        prop_assert!(s > 0.0);
        let steps: Vec<Vec<f64>> = xs.iter().map(|x| unit_step(x, len)).collect();
        let check = proposition_e_oracle(&h, &steps, p, (s * (1.0 - 1e-6)).sqrt(), &beta).unwrap();
        prop_assert!(check.holds && check.lhs <= check.rhs * (1.0 + 1e-8));
    }

    #[test]
    fn quadratic_form_obeys_triangle_inequality(n in 2usize..=8, seed in any::<u64>(), c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
        let (d, len) = (3, 3);
        let xs: Vec<_> = (0..n as u64).map(|k| sphere_sequence(d, len, 1.0, seed, k)).collect();
        let h = analytic_ntk(&xs).unwrap();
        let beta = beta_of(d, seed);
        let z: Vec<f64> = xs.iter().map(|x| unit_step(x, 2).iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
        let y1: Vec<f64> = z.iter().map(|v| c1 * v).collect();
        let y2: Vec<f64> = z.iter().map(|v| c2 * v.powi(2)).collect();
        let y: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
        let jitter = 1e-9 * h.mean_diagonal();
        let q = psd_quadratic_solve(&h, &y, jitter).unwrap();
        let q1 = psd_quadratic_solve(&h, &y1, jitter).unwrap();
        let q2 = psd_quadratic_solve(&h, &y2, jitter).unwrap();
        prop_assert!(q <= (q1 + q2) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn quad_form_scales_with_target(seed in 0u64..1000, t in 0.1f64..10.0) {
        let raw = beta_of(4, seed);
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let beta: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let base = TargetFunction::additive(vec![TargetTerm::new(vec![3], beta.clone(), SeriesSpec::Identity)]);
        let scaled = TargetFunction::additive(vec![TargetTerm::new(
            vec![3],
            beta,
            SeriesSpec::Polynomial { coefficients: vec![0.0, t] },
        )]);
        let mut ds = gen_dataset(&base, 12, 4, 3, 1.0, 1.0, seed).unwrap();
        ds.margin_scale = 1.0;
        let h = analytic_ntk(&ds.sequences).unwrap();
        let a = bound_quadratic(&h, &base, &ds).unwrap();
        let b = bound_quadratic(&h, &scaled, &ds).unwrap();
        prop_assert!((b.quad_form - t * a.quad_form).abs() <= 1e-10 * t * a.quad_form);
    }
}

#[test]
fn duplicated_sample_barely_moves_the_form() {
    let xs = sphere_sequences(5, 3, 4, 21);
    let h = analytic_ntk(&xs).unwrap();
    let y: Vec<f64> = (0..5).map(|i| (i as f64 - 2.0) * 0.7 + 0.1).collect();
    let jitter = 1e-6 * h.mean_diagonal();
    let q = psd_quadratic_solve(&h, &y, jitter).unwrap();
    let mut xs2 = xs.clone();
    xs2.push(xs[2].clone());
    let mut y2 = y.clone();
    y2.push(y[2]);
    let h2 = analytic_ntk(&xs2).unwrap();
    let q2 = psd_quadratic_solve(&h2, &y2, jitter).unwrap();
    assert!((q2 - q).abs() / q < 0.05, "{q} vs {q2}");
}

#[test]
fn two_variable_floor_is_positive() {
    // the bisection maximum itself need not fall with p on a fixed sample
    // (entrywise powers pull K̂ toward the identity); the closed-form
    // floor does
    let floors = xi_floor_table(4, 2, FROZEN_C_A, FROZEN_C_B).unwrap();
    assert!(floors.get(2) < floors.get(1));
    for seed in 0..5 {
        let xs: Vec<_> = (0..6).map(|k| sphere_sequence(4, 4, 1.0, seed, k)).collect();
        let h = analytic_ntk(&xs).unwrap();
        for p in 1..=2 {
            let s = max_admissible_scale_gram(&h, &normalized_power_gram_multi(&xs, &[1, 3], p).unwrap()).unwrap();
            assert!(s > 0.0, "seed {seed} p {p}");
        }
    }
}

#[test]
fn frozen_floor_constants_reproduce() {
    let (c_a, c_b) = calibrate_xi(&calibration_points(2024).unwrap()).unwrap();
    assert!((c_a / FROZEN_C_A - 1.0).abs() < 1e-9, "{c_a}");
    assert!((c_b / FROZEN_C_B - 1.0).abs() < 1e-9, "{c_b}");
    let t = xi_floor_table(6, 3, FROZEN_C_A, FROZEN_C_B).unwrap();
    assert!(t.xi.iter().all(|x| *x > 0.0));
}

#[test]
fn identity_kernel_form() {
    let h = KernelMatrix::from_upper(3, KernelKind::Analytic, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
    assert_eq!(psd_quadratic_solve(&h, &[1.0, 0.0, 0.0], 0.0).unwrap(), 1.0);
}
