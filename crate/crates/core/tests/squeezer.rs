mod common;

use proptest::prelude::*;
use sqzlab::squeezer::{
    ideal_output_map, nominal_gain, r_from_transmittance, run_deterministic, run_trajectory,
    squeezing_db_from_transmittance, ImperfectionModel, ProtocolConfig,
};
use sqzlab::units::db_to_nepers;
use sqzlab::GaussianState;

fn config(t: f64, r_a: f64) -> ProtocolConfig {
    ProtocolConfig::new(t, r_a).unwrap()
}

fn with_gain(t: f64, r_a: f64, gain: f64) -> ProtocolConfig {
    ProtocolConfig {
        gain: Some(gain),
        ..config(t, r_a)
    }
}

#[test]
fn nominal_gain_and_squeezing_law() {
    assert_eq!(nominal_gain(1.0).unwrap(), 0.0);
    assert!((nominal_gain(0.5).unwrap() + 1.0).abs() < 1e-15);
    assert!((nominal_gain(0.25).unwrap() + 3f64.sqrt()).abs() < 1e-15);
    assert!(nominal_gain(0.0).is_err());
    for (t, db) in [(0.75, 1.2494), (0.5, 3.0103), (0.25, 6.0206)] {
        assert!((squeezing_db_from_transmittance(t).unwrap() - db).abs() < 5e-5);
    }
    assert!((r_from_transmittance(0.25).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
}

/// Gain minimizing `(a - g b)^2 V + (b + g a)^2 W`, the output `p` variance
/// for input variance `V` and ancilla anti-squeezed variance `W`.
fn variance_minimizing_gain(t: f64, v: f64, w: f64) -> f64 {
    let (a, b) = (t.sqrt(), (1.0 - t).sqrt());
    a * b * (v - w) / (b * b * v + a * a * w)
}

#[test]
fn gain_sweep_minimum() {
    let input = GaussianState::coherent(0.3, 0.8);
    for &(t, r_a) in &[(0.5, db_to_nepers(5.1)), (0.25, db_to_nepers(5.1)), (0.5, 4.0), (0.25, 4.0)] {
        let g0 = nominal_gain(t).unwrap();
        let step = 1e-3;
        let (best, _) = (-2000..=2000)
            .map(|k| g0 + k as f64 * step)
            .map(|g| {
                let out = run_deterministic(&with_gain(t, r_a, g), &ImperfectionModel::none(), &input).unwrap();
                (g, out.output.mode_cov(0)[(1, 1)])
            })
            .fold((f64::NAN, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let w = 0.25 * (2.0 * r_a).exp();
        let predicted = variance_minimizing_gain(t, 0.25, w);
        assert!((best - predicted).abs() <= step, "T={t}: sweep {best}, closed form {predicted}");
        if r_a >= 4.0 {
            // strongly squeezed ancilla: the minimum sits on the nominal gain
            assert!((best - g0).abs() <= 5.0 * step, "T={t}: {best} vs nominal {g0}");
        }
    }
}

#[test]
fn nominal_gain_removes_ancilla_from_p() {
    let input = GaussianState::squeezed_vacuum(0.3, 0.4);
    for t in [0.75, 0.5, 0.25] {
        for imperf in [ImperfectionModel::none(), ImperfectionModel::default()] {
            let vp: Vec<f64> = [0.0, 0.5872, 2.0]
                .iter()
                .map(|&r_a| run_deterministic(&config(t, r_a), &imperf, &input).unwrap().output.mode_cov(0)[(1, 1)])
                .collect();
            assert!((vp[0] - vp[1]).abs() <= 1e-12 && (vp[0] - vp[2]).abs() <= 1e-12, "{vp:?}");
        }
        let vp_ideal: Vec<f64> = [0.0, 0.5872, 2.0]
            .iter()
            .map(|&r_a| ideal_output_map(&config(t, r_a), &input).unwrap().mode_cov(0)[(1, 1)])
            .collect();
        assert!((vp_ideal[0] - vp_ideal[2]).abs() <= 1e-12);
    }
}

#[test]
fn ancilla_noise_returns_without_feedforward() {
    let t = 0.5;
    let r_a = db_to_nepers(5.1);
    let input = GaussianState::coherent(0.0, 0.0);
    let out = run_deterministic(&with_gain(t, r_a, 0.0), &ImperfectionModel::none(), &input).unwrap();
    let anti = 0.25 * (2.0 * r_a).exp();
    let expected = 0.5 * 0.25 + 0.5 * anti;
    assert!((out.output.mode_cov(0)[(1, 1)] - expected).abs() < 1e-12);
    assert!(out.output.mode_cov(0)[(1, 1)] > 0.5);
}

#[test]
fn vacuum_ancilla_keeps_x_at_shot_noise() {
    for t in [0.9, 0.5, 0.1] {
        let out = run_deterministic(&config(t, 0.0), &ImperfectionModel::none(), &GaussianState::vacuum(1).unwrap())
            .unwrap();
        assert!((out.output.mode_cov(0)[(0, 0)] - 0.25).abs() < 1e-14);
    }
}

#[test]
fn default_imperfections_bracket_measured_squeezing() {
    let cfg = ProtocolConfig::with_ancilla_db(0.25, 5.1).unwrap();
    let out = run_deterministic(&cfg, &ImperfectionModel::default(), &GaussianState::vacuum(1).unwrap()).unwrap();
    assert!(out.effective_squeezing_db >= 2.5 && out.effective_squeezing_db <= 3.17);
}

#[test]
fn imperfect_means_are_loss_scaled() {
    let imperf = ImperfectionModel::default();
    let (x, p) = (1.3, -0.9);
    for t in [0.75, 0.5, 0.25] {
        let out = run_deterministic(&config(t, 0.8), &imperf, &GaussianState::coherent(x, p)).unwrap();
        let s = imperf.displacement_coupler.sqrt();
        let m = out.output.mode_mean(0);
        assert!((m[0] - s * t.sqrt() * x).abs() < 1e-12);
        assert!((m[1] - s * p / t.sqrt()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hyperbola_of_means(x in -4.0..4.0f64, p in -4.0..4.0f64, t in 0.01..=1.0f64, r_a in 0.0..3.0f64) {
        let out = ideal_output_map(&config(t, r_a), &GaussianState::coherent(x, p)).unwrap();
        let m = out.mode_mean(0);
        prop_assert!((m[0] * m[1] - x * p).abs() <= 1e-12 * (x * p).abs().max(1e-300));
        prop_assert!((m[0] - t.sqrt() * x).abs() <= 1e-14 * x.abs().max(1.0));
        prop_assert!((m[1] - p / t.sqrt()).abs() <= 1e-12 * p.abs().max(1.0) / t.sqrt());
    }

    #[test]
    fn every_input_obeys_the_squeezer_moment_relations(s in common::single_mode(), t in 0.01..=1.0f64, r_a in 0.0..3.0f64) {
        let out = ideal_output_map(&config(t, r_a), &s).unwrap();
        let (c, c_out) = (s.mode_cov(0), out.mode_cov(0));
        let anc = 0.25 * (-2.0 * r_a).exp();
        prop_assert!((c_out[(0, 0)] - (t * c[(0, 0)] + (1.0 - t) * anc)).abs() <= 1e-12 * c[(0, 0)].max(1.0));
        prop_assert!((c_out[(1, 1)] - c[(1, 1)] / t).abs() <= 1e-12 * c_out[(1, 1)].max(1.0));
        prop_assert!((c_out[(0, 1)] - c[(0, 1)]).abs() <= 1e-12 * c[(0, 1)].abs().max(1.0));
        prop_assert!(out.uncertainty_margin() >= -1e-9);

        let chain = run_deterministic(&config(t, r_a), &ImperfectionModel::none(), &s).unwrap().output;
        prop_assert!(common::max_abs_vec(chain.mean(), out.mean()) <= 1e-12 * s.mean().amax().max(1.0));
        prop_assert!(common::max_abs(chain.cov(), out.cov()) <= 1e-12 * c_out.amax().max(1.0));
    }

    #[test]
    fn rotated_frame_squeezes_the_chosen_quadrature(angle in -1.5..1.5f64, t in 0.05..=1.0f64) {
        let cfg = ProtocolConfig { squeeze_angle: angle, ..config(t, 0.0) };
        let out = ideal_output_map(&cfg, &GaussianState::vacuum(1).unwrap()).unwrap();
        prop_assert!((out.marginal_variance(0, angle).unwrap() - 0.25).abs() < 1e-12);
        prop_assert!((out.marginal_variance(0, angle + std::f64::consts::FRAC_PI_2).unwrap() - 0.25 / t).abs() < 1e-12 / t);
    }
}

fn within_three_se(t: f64, imperf: &ImperfectionModel, seed: u64) {
    let cfg = ProtocolConfig::with_ancilla_db(t, 5.1).unwrap();
    let input = GaussianState::coherent(1.0, -0.5);
    let det = run_deterministic(&cfg, imperf, &input).unwrap().output;
    let run = run_trajectory(&cfg, imperf, &input, 100_000, seed).unwrap();
    let (m, c) = (run.ensemble.mean(), run.ensemble.cov());
    let (m_se, v_se) = (run.ensemble.mean_standard_error(), run.ensemble.variance_standard_error());
    for q in 0..2 {
        let dm = (m[q] - det.mode_mean(0)[q]).abs();
        assert!(dm <= 3.0 * m_se[q] + 1e-12, "T={t} mean[{q}] off by {dm}, se {}", m_se[q]);
        let dv = (c[(q, q)] - det.mode_cov(0)[(q, q)]).abs();
        assert!(dv <= 3.0 * v_se[q] + 1e-12, "T={t} var[{q}] off by {dv}, se {}", v_se[q]);
    }
}

#[test]
fn trajectories_converge_to_the_ensemble_channel() {
    for (k, t) in [0.75, 0.5, 0.25].into_iter().enumerate() {
        within_three_se(t, &ImperfectionModel::none(), 10 + k as u64);
        within_three_se(t, &ImperfectionModel::default(), 20 + k as u64);
        within_three_se(t, &ImperfectionModel::degraded_feedforward(), 30 + k as u64);
    }
}

#[test]
fn trajectory_p_variance_matches_formula() {
    let run = run_trajectory(&config(0.5, 0.6), &ImperfectionModel::none(), &GaussianState::vacuum(1).unwrap(), 100_000, 3)
        .unwrap();
    let vp = run.ensemble.cov()[(1, 1)];
    assert!((vp - 0.5).abs() <= 3.0 * run.ensemble.variance_standard_error()[1]);
    assert_eq!(run.shots.len(), 100_000);
}

#[test]
fn trajectories_are_reproducible() {
    let cfg = config(0.25, 0.6);
    let input = GaussianState::coherent(0.5, 0.5);
    let a = run_trajectory(&cfg, &ImperfectionModel::degraded_feedforward(), &input, 10_000, 42).unwrap();
    let b = run_trajectory(&cfg, &ImperfectionModel::degraded_feedforward(), &input, 10_000, 42).unwrap();
    assert_eq!(a.shots, b.shots);
    assert_eq!(a.ensemble, b.ensemble);
    let c = run_trajectory(&cfg, &ImperfectionModel::degraded_feedforward(), &input, 10_000, 43).unwrap();
    assert_ne!(a.shots, c.shots);
}
