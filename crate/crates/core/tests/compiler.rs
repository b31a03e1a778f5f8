mod common;

use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use sqzlab::compiler::{euler_decompose, plan_from_unitary, simulate_plan, Gate, GatePlan};
use sqzlab::gaussian::{rotation2, SymplecticTransform};
use sqzlab::metrology::{classical_limit_fidelity, fidelity_gaussian_with_tolerance};
use sqzlab::GaussianState;
use std::f64::consts::{LN_2, PI};

fn euler_matrix(post: f64, r: f64, pre: f64) -> Matrix2<f64> {
    rotation2(post) * Matrix2::new((-r).exp(), 0.0, 0.0, r.exp()) * rotation2(pre)
}

fn target_state(s: &Matrix2<f64>, d: &Vector2<f64>, input: &GaussianState) -> GaussianState {
    input
        .apply(&SymplecticTransform::from_single_mode(*s, *d).unwrap())
        .unwrap()
}

/// Random 2x2 matrix rescaled to unit determinant, or an Euler product.
fn symplectic() -> impl Strategy<Value = Matrix2<f64>> {
    prop_oneof![
        (-PI..PI, 0.0..2.0f64, -PI..PI).prop_map(|(a, r, b)| euler_matrix(a, r, b)),
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)
            .prop_filter("well-conditioned determinant", |(a, b, c, d)| (a * d - b * c).abs() > 0.05)
            .prop_map(|(a, b, c, d)| {
                let det: f64 = a * d - b * c;
                // a negative determinant is fixed by flipping one row
                let (c, d) = if det < 0.0 { (-c, -d) } else { (c, d) };
                Matrix2::new(a, b, c, d) / det.abs().sqrt()
            }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decomposition_recomposes(s in symplectic()) {
        let e = euler_decompose(&s).unwrap();
        prop_assert!((e.matrix() - s).amax() <= 1e-10, "{s} -> {e:?}");
        prop_assert!(e.r >= 0.0);
        prop_assert!(e.theta_pre > -PI / 2.0 && e.theta_pre <= PI / 2.0);
        prop_assert!(e.theta_post > -PI && e.theta_post <= PI);
    }

    #[test]
    fn plans_are_minimal_and_physical(s in symplectic(), dx in -3.0..3.0f64, dp in -3.0..3.0f64) {
        let plan = plan_from_unitary(&s, &Vector2::new(dx, dp)).unwrap();
        prop_assert!(plan.squeezer_count() <= 1);
        plan.validate().unwrap();
        for g in &plan.gates {
            if let Gate::Squeezer { r, transmittance, .. } = *g {
                prop_assert!(r >= 0.0);
                prop_assert!(transmittance > 0.0 && transmittance <= 1.0);
            }
        }
        let t = plan.transform();
        let m = Matrix2::from_fn(|i, j| t.matrix()[(i, j)]);
        prop_assert!((m - s).amax() <= 1e-10);
        prop_assert!((t.displacement_vector()[0] - dx).abs() <= 1e-12);
        prop_assert!((t.displacement_vector()[1] - dp).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn infinite_ancilla_executes_the_target(s in symplectic(), input in common::single_mode(), dx in -2.0..2.0f64, dp in -2.0..2.0f64) {
        let d = Vector2::new(dx, dp);
        let plan = plan_from_unitary(&s, &d).unwrap();
        let out = simulate_plan(&plan, &input, f64::INFINITY).unwrap();
        let expected = target_state(&s, &d, &input);
        prop_assert!(common::max_abs_vec(out.mean(), expected.mean()) <= 1e-9);
        prop_assert!(common::max_abs(out.cov(), expected.cov()) <= 1e-9);
    }

    #[test]
    fn fidelity_grows_with_ancilla_squeezing(s in symplectic(), x in -2.0..2.0f64, p in -2.0..2.0f64) {
        let input = GaussianState::coherent(x, p);
        let d = Vector2::zeros();
        let plan = plan_from_unitary(&s, &d).unwrap();
        let target = target_state(&s, &d, &input);
        let mut last = 0.0;
        for db in [0.0, 1.0, 2.5, 5.1, 8.0, 12.0, 20.0] {
            let out = simulate_plan(&plan, &input, db).unwrap();
            let f = fidelity_gaussian_with_tolerance(&target, &out, 1e-6).unwrap().fidelity;
            prop_assert!(f >= last - 1e-12, "{db} dB: {f} < {last}");
            last = f;
        }
    }
}

#[test]
fn diagonal_squeeze_compiles_to_one_quarter_transmittance_squeezer() {
    let s = Matrix2::new(0.5, 0.0, 0.0, 2.0);
    let e = euler_decompose(&s).unwrap();
    assert!((e.r - LN_2).abs() < 1e-12);
    assert!(e.theta_pre.abs() < 1e-12 && e.theta_post.abs() < 1e-12);
    let plan = plan_from_unitary(&s, &Vector2::zeros()).unwrap();
    assert_eq!(plan.gates.len(), 1);
    match plan.gates[0] {
        Gate::Squeezer { r, transmittance, gain } => {
            assert!((r - LN_2).abs() < 1e-12);
            assert!((transmittance - 0.25).abs() < 1e-12);
            assert!((gain + 3f64.sqrt()).abs() < 1e-12);
        }
        g => panic!("unexpected gate {g:?}"),
    }
}

#[test]
fn identity_and_rotations_have_no_squeezer() {
    let e = euler_decompose(&Matrix2::identity()).unwrap();
    assert_eq!((e.theta_post, e.r, e.theta_pre), (0.0, 0.0, 0.0));
    assert!(plan_from_unitary(&Matrix2::identity(), &Vector2::zeros()).unwrap().gates.is_empty());
    let plan = plan_from_unitary(&rotation2(0.7), &Vector2::zeros()).unwrap();
    assert_eq!(plan.gates, vec![Gate::Rotation { theta: 0.7 }]);
    assert_eq!(plan.squeezer_count(), 0);
}

#[test]
fn finite_ancilla_matches_the_squeezer_curve() {
    let plan = plan_from_unitary(&Matrix2::new(0.5, 0.0, 0.0, 2.0), &Vector2::zeros()).unwrap();
    let out = simulate_plan(&plan, &GaussianState::vacuum(1).unwrap(), 5.1).unwrap();
    let expected = 0.0625 + 0.75 * 0.25 * 10f64.powf(-0.51);
    assert!((out.mode_cov(0)[(0, 0)] - expected).abs() < 1e-14);
    assert!((out.mode_cov(0)[(0, 0)] - 0.120_449).abs() < 1e-5);
}

#[test]
fn unsqueezed_ancilla_gives_the_classical_limit() {
    for t in [0.75, 0.5, 0.25] {
        let r = -0.5 * f64::ln(t);
        let s = Matrix2::new((-r).exp(), 0.0, 0.0, r.exp());
        let input = GaussianState::coherent(1.0, -1.0);
        let plan = plan_from_unitary(&s, &Vector2::zeros()).unwrap();
        let out = simulate_plan(&plan, &input, 0.0).unwrap();
        let target = target_state(&s, &Vector2::zeros(), &input);
        let f = fidelity_gaussian_with_tolerance(&target, &out, 1e-9).unwrap().fidelity;
        assert!((f - classical_limit_fidelity(t).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn non_symplectic_matrices_are_rejected() {
    assert!(euler_decompose(&Matrix2::new(2.0, 0.0, 0.0, 2.0)).is_err());
    assert!(plan_from_unitary(&Matrix2::new(1.0, 1.0, 1.0, 1.0), &Vector2::zeros()).is_err());
}

#[test]
fn plan_json_is_a_tagged_list() {
    let s = euler_matrix(0.3, 0.5, -0.2);
    let plan = plan_from_unitary(&s, &Vector2::new(1.0, 0.0)).unwrap();
    let json = serde_json::to_value(&plan).unwrap();
    let gates = json.as_array().unwrap();
    assert_eq!(gates.len(), 4);
    assert_eq!(gates[0]["gate"], "rotation");
    assert_eq!(gates[1]["gate"], "squeezer");
    assert_eq!(gates[3]["gate"], "displacement");
    let back: GatePlan = serde_json::from_value(json).unwrap();
    assert_eq!(back, plan);
}
