use nalgebra::{Matrix2, Vector2};
use polyturb::spectral_noise::{
    corrector_matrix, grad_sigma_apply, limit_matrix, FlowField, ModeSet, PhysParams,
};
use polyturb::weights::{
    closed_form_marginal, coil_stretch_params, corrected_weight, marginal_equivalence_check,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corrector_does_not_depend_on_position(
        x in proptest::array::uniform2(0.0f64..6.3),
        rad in 0.0f64..0.99,
        ang in 0.0f64..6.3,
        n in 1i64..12,
    ) {
        let p = PhysParams::new(10.0, 1.0, 0.7, 1.3).unwrap();
        let m = ModeSet::build(n).unwrap();
        let r = Vector2::new(rad * ang.cos(), rad * ang.sin());
        let direct: Matrix2<f64> = grad_sigma_apply(&m, &p, x, r)
            .unwrap()
            .iter()
            .map(|v| v * v.transpose())
            .sum();
        let closed = corrector_matrix(&m, &p, r).0;
        prop_assert!((direct - closed).abs().max() <= 1e-12 * closed.abs().max().max(1e-300));
    }

    #[test]
    fn limit_matrix_eigenpairs(rad in 0.0f64..0.999, ang in 0.0f64..6.3, kt in 0.0f64..5.0) {
        let r = Vector2::new(rad * ang.cos(), rad * ang.sin());
        let a = limit_matrix(r, kt).unwrap().0;
        let s2 = r.norm_squared();
        let rp = Vector2::new(-r.y, r.x);
        prop_assert!((a * r - r * (kt * s2)).norm() <= 1e-12);
        prop_assert!((a * rp - rp * (3.0 * kt * s2)).norm() <= 1e-12);
    }

    #[test]
    fn batched_field_is_bitwise_pointwise(
        xs in proptest::collection::vec(proptest::array::uniform2(0.0f64..6.3), 1..20),
        seed in 0u64..1000,
    ) {
        let p = PhysParams::new(10.0, 1.0, 0.2, 1.0).unwrap();
        let m = ModeSet::build(5).unwrap();
        let f = FlowField::new(&m, &p);
        let xi: Vec<f64> = (0..m.len())
            .map(|i| (((i as u64 + seed) * 2654435761) % 1000) as f64 / 1000.0 - 0.5)
            .collect();
        let one: Vec<_> = xs.iter().map(|&x| f.eval(x, &xi)).collect();
        prop_assert_eq!(one, f.eval_many(&xs, &xi));
    }

    #[test]
    fn weight_is_a_power_of_the_rational_factor(
        s in 0.0f64..0.999,
        kappa in 0.5f64..40.0,
        gamma in 0.0f64..3.0,
    ) {
        // M₀^{1/h} (1 + γs²) = 1 − s² with h = κ/(2(1+γ))
        let h = coil_stretch_params(kappa, 2.0 * gamma, 1.0).h;
        let w = corrected_weight(s, kappa, gamma).unwrap();
        prop_assume!(w > 1e-200);
        let lhs = w.powf(1.0 / h) * (1.0 + gamma * s * s);
        prop_assert!((lhs - (1.0 - s * s)).abs() <= 1e-12);
    }

    #[test]
    fn closed_form_matches_weight(kappa in 2.0f64..30.0, alpha in 0.0f64..2.0) {
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        prop_assert!(marginal_equivalence_check(kappa, alpha, &grid).unwrap() <= 1e-12);
    }
}

#[test]
fn closed_form_vanishes_at_both_ends() {
    assert_eq!(closed_form_marginal(0.0, 0.04, 0.1, 1.0), 0.0);
    assert_eq!(closed_form_marginal(1.0, 0.04, 0.1, 1.0), 0.0);
}
