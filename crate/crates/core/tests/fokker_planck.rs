mod common;

use polyturb::fokker_planck::{
    evolve_with, h0_distance, hardy_exponent, singular_limit_sweep, spectral_gap, steady_state,
    DiscreteOperator, RadialDensity, RadialGrid, Scheme, SweepSpec,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn positivity_and_mass(
        vals in proptest::collection::vec(0.0f64..5.0, 32),
        kappa in 3.0f64..20.0,
        alpha in 0.0f64..1.5,
        dt in 1e-4f64..1e-1,
        cn in any::<bool>(),
    ) {
        let grid = RadialGrid::new(32, 2.0).unwrap();
        let op = DiscreteOperator::assemble(&grid, kappa, alpha, 1.0).unwrap();
        let f0 = RadialDensity::new(grid, vec![vals]).unwrap();
        let m0 = f0.total_mass();
        // implicit Euler is positivity preserving at any step; Crank–Nicolson
        // only conserves mass
        let scheme = if cn { Scheme::CrankNicolson } else { Scheme::ImplicitEuler };
        let f = evolve_with(&f0, &op, dt, 20.0 * dt, scheme, |_, _| {}).unwrap();
        prop_assert!((f.total_mass() - m0).abs() <= 1e-12 * m0.max(1.0));
        if !cn {
            prop_assert!(f.single().iter().all(|v| *v >= -1e-14 * m0.max(1.0)));
        }
    }

    #[test]
    fn operator_is_an_m_matrix(kappa in 0.5f64..30.0, alpha in 0.0f64..3.0, q in 1.0f64..3.0) {
        let grid = RadialGrid::new(24, q).unwrap();
        let op = DiscreteOperator::assemble(&grid, kappa, alpha, 1.0).unwrap();
        prop_assert!(op.is_m_matrix());
        let res = op.apply(op.weight_at_centers());
        let scale = op.weight_at_centers().iter().cloned().fold(0.0, f64::max);
        prop_assert!(res.iter().all(|v| v.abs() <= 1e-13 * scale));
    }
}

#[test]
fn radial_operator_matches_planar_stencil() {
    let th: f64 = 0.9;
    let pt = [0.475 * th.cos(), 0.475 * th.sin()];
    let diffs: Vec<f64> = [20usize, 60, 180]
        .iter()
        .map(|&n| {
            let g = RadialGrid::new(n, 1.0).unwrap();
            let op = DiscreteOperator::assemble(&g, 10.0, 0.1, 1.0).unwrap();
            let j = g.centers().iter().position(|c| (c - 0.475).abs() < 1e-12).unwrap();
            let f: Vec<f64> = g
                .centers()
                .iter()
                .zip(op.weight_at_centers())
                .map(|(s, m)| m * common::radial_quotient(s * s))
                .collect();
            let planar = common::tensor_operator_2d(
                10.0,
                0.1,
                |x, y| common::radial_quotient(x * x + y * y),
                pt,
                1.0 / n as f64,
            );
            (op.apply(&f)[j] - planar).abs()
        })
        .collect();
    for w in diffs.windows(2) {
        let order = (w[0] / w[1]).ln() / 3f64.ln();
        assert!((order - 2.0).abs() < 0.2, "order {order}, diffs {diffs:?}");
    }
}

#[test]
fn stationary_datum_sweep_is_flat() {
    let grid = RadialGrid::new(64, 2.0).unwrap();
    let op = DiscreteOperator::assemble(&grid, 10.0, 0.1, 1.0).unwrap();
    let f0 = steady_state(&op);
    let spec = SweepSpec {
        kappa: 10.0,
        alpha: 0.1,
        zeta: 1.0,
        t_end: 0.1,
        dt_over_zeta_tau: 0.1,
        scheme: Scheme::ImplicitEuler,
    };
    let res = singular_limit_sweep(&[0.1, 0.05], &spec, &f0).unwrap();
    assert!(res.rows.iter().all(|r| r.integral == Some(0.0)));
    assert!(res.slope.is_none());
    assert!(h0_distance(&f0, &op) < 1e-28);
}

#[test]
fn gap_grows_with_stiffness() {
    let grid = RadialGrid::new(128, 2.0).unwrap();
    let gaps: Vec<f64> = [4.0, 10.0, 20.0]
        .iter()
        .map(|&k| spectral_gap(&DiscreteOperator::assemble(&grid, k, 0.1, 1.0).unwrap()).unwrap())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
    assert!((hardy_exponent(10.0, 0.1) - 10.0 / 2.2).abs() < 1e-14);
}
