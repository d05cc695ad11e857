mod common;

use polyturb::fene_sde::{
    elongation_histogram, implicit_spring_root, simulate_ensemble, spring_residual,
    step_particle, EnsembleConfig, InitialLaw, ParticleState, Stepper,
};
use polyturb::spectral_noise::{ModeSet, PhysParams};
use proptest::prelude::*;

proptest! {
    #[test]
    fn spring_root_in_range_and_monotone(a in 0.0f64..50.0, c in 1e-8f64..1e3, da in 1e-6f64..1.0) {
        let b = implicit_spring_root(a, c).unwrap();
        prop_assert!((0.0..1.0).contains(&b));
        // residual within what one ulp of b can resolve
        let ulp = spring_residual(a, c, f64::from_bits(b.to_bits() + 1)) - spring_residual(a, c, b);
        prop_assert!(spring_residual(a, c, b).abs() <= 1e-12_f64.max(ulp.abs()));
        let b2 = implicit_spring_root(a + da, c).unwrap();
        prop_assert!(b2 >= b);
    }

    #[test]
    fn step_stays_inside_the_disc(
        rad in 0.0f64..0.999_999,
        ang in 0.0f64..6.3,
        flow in proptest::collection::vec(-3.0f64..3.0, 48),
        th in proptest::array::uniform2(-5.0f64..5.0),
        dt in 1e-4f64..1e-1,
    ) {
        let p = PhysParams::new(10.0, 1.0, 2.0, 1.0).unwrap();
        let m = ModeSet::build(3).unwrap();
        let n = m.len();
        let inc: Vec<f64> = flow.iter().cycle().take(n).map(|z| z * dt.sqrt()).collect();
        let st = ParticleState::new([1.0, 2.0], [rad * ang.cos(), rad * ang.sin()]);
        let out = step_particle(&st, &p, &m, dt, &inc, [th[0] * dt.sqrt(), th[1] * dt.sqrt()]).unwrap();
        prop_assert!(out.elongation() < 1.0);
        prop_assert!(out.x.iter().all(|v| (0.0..2.0 * std::f64::consts::PI).contains(v)));
    }
}

#[test]
fn zero_noise_relaxation_is_first_order() {
    // exact solution of ṡ = −c s/(1 − s²): ln s − s²/2 decreases at rate c
    let p = PhysParams::new(10.0, 1.0, 0.0, 1.0).unwrap();
    let m = ModeSet::build(1).unwrap();
    let zeros = vec![0.0; m.len()];
    let (s0, t_end) = (0.9f64, 0.05);
    let c = p.kappa / p.beta;
    let target = s0.ln() - 0.5 * s0 * s0 - c * t_end;
    // φ(s) = ln s − s²/2 is increasing on (0, 1)
    let (mut lo, mut hi) = (0.0f64, s0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.ln() - 0.5 * mid * mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let exact = 0.5 * (lo + hi);
    let dts = [1e-3, 5e-4, 2.5e-4, 1.25e-4];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let stepper = Stepper::new(&p, &m, dt);
            let mut st = ParticleState::new([0.0, 0.0], [s0, 0.0]);
            for _ in 0..(t_end / dt).round() as usize {
                st = stepper.step(&st, &zeros, [0.0, 0.0]).unwrap();
            }
            (st.elongation() - exact).abs()
        })
        .collect();
    let slope = polyturb::stats::loglog_slope(&dts, &errs).unwrap();
    assert!((slope - 1.0).abs() < 0.1, "slope {slope}, errors {errs:?}");
}

#[test]
fn strong_order_one_for_commutative_noise() {
    let (errs, slope) = common::strong_errors(&[1e-2, 1e-3, 1e-4], 1e-6, 0.5, 8);
    let slope = slope.unwrap();
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}, errors {errs:?}");
}

#[test]
fn thermal_equilibrium_second_moment() {
    // E|R|² under (1 − s²)^{κ/2} in two dimensions is 1/(κ/2 + 2)
    let p = PhysParams::new(10.0, 0.01, 0.0, 1.0).unwrap();
    let m = ModeSet::build(1).unwrap();
    let cfg = EnsembleConfig {
        n_particles: 20_000,
        dt: 1e-4,
        t_end: 0.02,
        seed: 5,
        initial: InitialLaw::Origin,
        record_every: 50,
        ..Default::default()
    };
    let out = simulate_ensemble(&cfg, &p, &m).unwrap();
    let msq = out.series.last().unwrap().mean_sq_elong;
    // 3 standard errors: Var|R|² ≈ 0.01 for this law
    let tol = 3.0 * (0.01f64 / 20_000.0).sqrt() + 0.005;
    assert!((msq - 1.0 / 7.0).abs() < tol, "mean |R|² = {msq}");
}

#[test]
fn boundary_preserved_over_many_steps() {
    // γ = 1, 10⁷ particle-steps per step size
    let p = PhysParams::new(10.0, 1.0, 2.0, 1.0).unwrap();
    let m = ModeSet::build(8).unwrap();
    for &(dt, t_end) in &[(1e-2, 10.0), (1e-3, 1.0)] {
        let cfg = EnsembleConfig {
            n_particles: 10_000,
            dt,
            t_end,
            seed: 11,
            record_every: 1000,
            ..Default::default()
        };
        let out = simulate_ensemble(&cfg, &p, &m).unwrap();
        assert_eq!(out.steps_done * 10_000, 10_000_000);
        assert_eq!(out.violations, 0);
        assert!(out.max_elongation < 1.0);
    }
}

#[test]
fn same_output_for_any_thread_count() {
    let p = PhysParams::new(10.0, 1.0, 0.2, 1.0).unwrap();
    let m = ModeSet::build(4).unwrap();
    for shared in [false, true] {
        let cfg = EnsembleConfig {
            n_particles: 3000,
            dt: 1e-3,
            t_end: 0.1,
            seed: 3,
            shared_flow: shared,
            n_sites: shared.then_some(40),
            record_every: 10,
            ..Default::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble(&cfg, &p, &m).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.states, b.states);
        assert_eq!(a.series, b.series);
    }
}

#[test]
fn initial_laws_match_their_cdfs() {
    let p = PhysParams::new(6.0, 1.0, 0.0, 1.0).unwrap();
    let m = ModeSet::build(1).unwrap();
    let n = 200_000;
    for law in [InitialLaw::Fene, InitialLaw::UniformDisc] {
        let cfg = EnsembleConfig {
            n_particles: n,
            dt: 1e-3,
            t_end: 1e-3,
            seed: 9,
            initial: law,
            max_particle_steps: Some(0),
            ..Default::default()
        };
        let out = simulate_ensemble(&cfg, &p, &m).unwrap();
        assert!(out.truncated);
        let h = elongation_histogram(&out.states, 20).unwrap();
        for j in 0..20 {
            let (lo, hi) = (h.edges[j], h.edges[j + 1]);
            let cdf = |s: f64| match law {
                InitialLaw::Fene => 1.0 - (1.0 - s * s).powf(4.0),
                _ => s * s,
            };
            let expected = (cdf(hi) - cdf(lo)) / (hi - lo);
            assert!(
                (h.density[j] - expected).abs() <= 4.0 * h.stderr[j] + 1e-9,
                "{law:?} bin {j}: {} vs {expected}",
                h.density[j]
            );
        }
    }
}
