//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use polyturb::fene_sde::{ParticleState, Stepper};
use polyturb::rng::{Channel, NormalStream};
use polyturb::spectral_noise::{ModeSet, PhysParams};
use polyturb::stats::loglog_slope;
use polyturb::weights::corrected_weight;

/// Nine-point flux-form discretization of
/// `div(M₀ (I + α(3|r|²I − 2r⊗r)) ∇g)` at `p` with spacing `h`, where `g`
/// is the quotient `f/M₀` given on the plane.
pub fn tensor_operator_2d(
    kappa: f64,
    alpha: f64,
    g: impl Fn(f64, f64) -> f64,
    p: [f64; 2],
    h: f64,
) -> f64 {
    let diff = |q: [f64; 2]| {
        let s2 = q[0] * q[0] + q[1] * q[1];
        let m = corrected_weight(s2.sqrt(), kappa, alpha).unwrap();
        let dxx = m * (1.0 + alpha * (3.0 * s2 - 2.0 * q[0] * q[0]));
        let dxy = m * (-2.0 * alpha * q[0] * q[1]);
        let dyy = m * (1.0 + alpha * (3.0 * s2 - 2.0 * q[1] * q[1]));
        (dxx, dxy, dyy)
    };
    let gv = |i: f64, j: f64| g(p[0] + i * h, p[1] + j * h);
    // x-faces at p ± h/2 e_x
    let fx = |side: f64| {
        let (a, b) = if side > 0.0 { (1.0, 0.0) } else { (0.0, -1.0) };
        let q = [p[0] + 0.5 * side * h, p[1]];
        let (dxx, dxy, _) = diff(q);
        let gx = (gv(a, 0.0) - gv(b, 0.0)) / h;
        let gy = (gv(a, 1.0) + gv(b, 1.0) - gv(a, -1.0) - gv(b, -1.0)) / (4.0 * h);
        dxx * gx + dxy * gy
    };
    let fy = |side: f64| {
        let (a, b) = if side > 0.0 { (1.0, 0.0) } else { (0.0, -1.0) };
        let q = [p[0], p[1] + 0.5 * side * h];
        let (_, dxy, dyy) = diff(q);
        let gy = (gv(0.0, a) - gv(0.0, b)) / h;
        let gx = (gv(1.0, a) + gv(1.0, b) - gv(-1.0, a) - gv(-1.0, b)) / (4.0 * h);
        dxy * gx + dyy * gy
    };
    (fx(1.0) - fx(-1.0)) / h + (fy(1.0) - fy(-1.0)) / h
}

/// Smooth radial quotient used by the reduction checks.
pub fn radial_quotient(s2: f64) -> f64 {
    1.0 + 2.0 * s2 - s2 * s2
}

/// Strong errors `E|R_dt(T) − R_ref(T)|` of the splitting step for a flow
/// made of the first cos mode of shell 1, thermal noise off, with every
/// coarse path built from the same fine Brownian increments.
pub fn strong_errors(dts: &[f64], dt_ref: f64, t_end: f64, n_paths: usize) -> (Vec<f64>, Option<f64>) {
    let p = PhysParams::new(10.0, 1.0, 1.0, 1.0).unwrap();
    let m = ModeSet::build(1).unwrap();
    let n_fine = (t_end / dt_ref).round() as usize;
    let reference = Stepper::new(&p, &m, dt_ref);
    let coarse: Vec<(usize, Stepper)> = dts
        .iter()
        .map(|&dt| ((dt / dt_ref).round() as usize, Stepper::new(&p, &m, dt)))
        .collect();
    let mut errs = vec![0.0; dts.len()];
    let mut xi = vec![0.0; m.len()];
    for path in 0..n_paths {
        let mut s = NormalStream::new(path as u64, Channel::Flow, 0, 1);
        let mut z = [0.0];
        let dw: Vec<f64> = (0..n_fine)
            .map(|_| {
                s.draw_step(&mut z);
                z[0] * dt_ref.sqrt()
            })
            .collect();
        let start = ParticleState::new([0.7 + 0.1 * path as f64, 1.9], [0.3, 0.4]);
        let run = |stepper: &Stepper, k: usize, xi: &mut Vec<f64>| {
            let mut st = start;
            for block in dw.chunks(k) {
                xi[0] = block.iter().sum();
                st = stepper.step(&st, xi, [0.0, 0.0]).unwrap();
            }
            st
        };
        let r_ref = run(&reference, 1, &mut xi);
        for (e, (k, stepper)) in errs.iter_mut().zip(&coarse) {
            let r = run(stepper, *k, &mut xi);
            *e += (r.r[0] - r_ref.r[0]).hypot(r.r[1] - r_ref.r[1]) / n_paths as f64;
        }
    }
    let slope = loglog_slope(dts, &errs);
    (errs, slope)
}
