//! Brownian dynamics of FENE dumbbells in the synthetic flow.
//!
//! Each particle carries a center `X` on the torus `[0, 2π)²` and an
//! end-to-end vector `R` in the open unit disc. One step is a splitting
//!
//! 1. transport `X` by `Σ_k σ_k(X) ΔW^k` (Heun predictor–corrector),
//! 2. stretch `R` by `Σ_k (∇σ_k(X) R) ΔW^k`, Heun in `(X, R)`,
//! 3. thermal kick `√(2/β) ΔW̃`,
//! 4. backward-Euler spring relaxation along the direction of `R`.
//!
//! Step 4 solves `b (1 + c/(1 − b²)) = a` for the new length `b`, which has a
//! unique root in `[0, 1)` for every `a ≥ 0` once `c > 0`, so `|R| < 1`
//! holds whatever the size of the kicks.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::rng::{Channel, NormalStream, SHARED_STREAM};
use crate::spectral_noise::{AggregateFlowLaw, FlowField, ModeSet, PhysParams};
use crate::weights::corrected_unchecked;

/// Unique `b ∈ [0, 1)` with `b (1 + c/(1 − b²)) = a`.
pub fn implicit_spring_root(a: f64, c: f64) -> Result<f64> {
    if !(a >= 0.0 && c >= 0.0) || !a.is_finite() || !c.is_finite() {
        return Err(invalid(format!("spring root needs a, c >= 0 (got {a}, {c})")));
    }
    if c == 0.0 {
        return if a < 1.0 {
            Ok(a)
        } else {
            Err(Error::UnsolvableStep { a, c })
        };
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    // Newton on the cubic (1 − b²) · (a − f(b)) = b³ − a b² − (1 + c) b + a,
    // which is positive left of the root in [0, 1) and negative right of it
    let cubic = |b: f64| ((b - a) * b - (1.0 + c)) * b + a;
    let slope = |b: f64| (3.0 * b - 2.0 * a) * b - (1.0 + c);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut b = if a < 1.0 {
        let b0 = a / (1.0 + c);
        a / (1.0 + c / ((1.0 - b0) * (1.0 + b0)))
    } else {
        1.0 - 0.5 * c / a
    };
    b = b.clamp(0.0, 1.0 - f64::EPSILON);
    for _ in 0..200 {
        let v = cubic(b);
        if v == 0.0 {
            break;
        }
        if v > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        let d = slope(b);
        let next = b - v / d;
        if d < 0.0 && next > lo && next < hi {
            let step = (next - b).abs();
            b = next;
            if step <= 1e-9 * b {
                break;
            }
        } else {
            b = 0.5 * (lo + hi);
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let f = |b: f64| spring_residual(a, c, b);
    if f(b).abs() > 1e-13 {
        let d = (1.0 - b) * (1.0 + b);
        let next = b - f(b) / (1.0 + c * (1.0 + b * b) / (d * d));
        if (0.0..1.0).contains(&next) && f(next).abs() < f(b).abs() {
            b = next;
        }
    }
    // near b = 1 one ulp can move the residual by more than 1e-12; pick the
    // best neighbouring float there
    while f(b).abs() > 1e-13 {
        let here = f(b).abs();
        let up = b.next_up();
        let down = b.next_down();
        if up < 1.0 && f(up).abs() < here {
            b = up;
        } else if down >= 0.0 && f(down).abs() < here {
            b = down;
        } else {
            break;
        }
    }
    Ok(b)
}

/// `b(1 + c/(1 − b²)) − a`, with `1 − b²` formed without cancellation.
pub fn spring_residual(a: f64, c: f64, b: f64) -> f64 {
    b + c * b / ((1.0 - b) * (1.0 + b)) - a
}

/// Position and end-to-end vector of one dumbbell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub x: [f64; 2],
    pub r: [f64; 2],
}

impl ParticleState {
    pub fn new(x: [f64; 2], r: [f64; 2]) -> Self {
        Self {
            x: [x[0].rem_euclid(TAU), x[1].rem_euclid(TAU)],
            r,
        }
    }

    pub fn elongation(&self) -> f64 {
        self.r[0].hypot(self.r[1])
    }

    fn rv(&self) -> Vector2<f64> {
        Vector2::new(self.r[0], self.r[1])
    }
}

fn wrap(x: Vector2<f64>) -> [f64; 2] {
    [x.x.rem_euclid(TAU), x.y.rem_euclid(TAU)]
}

/// Stratonovich–Heun stretch, thermal kick and implicit spring for one
/// vector, given the stretching matrices at the start point and at the
/// predicted position.
#[inline]
fn advance_r(
    r: Vector2<f64>,
    g0: &Matrix2<f64>,
    g1: &Matrix2<f64>,
    kick: Vector2<f64>,
    spring_c: f64,
) -> Result<Vector2<f64>> {
    let s0 = g0 * r;
    let r_pred = r + s0;
    let r_mid = r + 0.5 * (s0 + g1 * r_pred) + kick;
    let a = r_mid.norm();
    if a == 0.0 {
        return Ok(r_mid);
    }
    let b = implicit_spring_root(a, spring_c)?;
    Ok(r_mid * (b / a))
}

/// Precomputed per-mode evaluator plus the constants of one time step.
#[derive(Debug, Clone)]
pub struct Stepper {
    field: FlowField,
    thermal_scale: f64,
    spring_c: f64,
}

impl Stepper {
    pub fn new(p: &PhysParams, m: &ModeSet, dt: f64) -> Self {
        Self {
            field: FlowField::new(m, p),
            thermal_scale: (2.0 / p.beta).sqrt(),
            spring_c: dt * p.kappa / p.beta,
        }
    }

    /// Transport predictor–corrector; returns the new position and the
    /// stretching matrices at the old and predicted positions.
    pub fn transport(&self, x: [f64; 2], flow: &[f64]) -> ([f64; 2], Matrix2<f64>, Matrix2<f64>) {
        let (u0, g0) = self.field.eval(x, flow);
        let xp = [x[0] + u0.x, x[1] + u0.y];
        let (u1, g1) = self.field.eval(xp, flow);
        let xn = Vector2::new(x[0], x[1]) + 0.5 * (u0 + u1);
        (wrap(xn), g0, g1)
    }

    /// [`transport`](Self::transport) for several positions at once.
    pub fn transport_many(
        &self,
        xs: &[[f64; 2]],
        flow: &[f64],
    ) -> Vec<([f64; 2], Matrix2<f64>, Matrix2<f64>)> {
        let first = self.field.eval_many(xs, flow);
        let pred: Vec<[f64; 2]> = xs
            .iter()
            .zip(&first)
            .map(|(x, (u0, _))| [x[0] + u0.x, x[1] + u0.y])
            .collect();
        let second = self.field.eval_many(&pred, flow);
        xs.iter()
            .zip(first.into_iter().zip(second))
            .map(|(x, ((u0, g0), (u1, g1)))| {
                let xn = Vector2::new(x[0], x[1]) + 0.5 * (u0 + u1);
                (wrap(xn), g0, g1)
            })
            .collect()
    }

    pub fn step(
        &self,
        st: &ParticleState,
        flow: &[f64],
        thermal: [f64; 2],
    ) -> Result<ParticleState> {
        let (x, g0, g1) = self.transport(st.x, flow);
        let kick = Vector2::new(thermal[0], thermal[1]) * self.thermal_scale;
        let r = advance_r(st.rv(), &g0, &g1, kick, self.spring_c)?;
        Ok(ParticleState { x, r: [r.x, r.y] })
    }
}

/// One splitting step for a single particle.
///
/// `flow_increments` holds one Brownian increment per mode of `m` (already
/// scaled by `√dt`, cos modes first), `thermal_increment` the thermal
/// Brownian increment (scaled by `√dt`).
pub fn step_particle(
    st: &ParticleState,
    p: &PhysParams,
    m: &ModeSet,
    dt: f64,
    flow_increments: &[f64],
    thermal_increment: [f64; 2],
) -> Result<ParticleState> {
    if st.elongation() >= 1.0 {
        return Err(crate::error::domain("|R| must be < 1"));
    }
    if flow_increments.len() != m.len() {
        return Err(invalid(format!(
            "expected {} flow increments, got {}",
            m.len(),
            flow_increments.len()
        )));
    }
    Stepper::new(p, m, dt).step(st, flow_increments, thermal_increment)
}

/// Law of the initial end-to-end vectors (isotropic in angle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLaw {
    /// Every `R = 0`.
    Origin,
    /// Equilibrium of the bare spring, `∝ (1 − |r|²)^{κ/2}`.
    Fene,
    /// Uniform on the disc.
    UniformDisc,
}

impl InitialLaw {
    /// Inverse CDF of the radial marginal.
    pub fn radius(&self, kappa: f64, u: f64) -> f64 {
        match self {
            InitialLaw::Origin => 0.0,
            // P(|R| ≤ s) = 1 − (1 − s²)^{κ/2 + 1}
            InitialLaw::Fene => (1.0 - (1.0 - u).powf(1.0 / (0.5 * kappa + 1.0))).sqrt(),
            InitialLaw::UniformDisc => u.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// One flow realization for all particles instead of one per particle.
    pub shared_flow: bool,
    /// Distinct initial centers under a shared flow; particle `i` starts at
    /// site `i mod n_sites`. `None` gives every particle its own site.
    pub n_sites: Option<usize>,
    /// Summary statistics every this many steps (and at the final step).
    pub record_every: usize,
    pub initial: InitialLaw,
    /// Abort once `n_particles × steps` would exceed this budget.
    pub max_particle_steps: Option<u64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_particles: 1000,
            dt: 1e-3,
            t_end: 1.0,
            seed: 0,
            shared_flow: false,
            n_sites: None,
            record_every: 100,
            initial: InitialLaw::Fene,
            max_particle_steps: None,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("n_particles must be positive"));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return Err(invalid("dt and t_end must be positive"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every must be positive"));
        }
        if self.n_sites == Some(0) {
            return Err(invalid("n_sites must be positive"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t: f64,
    pub mean_sq_elong: f64,
    pub frac_stretched: f64,
}

/// Elongation threshold of the "stretched" fraction.
pub const STRETCHED: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    pub states: Vec<ParticleState>,
    pub series: Vec<SummaryRow>,
    pub steps_done: u64,
    /// Set when the particle-step budget cut the run short.
    pub truncated: bool,
    /// Particle-steps that ended with `|R| ≥ 1` or a non-finite state.
    pub violations: u64,
    pub max_elongation: f64,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    sum_sq: Vec<f64>,
    stretched: Vec<u64>,
    violations: u64,
    max_elong: f64,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            sum_sq: vec![0.0; n],
            stretched: vec![0; n],
            violations: 0,
            max_elong: 0.0,
        }
    }

    fn record(&mut self, slot: usize, r: &Vector2<f64>) {
        let s2 = r.norm_squared();
        self.sum_sq[slot] += s2;
        if s2 > STRETCHED * STRETCHED {
            self.stretched[slot] += 1;
        }
    }

    fn check(&mut self, r: &Vector2<f64>) {
        let s = r.norm();
        if !(s < 1.0) {
            self.violations += 1;
        }
        if s > self.max_elong || !s.is_finite() {
            self.max_elong = s;
        }
    }

    fn merge(&mut self, o: &Tally) {
        for (a, b) in self.sum_sq.iter_mut().zip(&o.sum_sq) {
            *a += b;
        }
        for (a, b) in self.stretched.iter_mut().zip(&o.stretched) {
            *a += b;
        }
        self.violations += o.violations;
        if o.max_elong > self.max_elong || !o.max_elong.is_finite() {
            self.max_elong = o.max_elong;
        }
    }
}

/// Particles per work item; fixed so that reductions do not depend on the
/// number of workers.
const CHUNK: usize = 512;
/// Time steps per block of precomputed shared-flow matrices.
const BLOCK: u64 = 64;
const THERMAL_PER_STEP: usize = 2;
const AGG_FLOW_PER_STEP: usize = 6;

fn record_steps(n_steps: u64, every: usize) -> Vec<u64> {
    let mut v: Vec<u64> = (0..=n_steps).step_by(every).collect();
    if *v.last().unwrap() != n_steps {
        v.push(n_steps);
    }
    v
}

fn initial_state(cfg: &EnsembleConfig, p: &PhysParams, i: usize) -> ParticleState {
    let mut s = NormalStream::new(cfg.seed, Channel::Init, i as u64, 1);
    let x = [TAU * s.uniform(), TAU * s.uniform()];
    let rad = cfg.initial.radius(p.kappa, s.uniform());
    let ang = TAU * s.uniform();
    ParticleState {
        x,
        r: [rad * ang.cos(), rad * ang.sin()],
    }
}

fn site_position(seed: u64, site: usize) -> [f64; 2] {
    let mut s = NormalStream::new(seed, Channel::SiteInit, site as u64, 1);
    [TAU * s.uniform(), TAU * s.uniform()]
}

/// Simulate the ensemble and collect summary statistics.
///
/// Output is a deterministic function of the configuration, the parameters
/// and the mode enumeration; the number of worker threads does not matter.
pub fn simulate_ensemble(
    cfg: &EnsembleConfig,
    p: &PhysParams,
    m: &ModeSet,
) -> Result<EnsembleOutput> {
    cfg.validate()?;
    p.validate()?;
    let full_steps = cfg.n_steps();
    let mut steps = full_steps;
    let mut truncated = false;
    if let Some(budget) = cfg.max_particle_steps {
        let allowed = budget / cfg.n_particles as u64;
        if allowed < full_steps {
            steps = allowed;
            truncated = true;
        }
    }
    let recs = record_steps(steps, cfg.record_every);
    let (states, tally) = if cfg.shared_flow {
        run_shared(cfg, p, m, steps, &recs)?
    } else {
        run_independent(cfg, p, m, steps, &recs)?
    };
    let n = cfg.n_particles as f64;
    let series = recs
        .iter()
        .enumerate()
        .map(|(j, &k)| SummaryRow {
            t: k as f64 * cfg.dt,
            mean_sq_elong: tally.sum_sq[j] / n,
            frac_stretched: tally.stretched[j] as f64 / n,
        })
        .collect();
    Ok(EnsembleOutput {
        states,
        series,
        steps_done: steps,
        truncated,
        violations: tally.violations,
        max_elongation: tally.max_elong,
    })
}

fn merge_chunks(
    parts: Vec<Result<(Vec<ParticleState>, Tally)>>,
    n_recs: usize,
) -> Result<(Vec<ParticleState>, Tally)> {
    let mut states = Vec::new();
    let mut tally = Tally::new(n_recs);
    for part in parts {
        let (s, t) = part?;
        states.extend(s);
        tally.merge(&t);
    }
    Ok((states, tally))
}

/// Independent flow realizations: the aggregate increment `(ΔX, G)` of each
/// particle is drawn from its exact Gaussian law, which does not depend on
/// the position.
fn run_independent(
    cfg: &EnsembleConfig,
    p: &PhysParams,
    m: &ModeSet,
    steps: u64,
    recs: &[u64],
) -> Result<(Vec<ParticleState>, Tally)> {
    let law = AggregateFlowLaw::new(m, p);
    let sqrt_dt = cfg.dt.sqrt();
    let thermal_scale = (2.0 / p.beta).sqrt() * sqrt_dt;
    let spring_c = cfg.dt * p.kappa / p.beta;
    let ids: Vec<usize> = (0..cfg.n_particles).collect();
    let parts: Vec<_> = ids
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut tally = Tally::new(recs.len());
            let mut out = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let st = initial_state(cfg, p, i);
                let mut flow = NormalStream::new(cfg.seed, Channel::Flow, i as u64, AGG_FLOW_PER_STEP);
                let mut thermal =
                    NormalStream::new(cfg.seed, Channel::Thermal, i as u64, THERMAL_PER_STEP);
                let mut x = Vector2::new(st.x[0], st.x[1]);
                let mut r = st.rv();
                let mut next_rec = 0;
                let mut z = [0.0; AGG_FLOW_PER_STEP];
                let mut w = [0.0; THERMAL_PER_STEP];
                for step in 0..=steps {
                    if next_rec < recs.len() && recs[next_rec] == step {
                        tally.record(next_rec, &r);
                        next_rec += 1;
                    }
                    if step == steps {
                        break;
                    }
                    flow.draw_step(&mut z);
                    thermal.draw_step(&mut w);
                    let (dx, g) = law.sample(&z, sqrt_dt);
                    x += dx;
                    let kick = Vector2::new(w[0], w[1]) * thermal_scale;
                    r = advance_r(r, &g, &g, kick, spring_c)?;
                    tally.check(&r);
                }
                out.push(ParticleState {
                    x: wrap(x),
                    r: [r.x, r.y],
                });
            }
            Ok((out, tally))
        })
        .collect();
    merge_chunks(parts, recs.len())
}

/// One shared flow realization; particles started at the same site follow
/// the same center path, so the per-mode field is evaluated once per site.
const SITE_CHUNK: usize = 32;

fn run_shared(
    cfg: &EnsembleConfig,
    p: &PhysParams,
    m: &ModeSet,
    steps: u64,
    recs: &[u64],
) -> Result<(Vec<ParticleState>, Tally)> {
    let n_sites = cfg.n_sites.unwrap_or(cfg.n_particles).min(cfg.n_particles);
    let stepper = Stepper::new(p, m, cfg.dt);
    let sqrt_dt = cfg.dt.sqrt();
    let thermal_scale = stepper.thermal_scale * sqrt_dt;
    let mut sites: Vec<[f64; 2]> = (0..n_sites).map(|s| site_position(cfg.seed, s)).collect();
    let mut states: Vec<ParticleState> = (0..cfg.n_particles)
        .map(|i| {
            let mut st = initial_state(cfg, p, i);
            st.x = sites[i % n_sites];
            st
        })
        .collect();
    let mut tally = Tally::new(recs.len());
    let mut flow_stream = NormalStream::new(cfg.seed, Channel::Flow, SHARED_STREAM, m.len());
    let mut xi = vec![0.0; m.len()];
    let mut next_rec = 0;
    if recs.first() == Some(&0) {
        for st in &states {
            tally.record(0, &st.rv());
        }
        next_rec = 1;
    }
    let mut start = 0;
    while start < steps {
        let end = (start + BLOCK).min(steps);
        let nb = (end - start) as usize;
        // (G at start point, G at predicted point) per step and site
        let mut mats: Vec<(Matrix2<f64>, Matrix2<f64>)> = Vec::with_capacity(nb * n_sites);
        for _ in start..end {
            flow_stream.draw_step(&mut xi);
            for z in xi.iter_mut() {
                *z *= sqrt_dt;
            }
            let row: Vec<([f64; 2], Matrix2<f64>, Matrix2<f64>)> = sites
                .par_chunks(SITE_CHUNK)
                .flat_map_iter(|xs| stepper.transport_many(xs, &xi))
                .collect();
            for (s, (x, g0, g1)) in row.into_iter().enumerate() {
                sites[s] = x;
                mats.push((g0, g1));
            }
        }
        let block_recs: Vec<(usize, u64)> = recs
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > start && k <= end)
            .map(|(j, &k)| (j, k))
            .collect();
        let parts: Vec<Result<Tally>> = states
            .par_chunks_mut(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut t = Tally::new(recs.len());
                let mut w = [0.0; THERMAL_PER_STEP];
                for (o, st) in chunk.iter_mut().enumerate() {
                    let i = c * CHUNK + o;
                    let site = i % n_sites;
                    let mut thermal = NormalStream::at(
                        cfg.seed,
                        Channel::Thermal,
                        i as u64,
                        THERMAL_PER_STEP,
                        start,
                    );
                    let mut r = st.rv();
                    let mut br = 0;
                    for b in 0..nb {
                        thermal.draw_step(&mut w);
                        let (g0, g1) = &mats[b * n_sites + site];
                        let kick = Vector2::new(w[0], w[1]) * thermal_scale;
                        r = advance_r(r, g0, g1, kick, stepper.spring_c)?;
                        t.check(&r);
                        let step = start + b as u64 + 1;
                        if br < block_recs.len() && block_recs[br].1 == step {
                            t.record(block_recs[br].0, &r);
                            br += 1;
                        }
                    }
                    st.r = [r.x, r.y];
                }
                Ok(t)
            })
            .collect();
        for part in parts {
            tally.merge(&part?);
        }
        next_rec += block_recs.len();
        start = end;
    }
    debug_assert_eq!(next_rec, recs.len());
    for (i, st) in states.iter_mut().enumerate() {
        st.x = sites[i % n_sites];
    }
    Ok((states, tally))
}

/// Binned density of `|R|` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    /// Monte-Carlo standard error of each density value.
    pub stderr: Vec<f64>,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.density.len()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.edges[j + 1] - self.edges[j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn elongation_histogram(states: &[ParticleState], n_bins: usize) -> Result<Histogram> {
    if n_bins < 10 {
        return Err(invalid(format!("need at least 10 bins (got {n_bins})")));
    }
    if states.is_empty() {
        return Err(invalid("empty state set"));
    }
    let mut counts = vec![0u64; n_bins];
    for st in states {
        let j = ((st.elongation() * n_bins as f64) as usize).min(n_bins - 1);
        counts[j] += 1;
    }
    let n = states.len() as f64;
    let w = 1.0 / n_bins as f64;
    let density = counts.iter().map(|&c| c as f64 / (n * w)).collect();
    let stderr = counts
        .iter()
        .map(|&c| {
            let q = c as f64 / n;
            (q * (1.0 - q) / n).sqrt() / w
        })
        .collect();
    Ok(Histogram {
        edges: (0..=n_bins).map(|j| j as f64 * w).collect(),
        counts,
        density,
        stderr,
    })
}

/// Bin averages of the normalized elongation density `p(s) ∝ s M₀(s)`.
pub fn reference_marginal(kappa: f64, gamma: f64, n_bins: usize) -> Result<Vec<f64>> {
    if !(kappa > 0.0 && gamma >= 0.0) {
        return Err(invalid("reference marginal needs kappa > 0, gamma >= 0"));
    }
    if n_bins == 0 {
        return Err(invalid("n_bins must be positive"));
    }
    let f = |s: f64| s * corrected_unchecked(s, kappa, gamma);
    let w = 1.0 / n_bins as f64;
    let masses: Vec<f64> = (0..n_bins)
        .map(|j| quad::integrate(f, j as f64 * w, (j + 1) as f64 * w, 1e-12))
        .collect();
    let total: f64 = masses.iter().sum();
    Ok(masses.iter().map(|m| m / (total * w)).collect())
}

/// Pearson χ² of binned counts against expected bin probabilities.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &q)| {
            let e = n as f64 * q;
            if e > 0.0 {
                (c as f64 - e).powi(2) / e
            } else if c == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .sum()
}
