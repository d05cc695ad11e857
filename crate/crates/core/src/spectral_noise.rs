//! Synthetic turbulent velocity modes on the flat 2-torus.
//!
//! The velocity is `u(x, t) = Σ_k σ_k(x) dW^k_t` over a spectral shell
//! `N ≤ |k| ≤ 2N`. Modes in the upper half lattice `K₊` carry a cosine
//! profile, their negations in `K₋` carry a sine profile, and every mode is
//! transverse (`σ_k ∥ k⊥`), so the field is exactly divergence free.
//!
//! Besides evaluating fields and stretching gradients this module computes
//! the Itô–Stratonovich corrector matrix `A^N(r)`, its large-`N` limit
//! `A(r) = k_T (3|r|² I − 2 r⊗r)` and the spatial diffusion coefficient
//! `α_N`.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};

/// Physical parameters of the dumbbell/turbulence system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    /// Dimensionless spring constant κ.
    pub kappa: f64,
    /// Polymer relaxation time β.
    pub beta: f64,
    /// Turbulence intensity λ (zero switches the flow off).
    pub lambda: f64,
    /// Flow time scale τ.
    pub tau: f64,
}

impl PhysParams {
    pub fn new(kappa: f64, beta: f64, lambda: f64, tau: f64) -> Result<Self> {
        let p = Self {
            kappa,
            beta,
            lambda,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `k_T β` fixed: `β = 1`, `τ = 1`, `λ = k_T β`.
    pub fn from_kt_beta(kappa: f64, kt_beta: f64) -> Result<Self> {
        Self::new(kappa, 1.0, kt_beta, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.beta > 0.0 && self.tau > 0.0) {
            return Err(invalid(format!(
                "kappa, beta and tau must be positive (got {}, {}, {})",
                self.kappa, self.beta, self.tau
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be >= 0 (got {})", self.lambda)));
        }
        Ok(())
    }

    /// Amplitude `a_τ = √(λ/τ · 8/(π log 2))`.
    pub fn a_tau(&self) -> f64 {
        (self.lambda / self.tau * 8.0 / (PI * LN_2)).sqrt()
    }

    /// Stretching rate `k_T = λ/τ`.
    pub fn k_t(&self) -> f64 {
        self.lambda / self.tau
    }

    /// Ratio `ζ = β/τ`.
    pub fn zeta(&self) -> f64 {
        self.beta / self.tau
    }

    /// Exponent parameter `γ = k_T β / 2` of the corrected weight.
    pub fn gamma(&self) -> f64 {
        0.5 * self.k_t() * self.beta
    }

    /// `α = ζ λ / 2`; equals [`gamma`](Self::gamma) since `β = ζ τ`.
    pub fn alpha(&self) -> f64 {
        0.5 * self.zeta() * self.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mode {
    pub k: [i64; 2],
    pub parity: Parity,
}

impl Mode {
    pub fn norm_sq(&self) -> i64 {
        self.k[0] * self.k[0] + self.k[1] * self.k[1]
    }
}

fn in_k_plus(k: [i64; 2]) -> bool {
    (k[0] >= 0 && k[1] > 0) || (k[0] > 0 && k[1] <= 0)
}

fn in_k_plus_plus(k: [i64; 2]) -> bool {
    k[0] >= 0 && k[1] > 0
}

fn in_shell(n2: i64, shell: u32) -> bool {
    let n = shell as i64;
    n * n <= n2 && n2 <= 4 * n * n
}

/// Fourier modes of the shell `N ≤ |k| ≤ 2N`.
///
/// Layout: the first `n_plus()` entries are the cosine modes of `K₊`
/// (the `K₊₊` quadrant first, then `K₊₋`, each lexicographic in `(k₁, k₂)`);
/// entry `n_plus() + j` is the sine mode with wave vector `−k_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    shell_index: u32,
    modes: Vec<Mode>,
}

impl ModeSet {
    pub fn build(shell_index: i64) -> Result<Self> {
        if shell_index < 1 || shell_index > u32::MAX as i64 {
            return Err(invalid(format!("shell index must be >= 1 (got {shell_index})")));
        }
        let n = shell_index;
        let mut pp = Vec::new();
        let mut pm = Vec::new();
        for k1 in -2 * n..=2 * n {
            for k2 in -2 * n..=2 * n {
                let k = [k1, k2];
                let n2 = k1 * k1 + k2 * k2;
                if n2 == 0 || !in_shell(n2, n as u32) || !in_k_plus(k) {
                    continue;
                }
                if in_k_plus_plus(k) {
                    pp.push(k);
                } else {
                    pm.push(k);
                }
            }
        }
        let plus: Vec<[i64; 2]> = pp.into_iter().chain(pm).collect();
        let mut modes: Vec<Mode> = plus
            .iter()
            .map(|&k| Mode {
                k,
                parity: Parity::Cos,
            })
            .collect();
        modes.extend(plus.iter().map(|&k| Mode {
            k: [-k[0], -k[1]],
            parity: Parity::Sin,
        }));
        Ok(Self {
            shell_index: n as u32,
            modes,
        })
    }

    pub fn shell_index(&self) -> u32 {
        self.shell_index
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Number of cosine modes (`|K₊|`).
    pub fn n_plus(&self) -> usize {
        self.modes.len() / 2
    }

    pub fn plus_modes(&self) -> &[Mode] {
        &self.modes[..self.n_plus()]
    }
}

/// `θ_k = a_τ / |k|²` inside the shell of index `shell`, zero outside.
pub fn coefficient(k: [i64; 2], p: &PhysParams, shell: u32) -> Result<f64> {
    let n2 = k[0] * k[0] + k[1] * k[1];
    if n2 == 0 {
        return Err(invalid("coefficient undefined for k = 0"));
    }
    if shell == 0 {
        return Err(invalid("shell index must be >= 1"));
    }
    Ok(if in_shell(n2, shell) {
        p.a_tau() / n2 as f64
    } else {
        0.0
    })
}

fn theta(m: &Mode, p: &PhysParams) -> f64 {
    p.a_tau() / m.norm_sq() as f64
}

fn kvec(m: &Mode) -> Vector2<f64> {
    Vector2::new(m.k[0] as f64, m.k[1] as f64)
}

/// Unit transverse direction `k⊥/|k|` with `k⊥ = (−k₂, k₁)`.
fn kperp_hat(m: &Mode) -> Vector2<f64> {
    let n = (m.norm_sq() as f64).sqrt();
    Vector2::new(-m.k[1] as f64 / n, m.k[0] as f64 / n)
}

fn phase(m: &Mode, x: [f64; 2]) -> f64 {
    m.k[0] as f64 * x[0] + m.k[1] as f64 * x[1]
}

/// `σ_k(x)` for every mode of the set.
pub fn sigma_eval(m: &ModeSet, p: &PhysParams, x: [f64; 2]) -> Vec<Vector2<f64>> {
    m.modes
        .iter()
        .map(|mode| {
            let ph = phase(mode, x);
            let prof = match mode.parity {
                Parity::Cos => ph.cos(),
                Parity::Sin => ph.sin(),
            };
            kperp_hat(mode) * (theta(mode, p) * prof)
        })
        .collect()
}

/// Stretching term `∇_x σ_k(x) r` for every mode.
pub fn grad_sigma_apply(
    m: &ModeSet,
    p: &PhysParams,
    x: [f64; 2],
    r: Vector2<f64>,
) -> Result<Vec<Vector2<f64>>> {
    if r.norm() >= 1.0 {
        return Err(domain(format!("|r| = {} must be < 1", r.norm())));
    }
    Ok(m.modes
        .iter()
        .map(|mode| {
            let ph = phase(mode, x);
            let d = match mode.parity {
                Parity::Cos => -ph.sin(),
                Parity::Sin => ph.cos(),
            };
            kperp_hat(mode) * (theta(mode, p) * d * kvec(mode).dot(&r))
        })
        .collect())
}

/// Symmetric 2×2 matrix produced by the corrector computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorMatrix(pub Matrix2<f64>);

impl CorrectorMatrix {
    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = &self.0;
        let tr = m[(0, 0)] + m[(1, 1)];
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        [0.5 * tr - disc, 0.5 * tr + disc]
    }

    pub fn operator_norm(&self) -> f64 {
        let [a, b] = self.eigenvalues();
        a.abs().max(b.abs())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.0[(0, 1)] - self.0[(1, 0)]).abs() <= tol
    }
}

/// `A^N(r) = Σ_{k∈K₊} θ_k² (k·r)² k⊥⊗k⊥ / |k|²`.
///
/// The cos/sin pairing of `k` with `−k` removes the x dependence of the
/// full sum over `K`.
pub fn corrector_matrix(m: &ModeSet, p: &PhysParams, r: Vector2<f64>) -> CorrectorMatrix {
    CorrectorTensor::new(m, p).apply(r)
}

/// Quadratic form `A^N(r) = Σ_{l,m} r_l r_m T_{lm}` with the three distinct
/// coefficient matrices precomputed, so repeated evaluation costs O(1).
#[derive(Debug, Clone, Copy)]
pub struct CorrectorTensor {
    t11: Matrix2<f64>,
    t12: Matrix2<f64>,
    t22: Matrix2<f64>,
}

impl CorrectorTensor {
    pub fn new(m: &ModeSet, p: &PhysParams) -> Self {
        let mut t11 = Matrix2::zeros();
        let mut t12 = Matrix2::zeros();
        let mut t22 = Matrix2::zeros();
        for mode in m.plus_modes() {
            let th = theta(mode, p);
            let e = kperp_hat(mode);
            let outer = e * e.transpose() * (th * th);
            let (k1, k2) = (mode.k[0] as f64, mode.k[1] as f64);
            t11 += outer * (k1 * k1);
            t12 += outer * (k1 * k2);
            t22 += outer * (k2 * k2);
        }
        Self { t11, t12, t22 }
    }

    pub fn apply(&self, r: Vector2<f64>) -> CorrectorMatrix {
        CorrectorMatrix(
            self.t11 * (r.x * r.x) + self.t12 * (2.0 * r.x * r.y) + self.t22 * (r.y * r.y),
        )
    }
}

/// Limit corrector `A(r) = k_T (3|r|² I − 2 r⊗r)`.
pub fn limit_matrix(r: Vector2<f64>, k_t: f64) -> Result<CorrectorMatrix> {
    if !(k_t > 0.0) {
        return Err(invalid(format!("k_T must be positive (got {k_t})")));
    }
    let s2 = r.norm_squared();
    Ok(CorrectorMatrix(
        (Matrix2::identity() * (3.0 * s2) - r * r.transpose() * 2.0) * k_t,
    ))
}

/// `α_N = ½ Σ_{k∈K₊₊} θ_k²`.
pub fn x_diffusion_coefficient(m: &ModeSet, p: &PhysParams) -> f64 {
    0.5 * m
        .plus_modes()
        .iter()
        .filter(|mode| in_k_plus_plus(mode.k))
        .map(|mode| theta(mode, p).powi(2))
        .sum::<f64>()
}

/// Fast evaluator of the aggregate transport and stretching increments at a
/// point for one set of per-mode Brownian increments.
///
/// For increments `ξ` (cos modes first, then sin modes, as in [`ModeSet`])
/// it returns `u = Σ_k σ_k(x) ξ_k` and `G = Σ_k ∇_x σ_k(x) ξ_k`, so that the
/// stretching increment of a vector `r` is `G r`.
#[derive(Debug, Clone)]
pub struct FlowField {
    max_k: i64,
    // per K₊ mode: table offsets of k₁ and k₂
    idx1: Vec<u32>,
    idx2: Vec<u32>,
    // per K₊ mode: v = θ k̂⊥ and the products v₁k₁, v₁k₂, v₂k₁
    w: Vec<[f64; 5]>,
}

impl FlowField {
    pub fn new(m: &ModeSet, p: &PhysParams) -> Self {
        let plus = m.plus_modes();
        let max_k = 2 * m.shell_index() as i64;
        Self {
            max_k,
            idx1: plus.iter().map(|md| (md.k[0] + max_k) as u32).collect(),
            idx2: plus.iter().map(|md| (md.k[1] + max_k) as u32).collect(),
            w: plus
                .iter()
                .map(|md| {
                    let v = kperp_hat(md) * theta(md, p);
                    let (k1, k2) = (md.k[0] as f64, md.k[1] as f64);
                    [v.x, v.y, v.x * k1, v.x * k2, v.y * k1]
                })
                .collect(),
        }
    }

    pub fn n_plus(&self) -> usize {
        self.w.len()
    }

    /// `(cos kx, sin kx)` for `k = −max_k..=max_k`, by repeated rotation.
    fn phases(&self, x: f64, out: &mut [(f64, f64)]) {
        let m = self.max_k as usize;
        let (s, c) = x.sin_cos();
        out[m] = (1.0, 0.0);
        let (mut pc, mut ps) = (1.0, 0.0);
        for k in 1..=m {
            // exact values every 16 steps keep the rounding drift negligible
            if k % 16 == 0 {
                let (s_k, c_k) = (k as f64 * x).sin_cos();
                pc = c_k;
                ps = s_k;
            } else {
                let nc = pc * c - ps * s;
                ps = ps * c + pc * s;
                pc = nc;
            }
            out[m + k] = (pc, ps);
            out[m - k] = (pc, -ps);
        }
    }

    /// Evaluate `(u, G)` at `x` for increments `xi` of length `2·n_plus`.
    pub fn eval(&self, x: [f64; 2], xi: &[f64]) -> (Vector2<f64>, Matrix2<f64>) {
        let np = self.n_plus();
        debug_assert_eq!(xi.len(), 2 * np);
        let width = (2 * self.max_k + 1) as usize;
        let mut e1 = vec![(0.0, 0.0); width];
        let mut e2 = vec![(0.0, 0.0); width];
        self.phases(x[0], &mut e1);
        self.phases(x[1], &mut e2);
        let (xi_c, xi_s) = xi.split_at(np);
        let (mut u1, mut u2) = (0.0, 0.0);
        // G = Σ b_k v_k ⊗ k is trace-free since v_k ⊥ k
        let (mut g11, mut g12, mut g21) = (0.0, 0.0, 0.0);
        let modes = self.idx1.iter().zip(&self.idx2).zip(&self.w);
        for (((&i1, &i2), w), (&zc, &zs)) in modes.zip(xi_c.iter().zip(xi_s)) {
            let (c1, s1) = e1[i1 as usize];
            let (c2, s2) = e2[i2 as usize];
            let c = c1 * c2 - s1 * s2;
            let s = s1 * c2 + c1 * s2;
            let a = c * zc + s * zs;
            let b = c * zs - s * zc;
            u1 += a * w[0];
            u2 += a * w[1];
            g11 += b * w[2];
            g12 += b * w[3];
            g21 += b * w[4];
        }
        (Vector2::new(u1, u2), Matrix2::new(g11, g12, g21, -g11))
    }

    /// [`eval`](Self::eval) at several points in one sweep over the modes.
    /// Results are bitwise identical to calling `eval` point by point.
    pub fn eval_many(&self, xs: &[[f64; 2]], xi: &[f64]) -> Vec<(Vector2<f64>, Matrix2<f64>)> {
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(LANES) {
            let mut pts = [[0.0; 2]; LANES];
            pts[..chunk.len()].copy_from_slice(chunk);
            let res = self.eval_lanes(&pts, xi);
            out.extend_from_slice(&res[..chunk.len()]);
        }
        out
    }

    fn eval_lanes(&self, xs: &[[f64; 2]; LANES], xi: &[f64]) -> [(Vector2<f64>, Matrix2<f64>); LANES] {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx512f") {
                // SAFETY: the CPU supports AVX-512F
                return unsafe { self.eval_lanes_avx512(xs, xi) };
            }
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the CPU supports AVX2
                return unsafe { self.eval_lanes_avx2(xs, xi) };
            }
        }
        self.eval_lanes_body(xs, xi)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx512f")]
    unsafe fn eval_lanes_avx512(
        &self,
        xs: &[[f64; 2]; LANES],
        xi: &[f64],
    ) -> [(Vector2<f64>, Matrix2<f64>); LANES] {
        self.eval_lanes_body(xs, xi)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn eval_lanes_avx2(
        &self,
        xs: &[[f64; 2]; LANES],
        xi: &[f64],
    ) -> [(Vector2<f64>, Matrix2<f64>); LANES] {
        self.eval_lanes_body(xs, xi)
    }

    #[inline(always)]
    fn eval_lanes_body(
        &self,
        xs: &[[f64; 2]; LANES],
        xi: &[f64],
    ) -> [(Vector2<f64>, Matrix2<f64>); LANES] {
        let np = self.n_plus();
        debug_assert_eq!(xi.len(), 2 * np);
        let width = (2 * self.max_k + 1) as usize;
        // site-contiguous tables: entry k holds the phases of every lane
        let mut c1 = vec![[0.0; LANES]; width];
        let mut s1 = vec![[0.0; LANES]; width];
        let mut c2 = vec![[0.0; LANES]; width];
        let mut s2 = vec![[0.0; LANES]; width];
        let mut tmp = vec![(0.0, 0.0); width];
        for (l, x) in xs.iter().enumerate() {
            self.phases(x[0], &mut tmp);
            for (k, &(c, s)) in tmp.iter().enumerate() {
                c1[k][l] = c;
                s1[k][l] = s;
            }
            self.phases(x[1], &mut tmp);
            for (k, &(c, s)) in tmp.iter().enumerate() {
                c2[k][l] = c;
                s2[k][l] = s;
            }
        }
        let (xi_c, xi_s) = xi.split_at(np);
        let mut acc = [[0.0; LANES]; 5];
        let modes = self.idx1.iter().zip(&self.idx2).zip(&self.w);
        for (((&i1, &i2), w), (&zc, &zs)) in modes.zip(xi_c.iter().zip(xi_s)) {
            let (a1, b1) = (&c1[i1 as usize], &s1[i1 as usize]);
            let (a2, b2) = (&c2[i2 as usize], &s2[i2 as usize]);
            for l in 0..LANES {
                let c = a1[l] * a2[l] - b1[l] * b2[l];
                let s = b1[l] * a2[l] + a1[l] * b2[l];
                let a = c * zc + s * zs;
                let b = c * zs - s * zc;
                acc[0][l] += a * w[0];
                acc[1][l] += a * w[1];
                acc[2][l] += b * w[2];
                acc[3][l] += b * w[3];
                acc[4][l] += b * w[4];
            }
        }
        std::array::from_fn(|l| {
            (
                Vector2::new(acc[0][l], acc[1][l]),
                Matrix2::new(acc[2][l], acc[3][l], acc[4][l], -acc[2][l]),
            )
        })
    }
}

const LANES: usize = 8;

/// Law of one aggregate flow increment `(ΔX, G)` per unit time.
///
/// Across independent flow realizations the increment is a centered Gaussian
/// whose covariance does not depend on `x`: `Cov(ΔX) = 2 α_N I dt`, the four
/// entries of `G` have covariance `Σ_{K₊} θ² vec(k̂⊥⊗k)vec(k̂⊥⊗k)ᵀ dt`, and
/// `ΔX` is uncorrelated with `G`. The stored factors map standard normals to
/// unit-time increments.
#[derive(Debug, Clone, Copy)]
pub struct AggregateFlowLaw {
    x_std: f64,
    g_factor: Matrix4<f64>,
}

impl AggregateFlowLaw {
    pub fn new(m: &ModeSet, p: &PhysParams) -> Self {
        let mut cov = Matrix4::zeros();
        for mode in m.plus_modes() {
            let th = theta(mode, p);
            let e = kperp_hat(mode);
            let k = kvec(mode);
            let v = Vector4::new(e.x * k.x, e.x * k.y, e.y * k.x, e.y * k.y) * th;
            cov += v * v.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let mut g_factor = Matrix4::zeros();
        for j in 0..4 {
            let lam = eig.eigenvalues[j].max(0.0).sqrt();
            g_factor.set_column(j, &(eig.eigenvectors.column(j) * lam));
        }
        Self {
            x_std: (2.0 * x_diffusion_coefficient(m, p)).sqrt(),
            g_factor,
        }
    }

    /// Map six standard normals and `√dt` to `(ΔX, G)`.
    #[inline]
    pub fn sample(&self, z: &[f64; 6], sqrt_dt: f64) -> (Vector2<f64>, Matrix2<f64>) {
        let dx = Vector2::new(z[0], z[1]) * (self.x_std * sqrt_dt);
        let g = self.g_factor * Vector4::new(z[2], z[3], z[4], z[5]) * sqrt_dt;
        (dx, Matrix2::new(g[0], g[1], g[2], g[3]))
    }

    /// Covariance of the vectorized `G` per unit time.
    pub fn g_covariance(&self) -> Matrix4<f64> {
        self.g_factor * self.g_factor.transpose()
    }
}
