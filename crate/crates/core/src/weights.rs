//! Radial weight family on the unit disc.
//!
//! * `M(s)   ∝ (1 − s²)^{κ/2}`: equilibrium of the bare FENE spring,
//! * `M₀(s)  ∝ ((1 − s²)/(1 + γ s²))^{κ/(2(1+γ))}`: corrected equilibrium,
//! * `M_ε(s) = exp(−κ ∫₀ˢ t dt / ((1 − t²)(1 + σ φ_ε(t)² t²)))`: cut-off
//!   interpolant between the two.
//!
//! All weights are radial and vanish at `s = 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::quad;

/// Relative tolerance used for every weight quadrature.
pub const QUAD_TOL: f64 = 1e-12;

fn check_radius(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(domain(format!("radius {s} outside [0, 1]")));
    }
    Ok(())
}

/// Unnormalized FENE weight `(1 − s²)^{κ/2}`.
pub fn fene_weight(s: f64, kappa: f64) -> Result<f64> {
    check_radius(s)?;
    Ok((1.0 - s * s).powf(0.5 * kappa))
}

/// Unnormalized corrected weight `((1 − s²)/(1 + γ s²))^{κ/(2(1+γ))}`.
pub fn corrected_weight(s: f64, kappa: f64, gamma: f64) -> Result<f64> {
    check_radius(s)?;
    Ok(corrected_unchecked(s, kappa, gamma))
}

#[inline]
pub(crate) fn corrected_unchecked(s: f64, kappa: f64, gamma: f64) -> f64 {
    let s2 = s * s;
    ((1.0 - s2) / (1.0 + gamma * s2)).powf(kappa / (2.0 * (1.0 + gamma)))
}

/// Cut-off profile `φ_ε`: 1 on `1 − s ≥ 2ε`, 0 on `1 − s ≤ ε`, and a cubic
/// smoothstep in between (slope at most `1.5/ε`).
pub fn cutoff_profile(s: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(invalid(format!("epsilon {epsilon} outside (0, 1/4)")));
    }
    Ok(cutoff_unchecked(s, epsilon))
}

fn cutoff_unchecked(s: f64, epsilon: f64) -> f64 {
    let d = 1.0 - s;
    if d >= 2.0 * epsilon {
        1.0
    } else if d <= epsilon {
        0.0
    } else {
        let t = (d - epsilon) / epsilon;
        t * t * (3.0 - 2.0 * t)
    }
}

/// Derivative `dφ_ε/ds`.
pub fn cutoff_slope(s: f64, epsilon: f64) -> f64 {
    let d = 1.0 - s;
    if d >= 2.0 * epsilon || d <= epsilon {
        0.0
    } else {
        let t = (d - epsilon) / epsilon;
        -6.0 * t * (1.0 - t) / epsilon
    }
}

/// Intermediate weight `M_ε(s)` with `σ = λβ/(2τ)`.
pub fn epsilon_weight(s: f64, kappa: f64, sigma: f64, epsilon: f64) -> Result<f64> {
    check_radius(s)?;
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(invalid(format!("epsilon {epsilon} outside (0, 1/4)")));
    }
    if s == 1.0 {
        return Ok(0.0);
    }
    let integrand = |t: f64| {
        let phi = cutoff_unchecked(t, epsilon);
        t / ((1.0 - t * t) * (1.0 + sigma * phi * phi * t * t))
    };
    let mut pts = vec![0.0];
    for b in [1.0 - 2.0 * epsilon, 1.0 - epsilon] {
        if b > 0.0 && b < s {
            pts.push(b);
        }
    }
    pts.push(s);
    let integral = quad::integrate_pieces(integrand, &pts, QUAD_TOL);
    Ok((-kappa * integral).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Fene,
    Corrected { gamma: f64 },
    Epsilon { sigma: f64, epsilon: f64 },
}

/// A radial weight with optional disc normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub kappa: f64,
    /// `Z = ∫_D w dr` when the weight is normalized.
    pub z: Option<f64>,
}

impl WeightSpec {
    pub fn fene(kappa: f64) -> Self {
        Self {
            kind: WeightKind::Fene,
            kappa,
            z: None,
        }
    }

    pub fn corrected(kappa: f64, gamma: f64) -> Self {
        Self {
            kind: WeightKind::Corrected { gamma },
            kappa,
            z: None,
        }
    }

    pub fn epsilon(kappa: f64, sigma: f64, epsilon: f64) -> Self {
        Self {
            kind: WeightKind::Epsilon { sigma, epsilon },
            kappa,
            z: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(invalid(format!("kappa must be positive (got {})", self.kappa)));
        }
        match self.kind {
            WeightKind::Fene => {}
            WeightKind::Corrected { gamma } => {
                if !(gamma >= 0.0) {
                    return Err(invalid(format!("gamma must be >= 0 (got {gamma})")));
                }
            }
            WeightKind::Epsilon { sigma, epsilon } => {
                if !(sigma >= 0.0) {
                    return Err(invalid(format!("sigma must be >= 0 (got {sigma})")));
                }
                if !(epsilon > 0.0 && epsilon < 0.25) {
                    return Err(invalid(format!("epsilon {epsilon} outside (0, 1/4)")));
                }
            }
        }
        Ok(())
    }

    /// Unnormalized value at radius `s`.
    pub fn raw(&self, s: f64) -> Result<f64> {
        match self.kind {
            WeightKind::Fene => fene_weight(s, self.kappa),
            WeightKind::Corrected { gamma } => corrected_weight(s, self.kappa, gamma),
            WeightKind::Epsilon { sigma, epsilon } => {
                epsilon_weight(s, self.kappa, sigma, epsilon)
            }
        }
    }

    /// Value at `s`, divided by `Z` when normalized.
    pub fn eval(&self, s: f64) -> Result<f64> {
        Ok(self.raw(s)? / self.z.unwrap_or(1.0))
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.z = Some(disc_normalize(&self)?);
        Ok(self)
    }

    /// Decay exponent at the boundary: `w ~ (1 − s)^{exponent}`.
    pub fn boundary_exponent(&self) -> f64 {
        match self.kind {
            WeightKind::Fene | WeightKind::Epsilon { .. } => 0.5 * self.kappa,
            WeightKind::Corrected { gamma } => self.kappa / (2.0 * (1.0 + gamma)),
        }
    }
}

/// `Z = 2π ∫₀¹ s w(s) ds`.
pub fn disc_normalize(w: &WeightSpec) -> Result<f64> {
    w.validate()?;
    let z = match w.kind {
        WeightKind::Epsilon { epsilon, .. } => {
            let f = |s: f64| s * w.raw(s).unwrap_or(0.0);
            let pts = [0.0, 1.0 - 2.0 * epsilon, 1.0 - epsilon, 1.0];
            2.0 * PI * quad::integrate_pieces(f, &pts, 1e-11)
        }
        _ => {
            let f = |s: f64| s * w.raw(s).unwrap_or(0.0);
            2.0 * PI * quad::integrate(f, 0.0, 1.0, QUAD_TOL)
        }
    };
    if !(z.is_finite() && z > 0.0) {
        return Err(invalid(format!("weight not integrable on the disc (Z = {z})")));
    }
    Ok(z)
}

/// Coil–stretch diagnostics of a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub gamma: f64,
    /// Exponent `h = κ/(2(1+γ))`.
    pub h: f64,
    /// Weissenberg number `Λ τ_p` with `Λ = 2k_T`, `τ_p = β/κ`.
    pub weissenberg: f64,
    /// `κ Wi / 2`, the stretching parameter of the physics mapping.
    pub alpha_wi: f64,
    pub hardy_ok: bool,
    pub smallness_ok: bool,
    pub cutoff_required: bool,
}

pub const DEFAULT_SMALLNESS: f64 = 0.1;

pub fn coil_stretch_params(kappa: f64, k_t: f64, beta: f64) -> RegimeReport {
    coil_stretch_params_with(kappa, k_t, beta, DEFAULT_SMALLNESS)
}

pub fn coil_stretch_params_with(kappa: f64, k_t: f64, beta: f64, threshold: f64) -> RegimeReport {
    let gamma = 0.5 * k_t * beta;
    let h = kappa / (2.0 * (1.0 + gamma));
    let weissenberg = 2.0 * k_t * beta / kappa;
    let hardy_ok = h > 1.0;
    let smallness_ok = k_t * beta <= threshold;
    RegimeReport {
        gamma,
        h,
        weissenberg,
        alpha_wi: 0.5 * kappa * weissenberg,
        hardy_ok,
        smallness_ok,
        cutoff_required: !(hardy_ok && smallness_ok),
    }
}

/// Elongation density in the closed form of the fixed-realization model,
/// `R (1 + (Wi/2) R²/R₀²)^{−h} (1 − R²/b)^{h}` with `h = b/(2R₀² + b Wi)`.
pub fn closed_form_marginal(r: f64, weissenberg: f64, r0_sq: f64, b: f64) -> f64 {
    let h = b / (2.0 * r0_sq + b * weissenberg);
    r * (1.0 + 0.5 * weissenberg * r * r / r0_sq).powf(-h) * (1.0 - r * r / b).powf(h)
}

/// Max discrepancy on `grid` between `s·M₀(s)` and the closed form under
/// `b = 1`, `R₀² = 1/κ`, `Wi = 2α/κ`, both scaled by the normalization of
/// `s·M₀`.
pub fn marginal_equivalence_check(kappa: f64, alpha: f64, grid: &[f64]) -> Result<f64> {
    let z = disc_normalize(&WeightSpec::corrected(kappa, alpha))? / (2.0 * PI);
    let wi = 2.0 * alpha / kappa;
    let mut worst: f64 = 0.0;
    for &s in grid {
        let ours = s * corrected_weight(s, kappa, alpha)? / z;
        let theirs = closed_form_marginal(s, wi, 1.0 / kappa, 1.0) / z;
        worst = worst.max((ours - theirs).abs());
    }
    Ok(worst)
}

/// Hardy quotient `∫ d⁻² |g|² M₀ / ∫ (|g|² + |g'|²) M₀` for a radial
/// quotient profile `g = φ/M₀`, with `d = 1 − s²`.
pub fn hardy_ratio(kappa: f64, gamma: f64, g: impl Fn(f64) -> (f64, f64)) -> f64 {
    let w = |s: f64| corrected_unchecked(s, kappa, gamma);
    let num = quad::integrate(
        |s| {
            let d = 1.0 - s * s;
            let (v, _) = g(s);
            s * v * v * w(s) / (d * d)
        },
        0.0,
        1.0,
        1e-10,
    );
    let den = quad::integrate(
        |s| {
            let (v, dv) = g(s);
            s * (v * v + dv * dv) * w(s)
        },
        0.0,
        1.0,
        1e-10,
    );
    num / den
}
