//! Finite-volume solver for the limit Fokker–Planck equation
//!
//! ```text
//! ∂_t f = (1/(ζτ)) div_r( M₀ (I + α 𝒜̂(r)) ∇_r (f/M₀) ),   𝒜̂ = 3|r|²I − 2 r⊗r,
//! ```
//!
//! restricted to radial densities. For radial `g`, `𝒜̂ ∇g = s² ∇g`, so the
//! tensor mobility collapses to the scalar `1 + α s²`.
//!
//! The unknown is stored as cell averages `f_j` on a graded radial grid.
//! Fluxes are written in the quotient `g = f/M₀`, so the sampled `M₀` is an
//! exact discrete equilibrium and the face weight `M₀(1) = 0` closes the
//! outer boundary without ghost cells. Several independent x-slices can be
//! evolved together; x only labels them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::loglog_slope;
use crate::weights::{coil_stretch_params, corrected_unchecked, WeightSpec};

/// Faces `s_j = 1 − (1 − j/n)^q` of a radial grid on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    faces: Vec<f64>,
    centers: Vec<f64>,
    volumes: Vec<f64>,
    grading: f64,
}

pub const MIN_CELLS: usize = 16;

impl RadialGrid {
    pub fn new(n_cells: usize, grading: f64) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(invalid(format!(
                "radial grid needs at least {MIN_CELLS} cells (got {n_cells})"
            )));
        }
        if !(grading >= 1.0) || !grading.is_finite() {
            return Err(invalid(format!("grading exponent must be >= 1 (got {grading})")));
        }
        let n = n_cells as f64;
        let mut faces: Vec<f64> = (0..=n_cells)
            .map(|j| 1.0 - (1.0 - j as f64 / n).powf(grading))
            .collect();
        faces[0] = 0.0;
        faces[n_cells] = 1.0;
        let centers = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let volumes = faces
            .windows(2)
            .map(|w| PI * (w[1] * w[1] - w[0] * w[0]))
            .collect();
        Ok(Self {
            faces,
            centers,
            volumes,
            grading,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.centers.len()
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Disc areas `π(s_{j+1}² − s_j²)`.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn width(&self, j: usize) -> f64 {
        self.faces[j + 1] - self.faces[j]
    }
}

/// Radial cell averages for one or more x-slices, each slice carrying the
/// quadrature weight `1/n_slices` in x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialDensity {
    pub grid: RadialGrid,
    pub slices: Vec<Vec<f64>>,
}

impl RadialDensity {
    pub fn new(grid: RadialGrid, slices: Vec<Vec<f64>>) -> Result<Self> {
        if slices.is_empty() {
            return Err(invalid("density needs at least one slice"));
        }
        for s in &slices {
            if s.len() != grid.n_cells() {
                return Err(invalid(format!(
                    "slice has {} values, grid has {} cells",
                    s.len(),
                    grid.n_cells()
                )));
            }
            if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid("densities must be finite and nonnegative"));
            }
        }
        Ok(Self { grid, slices })
    }

    /// Single slice sampled from a function of the radius at cell centers.
    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let v = grid.centers().iter().map(|&s| f(s)).collect();
        Self::new(grid.clone(), vec![v])
    }

    pub fn single(&self) -> &[f64] {
        &self.slices[0]
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn x_weight(&self) -> f64 {
        1.0 / self.slices.len() as f64
    }

    /// Per-slice masses `Σ_j f_j v_j`.
    pub fn masses(&self) -> Vec<f64> {
        self.slices
            .iter()
            .map(|s| dot(s, self.grid.volumes()))
            .collect()
    }

    /// Mass integrated over x as well.
    pub fn total_mass(&self) -> f64 {
        self.masses().iter().sum::<f64>() * self.x_weight()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Assembled radial operator in conservative form.
///
/// In the quotient `g = f/M₀` the semi-discrete equation reads
/// `W dg/dt = −(1/(ζτ)) K g` with `W = diag(M₀_j v_j)` and `K` the weighted
/// graph Laplacian whose face conductances are
/// `T_j = 2π s_j M₀(s_j) (1 + α s_j²) / (c_j − c_{j−1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    grid: RadialGrid,
    kappa: f64,
    alpha: f64,
    prefactor: f64,
    /// `M₀` at cell centers (unnormalized).
    m_cell: Vec<f64>,
    /// Conductances at faces `0..=n`, zero at both ends.
    cond: Vec<f64>,
    exploratory: bool,
}

impl DiscreteOperator {
    pub fn assemble(grid: &RadialGrid, kappa: f64, alpha: f64, zeta_tau: f64) -> Result<Self> {
        if !(kappa > 0.0 && alpha >= 0.0 && zeta_tau > 0.0) {
            return Err(invalid(format!(
                "operator needs kappa > 0, alpha >= 0, zeta_tau > 0 (got {kappa}, {alpha}, {zeta_tau})"
            )));
        }
        let n = grid.n_cells();
        let m_cell = grid
            .centers()
            .iter()
            .map(|&c| corrected_unchecked(c, kappa, alpha))
            .collect();
        let mut cond = vec![0.0; n + 1];
        let (s, c) = (grid.faces(), grid.centers());
        for j in 1..n {
            let sj = s[j];
            let mob = corrected_unchecked(sj, kappa, alpha) * (1.0 + alpha * sj * sj);
            cond[j] = 2.0 * PI * sj * mob / (c[j] - c[j - 1]);
        }
        let exploratory = kappa / (2.0 * (1.0 + alpha)) <= 1.0;
        Ok(Self {
            grid: grid.clone(),
            kappa,
            alpha,
            prefactor: 1.0 / zeta_tau,
            m_cell,
            cond,
            exploratory,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `1/(ζτ)`.
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// True outside the Hardy regime `κ/(2(1+α)) > 1`; results there are
    /// exploratory.
    pub fn exploratory(&self) -> bool {
        self.exploratory
    }

    pub fn weight_at_centers(&self) -> &[f64] {
        &self.m_cell
    }

    /// Face conductances without the prefactor.
    pub fn conductances(&self) -> &[f64] {
        &self.cond
    }

    /// `M₀` at cell centers scaled to unit discrete mass.
    pub fn normalized_weight(&self) -> Vec<f64> {
        let z = dot(&self.m_cell, self.grid.volumes());
        self.m_cell.iter().map(|m| m / z).collect()
    }

    /// Time derivative `df/dt` of one slice of cell averages.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.grid.n_cells();
        let g: Vec<f64> = f.iter().zip(&self.m_cell).map(|(a, m)| a / m).collect();
        let mut flux = vec![0.0; n + 1];
        for j in 1..n {
            flux[j] = self.cond[j] * (g[j] - g[j - 1]);
        }
        (0..n)
            .map(|j| self.prefactor * (flux[j + 1] - flux[j]) / self.grid.volumes()[j])
            .collect()
    }

    /// Off-diagonal entries `K_{j,j+1}` are `−T_{j+1} ≤ 0`, the diagonal is
    /// their negated row sum: an irreducible M-matrix structure.
    pub fn is_m_matrix(&self) -> bool {
        let n = self.grid.n_cells();
        self.cond[0] == 0.0
            && self.cond[n] == 0.0
            && self.cond[1..n].iter().all(|&t| t > 0.0 && t.is_finite())
    }
}

/// Stationary state: `M₀` at cell centers with unit mass.
pub fn steady_state(op: &DiscreteOperator) -> RadialDensity {
    RadialDensity {
        grid: op.grid.clone(),
        slices: vec![op.normalized_weight()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<RadialDensity>,
}

/// Solve `(W + a K) x = rhs` for the tridiagonal `K` of `op` (Thomas).
fn solve_shifted(op: &DiscreteOperator, a: f64, w: &[f64], rhs: &[f64], out: &mut [f64]) -> Result<()> {
    let n = w.len();
    let t = &op.cond;
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for j in 0..n {
        let diag = w[j] + a * (t[j] + t[j + 1]);
        let lower = -a * t[j];
        let upper = -a * t[j + 1];
        let piv = diag - lower * prev_c;
        if !(piv > 0.0) || !piv.is_finite() {
            let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
            let dmax = (0..n)
                .map(|k| w[k] + a * (t[k] + t[k + 1]))
                .fold(0.0, f64::max);
            return Err(Error::NumericalBreakdown(format!(
                "tridiagonal pivot {piv:e} at cell {j}; diagonal ratio estimate {:e}",
                dmax / wmin
            )));
        }
        prev_c = upper / piv;
        prev_d = (rhs[j] - lower * prev_d) / piv;
        cp[j] = prev_c;
        dp[j] = prev_d;
    }
    out[n - 1] = dp[n - 1];
    for j in (0..n - 1).rev() {
        out[j] = dp[j] - cp[j] * out[j + 1];
    }
    Ok(())
}

/// `K g` for the conductances of `op`.
fn apply_k(op: &DiscreteOperator, g: &[f64], out: &mut [f64]) {
    let t = &op.cond;
    let n = g.len();
    for j in 0..n {
        let mut v = 0.0;
        if j > 0 {
            v += t[j] * (g[j] - g[j - 1]);
        }
        if j + 1 < n {
            v += t[j + 1] * (g[j] - g[j + 1]);
        }
        out[j] = v;
    }
}

fn check_compatible(f: &RadialDensity, grid: &RadialGrid) -> Result<()> {
    if &f.grid != grid {
        return Err(invalid("density and operator live on different grids"));
    }
    Ok(())
}

/// Evolve `f0` to `t_end` with `round(t_end/dt)` equal steps, calling
/// `observe(t, f)` at the initial time and after every step. Returns the
/// final density.
pub fn evolve_with(
    f0: &RadialDensity,
    op: &DiscreteOperator,
    dt: f64,
    t_end: f64,
    scheme: Scheme,
    mut observe: impl FnMut(f64, &RadialDensity),
) -> Result<RadialDensity> {
    check_compatible(f0, &op.grid)?;
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(invalid("dt and t_end must be positive"));
    }
    let n_steps = (t_end / dt).round().max(1.0) as usize;
    let h = t_end / n_steps as f64 * op.prefactor;
    let vols = op.grid.volumes();
    let w: Vec<f64> = op.m_cell.iter().zip(vols).map(|(m, v)| m * v).collect();
    let n = w.len();
    let mut f = f0.clone();
    observe(0.0, &f);
    // Crank–Nicolson: implicit half step, then the full flux of the
    // half-step state
    let (a_solve, a_flux) = match scheme {
        Scheme::ImplicitEuler => (h, h),
        Scheme::CrankNicolson => (0.5 * h, h),
    };
    let mut rhs = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut k = vec![0.0; n];
    for step in 1..=n_steps {
        for out in f.slices.iter_mut() {
            for j in 0..n {
                rhs[j] = vols[j] * out[j];
            }
            solve_shifted(op, a_solve, &w, &rhs, &mut g)?;
            // rebuild f from the telescoping fluxes so that Σ v f is kept
            // to rounding
            apply_k(op, &g, &mut k);
            for j in 0..n {
                out[j] -= a_flux * k[j] / vols[j];
            }
        }
        observe(step as f64 * t_end / n_steps as f64, &f);
    }
    Ok(f)
}

/// Evolve and keep every intermediate state.
pub fn evolve(
    f0: &RadialDensity,
    op: &DiscreteOperator,
    dt: f64,
    t_end: f64,
    scheme: Scheme,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    evolve_with(f0, op, dt, t_end, scheme, |t, f| {
        times.push(t);
        states.push(f.clone());
    })?;
    Ok(Trajectory { times, states })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `Σ_j f_j² / M₀(s_j) v_j`.
    H0,
    /// `Σ_faces 2π s M₀(s) (Δ(f/M₀)/Δc)² Δc`.
    V0Seminorm,
}

/// Squared weighted norm of `f` against the weight `w`, summed over slices
/// with the x quadrature weight.
pub fn weighted_norm(f: &RadialDensity, w: &WeightSpec, kind: NormKind) -> Result<f64> {
    w.validate()?;
    let grid = &f.grid;
    let wc: Vec<f64> = grid
        .centers()
        .iter()
        .map(|&c| w.eval(c))
        .collect::<Result<_>>()?;
    if wc.iter().any(|&v| !(v > 0.0)) {
        return Err(invalid("weight vanishes at a cell center"));
    }
    let mut total = 0.0;
    for s in &f.slices {
        if s.len() != grid.n_cells() {
            return Err(invalid("slice length does not match the grid"));
        }
        total += match kind {
            NormKind::H0 => s
                .iter()
                .zip(&wc)
                .zip(grid.volumes())
                .map(|((f, m), v)| f * f / m * v)
                .sum::<f64>(),
            NormKind::V0Seminorm => {
                let (faces, c) = (grid.faces(), grid.centers());
                let mut acc = 0.0;
                for j in 1..grid.n_cells() {
                    let dc = c[j] - c[j - 1];
                    let d = (s[j] / wc[j] - s[j - 1] / wc[j - 1]) / dc;
                    acc += 2.0 * PI * faces[j] * w.eval(faces[j])? * d * d * dc;
                }
                acc
            }
        };
    }
    Ok(total * f.x_weight())
}

/// `Σ_x w_x ‖f − ρ₀ M̂₀‖²_{H₀}` against the unit-mass discrete weight of `op`,
/// with `ρ₀` the mass of each slice.
pub fn h0_distance(f: &RadialDensity, op: &DiscreteOperator) -> f64 {
    let m = op.normalized_weight();
    let vols = op.grid.volumes();
    let mut total = 0.0;
    for s in &f.slices {
        let rho = dot(s, vols);
        total += s
            .iter()
            .zip(&m)
            .zip(vols)
            .map(|((f, m), v)| (f - rho * m).powi(2) / m * v)
            .sum::<f64>();
    }
    total * f.x_weight()
}

/// Smallest nonzero eigenvalue of `K g = λ W g` (prefactor set to 1),
/// by Sturm-sequence bisection on `W^{-1/2} K W^{-1/2}`.
///
/// `1/λ₁` is the discrete weighted Poincaré constant.
pub fn spectral_gap(op: &DiscreteOperator) -> Result<f64> {
    let n = op.grid.n_cells();
    let w: Vec<f64> = op
        .m_cell
        .iter()
        .zip(op.grid.volumes())
        .map(|(m, v)| m * v)
        .collect();
    let t = &op.cond;
    let d: Vec<f64> = (0..n).map(|j| (t[j] + t[j + 1]) / w[j]).collect();
    let e2: Vec<f64> = (0..n - 1)
        .map(|j| t[j + 1] * t[j + 1] / (w[j] * w[j + 1]))
        .collect();
    // number of eigenvalues below x
    let count = |x: f64| -> usize {
        let mut k = 0;
        let mut q = d[0] - x;
        if q < 0.0 {
            k += 1;
        }
        for j in 1..n {
            let qq = if q == 0.0 { f64::MIN_POSITIVE } else { q };
            q = d[j] - x - e2[j - 1] / qq;
            if q < 0.0 {
                k += 1;
            }
        }
        k
    };
    let mut hi = (0..n)
        .map(|j| {
            let mut r = d[j];
            if j > 0 {
                r += e2[j - 1].sqrt();
            }
            if j + 1 < n {
                r += e2[j].sqrt();
            }
            r
        })
        .fold(0.0, f64::max);
    if !hi.is_finite() || count(hi) < 2 {
        return Err(Error::NumericalBreakdown("Gershgorin bound unusable".into()));
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if count(mid) >= 2 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let gap = 0.5 * (lo + hi);
    if !(gap > 0.0) {
        return Err(Error::NumericalBreakdown("bisection did not isolate the gap".into()));
    }
    Ok(gap)
}

/// Physical and numerical settings of a singular-limit sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kappa: f64,
    pub alpha: f64,
    pub zeta: f64,
    pub t_end: f64,
    /// Time step in units of `ζτ`, so `dt ∝ τ` across the sweep.
    pub dt_over_zeta_tau: f64,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    /// `∫₀ᵀ ‖f_τ − ρ₀M₀‖²_{H₀} dt` by the trapezoid rule; `None` on failure.
    pub integral: Option<f64>,
    pub error: Option<String>,
    /// H₀ distance never increased between output times.
    pub monotone: bool,
    /// Largest relative change of any slice mass along the trajectory.
    pub max_mass_drift: f64,
    /// `(t, H₀ distance², total mass)` at every step.
    pub trace: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Log-log slope of the integral against τ; `None` when fewer than two
    /// rows have a positive integral.
    pub slope: Option<f64>,
}

fn sweep_row(tau: f64, spec: &SweepSpec, f0: &RadialDensity) -> Result<SweepRow> {
    let zt = spec.zeta * tau;
    let op = DiscreteOperator::assemble(&f0.grid, spec.kappa, spec.alpha, zt)?;
    let m0 = f0.masses();
    let mut trace = Vec::new();
    let mut drift: f64 = 0.0;
    evolve_with(f0, &op, spec.dt_over_zeta_tau * zt, spec.t_end, spec.scheme, |t, f| {
        for (a, b) in f.masses().iter().zip(&m0) {
            if *b != 0.0 {
                drift = drift.max(((a - b) / b).abs());
            }
        }
        trace.push((t, h0_distance(f, &op), f.total_mass()));
    })?;
    let integral: f64 = trace
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    // squared H₀ norm of the datum; distances below 1e-12 of it are rounding
    let m = op.normalized_weight();
    let scale: f64 = f0
        .slices
        .iter()
        .map(|s| {
            s.iter()
                .zip(&m)
                .zip(f0.grid.volumes())
                .map(|((f, m), v)| f * f / m * v)
                .sum::<f64>()
        })
        .sum::<f64>()
        * f0.x_weight();
    let integral = if integral <= 1e-24 * scale * spec.t_end {
        0.0
    } else {
        integral
    };
    // increases below 1e-20 of the initial distance are rounding
    let floor = 1e-20 * trace[0].1;
    let monotone = trace
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12) + floor);
    Ok(SweepRow {
        tau,
        integral: Some(integral),
        error: None,
        monotone,
        max_mass_drift: drift,
        trace,
    })
}

/// Run the limit equation for each `τ` from the same `f0` and measure the
/// time-integrated squared H₀ distance to `ρ₀ ⊗ M₀`.
pub fn singular_limit_sweep(
    taus: &[f64],
    spec: &SweepSpec,
    f0: &RadialDensity,
) -> Result<SweepResult> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("tau list must be non-empty and positive"));
    }
    if !(spec.zeta > 0.0 && spec.t_end > 0.0 && spec.dt_over_zeta_tau > 0.0) {
        return Err(invalid("zeta, t_end and dt_over_zeta_tau must be positive"));
    }
    let rows: Vec<SweepRow> = taus
        .iter()
        .map(|&tau| {
            sweep_row(tau, spec, f0).unwrap_or_else(|e| SweepRow {
                tau,
                integral: None,
                error: Some(e.to_string()),
                monotone: false,
                max_mass_drift: f64::NAN,
                trace: Vec::new(),
            })
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.integral.map(|i| (r.tau, i)))
        .unzip();
    Ok(SweepResult {
        slope: loglog_slope(&xs, &ys),
        rows,
    })
}

/// `h = κ/(2(1+α))` of the operator, via the weight diagnostics.
pub fn hardy_exponent(kappa: f64, alpha: f64) -> f64 {
    // γ = α here, with k_T β = 2α
    coil_stretch_params(kappa, 2.0 * alpha, 1.0).h
}
