//! Config-driven experiments and their on-disk reports.
//!
//! Four experiments are available: corrector convergence, stationary
//! Monte Carlo against the reference marginal, the singular-limit sweep of
//! the limit equation and the single-realization (pathwise) comparison.
//! Every run yields a [`Report`] of CSV tables, a JSON summary and a list of
//! pass/fail checks; [`emit_report`] writes it out.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::fene_sde::{
    chi_square, elongation_histogram, reference_marginal, simulate_ensemble, EnsembleConfig,
    InitialLaw, ParticleState,
};
use crate::fokker_planck::{
    evolve_with, singular_limit_sweep, spectral_gap, DiscreteOperator, RadialDensity, RadialGrid,
    Scheme, SweepSpec,
};
use crate::spectral_noise::{limit_matrix, x_diffusion_coefficient, CorrectorTensor, ModeSet, PhysParams};
use crate::stats::{chi2_quantile, loglog_slope};
use crate::weights::{coil_stretch_params, RegimeReport};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Corrector,
    Stationary,
    SingularLimit,
    Pathwise,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Corrector => "corrector",
            ExperimentKind::Stationary => "stationary",
            ExperimentKind::SingularLimit => "singular-limit",
            ExperimentKind::Pathwise => "pathwise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    /// CSV tables plus the JSON summary.
    #[default]
    Csv,
    /// JSON summary only.
    JsonSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub kappa: f64,
    pub beta: f64,
    pub lambda: f64,
    pub tau: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            kappa: 10.0,
            beta: 1.0,
            lambda: 0.2,
            tau: 1.0,
        }
    }
}

impl PhysicsConfig {
    pub fn params(&self) -> Result<PhysParams> {
        PhysParams::new(self.kappa, self.beta, self.lambda, self.tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectorConfig {
    pub n_list: Vec<i64>,
    /// Radii `r_max·i/(n_radial−1)`, `i = 0..n_radial`.
    pub n_radial: usize,
    pub n_angle: usize,
    pub r_max: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    /// Required error reduction between the first and the last shell.
    pub decay_factor: f64,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        Self {
            n_list: vec![8, 16, 32, 64, 128],
            n_radial: 10,
            n_angle: 64,
            r_max: 0.9,
            slope_min: -1.3,
            slope_max: -0.7,
            decay_factor: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryConfig {
    pub n_shell: i64,
    pub n_particles: usize,
    pub dt: f64,
    pub t_end: f64,
    pub n_bins: usize,
    /// χ² quantile used as the acceptance threshold.
    pub quantile: f64,
    pub shared_flow: bool,
    pub n_sites: Option<usize>,
    pub initial: InitialLaw,
    pub record_every: usize,
    /// Required `λ₁ t_end/β`, the number of slowest relaxation times.
    pub min_relaxations: f64,
    pub gap_cells: usize,
    pub max_particle_steps: Option<u64>,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self {
            n_shell: 32,
            n_particles: 100_000,
            dt: 1e-3,
            t_end: 1.0,
            n_bins: 40,
            quantile: 0.99,
            shared_flow: false,
            n_sites: None,
            initial: InitialLaw::Fene,
            record_every: 50,
            min_relaxations: 30.0,
            gap_cells: 256,
            max_particle_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepInitial {
    /// `ρ(x) s² (1 − s²)^{κ/2}`, normalized per slice.
    Stretched,
    /// `ρ(x) M₀`: the equilibrium itself.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingularLimitConfig {
    pub taus: Vec<f64>,
    pub zeta: f64,
    pub t_end: f64,
    pub n_cells: usize,
    pub grading: f64,
    pub dt_over_zeta_tau: f64,
    pub scheme: Scheme,
    /// Slice masses `ρ(x)`.
    pub slice_masses: Vec<f64>,
    pub initial: SweepInitial,
    pub slope_min: f64,
    pub slope_max: f64,
    pub mass_tol: f64,
}

impl Default for SingularLimitConfig {
    fn default() -> Self {
        Self {
            taus: vec![0.1, 0.05, 0.02, 0.01, 0.005],
            zeta: 1.0,
            t_end: 1.0,
            n_cells: 256,
            grading: 2.0,
            dt_over_zeta_tau: 0.05,
            scheme: Scheme::ImplicitEuler,
            slice_masses: vec![0.5, 1.0, 2.0],
            initial: SweepInitial::Stretched,
            slope_min: 0.8,
            slope_max: 1.2,
            mass_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathwiseConfig {
    pub n_list: Vec<i64>,
    pub n_particles: usize,
    pub n_sites: usize,
    pub dt: f64,
    pub t_end: f64,
    pub n_bins: usize,
    pub initial: InitialLaw,
    /// Limit-equation cells per histogram bin (uniform grid).
    pub fp_refine: usize,
    pub fp_dt: f64,
    /// Allowed sup-distance in units of the largest bin standard error.
    pub stderr_factor: f64,
}

impl Default for PathwiseConfig {
    fn default() -> Self {
        Self {
            n_list: vec![8, 32],
            n_particles: 100_000,
            n_sites: 256,
            dt: 2e-3,
            t_end: 5.0,
            n_bins: 40,
            initial: InitialLaw::UniformDisc,
            fp_refine: 10,
            fp_dt: 1e-3,
            stderr_factor: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub format: OutputFormat,
    /// Not part of the config hash.
    pub out_dir: Option<PathBuf>,
    pub strict: bool,
    pub physics: PhysicsConfig,
    pub corrector: CorrectorConfig,
    pub stationary: StationaryConfig,
    pub singular_limit: SingularLimitConfig,
    pub pathwise: PathwiseConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Corrector,
            seed: 1,
            format: OutputFormat::Csv,
            out_dir: None,
            strict: false,
            physics: PhysicsConfig::default(),
            corrector: CorrectorConfig::default(),
            stationary: StationaryConfig::default(),
            singular_limit: SingularLimitConfig::default(),
            pathwise: PathwiseConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the resolved configuration, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// A CSV table with an optional trailing summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    pub results: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            tables: Vec::new(),
            results: BTreeMap::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn result_f64(&self, key: &str) -> Option<f64> {
        self.results.get(key).and_then(Value::as_f64)
    }

    fn time(&mut self, key: &str, since: Instant) {
        self.timings.insert(key.to_string(), since.elapsed().as_secs_f64());
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub version: String,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub results: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

/// Contents of `timings.json`; the only output that differs between reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timings {
    pub config_sha256: String,
    pub seconds: BTreeMap<String, f64>,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_text(t: &Table, hash: &str) -> String {
    let mut out = format!("# config_sha256: {hash}\n");
    out.push_str(&t.columns.join(","));
    out.push('\n');
    for r in &t.rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Write the report into `dir`; returns the paths written.
pub fn emit_report(report: &Report, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    if report.tables.is_empty() && report.results.is_empty() {
        return Err(invalid("empty report"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let hash = report.config.hash();
    let mut written = Vec::new();
    let mut write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
        Ok(())
    };
    if format == OutputFormat::Csv {
        for t in &report.tables {
            write(&format!("{}.csv", t.name), csv_text(t, &hash))?;
        }
    }
    let mut config = report.config.clone();
    config.out_dir = None;
    let summary = Summary {
        experiment: report.config.experiment,
        version: VERSION.to_string(),
        config_sha256: hash.clone(),
        config,
        results: report.results.clone(),
        checks: report.checks.clone(),
        warnings: report.warnings.clone(),
        passed: report.passed(),
    };
    write(
        "summary.json",
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    let timings = Timings {
        config_sha256: hash,
        seconds: report.timings.clone(),
    };
    write(
        "timings.json",
        serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n",
    )?;
    Ok(written)
}

/// Run the experiment named in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.experiment {
        ExperimentKind::Corrector => run_corrector_convergence(cfg),
        ExperimentKind::Stationary => run_stationary_comparison(cfg),
        ExperimentKind::SingularLimit => run_singular_limit(cfg),
        ExperimentKind::Pathwise => run_pathwise_limit(cfg),
    }
}

fn r_grid(c: &CorrectorConfig) -> Result<Vec<Vector2<f64>>> {
    if c.n_radial == 0 || c.n_angle == 0 || !(0.0..1.0).contains(&c.r_max) {
        return Err(invalid("r-grid needs n_radial, n_angle > 0 and 0 <= r_max < 1"));
    }
    let mut pts = Vec::new();
    for i in 0..c.n_radial {
        let rad = if c.n_radial == 1 {
            c.r_max
        } else {
            c.r_max * i as f64 / (c.n_radial - 1) as f64
        };
        for a in 0..c.n_angle {
            let th = 2.0 * PI * a as f64 / c.n_angle as f64;
            pts.push(Vector2::new(rad * th.cos(), rad * th.sin()));
        }
    }
    Ok(pts)
}

/// Sup over the r-grid of `‖A^N(r) − A(r)‖_F` for each shell index.
pub fn run_corrector_convergence(cfg: &ExperimentConfig) -> Result<Report> {
    let c = &cfg.corrector;
    if c.n_list.is_empty() {
        return Err(invalid("corrector: empty N list"));
    }
    let p = cfg.physics.params()?;
    let pts = r_grid(c)?;
    let mut rep = Report::new(cfg);
    if c.n_list.len() < 4 {
        rep.warnings
            .push(format!("corrector: {} shell(s) given, 4 or more recommended", c.n_list.len()));
    }
    let start = Instant::now();
    let mut table = Table::new("corrector", &["n_shell", "n_modes", "sup_frobenius_error", "alpha_n"]);
    let (mut ns, mut errs, mut alphas) = (Vec::new(), Vec::new(), Vec::new());
    for &n in &c.n_list {
        let m = ModeSet::build(n)?;
        let t = CorrectorTensor::new(&m, &p);
        let mut sup: f64 = 0.0;
        for r in &pts {
            let a = limit_matrix(*r, p.k_t())?;
            sup = sup.max((t.apply(*r).0 - a.0).norm());
        }
        let alpha_n = x_diffusion_coefficient(&m, &p);
        table.push(vec![n.to_string(), m.len().to_string(), num(sup), num(alpha_n)]);
        ns.push(n as f64);
        errs.push(sup);
        alphas.push(alpha_n);
    }
    rep.time("corrector", start);
    let slope = loglog_slope(&ns, &errs);
    rep.results.insert("slope".into(), json!(slope));
    rep.results.insert("alpha_n_slope".into(), json!(loglog_slope(&ns, &alphas)));
    rep.results.insert("errors".into(), json!(errs));
    if let Some(s) = slope {
        rep.checks.push(check(
            "slope_in_range",
            s >= c.slope_min && s <= c.slope_max,
            format!("slope {s:.4} vs [{}, {}]", c.slope_min, c.slope_max),
        ));
    }
    if errs.len() >= 2 {
        let (first, last) = (errs[0], errs[errs.len() - 1]);
        rep.checks.push(check(
            "decay_factor",
            last <= first / c.decay_factor,
            format!("error {last:.4e} at N={} vs {first:.4e}/{} at N={}", ns[ns.len() - 1], c.decay_factor, ns[0]),
        ));
    }
    rep.tables.push(table);
    Ok(rep)
}

fn regime_json(r: &RegimeReport) -> Value {
    serde_json::to_value(r).expect("regime report serializes")
}

/// Stationary ensemble histogram against the reference marginal.
pub fn run_stationary_comparison(cfg: &ExperimentConfig) -> Result<Report> {
    let c = &cfg.stationary;
    let p = cfg.physics.params()?;
    let regime = coil_stretch_params(p.kappa, p.k_t(), p.beta);
    let mut rep = Report::new(cfg);
    rep.results.insert("regime".into(), regime_json(&regime));
    if !regime.hardy_ok {
        let msg = format!(
            "h = {:.4} <= 1 outside the coil regime; regime report {}",
            regime.h,
            regime_json(&regime)
        );
        if cfg.strict {
            return Err(Error::RegimeViolation(msg));
        }
        rep.warnings.push(msg);
    }
    if !regime.smallness_ok {
        rep.warnings.push(format!(
            "k_T beta = {:.4} above the smallness threshold",
            p.k_t() * p.beta
        ));
    }
    let m = ModeSet::build(c.n_shell)?;
    let ens = EnsembleConfig {
        n_particles: c.n_particles,
        dt: c.dt,
        t_end: c.t_end,
        seed: cfg.seed,
        shared_flow: c.shared_flow,
        n_sites: c.n_sites,
        record_every: c.record_every,
        initial: c.initial,
        max_particle_steps: c.max_particle_steps,
    };
    let start = Instant::now();
    let out = simulate_ensemble(&ens, &p, &m)?;
    rep.time("ensemble", start);
    let hist = elongation_histogram(&out.states, c.n_bins)?;
    let reference = reference_marginal(p.kappa, p.gamma(), c.n_bins)?;
    let probs: Vec<f64> = (0..c.n_bins).map(|j| reference[j] * hist.width(j)).collect();
    let chi2 = chi_square(&hist.counts, &probs);
    let threshold = chi2_quantile(c.n_bins - 1, c.quantile);

    let start = Instant::now();
    let grid = RadialGrid::new(c.gap_cells, 2.0)?;
    let op = DiscreteOperator::assemble(&grid, p.kappa, p.gamma(), p.beta)?;
    let gap = spectral_gap(&op)?;
    let relaxations = gap * op.prefactor() * out.steps_done as f64 * c.dt;
    rep.time("spectral_gap", start);

    let mut t = Table::new("histogram", &["bin_left", "bin_right", "density", "stderr", "reference"]);
    for j in 0..c.n_bins {
        t.push(vec![
            num(hist.edges[j]),
            num(hist.edges[j + 1]),
            num(hist.density[j]),
            num(hist.stderr[j]),
            num(reference[j]),
        ]);
    }
    rep.tables.push(t);
    let mut s = Table::new("series", &["t", "mean_sq_elong", "frac_stretched"]);
    for row in &out.series {
        s.push(vec![num(row.t), num(row.mean_sq_elong), num(row.frac_stretched)]);
    }
    rep.tables.push(s);

    rep.results.insert("chi2".into(), json!(chi2));
    rep.results.insert("chi2_threshold".into(), json!(threshold));
    rep.results.insert("dof".into(), json!(c.n_bins - 1));
    rep.results.insert("violations".into(), json!(out.violations));
    rep.results.insert("max_elongation".into(), json!(out.max_elongation));
    rep.results.insert("spectral_gap".into(), json!(gap));
    rep.results.insert("relaxations".into(), json!(relaxations));
    rep.results.insert("truncated".into(), json!(out.truncated));
    rep.checks.push(check(
        "chi2_below_threshold",
        chi2 < threshold,
        format!("chi2 {chi2:.3} vs {threshold:.3} ({} dof, q = {})", c.n_bins - 1, c.quantile),
    ));
    rep.checks.push(check(
        "boundary_preserved",
        out.violations == 0 && out.max_elongation < 1.0,
        format!("{} violations, max |R| = {}", out.violations, out.max_elongation),
    ));
    rep.checks.push(check(
        "relaxed",
        relaxations >= c.min_relaxations,
        format!("lambda_1 t_end / beta = {relaxations:.2} vs {}", c.min_relaxations),
    ));
    rep.checks.push(check(
        "complete",
        !out.truncated,
        format!("{} of {} steps", out.steps_done, ens.n_steps()),
    ));
    Ok(rep)
}

fn sweep_initial(c: &SingularLimitConfig, kappa: f64, alpha: f64) -> Result<RadialDensity> {
    if c.slice_masses.is_empty() || c.slice_masses.iter().any(|m| !(*m > 0.0)) {
        return Err(invalid("singular-limit: slice masses must be positive"));
    }
    let grid = RadialGrid::new(c.n_cells, c.grading)?;
    let profile: Vec<f64> = match c.initial {
        SweepInitial::Stretched => grid
            .centers()
            .iter()
            .map(|&s| s * s * (1.0 - s * s).powf(0.5 * kappa))
            .collect(),
        SweepInitial::Stationary => DiscreteOperator::assemble(&grid, kappa, alpha, 1.0)?
            .weight_at_centers()
            .to_vec(),
    };
    let z: f64 = profile.iter().zip(grid.volumes()).map(|(f, v)| f * v).sum();
    let slices = c
        .slice_masses
        .iter()
        .map(|rho| profile.iter().map(|f| rho * f / z).collect())
        .collect();
    RadialDensity::new(grid, slices)
}

/// Singular-limit sweep of the limit equation over `τ`.
pub fn run_singular_limit(cfg: &ExperimentConfig) -> Result<Report> {
    let c = &cfg.singular_limit;
    if c.taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("singular-limit: tau list must be decreasing"));
    }
    let p = cfg.physics.params()?;
    let alpha = p.gamma();
    let mut rep = Report::new(cfg);
    let f0 = sweep_initial(c, p.kappa, alpha)?;
    let spec = SweepSpec {
        kappa: p.kappa,
        alpha,
        zeta: c.zeta,
        t_end: c.t_end,
        dt_over_zeta_tau: c.dt_over_zeta_tau,
        scheme: c.scheme,
    };
    if p.kappa / (2.0 * (1.0 + alpha)) <= 1.0 {
        rep.warnings
            .push("h <= 1: outside the weighted-space theory, results are exploratory".into());
    }
    let start = Instant::now();
    let res = singular_limit_sweep(&c.taus, &spec, &f0)?;
    rep.time("sweep", start);

    let mut sweep = Table::new(
        "sweep",
        &["tau", "integral_distance", "monotone", "max_mass_drift", "error", "fitted_slope"],
    );
    let mut traj = Table::new("trajectory", &["tau", "t", "h0_distance", "mass"]);
    for r in &res.rows {
        sweep.push(vec![
            num(r.tau),
            r.integral.map(num).unwrap_or_default(),
            r.monotone.to_string(),
            num(r.max_mass_drift),
            r.error.clone().unwrap_or_default(),
            String::new(),
        ]);
        for (t, d, m) in &r.trace {
            traj.push(vec![num(r.tau), num(*t), num(*d), num(*m)]);
        }
    }
    sweep.push(vec![
        "summary".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        res.slope.map(num).unwrap_or_default(),
    ]);
    rep.tables.push(sweep);
    rep.tables.push(traj);

    let all_zero = res.rows.iter().all(|r| r.integral == Some(0.0));
    rep.results.insert("slope".into(), json!(res.slope));
    rep.results.insert("slope_defined".into(), json!(res.slope.is_some()));
    rep.results.insert("all_zero".into(), json!(all_zero));
    rep.results.insert(
        "integrals".into(),
        json!(res.rows.iter().map(|r| r.integral).collect::<Vec<_>>()),
    );
    let drift = res
        .rows
        .iter()
        .map(|r| r.max_mass_drift)
        .fold(0.0, f64::max);
    rep.results.insert("max_mass_drift".into(), json!(drift));
    rep.checks.push(match res.slope {
        Some(s) => check(
            "slope_in_range",
            s >= c.slope_min && s <= c.slope_max,
            format!("slope {s:.4} vs [{}, {}]", c.slope_min, c.slope_max),
        ),
        None => check("slope_in_range", false, "slope undefined".into()),
    });
    let bumpy: Vec<String> = res
        .rows
        .iter()
        .filter(|r| !r.monotone)
        .map(|r| num(r.tau))
        .collect();
    rep.checks.push(check(
        "monotone_decay",
        bumpy.is_empty(),
        if bumpy.is_empty() {
            "H0 distance non-increasing at every output time".into()
        } else {
            format!("H0 distance increased for tau = {}", bumpy.join(", "))
        },
    ));
    rep.checks.push(check(
        "mass_conserved",
        drift <= c.mass_tol,
        format!("max relative slice-mass drift {drift:.3e} vs {:e}", c.mass_tol),
    ));
    rep.checks.push(check(
        "rows_complete",
        res.rows.iter().all(|r| r.error.is_none()),
        format!("{} rows", res.rows.len()),
    ));
    Ok(rep)
}

/// Bin densities of the limit-equation solution at `t_end`, started from
/// the law `initial` on a uniform grid with `refine` cells per bin.
pub fn limit_equation_histogram(
    p: &PhysParams,
    initial: InitialLaw,
    n_bins: usize,
    refine: usize,
    dt: f64,
    t_end: f64,
) -> Result<Vec<f64>> {
    if refine == 0 {
        return Err(invalid("fp_refine must be positive"));
    }
    let grid = RadialGrid::new(n_bins * refine, 1.0)?;
    let f0 = match initial {
        InitialLaw::Origin => {
            return Err(invalid("the origin initial law has no density"));
        }
        InitialLaw::UniformDisc => RadialDensity::from_fn(&grid, |_| 1.0 / PI)?,
        InitialLaw::Fene => {
            let k = p.kappa;
            RadialDensity::from_fn(&grid, |s| (0.5 * k + 1.0) / PI * (1.0 - s * s).powf(0.5 * k))?
        }
    };
    let op = DiscreteOperator::assemble(&grid, p.kappa, p.gamma(), p.zeta() * p.tau)?;
    let f = evolve_with(&f0, &op, dt, t_end, Scheme::ImplicitEuler, |_, _| {})?;
    let width = 1.0 / n_bins as f64;
    let mass: f64 = f.total_mass();
    Ok((0..n_bins)
        .map(|b| {
            let cells = b * refine..(b + 1) * refine;
            let m: f64 = cells.map(|j| f.single()[j] * grid.volumes()[j]).sum();
            m / (mass * width)
        })
        .collect())
}

/// Standard error of each bin density with the initial sites as the
/// independent units: particles of one site share their flow path, so the
/// per-particle binomial error understates the spread.
fn site_stderr(states: &[ParticleState], n_sites: usize, n_bins: usize) -> Vec<f64> {
    let n_sites = n_sites.min(states.len());
    let mut counts = vec![vec![0u32; n_bins]; n_sites];
    let mut sizes = vec![0u32; n_sites];
    for (i, st) in states.iter().enumerate() {
        let j = ((st.elongation() * n_bins as f64) as usize).min(n_bins - 1);
        counts[i % n_sites][j] += 1;
        sizes[i % n_sites] += 1;
    }
    let w = 1.0 / n_bins as f64;
    let k = n_sites as f64;
    (0..n_bins)
        .map(|j| {
            let d: Vec<f64> = counts
                .iter()
                .zip(&sizes)
                .map(|(c, &m)| c[j] as f64 / (m as f64 * w))
                .collect();
            let mean = d.iter().sum::<f64>() / k;
            let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
            (var / k).sqrt()
        })
        .collect()
}

/// One shared flow realization per shell index, compared with the limit
/// equation at the same time.
pub fn run_pathwise_limit(cfg: &ExperimentConfig) -> Result<Report> {
    let c = &cfg.pathwise;
    if c.n_list.is_empty() {
        return Err(invalid("pathwise: empty N list"));
    }
    let p = cfg.physics.params()?;
    let mut rep = Report::new(cfg);
    let start = Instant::now();
    let fp = limit_equation_histogram(&p, c.initial, c.n_bins, c.fp_refine, c.fp_dt, c.t_end)?;
    rep.time("limit_equation", start);
    let mut hist_t = Table::new(
        "pathwise",
        &["n_shell", "bin_left", "bin_right", "density", "stderr", "fp_density"],
    );
    let mut sum_t = Table::new(
        "pathwise_summary",
        &["n_shell", "sup_distance", "max_stderr", "violations"],
    );
    let mut sups = Vec::new();
    for &n in &c.n_list {
        let m = ModeSet::build(n)?;
        let ens = EnsembleConfig {
            n_particles: c.n_particles,
            dt: c.dt,
            t_end: c.t_end,
            seed: cfg.seed,
            shared_flow: true,
            n_sites: Some(c.n_sites),
            record_every: usize::MAX,
            initial: c.initial,
            max_particle_steps: None,
        };
        let start = Instant::now();
        let out = simulate_ensemble(&ens, &p, &m)?;
        rep.time(&format!("ensemble_n{n}"), start);
        let h = elongation_histogram(&out.states, c.n_bins)?;
        let sup = h
            .density
            .iter()
            .zip(&fp)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let se = site_stderr(&out.states, c.n_sites, c.n_bins);
        let max_se = se.iter().cloned().fold(0.0, f64::max);
        for j in 0..c.n_bins {
            hist_t.push(vec![
                n.to_string(),
                num(h.edges[j]),
                num(h.edges[j + 1]),
                num(h.density[j]),
                num(se[j]),
                num(fp[j]),
            ]);
        }
        sum_t.push(vec![n.to_string(), num(sup), num(max_se), out.violations.to_string()]);
        sups.push((n, sup, max_se, out.violations));
    }
    rep.tables.push(hist_t);
    rep.tables.push(sum_t);
    rep.results.insert(
        "sup_distance".into(),
        json!(sups.iter().map(|s| json!({"n_shell": s.0, "sup": s.1, "max_stderr": s.2})).collect::<Vec<_>>()),
    );
    let (n_last, sup_last, se_last, _) = sups[sups.len() - 1];
    rep.checks.push(check(
        "within_stderr",
        sup_last <= c.stderr_factor * se_last,
        format!(
            "N={n_last}: sup {sup_last:.4} vs {} x stderr {se_last:.4} = {:.4}",
            c.stderr_factor,
            c.stderr_factor * se_last
        ),
    ));
    if sups.len() >= 2 {
        let (n0, sup0, _, _) = sups[0];
        rep.checks.push(check(
            "decreases_with_n",
            sup_last < sup0,
            format!("sup {sup_last:.4} at N={n_last} vs {sup0:.4} at N={n0}"),
        ));
    }
    rep.checks.push(check(
        "boundary_preserved",
        sups.iter().all(|s| s.3 == 0),
        "zero |R| >= 1 events".into(),
    ));
    Ok(rep)
}
