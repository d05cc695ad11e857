//! Adaptive quadrature on finite intervals.
//!
//! Tanh-sinh rules from the `quadrature` crate handle algebraic endpoint
//! singularities (weights vanishing like a fractional power at s = 1);
//! intervals whose error estimate misses the target are bisected.

const MAX_DEPTH: u32 = 40;

/// Integrate `f` over `[a, b]` to a relative tolerance `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let coarse = quadrature::double_exponential::integrate(&f, a, b, 1e-14);
    let scale = coarse.integral.abs().max(f64::MIN_POSITIVE);
    refine(&f, a, b, rel_tol * scale, 0)
}

/// Integrate over `[a, b]` split at the given interior breakpoints.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], rel_tol: f64) -> f64 {
    points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| integrate(&f, w[0], w[1], rel_tol))
        .sum()
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, depth: u32) -> f64 {
    let out = quadrature::double_exponential::integrate(f, a, b, abs_tol);
    if out.error_estimate <= abs_tol || depth >= MAX_DEPTH {
        return out.integral;
    }
    let m = 0.5 * (a + b);
    refine(f, a, m, 0.5 * abs_tol, depth + 1) + refine(f, m, b, 0.5 * abs_tol, depth + 1)
}
