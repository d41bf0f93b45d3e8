//! Certified bounds on the best classical non-communicating strategy at a
//! fixed splitting probability.
//!
//! Optimal deterministic local strategies are threshold rules
//! `f_θ(x) = +1 for x < θ, −1 otherwise`, so the classical value reduces to
//! a two-threshold optimization in the moments
//!
//! ```text
//! D0(θ) = E[f_θ(X)]   = 1 − 2e^{−μθ}
//! D1(θ) = E[f_θ(X)·X] = D0(θ)/μ − 2θe^{−μθ}
//! A(θA, θB) = −c1·D1A·D1B − c2·(D1A·D0B + D0A·D1B)
//! D0(θA)·D0(θB) = 1 − 2p                      (splitting constraint)
//! ```
//!
//! Eliminating `θB` through the constraint gives a one-dimensional reduced
//! objective `Ã(θA)` over a feasible half-line. The module certifies
//! `A_grid ≤ A*_cl(p) ≤ A_grid + L·δ/2` via a grid search with a numerical
//! Lipschitz constant, evaluates the two boundary limits of the feasible
//! curve exactly (they correspond to one player playing a constant), and
//! bounds the excluded boundary strips explicitly so the certificate covers
//! the entire closed feasible set.
//!
//! Shared randomness is handled by concavification: the best classical
//! value with a common random variable is the upper concave envelope of the
//! deterministic value as a function of `p`.

use crate::error::{Error, Result};
use crate::model::SystemParams;

/// Thresholds are stored as plain `f64` with `+∞` meaning the constant
/// strategy `+1` (never output −1) and `0` the constant `−1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdMoments {
    pub theta: f64,
    /// `E[f_θ(X)] ∈ [−1, 1)` for finite θ; 1 at the `+∞` sentinel.
    pub d0: f64,
    /// `E[f_θ(X)·X]`, in time units.
    pub d1: f64,
}

/// Closed-form threshold moments. Accepts the `+∞` sentinel; rejects
/// negative or NaN thresholds.
pub fn threshold_moments(mu: f64, theta: f64) -> Result<ThresholdMoments> {
    if mu <= 0.0 || !mu.is_finite() {
        return Err(Error::InvalidParams(format!("mu must be positive, got {mu}")));
    }
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::InvalidParams(format!("theta must be >= 0, got {theta}")));
    }
    if theta.is_infinite() {
        return Ok(ThresholdMoments { theta, d0: 1.0, d1: 1.0 / mu });
    }
    let e = (-mu * theta).exp();
    let d0 = 1.0 - 2.0 * e;
    let d1 = d0 / mu - 2.0 * theta * e;
    Ok(ThresholdMoments { theta, d0, d1 })
}

fn moments(mu: f64, theta: f64) -> (f64, f64) {
    let m = threshold_moments(mu, theta).expect("theta >= 0");
    (m.d0, m.d1)
}

/// Game payoff of a threshold pair, `−c1·D1A·D1B − c2·(D1A·D0B + D0A·D1B)`.
/// Sentinel thresholds are allowed.
pub fn payoff_thresholds(params: &SystemParams, th_a: f64, th_b: f64) -> f64 {
    let (d0a, d1a) = moments(params.mu, th_a);
    let (d0b, d1b) = moments(params.mu, th_b);
    payoff_from_moments(params, d0a, d1a, d0b, d1b)
}

fn payoff_from_moments(params: &SystemParams, d0a: f64, d1a: f64, d0b: f64, d1b: f64) -> f64 {
    -params.c1 * d1a * d1b - params.c2 * (d1a * d0b + d0a * d1b)
}

/// Left end of the feasible `θA` range for the reduced problem:
/// `−ln(min(p, 1−p))/μ`. Feasibility requires `θA > theta_min`.
pub fn theta_min(mu: f64, p: f64) -> f64 {
    -p.min(1.0 - p).ln() / mu
}

/// Solves `D0(θA)·D0(θB) = 1 − 2p` for `θB`.
///
/// For `p ∈ (0, 1/2)` this requires `θA > theta_min(μ, p) = −ln(p)/μ`; the
/// mirrored condition applies for `p ∈ (1/2, 1)`. At `p = 1/2` the
/// constraint forces `D0(θB) = 0`, i.e. `θB = ln(2)/μ`, for any feasible
/// `θA`. Infeasible inputs produce a typed error, never NaN.
pub fn solve_theta_b(mu: f64, p: f64, th_a: f64) -> Result<f64> {
    if p.is_nan() || p <= 0.0 || p >= 1.0 {
        return Err(Error::InvalidParams(format!("p must lie in (0, 1), got {p}")));
    }
    if th_a.is_nan() || th_a < 0.0 {
        return Err(Error::InvalidParams(format!("theta_a must be >= 0, got {th_a}")));
    }
    if (p - 0.5).abs() < f64::EPSILON {
        return Ok(2.0f64.ln() / mu);
    }
    let lo = theta_min(mu, p);
    if th_a <= lo {
        return Err(Error::Infeasible(format!(
            "theta_a = {th_a} is not above the feasibility cutoff {lo} for p = {p}"
        )));
    }
    let t = 1.0 - 2.0 * p;
    let (d0a, _) = moments(mu, th_a);
    let arg = 0.5 * (1.0 - t / d0a);
    if !(arg > 0.0 && arg < 1.0) {
        return Err(Error::Infeasible(format!(
            "no threshold solves the constraint at theta_a = {th_a}, p = {p}"
        )));
    }
    Ok(-arg.ln() / mu)
}

/// Reduced one-dimensional objective `Ã(θA) = A(θA, θB(θA))`.
pub fn reduced_objective(params: &SystemParams, p: f64, th_a: f64) -> Result<f64> {
    let th_b = solve_theta_b(params.mu, p, th_a)?;
    Ok(payoff_thresholds(params, th_a, th_b))
}

/// Analytic derivative `dÃ/dθA` via the chain rule with
/// `dθB/dθA = −D0'(θA)·D0(θB) / (D0(θA)·D0'(θB))`.
pub fn reduced_objective_derivative(params: &SystemParams, p: f64, th_a: f64) -> Result<f64> {
    let th_b = solve_theta_b(params.mu, p, th_a)?;
    let mu = params.mu;
    let (d0a, d1a) = moments(mu, th_a);
    let (d0b, d1b) = moments(mu, th_b);
    let d0p_a = 2.0 * mu * (-mu * th_a).exp();
    let d1p_a = 2.0 * mu * th_a * (-mu * th_a).exp();
    let d0p_b = 2.0 * mu * (-mu * th_b).exp();
    let d1p_b = 2.0 * mu * th_b * (-mu * th_b).exp();
    let da_dth_a = -params.c1 * d1p_a * d1b - params.c2 * (d1p_a * d0b + d0p_a * d1b);
    let da_dth_b = -params.c1 * d1a * d1p_b - params.c2 * (d1a * d0p_b + d0a * d1p_b);
    let dthb_dtha = -(d0p_a * d0b) / (d0a * d0p_b);
    Ok(da_dth_a + da_dth_b * dthb_dtha)
}

/// Grid-search configuration for the certificate. `theta_max` and
/// `epsilon` are in units of `1/μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub grid_points: usize,
    pub theta_max: f64,
    pub epsilon: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { grid_points: 500, theta_max: 12.0, epsilon: 1e-3 }
    }
}

/// Certified bracket `a_grid ≤ A*_cl(p) ≤ upper` on the deterministic
/// classical value at one splitting probability.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedBound {
    pub p: f64,
    /// Best payoff found: the grid maximum or one of the exact boundary
    /// strategies, whichever is larger. A feasible strategy attains it.
    pub a_grid: f64,
    /// Numerical Lipschitz constant of `Ã` over the searched interval.
    pub lipschitz: f64,
    /// Grid spacing.
    pub delta: f64,
    /// `a_grid + lipschitz·delta/2`.
    pub upper: f64,
    /// Argmax threshold pair; `+∞` marks a constant-strategy endpoint.
    pub theta_star: (f64, f64),
    /// True when the explicit bounds on the excluded boundary strips stay
    /// below `upper`, so the certificate covers the whole feasible curve.
    pub boundary_ok: bool,
    pub epsilon: f64,
    pub theta_max: f64,
    /// `|D0(θA)·D0(θB) − (1−2p)|` at `theta_star`.
    pub constraint_residual: f64,
    /// `c1·E1 + c2·E0` of the partner player at the argmax; the optimal
    /// response stays a genuine threshold while this is away from zero.
    pub nondegeneracy_margin: f64,
}

/// Exact payoff at the closed end of the feasible curve where the partner
/// threshold diverges: for p < 1/2 the pair is `(theta_min, +∞)`; for
/// p > 1/2 the mirrored pair has the partner constant at −1 (`θB = 0`).
fn boundary_pair(mu: f64, p: f64) -> (f64, f64) {
    let lo = theta_min(mu, p);
    if p < 0.5 {
        (lo, f64::INFINITY)
    } else {
        (lo, 0.0)
    }
}

/// θ(u) = −ln((1−u)/2)/μ, the threshold with D0 = u.
fn theta_of_d0(mu: f64, u: f64) -> f64 {
    -(0.5 * (1.0 - u)).ln() / mu
}

/// |d1(s2) − d1(s1)| for the D0-parameterized first moment, using
/// `d(D1)/d(D0) = θ` and its exact antiderivative near the log-singular
/// endpoint u = 1.
fn d1_variation(mu: f64, s1: f64, s2: f64) -> f64 {
    debug_assert!(s1 <= s2);
    if s2 >= 1.0 {
        let lo = if s1 >= 1.0 { 0.0 } else { (1.0 - s1) * (1.0 + mu * theta_of_d0(mu, s1)) / mu };
        return lo;
    }
    (s2 - s1) * theta_of_d0(mu, s2).max(0.0)
}

/// Upper bound on `sup |Ã − Ã(endpoint)|` over a boundary strip of the
/// feasible curve, parameterized by `u = D0(θA)` on `[u0, u0 + du]` with the
/// partner moment `v = (1−2p)/u`. First-order product expansions keep the
/// bound sharp where the affected coefficients are small.
fn strip_bound(params: &SystemParams, p: f64, u0: f64, du: f64) -> f64 {
    let mu = params.mu;
    let t = 1.0 - 2.0 * p;
    let u1 = (u0 + du.abs()).min(1.0);
    let v0 = t / u0;
    let v1 = t / u1;
    let (v_lo, v_hi) = if v0 <= v1 { (v0, v1) } else { (v1, v0) };
    let d_u = u1 - u0;
    let d_v = v_hi - v_lo;
    let d1_u0 = threshold_moments(mu, theta_of_d0(mu, u0)).map(|m| m.d1).unwrap_or(0.0);
    let d_d1u = d1_variation(mu, u0.min(u1), u0.max(u1));
    let d_d1v = d1_variation(mu, v_lo, v_hi);
    let c1 = params.c1;
    let c2 = params.c2;
    // Coefficients frozen at the strip endpoint; cross terms second order.
    let coeff_d1v = (c1 * d1_u0 + c2 * u0).abs();
    (c1 / mu + c2) * d_d1u
        + coeff_d1v * d_d1v
        + c2 * d1_u0.abs() * d_v
        + (c2 / mu) * d_u
        + c1 * d_d1u * d_d1v
        + c2 * d_d1u * d_v
        + c2 * d_u * d_d1v
}

/// Lipschitz-certified grid search for the deterministic classical value.
///
/// Degenerate targets are exact: `p = 0` gives `−E[w]`, `p = 1` gives
/// `+E[w]`, and `p = 1/2` is the analytically solvable `D0·D0 = 0` case.
/// Otherwise the search scans `θA ∈ [theta_min + ε, theta_max]`, estimates
/// the Lipschitz constant on a 10× finer grid, and evaluates the two
/// boundary strategies exactly. `boundary_ok` reports whether the strip
/// bounds keep the whole closed curve below `upper`; an invalid
/// certificate is reported, not an error.
pub fn certified_classical_bound(
    params: &SystemParams,
    p: f64,
    cfg: &GridConfig,
) -> Result<CertifiedBound> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("p must lie in [0, 1], got {p}")));
    }
    if cfg.grid_points < 2 {
        return Err(Error::InvalidParams("grid_points must be at least 2".into()));
    }
    if cfg.epsilon.is_nan() || cfg.epsilon <= 0.0 || cfg.theta_max.is_nan() || cfg.theta_max <= 0.0 {
        return Err(Error::InvalidParams("epsilon and theta_max must be positive".into()));
    }
    let mu = params.mu;
    let ew = params.expected_benefit();

    let exact = |value: f64, pair: (f64, f64), margin: f64| CertifiedBound {
        p,
        a_grid: value,
        lipschitz: 0.0,
        delta: 0.0,
        upper: value,
        theta_star: pair,
        boundary_ok: true,
        epsilon: cfg.epsilon / mu,
        theta_max: cfg.theta_max / mu,
        constraint_residual: 0.0,
        nondegeneracy_margin: margin,
    };

    if p == 0.0 {
        // Never split: both players constant +1.
        return Ok(exact(-ew, (f64::INFINITY, f64::INFINITY), params.c1 / mu + params.c2));
    }
    if p == 1.0 {
        // Always split: opposite constants.
        return Ok(exact(ew, (f64::INFINITY, 0.0), -(params.c1 / mu + params.c2)));
    }
    if (p - 0.5).abs() < f64::EPSILON {
        // D0(θB) = 0 pins θB = ln2/μ; Ã is then increasing in θA, so the
        // supremum sits at the +∞ sentinel with value (ln2/μ)(c1/μ + c2).
        let th_b = 2.0f64.ln() / mu;
        let value = (2.0f64.ln() / mu) * (params.c1 / mu + params.c2);
        let (_, d1b) = moments(mu, th_b);
        return Ok(exact(value, (f64::INFINITY, th_b), params.c1 * d1b));
    }

    let th_lo = theta_min(mu, p);
    let eps = cfg.epsilon / mu;
    let th_max = cfg.theta_max / mu;
    let start = th_lo + eps;
    if start >= th_max {
        return Err(Error::InvalidParams(format!(
            "theta_max = {th_max} does not exceed theta_min + epsilon = {start} at p = {p}"
        )));
    }

    let n = cfg.grid_points;
    let delta = (th_max - start) / (n - 1) as f64;
    let mut best_val = f64::NEG_INFINITY;
    let mut best_th = start;
    for k in 0..n {
        let th = start + delta * k as f64;
        let v = reduced_objective(params, p, th)?;
        if v > best_val {
            best_val = v;
            best_th = th;
        }
    }

    let fine_n = 10 * n;
    let fine_delta = (th_max - start) / (fine_n - 1) as f64;
    let mut lipschitz = 0.0f64;
    for k in 0..fine_n {
        let th = start + fine_delta * k as f64;
        let d = reduced_objective_derivative(params, p, th)?.abs();
        if d > lipschitz {
            lipschitz = d;
        }
    }

    // Exact boundary strategies: the closed ends of the feasible curve.
    let (b_tha, b_thb) = boundary_pair(mu, p);
    let a_bound = payoff_thresholds(params, b_tha, b_thb);

    let (a_grid, theta_star) = if a_bound > best_val {
        // Both ends share the same value by player symmetry; report the
        // canonical one.
        (a_bound, (b_tha, b_thb))
    } else {
        (best_val, (best_th, solve_theta_b(mu, p, best_th)?))
    };
    let upper = a_grid + lipschitz * delta / 2.0;

    // Strip near theta_min: u = D0(θA) runs over [u_lo, D0(start)].
    let u_lo = if p < 0.5 { 1.0 - 2.0 * p } else { 2.0 * p - 1.0 };
    let du_lo = {
        let (d0_start, _) = moments(mu, start);
        d0_start - u_lo
    };
    // Tail beyond theta_max: by player symmetry it is the strip of the
    // partner's parameter v over [u_lo, (1−2p)/D0(theta_max)].
    let du_hi = {
        let (d0_max, _) = moments(mu, th_max);
        ((1.0 - 2.0 * p) / d0_max).abs() - u_lo
    };
    let strip_lo = strip_bound(params, p, u_lo, du_lo.max(0.0));
    let strip_hi = strip_bound(params, p, u_lo, du_hi.max(0.0));
    let boundary_ok = a_bound + strip_lo <= upper + 1e-12 && a_bound + strip_hi <= upper + 1e-12;

    let (d0a, _) = moments(mu, theta_star.0);
    let (d0b, d1b) = moments(mu, theta_star.1);
    let constraint_residual = (d0a * d0b - (1.0 - 2.0 * p)).abs();
    let nondegeneracy_margin = params.c1 * d1b + params.c2 * d0b;

    Ok(CertifiedBound {
        p,
        a_grid,
        lipschitz,
        delta,
        upper,
        theta_star,
        boundary_ok,
        epsilon: eps,
        theta_max: th_max,
        constraint_residual,
        nondegeneracy_margin,
    })
}

/// One point of the deterministic value curve and its concave envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub p: f64,
    pub det_value: f64,
    pub sr_value: f64,
}

/// Upper concave envelope of `(p, value)` points, evaluated back on the
/// input grid. Input must be sorted with strictly increasing `p`.
///
/// The hull is built by a single monotone pass keeping slopes strictly
/// decreasing; envelope values between hull vertices are chords.
pub fn concave_envelope(points: &[(f64, f64)]) -> Result<Vec<EnvelopePoint>> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    for pair in points.windows(2) {
        if !(pair[1].0 > pair[0].0) {
            return Err(Error::InvalidInput(format!(
                "p values must be strictly increasing, got {} then {}",
                pair[0].0, pair[1].0
            )));
        }
    }
    if points.iter().any(|&(p, v)| !p.is_finite() || !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite envelope input".into()));
    }

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &q in points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // Pop b while it lies on or below the chord a—q.
            if (b.1 - a.1) * (q.0 - a.0) <= (q.1 - a.1) * (b.0 - a.0) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(q);
    }

    let mut out = Vec::with_capacity(points.len());
    let mut seg = 0;
    for &(p, v) in points {
        while seg + 1 < hull.len() - 1 && hull[seg + 1].0 <= p {
            seg += 1;
        }
        let (x0, y0) = hull[seg];
        let (x1, y1) = hull[seg + 1.min(hull.len() - 1 - seg)];
        let sr = if x1 == x0 { y0 } else { y0 + (y1 - y0) * (p - x0) / (x1 - x0) };
        // Chord interpolation can round a hair below an input vertex.
        out.push(EnvelopePoint { p, det_value: v, sr_value: sr.max(v) });
    }
    Ok(out)
}
