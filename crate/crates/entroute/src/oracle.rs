//! The `w`-threshold policy: the full-information optimum at a fixed
//! splitting probability.
//!
//! The policy splits exactly the pairs whose splitting benefit exceeds a
//! threshold `τ_p` calibrated so that `Pr[w(X1, X2) > τ_p] = p`, and its
//! payoff is estimated by Monte Carlo:
//!
//! 1. sample N iid pairs `(X1, X2) ~ Exp(μ)²`,
//! 2. compute `wᵢ = w(X1ᵢ, X2ᵢ)`,
//! 3. take `τ_p` as the (1−p)-quantile of the sample,
//! 4. set `σᵢ = sign(τ_p − wᵢ)` (+1 bunch, −1 split; ties split),
//! 5. estimate `A*(p) ≈ −(1/N) Σ σᵢ wᵢ`.
//!
//! The same sample serves both the quantile and the payoff. Sampling uses
//! ChaCha8 seeded from a `u64` with inverse-CDF exponentials, so a seed
//! pins the result bit-for-bit on every platform.
//!
//! A deterministic cross-check lives alongside: [`oracle_payoff_quadrature`]
//! inverts `Pr[w > τ] = p` numerically and evaluates the payoff by
//! quadrature with the inner integral in closed form. It is the arbiter
//! whenever the Monte Carlo estimate is under test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{splitting_benefit, SystemParams};
use crate::quad::gauss_legendre;

/// Smallest admissible Monte Carlo sample count.
pub const MIN_SAMPLES: usize = 1000;

/// Monte Carlo estimate of the `w`-threshold payoff at one splitting
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePayoff {
    pub p: f64,
    /// Calibrated threshold (`+∞` at p = 0, `0` at p = 1).
    pub tau: f64,
    /// Estimated payoff A*(p).
    pub a_star: f64,
    /// Standard error of the payoff estimate.
    pub std_err: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Threshold decision: +1 (bunch) below `tau`, −1 (split) at or above.
///
/// The tie `w == tau` splits; the benefit distribution is continuous so the
/// convention is measure-zero, but it is fixed for reproducibility.
pub fn sigma_star(tau: f64, w: f64) -> f64 {
    if w < tau {
        1.0
    } else {
        -1.0
    }
}

/// Inverse-CDF exponential draw; `u ∈ [0, 1)` keeps the argument of `ln`
/// strictly positive.
fn sample_exp(rng: &mut ChaCha8Rng, mu: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / mu
}

fn sample_benefits(params: &SystemParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x1 = sample_exp(&mut rng, params.mu);
            let x2 = sample_exp(&mut rng, params.mu);
            splitting_benefit(params, x1, x2)
        })
        .collect()
}

fn validate(p: f64, n: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("p must lie in [0, 1], got {p}")));
    }
    if n < MIN_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    Ok(())
}

/// Order statistic at the 1-based index ⌈(1−p)·n⌉ of the sorted sample
/// (no interpolation).
fn quantile_index(p: f64, n: usize) -> usize {
    let k = ((1.0 - p) * n as f64).ceil() as usize;
    k.clamp(1, n)
}

/// Empirical (1−p)-quantile of `w(X1, X2)` over `n` sampled pairs.
///
/// Endpoints bypass sampling: p = 0 returns `+∞` (split nothing) and
/// p = 1 returns `0` (split everything).
pub fn estimate_tau(params: &SystemParams, p: f64, n: usize, seed: u64) -> Result<f64> {
    validate(p, n)?;
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let mut w = sample_benefits(params, n, seed);
    w.sort_by(f64::total_cmp);
    Ok(w[quantile_index(p, n) - 1])
}

/// Monte Carlo `w`-threshold payoff with standard error, using one sample
/// for both the quantile and the payoff. Deterministic given the seed.
pub fn oracle_payoff(params: &SystemParams, p: f64, n: usize, seed: u64) -> Result<OraclePayoff> {
    validate(p, n)?;
    let w = sample_benefits(params, n, seed);
    let tau = if p == 0.0 {
        f64::INFINITY
    } else if p == 1.0 {
        0.0
    } else {
        let mut sorted = w.clone();
        sorted.sort_by(f64::total_cmp);
        sorted[quantile_index(p, n) - 1]
    };
    let nf = n as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &wi in &w {
        let term = -sigma_star(tau, wi) * wi;
        sum += term;
        sum_sq += term * term;
    }
    let a_star = sum / nf;
    let var = (sum_sq / nf - a_star * a_star).max(0.0) * nf / (nf - 1.0);
    Ok(OraclePayoff { p, tau, a_star, std_err: (var / nf).sqrt(), n_samples: n, seed })
}

/// Fraction of the sample split by the calibrated threshold (σ = −1).
pub fn realized_split_fraction(params: &SystemParams, p: f64, n: usize, seed: u64) -> Result<f64> {
    let tau = estimate_tau(params, p, n, seed)?;
    let w = sample_benefits(params, n, seed);
    Ok(w.iter().filter(|&&wi| sigma_star(tau, wi) < 0.0).count() as f64 / n as f64)
}

// ---------------------------------------------------------------------------
// Deterministic quadrature arbiter.
//
// For fixed x1, w(x1, x2) > τ iff x2 > g(x1) with
//   g(x1) = max(0, (τ − c2 x1) / (c1 x1 + c2)),
// and g vanishes for x1 ≥ x* = τ/c2. The inner x2-integrals are closed
// form, leaving one smooth integral over [0, x*] (panelled Gauss–Legendre)
// plus an exact tail.
// ---------------------------------------------------------------------------

const PANEL_ORDER: usize = 64;

/// Per-panel target length in units of 1/μ.
const PANEL_SCALE: f64 = 2.0;

fn x2_threshold(params: &SystemParams, tau: f64, x1: f64) -> f64 {
    ((tau - params.c2 * x1) / (params.c1 * x1 + params.c2)).max(0.0)
}

fn front_panels(params: &SystemParams, x_star: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n_panels = ((params.mu * x_star / PANEL_SCALE).ceil() as usize).clamp(2, 64);
    let mut panels = Vec::with_capacity(n_panels);
    for k in 0..n_panels {
        let a = x_star * k as f64 / n_panels as f64;
        let b = x_star * (k + 1) as f64 / n_panels as f64;
        panels.push(gauss_legendre(PANEL_ORDER, a, b).expect("valid panel"));
    }
    panels
}

/// `Pr[w(X1, X2) > τ]`, evaluated to near machine precision.
pub fn split_probability_above(params: &SystemParams, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 1.0;
    }
    if tau.is_infinite() {
        return 0.0;
    }
    let mu = params.mu;
    let x_star = tau / params.c2;
    let mut front = 0.0;
    for (nodes, weights) in front_panels(params, x_star) {
        for (&x, &wt) in nodes.iter().zip(&weights) {
            let g = x2_threshold(params, tau, x);
            front += wt * mu * (-mu * (x + g)).exp();
        }
    }
    front + (-mu * x_star).exp()
}

/// `E[w · 1{w > τ}]` with the inner integral in closed form.
fn expected_benefit_above(params: &SystemParams, tau: f64) -> f64 {
    if tau <= 0.0 {
        return params.expected_benefit();
    }
    if tau.is_infinite() {
        return 0.0;
    }
    let (mu, c1, c2) = (params.mu, params.c1, params.c2);
    let x_star = tau / c2;
    let mut front = 0.0;
    for (nodes, weights) in front_panels(params, x_star) {
        for (&x, &wt) in nodes.iter().zip(&weights) {
            let g = x2_threshold(params, tau, x);
            let inner = (-mu * g).exp() * ((c1 * x + c2) * (g + 1.0 / mu) + c2 * x);
            front += wt * mu * (-mu * x).exp() * inner;
        }
    }
    // Tail x1 ≥ x*: every partner splits, E[w(x1, X2)] integrates exactly.
    let e1 = (-mu * x_star).exp();
    let ex = e1 * (x_star + 1.0 / mu);
    front + (c1 / mu + c2) * ex + (c2 / mu) * e1
}

/// Inverts `Pr[w > τ] = p` by bisection; the survival function is strictly
/// decreasing and continuous.
pub fn threshold_for_split_probability(params: &SystemParams, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("p must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while split_probability_above(params, hi) > p {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Infeasible(format!("threshold search diverged for p = {p}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if split_probability_above(params, mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Deterministic `w`-threshold payoff `A*(p) = 2·E[w·1{w>τ}] − E[w]`,
/// with `τ` from numerical CDF inversion. Cross-validates [`oracle_payoff`].
pub fn oracle_payoff_quadrature(params: &SystemParams, p: f64) -> Result<f64> {
    let ew = params.expected_benefit();
    if p == 0.0 {
        return Ok(-ew);
    }
    if p == 1.0 {
        return Ok(ew);
    }
    let tau = threshold_for_split_probability(params, p)?;
    Ok(2.0 * expected_benefit_above(params, tau) - ew)
}
