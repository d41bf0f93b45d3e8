//! Core queueing model for paired Poisson arrivals on two identical servers.
//!
//! Customer pairs arrive at rate `λ`; each customer's service time is
//! Exp(`μ`). A routing policy either splits a pair across the servers or
//! bunches it onto one. Under load-balanced assignment, the mean customer
//! waiting time decomposes as
//!
//! ```text
//! E[Wq] = C − E[r · w(X1, X2)]
//! C     = λ E[S²] / (4(1−ρ)) + E[S]/4          (policy independent)
//! w(x1, x2) = c1·x1·x2 + c2·(x1 + x2)           (splitting benefit)
//! c1 = λ / (2(1−ρ)),  c2 = 1/4,  ρ = λ/μ
//! ```
//!
//! where `r` is the probability that a pair with the observed service times
//! is split. Exponential service is assumed throughout, so `E[S] = 2/μ` and
//! `E[S²] = 6/μ²` for the pair total `S = X1 + X2`.
//!
//! Strategy quality is measured by the payoff `A = −E[oA·oB·w]` of the
//! routing game (outputs `oA, oB ∈ {±1}`, product −1 meaning split). The
//! excess waiting time of any strategy relative to the full-information
//! `w`-threshold optimum with payoff `A*` at the same splitting probability
//! is `ΔWq = (A* − A)/2`.

use crate::error::{Error, Result};

/// Default tolerance for payoff consistency checks with exact
/// (non-statistical) payoffs. Monte Carlo callers should widen this by a
/// few standard errors.
pub const PAYOFF_TOL: f64 = 1e-6;

/// Arrival/service rates together with the derived constants of the
/// waiting-time decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Pair arrival rate λ.
    pub lambda: f64,
    /// Per-customer service rate μ.
    pub mu: f64,
    /// Per-server utilization ρ = λ/μ.
    pub rho: f64,
    /// Product weight of the splitting benefit, c1 = λ/(2(1−ρ)).
    pub c1: f64,
    /// Sum weight of the splitting benefit, c2 = 1/4.
    pub c2: f64,
    /// Policy-independent waiting-time constant C.
    pub wq_const: f64,
}

impl SystemParams {
    /// Builds the parameter set, rejecting non-positive rates and unstable
    /// systems (ρ ≥ 1).
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParams(format!("lambda must be positive, got {lambda}")));
        }
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::InvalidParams(format!("mu must be positive, got {mu}")));
        }
        let rho = lambda / mu;
        if rho >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "unstable system: rho = lambda/mu = {rho} must be < 1"
            )));
        }
        let c1 = lambda / (2.0 * (1.0 - rho));
        let c2 = 0.25;
        // C = λ E[S²]/(4(1−ρ)) + E[S]/4 with E[S] = 2/μ, E[S²] = 6/μ².
        let wq_const = 6.0 * lambda / (4.0 * mu * mu * (1.0 - rho)) + 1.0 / (2.0 * mu);
        Ok(Self { lambda, mu, rho, c1, c2, wq_const })
    }

    /// Unconstrained mean splitting benefit E[w] = c1/μ² + 2c2/μ.
    pub fn expected_benefit(&self) -> f64 {
        self.c1 / (self.mu * self.mu) + 2.0 * self.c2 / self.mu
    }
}

/// Splitting benefit w(x1, x2) = c1·x1·x2 + c2·(x1 + x2).
///
/// Non-negative for non-negative inputs and symmetric in its arguments.
pub fn splitting_benefit(params: &SystemParams, x1: f64, x2: f64) -> f64 {
    debug_assert!(x1 >= 0.0 && x2 >= 0.0);
    params.c1 * x1 * x2 + params.c2 * (x1 + x2)
}

/// First and second moments of the min/max of two iid Exp(μ) draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStatMoments {
    pub e_min: f64,
    pub e_min_sq: f64,
    pub e_max: f64,
    pub e_max_sq: f64,
}

/// Closed-form order-statistic moments: `min ~ Exp(2μ)` and the max density
/// is `2μ(e^{−μt} − e^{−2μt})`, giving (1/2μ, 1/2μ², 3/2μ, 7/2μ²).
pub fn exp_order_stat_moments(mu: f64) -> OrderStatMoments {
    assert!(mu > 0.0, "mu must be positive");
    OrderStatMoments {
        e_min: 1.0 / (2.0 * mu),
        e_min_sq: 1.0 / (2.0 * mu * mu),
        e_max: 3.0 / (2.0 * mu),
        e_max_sq: 7.0 / (2.0 * mu * mu),
    }
}

/// Mean waiting time of a policy whose split-weighted benefit is
/// `expected_rw = E[r·w]`: affine, `C − E[r·w]`.
pub fn waiting_time_from_split_weight(params: &SystemParams, expected_rw: f64) -> f64 {
    params.wq_const - expected_rw
}

/// Raw payoff-to-waiting-time arithmetic, `(a_star − a)/2`, with no
/// consistency checking. See [`delta_wq`] for the checked variant.
pub fn waiting_time_gap(a_star: f64, a: f64) -> f64 {
    (a_star - a) / 2.0
}

/// Excess waiting time `(a_star − a)/2` of a strategy with payoff `a`
/// relative to the optimum `a_star` at the same splitting probability.
///
/// A payoff exceeding the optimum by more than `tol` signals an
/// inconsistent pair (e.g. mismatched `p`, or an estimate outside its
/// error bars) and is reported as an error rather than clamped. Use
/// [`PAYOFF_TOL`] plus a few Monte Carlo standard errors when `a_star`
/// is estimated.
pub fn delta_wq(a_star: f64, a: f64, tol: f64) -> Result<f64> {
    if a > a_star + tol {
        return Err(Error::InconsistentPayoffs { payoff: a, optimum: a_star, tol });
    }
    Ok(waiting_time_gap(a_star, a))
}
