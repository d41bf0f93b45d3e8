//! Baseline-task throughput under the renewal idle/busy cycle.
//!
//! Each server works on a preemptible baseline task whenever its queue is
//! empty. Idle periods are Exp(Λ) with batch rate `Λ = λ(1+p)/2`, and the
//! long-run average baseline output per server follows from renewal reward:
//!
//! ```text
//! 𝒯(p) = E[T(I)] / E[I + B]
//! E[I + B] = (2/(1+p)) · (1/λ + 1/(μ−λ))
//! ```
//!
//! For the exponential-saturation warm-up model
//! `φ(t) = φ_max(1 − e^{−αt})`, `T(t) = φ_max[t − (1 − e^{−αt})/α]`, this
//! collapses to the closed form
//!
//! ```text
//! 𝒯(p) = φ_max (1−ρ) · 2α / (λ(1+p) + 2α)
//! ```
//!
//! which strictly decreases in `p`. The monotonicity diagnostic works for
//! any differentiable cumulative output `T`: the sign of `d𝒯/dp` is the
//! sign of `−Cov(U, φ(U))` with `U ~ Exp(Λ)`, so convex `T` trades
//! throughput for waiting time while concave `T` prefers splitting.

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::quad::gauss_laguerre;

/// Exponential-saturation warm-up: productivity relaxes to `phi_max` at
/// rate `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WarmupModel {
    pub phi_max: f64,
    pub alpha: f64,
}

impl WarmupModel {
    pub fn new(phi_max: f64, alpha: f64) -> Result<Self> {
        if !phi_max.is_finite() || phi_max <= 0.0 || !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "warm-up parameters must be positive, got phi_max = {phi_max}, alpha = {alpha}"
            )));
        }
        Ok(Self { phi_max, alpha })
    }
}

/// Cumulative output and instantaneous productivity of a baseline task.
pub trait BaselineOutput {
    /// Output after working uninterrupted for `t`; `output(0) = 0`.
    fn output(&self, t: f64) -> f64;
    /// Derivative of [`BaselineOutput::output`].
    fn productivity(&self, t: f64) -> f64;
}

impl BaselineOutput for WarmupModel {
    fn output(&self, t: f64) -> f64 {
        self.phi_max * (t - (1.0 - (-self.alpha * t).exp()) / self.alpha)
    }
    fn productivity(&self, t: f64) -> f64 {
        self.phi_max * (1.0 - (-self.alpha * t).exp())
    }
}

/// Baseline output from a pair of closures `(T, φ)`.
pub struct FnOutput<F, G>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    pub output: F,
    pub productivity: G,
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> BaselineOutput for FnOutput<F, G> {
    fn output(&self, t: f64) -> f64 {
        (self.output)(t)
    }
    fn productivity(&self, t: f64) -> f64 {
        (self.productivity)(t)
    }
}

/// Monotone cubic interpolant (Fritsch–Carlson) of a tabulated cumulative
/// output curve, for the generic monotonicity diagnostic. Extrapolates
/// linearly with the end slope beyond the table.
#[derive(Debug, Clone)]
pub struct TabulatedOutput {
    ts: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedOutput {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("need at least two points".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidInput("abscissae must be strictly increasing".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidInput("cumulative output must be non-decreasing".into()));
            }
        }
        let n = points.len();
        let ts: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let d: Vec<f64> =
            (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (ts[i + 1] - ts[i])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = d[0];
        slopes[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            // Harmonic-mean slope preserves monotonicity across sign changes.
            if d[i - 1] * d[i] > 0.0 {
                let w1 = 2.0 * (ts[i + 1] - ts[i]) + (ts[i] - ts[i - 1]);
                let w2 = (ts[i + 1] - ts[i]) + 2.0 * (ts[i] - ts[i - 1]);
                slopes[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        Ok(Self { ts, ys, slopes })
    }

    fn segment(&self, t: f64) -> usize {
        match self.ts.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(self.ts.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.ts.len() - 2),
        }
    }
}

impl BaselineOutput for TabulatedOutput {
    fn output(&self, t: f64) -> f64 {
        let n = self.ts.len();
        if t <= self.ts[0] {
            return self.ys[0] + self.slopes[0] * (t - self.ts[0]);
        }
        if t >= self.ts[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (t - self.ts[n - 1]);
        }
        let i = self.segment(t);
        let h = self.ts[i + 1] - self.ts[i];
        let s = (t - self.ts[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + m0 * (s3 - 2.0 * s2 + s)
            + y1 * (-2.0 * s3 + 3.0 * s2)
            + m1 * (s3 - s2)
    }

    fn productivity(&self, t: f64) -> f64 {
        let n = self.ts.len();
        if t <= self.ts[0] {
            return self.slopes[0];
        }
        if t >= self.ts[n - 1] {
            return self.slopes[n - 1];
        }
        let i = self.segment(t);
        let h = self.ts[i + 1] - self.ts[i];
        let s = (t - self.ts[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let ds = (6.0 * s * s - 6.0 * s) * (y0 - y1) + m0 * (3.0 * s * s - 4.0 * s + 1.0)
            + m1 * (3.0 * s * s - 2.0 * s);
        ds / h
    }
}

/// `T(t) = φ_max[t − (1 − e^{−αt})/α]`; strictly convex, `T(0) = 0`.
pub fn cumulative_output(wm: &WarmupModel, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidParams(format!("t must be >= 0, got {t}")));
    }
    Ok(wm.output(t))
}

/// Closed-form average baseline throughput per server,
/// `φ_max(1−ρ)·2α/(λ(1+p)+2α)`.
pub fn avg_throughput(params: &SystemParams, wm: &WarmupModel, p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    wm.phi_max * (1.0 - params.rho) * 2.0 * wm.alpha / (params.lambda * (1.0 + p) + 2.0 * wm.alpha)
}

/// Throughput normalized by its instantaneous-warm-up ceiling
/// `φ_max(1−ρ)`; lies in (0, 1].
pub fn normalized_throughput(params: &SystemParams, wm: &WarmupModel, p: f64) -> f64 {
    2.0 * wm.alpha / (params.lambda * (1.0 + p) + 2.0 * wm.alpha)
}

/// `E[T(I)]` for `I ~ Exp(Λ)` under the warm-up model:
/// `φ_max·α/(Λ(Λ+α))`.
pub fn expected_output_of_idle(wm: &WarmupModel, big_lambda: f64) -> f64 {
    debug_assert!(big_lambda > 0.0);
    wm.phi_max * wm.alpha / (big_lambda * (big_lambda + wm.alpha))
}

/// Sign of `d𝒯/dp`, from the covariance identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendSign {
    Negative,
    Zero,
    Positive,
}

/// Covariance magnitude below which the trend is reported as zero.
pub const TREND_COV_TOL: f64 = 1e-10;

/// Estimates `−Cov(U, φ(U))` for `U ~ Exp(Λ)`, `Λ = λ(1+p)/2`, by
/// order-60 Gauss–Laguerre quadrature and reports its sign: negative for
/// strictly convex output curves, zero for linear, positive for concave.
pub fn throughput_derivative_sign(
    params: &SystemParams,
    output: &dyn BaselineOutput,
    p: f64,
) -> Result<TrendSign> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("p must lie in [0, 1], got {p}")));
    }
    let big_lambda = params.lambda * (1.0 + p) / 2.0;
    let quad = gauss_laguerre(60, big_lambda)?;
    let e_u = quad.expect(|u| u);
    let e_phi = quad.expect(|u| output.productivity(u));
    let e_u_phi = quad.expect(|u| u * output.productivity(u));
    let neg_cov = -(e_u_phi - e_u * e_phi);
    // Scale-free comparison against the magnitude of the moments involved.
    let scale = 1.0 + e_u.abs() * (1.0 + e_phi.abs());
    Ok(if neg_cov.abs() < TREND_COV_TOL * scale {
        TrendSign::Zero
    } else if neg_cov < 0.0 {
        TrendSign::Negative
    } else {
        TrendSign::Positive
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SystemParams {
        SystemParams::new(0.8, 1.0).unwrap()
    }

    fn wm() -> WarmupModel {
        WarmupModel::new(1.0, 0.5).unwrap()
    }

    #[test]
    fn cumulative_output_examples() {
        let w = wm();
        assert_eq!(cumulative_output(&w, 0.0).unwrap(), 0.0);
        let t2 = cumulative_output(&w, 2.0).unwrap();
        assert!((t2 - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!(cumulative_output(&w, -0.1).is_err());
        // Asymptote: T(t) → φ_max(t − 1/α).
        let big = cumulative_output(&w, 200.0).unwrap();
        assert!((big - (200.0 - 2.0)).abs() < 1e-9);
    }

    #[test]
    fn cumulative_output_convex() {
        let w = wm();
        let ts: Vec<f64> = (0..100).map(|k| 0.1 * k as f64).collect();
        for win in ts.windows(3) {
            let (a, b, c) = (
                w.output(win[0]),
                w.output(win[1]),
                w.output(win[2]),
            );
            assert!(c - 2.0 * b + a > 0.0);
        }
    }

    #[test]
    fn avg_throughput_examples() {
        let pr = params();
        let w = wm();
        assert!((avg_throughput(&pr, &w, 0.0) - 0.2 / 1.8).abs() < 1e-12);
        assert!((avg_throughput(&pr, &w, 1.0) - 0.2 / 2.6).abs() < 1e-12);
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            let norm = normalized_throughput(&pr, &w, p);
            assert!(norm > 0.0 && norm <= 1.0);
        }
    }

    #[test]
    fn throughput_strictly_decreasing_on_grid() {
        let pr = params();
        let w = wm();
        let mut prev = f64::INFINITY;
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            let t = avg_throughput(&pr, &w, p);
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn expected_idle_output_examples() {
        let w = wm();
        assert!((expected_output_of_idle(&w, 0.4) - 0.5 / 0.36).abs() < 1e-12);
        // α → ∞ limit approaches E[I]·φ_max = 1/Λ.
        let fast = WarmupModel::new(1.0, 1e9).unwrap();
        assert!((expected_output_of_idle(&fast, 0.4) - 2.5).abs() < 1e-6);
    }

    #[test]
    fn renewal_assembly_matches_closed_form() {
        // E[T(I)] / E[I+B] equals the closed form across randomized systems.
        let mut s = 0x51u64;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let mu = 0.2 + 5.0 * next();
            let lambda = mu * (0.05 + 0.9 * next());
            let pr = SystemParams::new(lambda, mu).unwrap();
            let w = WarmupModel::new(0.1 + 3.0 * next(), 0.05 + 4.0 * next()).unwrap();
            let p = next();
            let big_lambda = lambda * (1.0 + p) / 2.0;
            let cycle = (2.0 / (1.0 + p)) * (1.0 / lambda + 1.0 / (mu - lambda));
            let assembled = expected_output_of_idle(&w, big_lambda) / cycle;
            let closed = avg_throughput(&pr, &w, p);
            assert!(
                (assembled - closed).abs() < 1e-12 * (1.0 + closed.abs()),
                "mismatch {assembled} vs {closed}"
            );
        }
    }

    #[test]
    fn trend_signs_for_convex_linear_concave() {
        let pr = params();
        let w = wm();
        assert_eq!(throughput_derivative_sign(&pr, &w, 0.3).unwrap(), TrendSign::Negative);
        let linear = FnOutput { output: |t: f64| t, productivity: |_| 1.0 };
        assert_eq!(throughput_derivative_sign(&pr, &linear, 0.3).unwrap(), TrendSign::Zero);
        let concave = FnOutput {
            output: |t: f64| 1.0 - (-t).exp(),
            productivity: |t: f64| (-t).exp(),
        };
        assert_eq!(throughput_derivative_sign(&pr, &concave, 0.3).unwrap(), TrendSign::Positive);
    }

    #[test]
    fn tabulated_spline_tracks_warmup_model() {
        let w = wm();
        let pts: Vec<(f64, f64)> = (0..=400)
            .map(|k| {
                let t = 0.1 * k as f64;
                (t, w.output(t))
            })
            .collect();
        let tab = TabulatedOutput::new(&pts).unwrap();
        for k in 0..200 {
            let t = 0.05 + 0.17 * k as f64;
            assert!((tab.output(t) - w.output(t)).abs() < 1e-3);
            assert!((tab.productivity(t) - w.productivity(t)).abs() < 1e-2);
        }
        // The tabulated convex curve gives the same diagnostic.
        let pr = params();
        assert_eq!(throughput_derivative_sign(&pr, &tab, 0.3).unwrap(), TrendSign::Negative);
    }
}
