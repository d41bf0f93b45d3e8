//! Frontier assembly: oracle payoff, certified classical bounds,
//! shared-randomness envelope, quantum lower bounds, waiting-time gaps and
//! normalized throughput on a grid of splitting probabilities.
//!
//! Per-p work runs in a worker pool; every stage is seeded, so reruns are
//! byte-identical. The shared-randomness benchmark is the concave envelope
//! of the certified deterministic upper bounds over the grid together with
//! the exact endpoints at p = 0 and p = 1. Each envelope input is first
//! clamped by the deterministic oracle value A*(p): no classical strategy
//! can beat the full-information optimum, and the clamp keeps the envelope
//! tight where wide certificates near p → 1/2 would otherwise leak into
//! the comparison region.

use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{certified_classical_bound, concave_envelope};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::waiting_time_gap;
use crate::oracle::{oracle_payoff, oracle_payoff_quadrature};
use crate::quantum::optimize_quantum;
use crate::sim::derive_seed;
use crate::throughput::normalized_throughput;

pub const SCHEMA_VERSION: u32 = 1;

/// One grid row of the frontier table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub p: f64,
    pub a_star: f64,
    pub a_star_se: f64,
    /// Certified deterministic classical upper bound.
    pub a_cl_upper: f64,
    /// Shared-randomness (concavified) classical upper bound.
    pub a_cl_sr_upper: f64,
    /// Achieved quantum payoff (lower bound on the quantum value).
    pub a_qu_lower: f64,
    pub dwq_cl: f64,
    pub dwq_qu: f64,
    /// True when the quantum lower bound clears the classical SR upper
    /// bound, certifying advantage at this grid point.
    pub advantage: bool,
    pub throughput_norm: f64,
}

/// A grid point that failed mid-pipeline; the sweep continues without it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierError {
    pub p: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierSummary {
    pub schema_version: u32,
    /// Smallest and largest grid p with certified advantage; resolution is
    /// limited to the grid spacing.
    pub advantage_p_lo: Option<f64>,
    pub advantage_p_hi: Option<f64>,
    /// Largest waiting-time-gap reduction `dwq_cl − dwq_qu` over the grid.
    pub max_gap: f64,
    pub argmax_p: f64,
    pub n_points: usize,
    pub n_errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierResult {
    pub points: Vec<FrontierPoint>,
    pub errors: Vec<FrontierError>,
    pub summary: FrontierSummary,
}

struct StagePoint {
    p: f64,
    a_star: f64,
    a_star_se: f64,
    a_cl_upper: f64,
    envelope_input: f64,
    a_qu_lower: f64,
    boundary_ok: bool,
}

fn stage_one(cfg: &RunConfig, idx: usize, p: f64) -> Result<StagePoint> {
    let params = cfg.params()?;
    let oracle = oracle_payoff(&params, p, cfg.oracle.n_samples, derive_seed(cfg.oracle.seed, idx as u64))?;
    let bound = certified_classical_bound(&params, p, &cfg.grid_config())?;
    if !bound.boundary_ok {
        return Err(Error::Infeasible(format!("certificate invalid at p = {p}")));
    }
    let quantum = optimize_quantum(
        &params,
        p,
        cfg.quantum.degree,
        cfg.quantum.restarts,
        cfg.quantum.seed,
        cfg.quantum.quad_order,
    )?;
    if !quantum.feasible {
        return Err(Error::Infeasible(format!(
            "no feasible quantum strategy at p = {p} (residual {})",
            quantum.constraint_residual
        )));
    }
    // The full-information optimum dominates every classical strategy, so
    // it caps the certified bound before concavification.
    let a_star_exact = oracle_payoff_quadrature(&params, p)?;
    Ok(StagePoint {
        p,
        a_star: oracle.a_star,
        a_star_se: oracle.std_err,
        a_cl_upper: bound.upper,
        envelope_input: bound.upper.min(a_star_exact + 1e-9),
        a_qu_lower: quantum.payoff,
        boundary_ok: bound.boundary_ok,
    })
}

/// Computes the full frontier for a validated configuration.
pub fn compute_frontier(cfg: &RunConfig) -> Result<FrontierResult> {
    let grid = cfg.validate_p_grid()?;
    let params = cfg.params()?;
    let wm = cfg.warmup_model()?;
    let ew = params.expected_benefit();

    let staged: Vec<(f64, std::result::Result<StagePoint, String>)> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &p)| (p, stage_one(cfg, idx, p).map_err(|e| e.to_string())))
        .collect();

    let mut errors = Vec::new();
    let mut good: Vec<StagePoint> = Vec::new();
    for (p, st) in staged {
        match st {
            Ok(sp) => good.push(sp),
            Err(message) => errors.push(FrontierError { p, message }),
        }
    }
    if good.is_empty() {
        return Err(Error::Infeasible("every grid point failed".into()));
    }

    // Envelope over the exact endpoints and the clamped certified bounds.
    let mut env_input: Vec<(f64, f64)> = Vec::with_capacity(good.len() + 2);
    env_input.push((0.0, -ew));
    for sp in &good {
        env_input.push((sp.p, sp.envelope_input));
    }
    env_input.push((1.0, ew));
    let env = concave_envelope(&env_input)?;

    let mut points = Vec::with_capacity(good.len());
    for (sp, ep) in good.iter().zip(env.iter().skip(1)) {
        debug_assert!((ep.p - sp.p).abs() < 1e-12);
        let sr = ep.sr_value;
        let dwq_cl = waiting_time_gap(sp.a_star, sr);
        let dwq_qu = waiting_time_gap(sp.a_star, sp.a_qu_lower);
        points.push(FrontierPoint {
            p: sp.p,
            a_star: sp.a_star,
            a_star_se: sp.a_star_se,
            a_cl_upper: sp.a_cl_upper,
            a_cl_sr_upper: sr,
            a_qu_lower: sp.a_qu_lower,
            dwq_cl,
            dwq_qu,
            advantage: sp.a_qu_lower > sr && sp.boundary_ok,
            throughput_norm: normalized_throughput(&params, &wm, sp.p),
        });
    }

    let mut max_gap = f64::NEG_INFINITY;
    let mut argmax_p = f64::NAN;
    for pt in &points {
        let gap = pt.dwq_cl - pt.dwq_qu;
        if gap > max_gap {
            max_gap = gap;
            argmax_p = pt.p;
        }
    }
    let advantage_p_lo = points.iter().find(|pt| pt.advantage).map(|pt| pt.p);
    let advantage_p_hi = points.iter().rev().find(|pt| pt.advantage).map(|pt| pt.p);

    let summary = FrontierSummary {
        schema_version: SCHEMA_VERSION,
        advantage_p_lo,
        advantage_p_hi,
        max_gap,
        argmax_p,
        n_points: points.len(),
        n_errors: errors.len(),
    };
    Ok(FrontierResult { points, errors, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_rejected_before_work() {
        let mut cfg = RunConfig::default();
        cfg.p_grid = Some(vec![]);
        assert!(compute_frontier(&cfg).is_err());
    }

    #[test]
    fn small_frontier_consistency() {
        let mut cfg = RunConfig::default();
        cfg.p_grid = Some(vec![0.15, 0.2, 0.25]);
        cfg.quantum.restarts = 6;
        cfg.oracle.n_samples = 20_000;
        let res = compute_frontier(&cfg).unwrap();
        assert_eq!(res.points.len(), 3);
        assert!(res.errors.is_empty());
        for pt in &res.points {
            // Gap identities hold exactly.
            assert!((pt.dwq_cl - (pt.a_star - pt.a_cl_sr_upper) / 2.0).abs() < 1e-12);
            assert!((pt.dwq_qu - (pt.a_star - pt.a_qu_lower) / 2.0).abs() < 1e-12);
            assert!(pt.a_cl_sr_upper <= pt.a_cl_upper + 1e-12);
            if pt.advantage {
                assert!(pt.dwq_qu < pt.dwq_cl);
            }
            assert!(pt.throughput_norm > 0.0 && pt.throughput_norm <= 1.0);
        }
        // The middle of the advantage region certifies.
        assert!(res.points[1].advantage, "expected advantage at p = 0.2: {:?}", res.points[1]);
    }
}
