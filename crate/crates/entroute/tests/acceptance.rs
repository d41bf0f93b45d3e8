//! Acceptance suite: every release gate runs here, one criterion per test,
//! each printing a single PASS/FAIL line with the measured values.
//!
//! The frontier (criteria 1–2) is computed once at reference settings and
//! shared. Simulation-backed criteria use 5·10⁵ pairs and batch-means
//! standard errors; tolerance multiples follow the stated gates.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use entroute::classical::{
    certified_classical_bound, concave_envelope, payoff_thresholds, reduced_objective,
    reduced_objective_derivative, solve_theta_b, theta_min, GridConfig,
};
use entroute::config::RunConfig;
use entroute::frontier::{compute_frontier, FrontierResult};
use entroute::model::{exp_order_stat_moments, SystemParams};
use entroute::oracle::{oracle_payoff_quadrature, threshold_for_split_probability};
use entroute::quad::gauss_laguerre;
use entroute::quantum::optimize_quantum;
use entroute::sim::{simulate, PolicyKind, PolicySpec};
use entroute::throughput::{
    avg_throughput, expected_output_of_idle, throughput_derivative_sign, FnOutput, TrendSign,
    WarmupModel,
};

const SIM_PAIRS: usize = 500_000;

fn params() -> SystemParams {
    SystemParams::new(0.8, 1.0).unwrap()
}

fn warmup() -> WarmupModel {
    WarmupModel::new(1.0, 0.5).unwrap()
}

fn frontier() -> &'static FrontierResult {
    static FRONTIER: OnceLock<FrontierResult> = OnceLock::new();
    FRONTIER.get_or_init(|| {
        let cfg = RunConfig::default();
        compute_frontier(&cfg).expect("reference frontier computes")
    })
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!("criterion {criterion}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

struct XorShift(u64);
impl XorShift {
    fn next(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn criterion_01_advantage_region() {
    let start = std::time::Instant::now();
    let res = frontier();
    let mut all_inner_certified = true;
    for pt in &res.points {
        if pt.p >= 0.0999 && pt.p <= 0.3001 && !pt.advantage {
            all_inner_certified = false;
        }
    }
    let lo = res.summary.advantage_p_lo.unwrap_or(f64::NAN);
    let hi = res.summary.advantage_p_hi.unwrap_or(f64::NAN);
    let within_outer = lo >= 0.05 - 1e-12 && hi <= 0.35 + 1e-12;
    let pass = all_inner_certified && within_outer && res.errors.is_empty();
    report(
        "1 (advantage region)",
        pass,
        &format!(
            "certified on [{lo:.3}, {hi:.3}] covering [0.10, 0.30], {} grid errors, {:.1}s",
            res.errors.len(),
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_maximum_gap() {
    let res = frontier();
    let gap = res.summary.max_gap;
    let at = res.summary.argmax_p;
    let pass = (gap - 0.073).abs() <= 0.010 && (0.15..=0.25).contains(&at);
    report(
        "2 (maximum gap)",
        pass,
        &format!("max(dwq_cl - dwq_qu) = {gap:.4} (target 0.073 +- 0.010) at p = {at:.3}"),
    );
}

#[test]
fn criterion_03_analytic_limits() {
    let pr = params();
    let wm = warmup();
    let split = simulate(&pr, &PolicySpec::new(PolicyKind::AlwaysSplit), &wm, SIM_PAIRS, SIM_PAIRS / 10, 301)
        .unwrap();
    let bunch = simulate(&pr, &PolicySpec::new(PolicyKind::AlwaysBunch), &wm, SIM_PAIRS, SIM_PAIRS / 10, 302)
        .unwrap();
    let split_ok = (split.mean_wq - 4.0).abs() <= 3.0 * split.wq_std_err;
    let bunch_ok = (bunch.mean_wq - 6.5).abs() <= 3.0 * bunch.wq_std_err;
    report(
        "3 (analytic waiting-time limits)",
        split_ok && bunch_ok,
        &format!(
            "always-split {:.4}+-{:.4} vs 4.0; always-bunch {:.4}+-{:.4} vs 6.5",
            split.mean_wq, split.wq_std_err, bunch.mean_wq, bunch.wq_std_err
        ),
    );
}

#[test]
fn criterion_04_game_queueing_correspondence() {
    let pr = params();
    let wm = warmup();
    let p = 0.2;
    let a_star = oracle_payoff_quadrature(&pr, p).unwrap();
    let tau = threshold_for_split_probability(&pr, p).unwrap();
    let oracle_sim = simulate(
        &pr,
        &PolicySpec::new(PolicyKind::OracleThreshold(tau)),
        &wm,
        SIM_PAIRS,
        SIM_PAIRS / 10,
        401,
    )
    .unwrap();

    let bound = certified_classical_bound(&pr, p, &GridConfig::default()).unwrap();
    let (th_a, th_b) = bound.theta_star;
    let a_cl = payoff_thresholds(&pr, th_a, th_b);
    let classical_sim = simulate(
        &pr,
        &PolicySpec::new(PolicyKind::ClassicalThresholds(th_a, th_b)),
        &wm,
        SIM_PAIRS,
        SIM_PAIRS / 10,
        402,
    )
    .unwrap();

    let strategy = optimize_quantum(&pr, p, 2, 20, 1, 60).unwrap();
    assert!(strategy.feasible);
    let quantum_sim = simulate(
        &pr,
        &PolicySpec::new(PolicyKind::Quantum {
            coeffs_a: strategy.coeffs_a.clone(),
            coeffs_b: strategy.coeffs_b.clone(),
        }),
        &wm,
        SIM_PAIRS,
        SIM_PAIRS / 10,
        403,
    )
    .unwrap();

    let check = |sim: &entroute::sim::SimStats, a: f64, label: &str| -> (bool, String) {
        let measured = sim.mean_wq - oracle_sim.mean_wq;
        let predicted = (a_star - a) / 2.0;
        let tol = 4.0 * (sim.wq_std_err.powi(2) + oracle_sim.wq_std_err.powi(2)).sqrt();
        (
            (measured - predicted).abs() <= tol,
            format!("{label}: dWq sim {measured:.4} vs (A*-A)/2 = {predicted:.4} (tol {tol:.4})"),
        )
    };
    let (ok_cl, msg_cl) = check(&classical_sim, a_cl, "classical");
    let (ok_qu, msg_qu) = check(&quantum_sim, strategy.payoff, "quantum");
    // The w-threshold policy is optimal at fixed p, so its simulated wait
    // cannot exceed the classical strategy's beyond noise; and the
    // quantum-over-classical simulated reduction must reproduce the ~0.073
    // reference gap.
    let cl_or_se = (classical_sim.wq_std_err.powi(2) + oracle_sim.wq_std_err.powi(2)).sqrt();
    let dominance_ok = oracle_sim.mean_wq <= classical_sim.mean_wq + 3.0 * cl_or_se;
    let qu_cl_se = (classical_sim.wq_std_err.powi(2) + quantum_sim.wq_std_err.powi(2)).sqrt();
    let sim_reduction = classical_sim.mean_wq - quantum_sim.mean_wq;
    let reduction_ok = (sim_reduction - 0.073).abs() <= 3.0 * qu_cl_se;
    report(
        "4 (game-queueing correspondence)",
        ok_cl && ok_qu && dominance_ok && reduction_ok,
        &format!(
            "{msg_cl}; {msg_qu}; oracle dominance ok: {dominance_ok}; sim quantum reduction {sim_reduction:.4} ~ 0.073"
        ),
    );
}

#[test]
fn criterion_05_throughput() {
    let pr = params();
    let wm = warmup();
    let mut all_ok = true;
    let mut details = Vec::new();
    for (i, &p) in [0.0, 0.2, 0.5, 1.0].iter().enumerate() {
        let st = simulate(
            &pr,
            &PolicySpec::new(PolicyKind::Bernoulli(p)),
            &wm,
            SIM_PAIRS,
            SIM_PAIRS / 10,
            501 + i as u64,
        )
        .unwrap();
        let expect = avg_throughput(&pr, &wm, p);
        let ok = (st.baseline_throughput - expect).abs() <= 3.0 * st.throughput_std_err;
        all_ok &= ok;
        details.push(format!(
            "p={p}: {:.5}+-{:.5} vs {:.5}",
            st.baseline_throughput, st.throughput_std_err, expect
        ));
    }
    // Closed form equals the renewal assembly exactly.
    let mut assembly_ok = true;
    for &p in &[0.0, 0.2, 0.5, 1.0] {
        let big_lambda = pr.lambda * (1.0 + p) / 2.0;
        let cycle = (2.0 / (1.0 + p)) * (1.0 / pr.lambda + 1.0 / (pr.mu - pr.lambda));
        let assembled = expected_output_of_idle(&wm, big_lambda) / cycle;
        assembly_ok &= (assembled - avg_throughput(&pr, &wm, p)).abs() < 1e-12;
    }
    report(
        "5 (baseline throughput)",
        all_ok && assembly_ok,
        &format!("{}; renewal assembly exact: {assembly_ok}", details.join("; ")),
    );
}

#[test]
fn criterion_06_certificate_soundness() {
    let pr = params();
    let base = GridConfig::default();
    let fine = GridConfig { grid_points: 999, ..base };
    let mut all_ok = true;
    let mut details = Vec::new();
    for &p in &[0.1, 0.2, 0.3] {
        let bound = certified_classical_bound(&pr, p, &base).unwrap();
        let lo = theta_min(pr.mu, p) + base.epsilon / pr.mu;
        let hi = base.theta_max / pr.mu;
        let mut rng = XorShift(0xc0ffee ^ (p * 1e6) as u64);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let th_a = lo + (hi - lo) * rng.next();
            let th_b = solve_theta_b(pr.mu, p, th_a).unwrap();
            worst = worst.max(payoff_thresholds(&pr, th_a, th_b));
        }
        let sound = worst <= bound.upper + 1e-12;
        // Sampled Lipschitz audit: the grid estimate must not be beaten by
        // more than 1%.
        let mut max_slope = 0.0f64;
        for _ in 0..100_000 {
            let th_a = lo + (hi - lo) * rng.next();
            max_slope = max_slope.max(reduced_objective_derivative(&pr, p, th_a).unwrap().abs());
        }
        let lipschitz_ok = max_slope <= 1.01 * bound.lipschitz;
        let refined = certified_classical_bound(&pr, p, &fine).unwrap();
        let ratio = (bound.upper - bound.a_grid) / (refined.upper - refined.a_grid);
        let shrink_ok = (1.6..=2.4).contains(&ratio);
        all_ok &= sound && lipschitz_ok && shrink_ok && bound.boundary_ok;
        details.push(format!(
            "p={p}: worst sample {:.6} <= upper {:.6}, L audit {:.3}/{:.3}, width ratio {ratio:.2}",
            worst, bound.upper, max_slope, bound.lipschitz
        ));
    }
    report("6 (certificate soundness)", all_ok, &details.join("; "));
}

#[test]
fn criterion_07_derivative_correctness() {
    let pr = params();
    let mut all_ok = true;
    let mut worst_rel = 0.0f64;
    for &p in &[0.1, 0.2, 0.3] {
        let lo = theta_min(pr.mu, p);
        let mut rng = XorShift(0xd1f ^ (p * 1e6) as u64);
        for _ in 0..100 {
            let th = lo + 0.05 + (12.0 - lo - 0.05) * rng.next();
            let h = 1e-6;
            let fd = (reduced_objective(&pr, p, th + h).unwrap()
                - reduced_objective(&pr, p, th - h).unwrap())
                / (2.0 * h);
            let an = reduced_objective_derivative(&pr, p, th).unwrap();
            let rel = (an - fd).abs() / (1.0 + an.abs());
            worst_rel = worst_rel.max(rel);
            all_ok &= rel < 1e-5;
        }
    }
    report(
        "7 (derivative correctness)",
        all_ok,
        &format!("analytic vs central differences, worst relative error {worst_rel:.2e}"),
    );
}

#[test]
fn criterion_08_quadrature_exactness() {
    let mut all_ok = true;
    let mut worst = 0.0f64;
    for &mu in &[0.5, 1.0, 2.0] {
        let quad = gauss_laguerre(60, mu).unwrap();
        let mut factorial = 1.0;
        for k in 1..=5 {
            factorial *= k as f64;
            let expect = factorial / mu.powi(k as i32);
            let got = quad.expect(|x| x.powi(k as i32));
            let rel = ((got - expect) / expect).abs();
            worst = worst.max(rel);
            all_ok &= rel < 1e-9;
        }
        let two = gauss_laguerre(2, mu).unwrap();
        let s2 = 2f64.sqrt();
        all_ok &= (two.nodes[0] - (2.0 - s2) / mu).abs() < 1e-12;
        all_ok &= (two.nodes[1] - (2.0 + s2) / mu).abs() < 1e-12;
    }
    report(
        "8 (quadrature exactness)",
        all_ok,
        &format!("moments 1..5 for mu in {{0.5, 1, 2}}, worst relative error {worst:.2e}"),
    );
}

#[test]
fn criterion_09_order_statistic_moments() {
    let mut all_ok = true;
    for &mu in &[0.5, 1.0, 2.0] {
        let m = exp_order_stat_moments(mu);
        all_ok &= m.e_min == 1.0 / (2.0 * mu)
            && m.e_min_sq == 1.0 / (2.0 * mu * mu)
            && m.e_max == 3.0 / (2.0 * mu)
            && m.e_max_sq == 7.0 / (2.0 * mu * mu);
    }
    // Monte Carlo agreement at n = 1e6 within 4 sigma.
    let mu = 1.0;
    let n = 1_000_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut sums = [0.0f64; 4];
    let mut sq = [0.0f64; 4];
    for _ in 0..n {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let x1 = -(1.0 - u1).ln() / mu;
        let x2 = -(1.0 - u2).ln() / mu;
        let (lo, hi) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
        for (i, v) in [lo, lo * lo, hi, hi * hi].iter().enumerate() {
            sums[i] += v;
            sq[i] += v * v;
        }
    }
    let m = exp_order_stat_moments(mu);
    let expect = [m.e_min, m.e_min_sq, m.e_max, m.e_max_sq];
    let mut mc_ok = true;
    let mut detail = String::new();
    for i in 0..4 {
        let mean = sums[i] / n as f64;
        let var = (sq[i] / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        mc_ok &= (mean - expect[i]).abs() <= 4.0 * se;
        detail.push_str(&format!("{:.4}~{:.4} ", mean, expect[i]));
    }
    report("9 (order-statistic moments)", all_ok && mc_ok, &format!("exact + MC {detail}"));
}

#[test]
fn criterion_10_envelope() {
    let mut rng = XorShift(0xe17e2);
    let mut all_ok = true;
    for _ in 0..100 {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let mut x = 0.0;
        for _ in 0..20 {
            x += 0.01 + rng.next();
            pts.push((x, 4.0 * rng.next() - 2.0));
        }
        let env = concave_envelope(&pts).unwrap();
        for (i, &(p, v)) in pts.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for j in 0..pts.len() {
                for k in j..pts.len() {
                    let (xj, yj) = pts[j];
                    let (xk, yk) = pts[k];
                    if xj <= p && p <= xk {
                        let y = if xj == xk {
                            yj.max(yk)
                        } else {
                            yj + (yk - yj) * (p - xj) / (xk - xj)
                        };
                        best = best.max(y);
                    }
                }
            }
            all_ok &= (env[i].sr_value - best).abs() < 1e-12;
            all_ok &= env[i].sr_value >= v - 1e-15;
        }
        let again: Vec<(f64, f64)> = env.iter().map(|e| (e.p, e.sr_value)).collect();
        let env2 = concave_envelope(&again).unwrap();
        for (a, b) in env.iter().zip(&env2) {
            all_ok &= (a.sr_value - b.sr_value).abs() < 1e-12;
        }
    }
    report(
        "10 (concave envelope)",
        all_ok,
        "pairwise-mixture brute force, idempotence and majorization on 100 instances",
    );
}

#[test]
fn criterion_11_load_balance_dominance() {
    // At lambda = 0.8 the single-server variant is unstable (rho = 1.6),
    // so the comparison runs at lambda = 0.3 where both systems converge.
    let pr = SystemParams::new(0.3, 1.0).unwrap();
    let wm = warmup();
    let balanced = simulate(
        &pr,
        &PolicySpec::new(PolicyKind::AlwaysBunch),
        &wm,
        SIM_PAIRS,
        SIM_PAIRS / 10,
        1101,
    )
    .unwrap();
    let imbalanced = simulate(
        &pr,
        &PolicySpec { kind: PolicyKind::AlwaysBunch, load_balance_flip: false },
        &wm,
        SIM_PAIRS,
        SIM_PAIRS / 10,
        1102,
    )
    .unwrap();
    let gap = imbalanced.mean_wq - balanced.mean_wq;
    let combined = (imbalanced.wq_std_err.powi(2) + balanced.wq_std_err.powi(2)).sqrt();
    let pass = gap > 5.0 * combined;
    report(
        "11 (load-balance dominance)",
        pass,
        &format!(
            "imbalanced {:.4} vs balanced {:.4}: gap {gap:.4} > 5x combined se {:.4}",
            imbalanced.mean_wq, balanced.mean_wq, combined
        ),
    );
}

#[test]
fn criterion_12_monotonicity_diagnostic() {
    let pr = params();
    let wm = warmup();
    let convex = throughput_derivative_sign(&pr, &wm, 0.3).unwrap();
    let linear_model = FnOutput { output: |t: f64| t, productivity: |_| 1.0 };
    let linear = throughput_derivative_sign(&pr, &linear_model, 0.3).unwrap();
    let concave_model =
        FnOutput { output: |t: f64| 1.0 - (-t).exp(), productivity: |t: f64| (-t).exp() };
    let concave = throughput_derivative_sign(&pr, &concave_model, 0.3).unwrap();
    let pass =
        convex == TrendSign::Negative && linear == TrendSign::Zero && concave == TrendSign::Positive;
    report(
        "12 (throughput monotonicity diagnostic)",
        pass,
        &format!("convex -> {convex:?}, linear -> {linear:?}, concave -> {concave:?}"),
    );
}
