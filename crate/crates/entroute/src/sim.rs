//! Discrete-event simulation of the two-server system under any routing
//! policy.
//!
//! Pairs arrive Poisson(λ); each customer is Exp(μ). A policy maps the
//! pair's service times to ±1 outputs per router (product −1 splits the
//! pair, +1 bunches it onto one server); bunched customers are ordered by
//! a fair coin and both servers run FCFS. Whenever a queue empties the
//! server works the preemptible baseline task, and the accumulated output
//! of each idle period is credited when the next arrival ends it.
//!
//! The event loop is a time-ordered heap keyed by (time, sequence number);
//! the sequence number makes simultaneous events deterministic. Randomness
//! is split into named ChaCha8 substreams (arrivals, services, policy,
//! within-batch ordering) derived from the master seed, so switching
//! policies leaves the arrival and service processes untouched. A given
//! seed reproduces [`SimStats`] bit-for-bit.
//!
//! Statistics are reported with batch-means standard errors (32 batches)
//! over the post-warmup window.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{splitting_benefit, SystemParams};
use crate::oracle::sigma_star;
use crate::quantum::{polynomial_angle, sample_correlated_outcomes};
use crate::throughput::{BaselineOutput, WarmupModel};

const BATCHES: usize = 32;

/// Routing policy evaluated per arriving pair.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    AlwaysSplit,
    AlwaysBunch,
    Bernoulli(f64),
    /// Split exactly when the splitting benefit reaches `tau`.
    OracleThreshold(f64),
    /// Local threshold rules: output +1 below the player's threshold.
    ClassicalThresholds(f64, f64),
    /// Sampled entangled outcomes from polynomial measurement angles.
    Quantum { coeffs_a: Vec<f64>, coeffs_b: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Shared random bit flipping both outputs; preserves the split/bunch
    /// decision while balancing which server receives it. On for every
    /// standard run; disabling it exposes deliberate load imbalance.
    pub load_balance_flip: bool,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, load_balance_flip: true }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            PolicyKind::Bernoulli(p) if !(0.0..=1.0).contains(p) => {
                Err(Error::InvalidParams(format!("bernoulli p must lie in [0, 1], got {p}")))
            }
            PolicyKind::OracleThreshold(tau) if tau.is_nan() || *tau < 0.0 => {
                Err(Error::InvalidParams(format!("threshold must be >= 0, got {tau}")))
            }
            PolicyKind::ClassicalThresholds(a, b) if a.is_nan() || b.is_nan() || *a < 0.0 || *b < 0.0 => {
                Err(Error::InvalidParams("thresholds must be >= 0".into()))
            }
            PolicyKind::Quantum { coeffs_a, coeffs_b } => {
                if coeffs_a.is_empty() || coeffs_b.is_empty() {
                    Err(Error::InvalidParams("quantum policy needs coefficient payloads".into()))
                } else if coeffs_a.len() != coeffs_b.len() {
                    Err(Error::InvalidParams(format!(
                        "quantum coefficient length mismatch: {} vs {}",
                        coeffs_a.len(),
                        coeffs_b.len()
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Empirical summary of one run. Standard errors are batch means over the
/// post-warmup window.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SimStats {
    pub n_pairs: usize,
    pub mean_wq: f64,
    pub wq_std_err: f64,
    pub split_fraction: f64,
    pub split_std_err: f64,
    pub per_server_load: [f64; 2],
    pub per_server_load_se: [f64; 2],
    /// Baseline output rate per server.
    pub baseline_throughput: f64,
    pub throughput_std_err: f64,
    pub mean_busy: f64,
    pub busy_std_err: f64,
    pub mean_idle: f64,
    pub idle_std_err: f64,
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Arrival(usize),
    Departure(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for Event {}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we need earliest-first.
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy)]
struct Customer {
    pair: usize,
    arrival: f64,
    service: f64,
}

#[derive(Debug, Default)]
struct Server {
    queue: VecDeque<Customer>,
    busy: bool,
    idle_since: Option<f64>,
    busy_since: f64,
}

fn sample_exp(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Batch-means standard error of a correlated series.
fn batch_means_se(series: &[f64]) -> f64 {
    let size = series.len() / BATCHES;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..BATCHES)
        .map(|b| series[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    mean_and_se(&means).1
}

struct Recorder {
    t0: f64,
    t_end: f64,
    wq: Vec<f64>,
    splits: Vec<f64>,
    idle_lengths: Vec<f64>,
    busy_lengths: Vec<f64>,
    output_slices: Vec<f64>,
    busy_slices: [Vec<f64>; 2],
}

impl Recorder {
    fn new(t0: f64, t_end: f64) -> Self {
        Self {
            t0,
            t_end,
            wq: Vec::new(),
            splits: Vec::new(),
            idle_lengths: Vec::new(),
            busy_lengths: Vec::new(),
            output_slices: vec![0.0; BATCHES],
            busy_slices: [vec![0.0; BATCHES], vec![0.0; BATCHES]],
        }
    }

    fn slice_of(&self, t: f64) -> Option<usize> {
        if t <= self.t0 || t > self.t_end || self.t_end <= self.t0 {
            return None;
        }
        let idx = ((t - self.t0) / (self.t_end - self.t0) * BATCHES as f64) as usize;
        Some(idx.min(BATCHES - 1))
    }

    fn record_idle_end(&mut self, start: f64, end: f64, wm: &WarmupModel) {
        if let Some(slice) = self.slice_of(end) {
            self.idle_lengths.push(end - start);
            self.output_slices[slice] += wm.output(end - start);
        }
    }

    fn record_busy_end(&mut self, start: f64, end: f64) {
        if end <= self.t_end && start >= self.t0 {
            self.busy_lengths.push(end - start);
        }
    }

    /// Distributes a service interval over the time slices it overlaps.
    fn record_service(&mut self, server: usize, start: f64, duration: f64) {
        let (a, b) = (start.max(self.t0), (start + duration).min(self.t_end));
        if b <= a {
            return;
        }
        let width = (self.t_end - self.t0) / BATCHES as f64;
        let first = (((a - self.t0) / width) as usize).min(BATCHES - 1);
        let last = (((b - self.t0) / width) as usize).min(BATCHES - 1);
        if first == last {
            self.busy_slices[server][first] += b - a;
            return;
        }
        self.busy_slices[server][first] += (self.t0 + width * (first + 1) as f64 - a).max(0.0);
        for s in first + 1..last {
            self.busy_slices[server][s] += width;
        }
        self.busy_slices[server][last] += (b - (self.t0 + width * last as f64)).max(0.0);
    }
}

/// Runs the simulation: `n_pairs` arrivals, the first `warmup_discard`
/// pairs excluded from statistics.
pub fn simulate(
    params: &SystemParams,
    policy: &PolicySpec,
    wm: &WarmupModel,
    n_pairs: usize,
    warmup_discard: usize,
    seed: u64,
) -> Result<SimStats> {
    policy.validate()?;
    if n_pairs < 10 * warmup_discard.max(1) {
        return Err(Error::InvalidParams(format!(
            "n_pairs = {n_pairs} must be at least 10x warmup_discard = {warmup_discard} and >= 10"
        )));
    }
    if n_pairs - warmup_discard < 10 * BATCHES {
        return Err(Error::InvalidParams(format!(
            "need at least {} post-warmup pairs for batch means",
            10 * BATCHES
        )));
    }

    let mut arrivals_rng = stream(seed, 1);
    let mut services_rng = stream(seed, 2);
    let mut policy_rng = stream(seed, 3);
    let mut order_rng = stream(seed, 4);

    // Arrival times are needed up front to place the statistics window.
    let mut arrival_times = Vec::with_capacity(n_pairs);
    let mut t = 0.0;
    for _ in 0..n_pairs {
        t += sample_exp(&mut arrivals_rng, params.lambda);
        arrival_times.push(t);
    }
    let t0 = if warmup_discard == 0 { 0.0 } else { arrival_times[warmup_discard - 1] };
    let t_end = *arrival_times.last().expect("n_pairs > 0");
    let mut rec = Recorder::new(t0, t_end);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let push = |heap: &mut BinaryHeap<Event>, seq: &mut u64, time: f64, kind: EventKind| {
        *seq += 1;
        heap.push(Event { time, seq: *seq, kind });
    };
    push(&mut heap, &mut seq, arrival_times[0], EventKind::Arrival(0));

    let mut servers = [Server::default(), Server::default()];
    servers[0].idle_since = Some(0.0);
    servers[1].idle_since = Some(0.0);

    let start_service =
        |s: &mut Server, rec: &mut Recorder, sid: usize, c: Customer, now: f64,
         heap: &mut BinaryHeap<Event>, seq: &mut u64, counted: bool| {
            if counted {
                rec.wq.push(now - c.arrival);
                rec.record_service(sid, now, c.service);
            }
            s.busy = true;
            *seq += 1;
            heap.push(Event { time: now + c.service, seq: *seq, kind: EventKind::Departure(sid) });
            s.queue.push_front(c); // front slot = in service
        };

    while let Some(ev) = heap.pop() {
        let now = ev.time;
        match ev.kind {
            EventKind::Arrival(k) => {
                if k + 1 < n_pairs {
                    push(&mut heap, &mut seq, arrival_times[k + 1], EventKind::Arrival(k + 1));
                }
                let x1 = sample_exp(&mut services_rng, params.mu);
                let x2 = sample_exp(&mut services_rng, params.mu);
                let (mut o_a, mut o_b) = route(&policy.kind, params, x1, x2, &mut policy_rng);
                if policy.load_balance_flip && policy_rng.random::<bool>() {
                    o_a = -o_a;
                    o_b = -o_b;
                }
                let counted = k >= warmup_discard;
                if counted {
                    rec.splits.push(if o_a != o_b { 1.0 } else { 0.0 });
                }
                let c1 = Customer { pair: k, arrival: now, service: x1 };
                let c2 = Customer { pair: k, arrival: now, service: x2 };
                let s1 = if o_a > 0 { 0 } else { 1 };
                let s2 = if o_b > 0 { 0 } else { 1 };
                let batches: Vec<(usize, Vec<Customer>)> = if s1 == s2 {
                    // Uniform within-batch order, independent of all other
                    // randomness.
                    let first_is_c1 = order_rng.random::<bool>();
                    let pair = if first_is_c1 { vec![c1, c2] } else { vec![c2, c1] };
                    vec![(s1, pair)]
                } else {
                    vec![(s1, vec![c1]), (s2, vec![c2])]
                };
                for (sid, group) in batches {
                    let server = &mut servers[sid];
                    if let Some(idle_start) = server.idle_since.take() {
                        rec.record_idle_end(idle_start, now, wm);
                        server.busy_since = now;
                    }
                    for c in group {
                        if server.busy {
                            server.queue.push_back(c);
                        } else {
                            start_service(
                                server, &mut rec, sid, c, now, &mut heap, &mut seq, counted,
                            );
                        }
                    }
                }
            }
            EventKind::Departure(sid) => {
                let server = &mut servers[sid];
                server.queue.pop_front();
                server.busy = false;
                if let Some(c) = server.queue.pop_front() {
                    let counted = c.pair >= warmup_discard;
                    start_service(server, &mut rec, sid, c, now, &mut heap, &mut seq, counted);
                } else {
                    server.idle_since = Some(now);
                    rec.record_busy_end(server.busy_since, now);
                }
            }
        }
    }

    let window = t_end - t0;
    let (mean_wq, _) = mean_and_se(&rec.wq);
    let (split_fraction, _) = mean_and_se(&rec.splits);
    let (mean_idle, idle_std_err) = mean_and_se(&rec.idle_lengths);
    let (mean_busy, busy_std_err) = mean_and_se(&rec.busy_lengths);
    let slice_len = window / BATCHES as f64;
    let rates: Vec<f64> = rec.output_slices.iter().map(|o| o / (2.0 * slice_len)).collect();
    let total_output: f64 = rec.output_slices.iter().sum();
    let load = |sid: usize| {
        let total: f64 = rec.busy_slices[sid].iter().sum();
        let per_slice: Vec<f64> = rec.busy_slices[sid].iter().map(|b| b / slice_len).collect();
        (total / window, mean_and_se(&per_slice).1)
    };
    let (load0, load0_se) = load(0);
    let (load1, load1_se) = load(1);

    Ok(SimStats {
        n_pairs,
        mean_wq,
        wq_std_err: batch_means_se(&rec.wq),
        split_fraction,
        split_std_err: batch_means_se(&rec.splits),
        per_server_load: [load0, load1],
        per_server_load_se: [load0_se, load1_se],
        baseline_throughput: total_output / (2.0 * window),
        throughput_std_err: mean_and_se(&rates).1,
        mean_busy,
        busy_std_err,
        mean_idle,
        idle_std_err,
    })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn route(
    kind: &PolicyKind,
    params: &SystemParams,
    x1: f64,
    x2: f64,
    rng: &mut ChaCha8Rng,
) -> (i8, i8) {
    match kind {
        PolicyKind::AlwaysSplit => (1, -1),
        PolicyKind::AlwaysBunch => (1, 1),
        PolicyKind::Bernoulli(p) => {
            if rng.random::<f64>() < *p {
                (1, -1)
            } else {
                (1, 1)
            }
        }
        PolicyKind::OracleThreshold(tau) => {
            if sigma_star(*tau, splitting_benefit(params, x1, x2)) < 0.0 {
                (1, -1)
            } else {
                (1, 1)
            }
        }
        PolicyKind::ClassicalThresholds(th_a, th_b) => {
            let o_a = if x1 < *th_a { 1 } else { -1 };
            let o_b = if x2 < *th_b { 1 } else { -1 };
            (o_a, o_b)
        }
        PolicyKind::Quantum { coeffs_a, coeffs_b } => {
            sample_correlated_outcomes(
                polynomial_angle(coeffs_a, x1),
                polynomial_angle(coeffs_b, x2),
                rng,
            )
        }
    }
}

/// Derives an independent stream seed; splitmix64 finalizer.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates each policy in turn. Policies get independent seeds derived
/// from the master unless `common_random_numbers` is set, in which case
/// every policy sees identical arrival/service streams.
pub fn compare_policies(
    params: &SystemParams,
    wm: &WarmupModel,
    policies: &[PolicySpec],
    n_pairs: usize,
    warmup_discard: usize,
    seed: u64,
    common_random_numbers: bool,
) -> Result<Vec<SimStats>> {
    policies
        .iter()
        .enumerate()
        .map(|(i, pol)| {
            let s = if common_random_numbers { seed } else { derive_seed(seed, i as u64) };
            simulate(params, pol, wm, n_pairs, warmup_discard, s)
        })
        .collect()
}
