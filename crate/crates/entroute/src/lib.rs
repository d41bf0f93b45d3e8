//! Analysis and simulation toolkit for a two-server routing model where
//! customer pairs arrive together and the routers cannot communicate.
//!
//! The library computes the waiting-time/throughput trade-off of routing
//! strategies at fixed splitting probability:
//!
//! * [`model`] — system parameters, the splitting-benefit function and the
//!   payoff/waiting-time correspondence;
//! * [`oracle`] — the full-information `w`-threshold policy, by Monte
//!   Carlo and by deterministic quadrature;
//! * [`classical`] — Lipschitz-certified upper bounds on the best local
//!   classical strategy, plus shared-randomness concavification;
//! * [`quantum`] — entangled strategies with polynomial measurement
//!   angles, evaluated on Gauss–Laguerre grids and optimized under an
//!   equality constraint;
//! * [`throughput`] — baseline-task output under warm-up dynamics;
//! * [`sim`] — a discrete-event simulator that independently validates
//!   every closed form;
//! * [`frontier`] — the assembled per-p comparison table;
//! * [`config`]/[`output`] — reproducible runs and flat-file artifacts.
//!
//! Reproducibility: all randomness comes from ChaCha8 generators seeded
//! from explicit `u64` seeds (substreams select independent named streams),
//! and exponential variates use the inverse CDF, so identical seeds give
//! bit-identical results on every platform.

pub mod classical;
pub mod config;
pub mod error;
pub mod frontier;
pub mod model;
pub mod oracle;
pub mod output;
pub mod quad;
pub mod quantum;
pub mod sim;
pub mod throughput;

pub use classical::{certified_classical_bound, concave_envelope, CertifiedBound, GridConfig};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use frontier::{compute_frontier, FrontierPoint, FrontierResult};
pub use model::{splitting_benefit, SystemParams};
pub use oracle::{oracle_payoff, OraclePayoff};
pub use quantum::{optimize_quantum, QuantumStrategy};
pub use sim::{compare_policies, simulate, PolicyKind, PolicySpec, SimStats};
pub use throughput::{avg_throughput, WarmupModel};
