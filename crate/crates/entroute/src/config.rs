//! Run configuration: a single TOML file with embedded defaults.
//!
//! An empty config reproduces the reference run (λ = 0.8, μ = 1, warm-up
//! α = 0.5, 500-point classical grid with θ_max = 12, degree-2 quantum
//! strategies at quadrature order 60 with 20 restarts and seed 1, 10⁵
//! Monte Carlo samples). Unknown keys are rejected so typos fail fast.

use serde::{Deserialize, Serialize};

use crate::classical::GridConfig;
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::throughput::WarmupModel;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { lambda: 0.8, mu: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct WarmupConfig {
    pub phi_max: f64,
    pub alpha: f64,
}

impl Default for WarmupConfig {
    fn default() -> Self {
        Self { phi_max: 1.0, alpha: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalConfig {
    pub grid_points: usize,
    /// In units of 1/μ.
    pub theta_max: f64,
    /// Exclusion width above the feasibility cutoff, in units of 1/μ.
    pub epsilon: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self { grid_points: 500, theta_max: 12.0, epsilon: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumConfig {
    pub degree: usize,
    pub quad_order: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        Self { degree: 2, quad_order: 60, restarts: 20, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { n_samples: 100_000, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_pairs: usize,
    /// Pairs dropped before statistics begin; defaults to 10%.
    pub warmup_discard: Option<usize>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { n_pairs: 500_000, warmup_discard: None, seed: 1 }
    }
}

impl SimConfig {
    pub fn discard(&self) -> usize {
        self.warmup_discard.unwrap_or(self.n_pairs / 10)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: OutputFormat,
    pub path: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { format: OutputFormat::Csv, path: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub warmup: WarmupConfig,
    /// Splitting probabilities for frontier sweeps; defaults to
    /// 0.025, 0.050, …, 0.475.
    pub p_grid: Option<Vec<f64>>,
    pub classical: ClassicalConfig,
    pub quantum: QuantumConfig,
    pub oracle: OracleConfig,
    pub sim: SimConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.system.lambda, self.system.mu)
    }

    pub fn warmup_model(&self) -> Result<WarmupModel> {
        WarmupModel::new(self.warmup.phi_max, self.warmup.alpha)
    }

    pub fn grid_config(&self) -> GridConfig {
        GridConfig {
            grid_points: self.classical.grid_points,
            theta_max: self.classical.theta_max,
            epsilon: self.classical.epsilon,
        }
    }

    /// The frontier p-grid; certified sweeps need every value in (0, 1/2).
    pub fn p_grid(&self) -> Vec<f64> {
        self.p_grid
            .clone()
            .unwrap_or_else(|| (1..=19).map(|k| k as f64 * 0.025).collect())
    }

    pub fn validate_p_grid(&self) -> Result<Vec<f64>> {
        let grid = self.p_grid();
        if grid.is_empty() {
            return Err(Error::Config("p_grid must not be empty".into()));
        }
        for w in grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config("p_grid must be strictly increasing".into()));
            }
        }
        if grid.iter().any(|&p| !(0.0 < p && p < 0.5)) {
            return Err(Error::Config(
                "certified sweeps need every p_grid value inside (0, 0.5)".into(),
            ));
        }
        Ok(grid)
    }

    /// Applies the CLI-level master seed override to every seeded stage.
    pub fn override_seed(&mut self, seed: u64) {
        self.quantum.seed = seed;
        self.oracle.seed = seed;
        self.sim.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_run() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.system.lambda, 0.8);
        assert_eq!(cfg.quantum.restarts, 20);
        assert_eq!(cfg.quantum.seed, 1);
        assert_eq!(cfg.oracle.n_samples, 100_000);
        assert_eq!(cfg.classical.grid_points, 500);
        assert_eq!(cfg.p_grid().len(), 19);
        assert!((cfg.p_grid()[0] - 0.025).abs() < 1e-15);
        assert!((cfg.p_grid()[18] - 0.475).abs() < 1e-15);
        assert_eq!(cfg.sim.discard(), 50_000);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::from_toml("[system]\nlambda = 0.5\nmru = 2.0\n").is_err());
        assert!(RunConfig::from_toml("[systemm]\nlambda = 0.5\n").is_err());
    }

    #[test]
    fn partial_overrides_merge_with_defaults() {
        let cfg = RunConfig::from_toml("[quantum]\nrestarts = 5\n").unwrap();
        assert_eq!(cfg.quantum.restarts, 5);
        assert_eq!(cfg.quantum.degree, 2);
        assert_eq!(cfg.system.mu, 1.0);
    }

    #[test]
    fn p_grid_validation() {
        let mut cfg = RunConfig::default();
        cfg.p_grid = Some(vec![]);
        assert!(cfg.validate_p_grid().is_err());
        cfg.p_grid = Some(vec![0.2, 0.1]);
        assert!(cfg.validate_p_grid().is_err());
        cfg.p_grid = Some(vec![0.1, 0.6]);
        assert!(cfg.validate_p_grid().is_err());
        cfg.p_grid = Some(vec![0.1, 0.2, 0.3]);
        assert!(cfg.validate_p_grid().is_ok());
    }
}
