use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use seqbreak_core::montecarlo::Experiment;
use seqbreak_core::{Boundary, DetectorSpec, DgpSpec, ModelKind};

use crate::output::usage;

pub const EXAMPLE: &str = r#"{
  "dgp": {"mu": 1.0, "rho": 0.3, "break_kind": "rho_shift", "break_to": 0.5, "break_loc": 0.25},
  "detector": {"kind": "ols-cusum"},
  "boundary": {"kind": "b1", "lambda": 7.78},
  "sample": {"n": 50, "T": 2.0},
  "replications": 2500,
  "seed": 7,
  "n_grid": [50, 100, 200, 1000],
  "output": {"report": "power.json", "table": "power.csv", "density": "density.csv"}
}
break_kind is none, mu_shift or rho_shift; detector kinds are re, me, ols-cusum,
ols-mosum, ols-cusum-sq; boundary kinds b1..b9. Unknown keys are rejected."#;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub n: usize,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
}

fn default_horizon() -> f64 {
    2.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub density: Option<PathBuf>,
}

/// One Monte Carlo experiment as read from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dgp: DgpSpec,
    pub detector: DetectorSpec,
    pub boundary: Boundary,
    pub sample: Sample,
    #[serde(default = "default_replications", alias = "B")]
    pub replications: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub output: Outputs,
}

fn default_replications() -> usize {
    2500
}

impl ExperimentConfig {
    /// Reads and validates a config; every failure is a usage error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| usage(format!("invalid config {}: {e}\n\nexpected layout:\n{EXAMPLE}", path.display())))?;
        Ok(cfg)
    }

    /// The experiment with the seed resolved: the config's seed unless the
    /// command line supplied one.
    pub fn experiment(&self, cli_seed: Option<u64>, fallback_seed: u64) -> Result<Experiment> {
        let exp = Experiment {
            dgp: self.dgp,
            detector: self.detector,
            boundary: self.boundary,
            n: self.sample.n,
            horizon: self.sample.horizon,
            replications: self.replications,
            seed: cli_seed.or(self.seed).unwrap_or(fallback_seed),
            model: self.model,
        };
        exp.validate().map_err(|e| usage(format!("invalid experiment: {e}\n\nexpected layout:\n{EXAMPLE}")))?;
        Ok(exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_parses() {
        let json = EXAMPLE.split("\nbreak_kind").next().unwrap();
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.sample.n, 50);
        assert_eq!(cfg.n_grid.as_deref(), Some(&[50, 100, 200, 1000][..]));
        let exp = cfg.experiment(None, 0).unwrap();
        assert_eq!(exp.seed, 7);
        assert_eq!(cfg.experiment(Some(3), 0).unwrap().seed, 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{"detector": {"kind": "re"}, "boundary": {"kind": "b3", "lambda": 1.5},
                      "sample": {"n": 50}, "replicates": 10}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
        let nested = r#"{"detector": {"kind": "re", "window": 3}, "boundary": {"kind": "b3", "lambda": 1.5},
                         "sample": {"n": 50}}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(nested).is_err());
    }

    #[test]
    fn short_replication_key() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"detector": {"kind": "re"}, "boundary": {"kind": "b3", "lambda": 1.5}, "sample": {"n": 50}, "B": 10}"#,
        )
        .unwrap();
        assert_eq!(cfg.replications, 10);
        assert_eq!(cfg.sample.horizon, 2.0);
    }
}
