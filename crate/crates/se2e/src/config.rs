//! Run configuration: training hyperparameters plus artifact paths, read
//! from a JSON file with command-line overrides applied on top.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use gridflow::Scenario;

use crate::PipelineError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub pretrain_epochs: usize,
    pub train_epochs: usize,
    /// Weight of the prediction-error term in the hybrid loss.
    pub epsilon: f64,
    /// Voltage-violation penalty weight in the evaluation program.
    pub lambda: f64,
    pub learning_rate: f64,
    pub decay: f64,
    pub hidden: Vec<usize>,
    pub solver_tolerance: f64,
    pub solver_max_iters: usize,
    /// Abort an epoch when more than this fraction of days fail to solve.
    pub skip_budget: f64,
    /// MAPE is computed over entries above this fraction of the target scale.
    pub mape_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Safety,
            seed: 1,
            pretrain_epochs: 10,
            train_epochs: 30,
            epsilon: 1.0,
            lambda: 1.0,
            learning_rate: 3e-4,
            decay: 1e-5,
            hidden: vec![128, 128],
            solver_tolerance: 1e-7,
            solver_max_iters: 50_000,
            skip_budget: 0.10,
            mape_floor: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.epsilon < 0.0 || self.lambda < 0.0 {
            return Err(PipelineError::Config(
                "epsilon and lambda must be nonnegative".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(PipelineError::Config("learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.skip_budget) {
            return Err(PipelineError::Config("skip budget must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Network description; the embedded 33-bus feeder when absent.
    pub network: Option<PathBuf>,
    /// Directory holding dataset.csv + manifest.json.
    pub dataset: PathBuf,
    /// Output directory for checkpoints, reports, and curves.
    pub out: PathBuf,
    /// Worker threads for per-timestep solves; logical cores when absent.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            network: None,
            dataset: PathBuf::from("data"),
            out: PathBuf::from("runs/out"),
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("unparsable config: {e}")))?;
        cfg.train.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = TrainConfig::default();
        assert_eq!(c.pretrain_epochs, 10);
        assert_eq!(c.train_epochs, 30);
        assert_eq!(c.epsilon, 1.0);
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.learning_rate, 3e-4);
        assert_eq!(c.decay, 1e-5);
        assert_eq!(c.hidden, vec![128, 128]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"dataset": "d", "out": "o", "bogus": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn config_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"scenario": "economic", "seed": 9, "dataset": "data", "out": "runs/x"}"#,
        )
        .unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.train.scenario, Scenario::Economic);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.train.train_epochs, 30);
    }
}
