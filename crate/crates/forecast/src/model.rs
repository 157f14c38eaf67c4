//! A prediction model bundle: network, normalizer, optimizer state, and the
//! series it predicts. Serializes to a versioned JSON checkpoint that
//! round-trips exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::error::ForecastError;
use crate::mlp::Mlp;
use crate::normalize::Normalizer;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Pv,
    Load,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionModel {
    pub kind: SeriesKind,
    /// PV site index; none for the system load model.
    pub site: Option<usize>,
    pub mlp: Mlp,
    pub normalizer: Normalizer,
    pub adam: AdamState,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: PredictionModel,
}

impl PredictionModel {
    /// Normalized (model-space) prediction plus the tape for backward.
    pub fn predict_normalized(
        &self,
        raw_features: &[f64],
    ) -> Result<(Vec<f64>, crate::mlp::Tape), ForecastError> {
        let scaled = self.normalizer.normalize_features(raw_features);
        self.mlp.forward(&scaled)
    }

    /// Prediction in kW (unclamped).
    pub fn predict_kw(&self, raw_features: &[f64]) -> Result<Vec<f64>, ForecastError> {
        let (norm, _) = self.predict_normalized(raw_features)?;
        Ok(norm
            .iter()
            .map(|&v| self.normalizer.denormalize_target(v))
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), ForecastError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        std::fs::write(path, serde_json::to_string(&ckpt)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ForecastError> {
        let ckpt: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ForecastError::SchemaVersion {
                found: ckpt.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(ckpt.model)
    }
}
