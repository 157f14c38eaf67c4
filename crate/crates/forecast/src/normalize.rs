//! Min-max feature scaling fitted on the training split, plus the target
//! scale (device capacity for PV, peak demand for load).

use serde::{Deserialize, Serialize};

use crate::error::ForecastError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalizer {
    pub feat_min: Vec<f64>,
    pub feat_max: Vec<f64>,
    /// Physical value corresponding to 1.0 in model space, kW.
    pub target_scale: f64,
}

impl Normalizer {
    pub fn fit(features: &[Vec<f64>], target_scale: f64) -> Result<Self, ForecastError> {
        if features.is_empty() {
            return Err(ForecastError::Invalid("no feature rows to fit".into()));
        }
        if !(target_scale > 0.0) {
            return Err(ForecastError::Invalid("target scale must be positive".into()));
        }
        let dim = features[0].len();
        let mut feat_min = vec![f64::INFINITY; dim];
        let mut feat_max = vec![f64::NEG_INFINITY; dim];
        for row in features {
            if row.len() != dim {
                return Err(ForecastError::DimensionMismatch(
                    "ragged feature rows".into(),
                ));
            }
            for (i, &v) in row.iter().enumerate() {
                feat_min[i] = feat_min[i].min(v);
                feat_max[i] = feat_max[i].max(v);
            }
        }
        // constant features map to zero instead of dividing by zero
        for (lo, hi) in feat_min.iter().zip(feat_max.iter_mut()) {
            if *hi <= *lo {
                *hi = lo + 1.0;
            }
        }
        Ok(Self {
            feat_min,
            feat_max,
            target_scale,
        })
    }

    pub fn normalize_features(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.feat_min.iter().zip(&self.feat_max))
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }

    pub fn denormalize_features(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .zip(self.feat_min.iter().zip(&self.feat_max))
            .map(|(v, (lo, hi))| v * (hi - lo) + lo)
            .collect()
    }

    pub fn normalize_target(&self, kw: f64) -> f64 {
        kw / self.target_scale
    }

    pub fn denormalize_target(&self, unit: f64) -> f64 {
        unit * self.target_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity_on_training_range() {
        let rows = vec![vec![0.0, 10.0, -5.0], vec![2.0, 30.0, 5.0], vec![1.0, 20.0, 0.0]];
        let norm = Normalizer::fit(&rows, 100.0).unwrap();
        for row in &rows {
            let back = norm.denormalize_features(&norm.normalize_features(row));
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
        assert_eq!(norm.denormalize_target(norm.normalize_target(42.0)), 42.0);
    }

    #[test]
    fn constant_feature_does_not_blow_up() {
        let rows = vec![vec![7.0], vec![7.0]];
        let norm = Normalizer::fit(&rows, 1.0).unwrap();
        let scaled = norm.normalize_features(&[7.0]);
        assert!(scaled[0].is_finite());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Normalizer::fit(&[], 1.0).is_err());
        assert!(Normalizer::fit(&[vec![1.0]], 0.0).is_err());
    }
}
