//! Metrics containers and report/plot-file emission.
//!
//! The JSON report is a pure function of (config, seed, dataset): timing
//! lives outside the serialized fields so identical runs produce identical
//! bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::PipelineError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Per model: PV sites in order, then the load model.
    pub mean_mse: Vec<f64>,
    pub mean_reg_loss_pu: f64,
    pub mean_loss_kw: f64,
    pub violation_rate: f64,
    pub days_skipped: usize,
    pub clamp_events: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case: usize,
    pub days: usize,
    /// Mean power loss under predicted decisions, kW.
    pub power_loss_kw: f64,
    /// Mean power loss under oracle decisions, kW.
    pub power_loss_oracle_kw: f64,
    pub regret_kw: f64,
    pub violation_rate: f64,
    /// MAPE per model (PV sites then load); None when no entry cleared the
    /// daylight floor.
    pub mape: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub mode: String,
    /// Fraction of the target scale below which entries are excluded from
    /// MAPE (flagged here because nighttime PV output would otherwise divide
    /// by zero).
    pub mape_floor: f64,
    pub cases: Vec<CaseMetrics>,
    pub average: CaseMetrics,
    pub negative_regret_instances: usize,
    pub test_days: usize,
    /// Hour-of-day mean losses over the test split (predicted, oracle), kW.
    pub hourly_loss_kw: Vec<(f64, f64)>,
    /// Voltage magnitude trace at the monitored bus over the first test
    /// week, p.u. per (day, hour).
    pub monitored_bus: usize,
    pub weekly_voltage_trace: Vec<f64>,
    pub per_epoch: Vec<EpochStats>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String, PipelineError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Plot-ready CSV companions, one per figure the report backs.
    pub fn write_plot_csvs(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        // training curves
        let mut s = String::from("epoch,mean_reg_loss_pu,mean_loss_kw,violation_rate,days_skipped\n");
        for e in &self.per_epoch {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.mean_reg_loss_pu, e.mean_loss_kw, e.violation_rate, e.days_skipped
            ));
        }
        std::fs::write(dir.join("training_curves.csv"), s)?;
        // per-model mse curves
        let n_models = self.per_epoch.first().map_or(0, |e| e.mean_mse.len());
        let mut s = String::from("epoch");
        for m in 0..n_models {
            s.push_str(&format!(",mse_model{m}"));
        }
        s.push('\n');
        for e in &self.per_epoch {
            s.push_str(&e.epoch.to_string());
            for v in &e.mean_mse {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        std::fs::write(dir.join("mse_curves.csv"), s)?;
        // hourly mean loss
        let mut s = String::from("hour,loss_kw,oracle_loss_kw\n");
        for (h, (a, b)) in self.hourly_loss_kw.iter().enumerate() {
            s.push_str(&format!("{h},{a},{b}\n"));
        }
        std::fs::write(dir.join("hourly_loss.csv"), s)?;
        // violation rate per case
        let mut s = String::from("case,violation_rate,regret_kw,power_loss_kw,oracle_loss_kw\n");
        for c in &self.cases {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                c.case, c.violation_rate, c.regret_kw, c.power_loss_kw, c.power_loss_oracle_kw
            ));
        }
        std::fs::write(dir.join("cases.csv"), s)?;
        // monitored-bus weekly voltage
        let mut s = String::from("instance,voltage_pu\n");
        for (i, v) in self.weekly_voltage_trace.iter().enumerate() {
            s.push_str(&format!("{i},{v}\n"));
        }
        std::fs::write(dir.join("weekly_voltage.csv"), s)?;
        Ok(())
    }
}
