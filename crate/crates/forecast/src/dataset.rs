//! Dataset container, feature assembly, and CSV persistence.
//!
//! On disk: one CSV row per (day, series) with hourly column groups, plus a
//! sidecar manifest carrying the schema version and generator provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ForecastError;

pub const HOURS: usize = 24;
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDay {
    pub past_power_kw: Vec<f64>,
    pub temp_c: Vec<f64>,
    pub irradiance_wm2: Vec<f64>,
    pub target_kw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadDay {
    pub past_kw: Vec<f64>,
    pub temp_c: Vec<f64>,
    pub target_kw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: usize,
    pub pv: Vec<SiteDay>,
    pub load: LoadDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub seed: u64,
    pub days: usize,
    pub pv_caps_kw: Vec<f64>,
    pub peak_load_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<DayRecord>,
    /// First test-day index: records[..split] train, records[split..] test.
    pub split: usize,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn train(&self) -> &[DayRecord] {
        &self.records[..self.split]
    }

    pub fn test(&self) -> &[DayRecord] {
        &self.records[self.split..]
    }

    pub fn n_sites(&self) -> usize {
        self.provenance.pv_caps_kw.len()
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        if self.split == 0 || self.split >= self.records.len() {
            return Err(ForecastError::Invalid(format!(
                "split {} outside (0, {})",
                self.split,
                self.records.len()
            )));
        }
        let n_sites = self.n_sites();
        let mut prev_day = None;
        for rec in &self.records {
            if let Some(p) = prev_day {
                if rec.day <= p {
                    return Err(ForecastError::Invalid(
                        "records out of chronological order".into(),
                    ));
                }
            }
            prev_day = Some(rec.day);
            if rec.pv.len() != n_sites {
                return Err(ForecastError::Invalid(format!(
                    "day {}: {} PV series, expected {n_sites}",
                    rec.day,
                    rec.pv.len()
                )));
            }
            for (s, site) in rec.pv.iter().enumerate() {
                for series in [
                    &site.past_power_kw,
                    &site.temp_c,
                    &site.irradiance_wm2,
                    &site.target_kw,
                ] {
                    if series.len() != HOURS {
                        return Err(ForecastError::Invalid(format!(
                            "day {} pv{}: series of length {}",
                            rec.day,
                            s + 1,
                            series.len()
                        )));
                    }
                }
                let cap = self.provenance.pv_caps_kw[s];
                if site.target_kw.iter().any(|&p| p < 0.0 || p > cap + 1e-9) {
                    return Err(ForecastError::Invalid(format!(
                        "day {} pv{}: target outside [0, {cap}]",
                        rec.day,
                        s + 1
                    )));
                }
            }
            for series in [&rec.load.past_kw, &rec.load.temp_c, &rec.load.target_kw] {
                if series.len() != HOURS {
                    return Err(ForecastError::Invalid(format!(
                        "day {}: load series of length {}",
                        rec.day,
                        series.len()
                    )));
                }
            }
            if rec.load.target_kw.iter().any(|&p| p < 0.0) {
                return Err(ForecastError::Invalid(format!(
                    "day {}: negative load",
                    rec.day
                )));
            }
        }
        Ok(())
    }
}

/// Model input for a PV site: past-day power, forecast temperature, and
/// forecast irradiance (72 features).
pub fn pv_features(rec: &DayRecord, site: usize) -> Vec<f64> {
    let s = &rec.pv[site];
    let mut f = Vec::with_capacity(3 * HOURS);
    f.extend_from_slice(&s.past_power_kw);
    f.extend_from_slice(&s.temp_c);
    f.extend_from_slice(&s.irradiance_wm2);
    f
}

/// Model input for the system load: past-day load and forecast temperature
/// (48 features).
pub fn load_features(rec: &DayRecord) -> Vec<f64> {
    let mut f = Vec::with_capacity(2 * HOURS);
    f.extend_from_slice(&rec.load.past_kw);
    f.extend_from_slice(&rec.load.temp_c);
    f
}

fn header() -> Vec<String> {
    let mut cols = vec!["day".to_string(), "kind".to_string()];
    for group in ["past", "temp", "irr", "target"] {
        for h in 0..HOURS {
            cols.push(format!("{group}_h{h:02}"));
        }
    }
    cols
}

fn push_block(record: &mut Vec<String>, values: &[f64]) {
    record.extend(values.iter().map(|v| format!("{v}")));
}

fn empty_block(record: &mut Vec<String>) {
    record.extend(std::iter::repeat_with(String::new).take(HOURS));
}

/// Writes `dataset.csv` and `manifest.json` under `dir`.
pub fn save(dataset: &Dataset, dir: &Path) -> Result<(), ForecastError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("dataset.csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(header())?;
    for rec in &dataset.records {
        for (s, site) in rec.pv.iter().enumerate() {
            let mut row = vec![rec.day.to_string(), format!("pv{}", s + 1)];
            push_block(&mut row, &site.past_power_kw);
            push_block(&mut row, &site.temp_c);
            push_block(&mut row, &site.irradiance_wm2);
            push_block(&mut row, &site.target_kw);
            writer.write_record(&row)?;
        }
        let mut row = vec![rec.day.to_string(), "load".to_string()];
        push_block(&mut row, &rec.load.past_kw);
        push_block(&mut row, &rec.load.temp_c);
        empty_block(&mut row);
        push_block(&mut row, &rec.load.target_kw);
        writer.write_record(&row)?;
    }
    writer.flush()?;

    let manifest = serde_json::json!({
        "schema_version": dataset.provenance.schema_version,
        "seed": dataset.provenance.seed,
        "days": dataset.provenance.days,
        "split": dataset.split,
        "pv_caps_kw": dataset.provenance.pv_caps_kw,
        "peak_load_kw": dataset.provenance.peak_load_kw,
        "csv_sha256": sha256_file(&csv_path)?,
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String, ForecastError> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Loads a dataset directory written by [`save`], validating every record.
pub fn load(dir: &Path) -> Result<Dataset, ForecastError> {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let schema = manifest["schema_version"].as_u64().unwrap_or(0) as u32;
    if schema != SCHEMA_VERSION {
        return Err(ForecastError::SchemaVersion {
            found: schema,
            expected: SCHEMA_VERSION,
        });
    }
    let bad_manifest = |what: &str| ForecastError::Invalid(format!("manifest missing {what}"));
    let split = manifest["split"].as_u64().ok_or_else(|| bad_manifest("split"))? as usize;
    let pv_caps_kw: Vec<f64> = manifest["pv_caps_kw"]
        .as_array()
        .ok_or_else(|| bad_manifest("pv_caps_kw"))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| bad_manifest("pv_caps_kw entry")))
        .collect::<Result<_, _>>()?;
    let provenance = Provenance {
        schema_version: schema,
        seed: manifest["seed"].as_u64().ok_or_else(|| bad_manifest("seed"))?,
        days: manifest["days"].as_u64().ok_or_else(|| bad_manifest("days"))? as usize,
        peak_load_kw: manifest["peak_load_kw"]
            .as_f64()
            .ok_or_else(|| bad_manifest("peak_load_kw"))?,
        pv_caps_kw,
    };

    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(dir.join("dataset.csv"))?;
    let headers = reader.headers()?.clone();
    let expected = header();
    for col in &expected {
        if !headers.iter().any(|h| h == col) {
            return Err(ForecastError::MissingColumn(col.clone()));
        }
    }
    let col_index: std::collections::HashMap<&str, usize> =
        headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let n_sites = provenance.pv_caps_kw.len();

    let mut records: Vec<DayRecord> = Vec::new();
    let mut current: Option<DayRecord> = None;
    for (row_idx, row) in reader.records().enumerate() {
        let line = row_idx + 2; // header occupies line 1
        let row = row.map_err(|e| ForecastError::MalformedRow {
            line,
            message: e.to_string(),
        })?;
        let field = |name: &str| -> Result<&str, ForecastError> {
            col_index
                .get(name)
                .and_then(|&i| row.get(i))
                .ok_or(ForecastError::MalformedRow {
                    line,
                    message: format!("missing field {name}"),
                })
        };
        let parse_block = |group: &str| -> Result<Vec<f64>, ForecastError> {
            (0..HOURS)
                .map(|h| {
                    let name = format!("{group}_h{h:02}");
                    let raw = field(&name)?;
                    raw.parse::<f64>().map_err(|_| ForecastError::MalformedRow {
                        line,
                        message: format!("bad number '{raw}' in {name}"),
                    })
                })
                .collect()
        };
        let day: usize = field("day")?.parse().map_err(|_| ForecastError::MalformedRow {
            line,
            message: "bad day index".into(),
        })?;
        let kind = field("kind")?.to_string();
        if current.as_ref().map_or(true, |r| r.day != day) {
            if let Some(done) = current.take() {
                records.push(done);
            }
            current = Some(DayRecord {
                day,
                pv: Vec::new(),
                load: LoadDay {
                    past_kw: Vec::new(),
                    temp_c: Vec::new(),
                    target_kw: Vec::new(),
                },
            });
        }
        let rec = current.as_mut().expect("set above");
        if let Some(site_no) = kind.strip_prefix("pv") {
            let site: usize = site_no.parse().map_err(|_| ForecastError::MalformedRow {
                line,
                message: format!("bad series kind '{kind}'"),
            })?;
            if site != rec.pv.len() + 1 || site > n_sites {
                return Err(ForecastError::MalformedRow {
                    line,
                    message: format!("unexpected series pv{site}"),
                });
            }
            rec.pv.push(SiteDay {
                past_power_kw: parse_block("past")?,
                temp_c: parse_block("temp")?,
                irradiance_wm2: parse_block("irr")?,
                target_kw: parse_block("target")?,
            });
        } else if kind == "load" {
            rec.load = LoadDay {
                past_kw: parse_block("past")?,
                temp_c: parse_block("temp")?,
                target_kw: parse_block("target")?,
            };
        } else {
            return Err(ForecastError::MalformedRow {
                line,
                message: format!("unknown series kind '{kind}'"),
            });
        }
    }
    if let Some(done) = current.take() {
        records.push(done);
    }
    let dataset = Dataset {
        records,
        split,
        provenance,
    };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_synthetic;
    use gridflow::{ieee33_file, DeviceSet, Network, Scenario};

    fn devices() -> DeviceSet {
        let file = ieee33_file();
        let net = Network::from_file(&file, Scenario::Safety).unwrap();
        DeviceSet::from_file(&file.devices, &net).unwrap()
    }

    #[test]
    fn roundtrip_preserves_every_value() {
        let ds = generate_synthetic(99, 50, &devices()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let back = load(dir.path()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn identical_seeds_give_identical_files() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        save(&generate_synthetic(7, 30, &devices()).unwrap(), dir_a.path()).unwrap();
        save(&generate_synthetic(7, 30, &devices()).unwrap(), dir_b.path()).unwrap();
        let a = std::fs::read(dir_a.path().join("dataset.csv")).unwrap();
        let b = std::fs::read(dir_b.path().join("dataset.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_file_reports_line() {
        let ds = generate_synthetic(3, 25, &devices()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let path = dir.path().join("dataset.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(5).collect();
        let mut shortened = cut.join("\n");
        shortened.push_str("\n3,pv1,1.0,2.0\n");
        std::fs::write(&path, shortened).unwrap();
        match load(dir.path()) {
            Err(ForecastError::MalformedRow { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected malformed row, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let ds = generate_synthetic(3, 25, &devices()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let path = dir.path().join("dataset.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        let replaced = text.replacen("irr_h07", "bogus", 1);
        std::fs::write(&path, replaced).unwrap();
        match load(dir.path()) {
            Err(ForecastError::MissingColumn(name)) => assert_eq!(name, "irr_h07"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn schema_version_mismatch_is_rejected() {
        let ds = generate_synthetic(3, 25, &devices()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let mpath = dir.path().join("manifest.json");
        let manifest = std::fs::read_to_string(&mpath)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 9");
        std::fs::write(&mpath, manifest).unwrap();
        assert!(matches!(
            load(dir.path()),
            Err(ForecastError::SchemaVersion { found: 9, .. })
        ));
    }

    #[test]
    fn feature_vectors_have_documented_shapes() {
        let ds = generate_synthetic(5, 25, &devices()).unwrap();
        assert_eq!(pv_features(&ds.records[0], 0).len(), 72);
        assert_eq!(load_features(&ds.records[0]).len(), 48);
    }
}
