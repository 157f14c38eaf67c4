//! Seeded synthetic PV/load/weather benchmark.
//!
//! Per site and day: a truncated-cosine clear-sky irradiance curve with a
//! seasonal envelope, attenuated by a mean-reverting daily cloudiness state
//! with intra-day texture; PV output is capacity times irradiance fraction
//! with temperature derating. Forecast features are the truth plus seeded
//! noise, so the prediction task keeps an irreducible error floor. The
//! system load follows a weekday/weekend double-peak profile with seasonal
//! drift and autocorrelated noise.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use gridflow::DeviceSet;

use crate::dataset::{DayRecord, Dataset, LoadDay, Provenance, SiteDay};
use crate::error::ForecastError;

/// Fixed load power factor used to derive reactive demand.
pub const POWER_FACTOR: f64 = 0.95;

/// q = p tan(acos(pf)).
pub fn derive_reactive_kvar(p_kw: f64) -> f64 {
    p_kw * POWER_FACTOR.acos().tan()
}

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub peak_load_kw: f64,
    /// Multiplicative irradiance forecast error (standard deviation).
    pub irr_forecast_noise: f64,
    /// Additive temperature forecast error, degrees C.
    pub temp_forecast_noise: f64,
    /// Day-to-day cloudiness volatility.
    pub cloud_volatility: f64,
    /// Relative load noise.
    pub load_noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            peak_load_kw: 1350.0,
            irr_forecast_noise: 0.18,
            temp_forecast_noise: 1.3,
            cloud_volatility: 0.24,
            load_noise: 0.035,
        }
    }
}

pub fn generate_synthetic(
    seed: u64,
    days: usize,
    sites: &DeviceSet,
) -> Result<Dataset, ForecastError> {
    generate_synthetic_with(seed, days, sites, &SynthParams::default())
}

struct SimDay {
    pv_power: Vec<Vec<f64>>,
    pv_temp_fc: Vec<Vec<f64>>,
    pv_irr_fc: Vec<Vec<f64>>,
    load_kw: Vec<f64>,
    load_temp_fc: Vec<f64>,
}

pub fn generate_synthetic_with(
    seed: u64,
    days: usize,
    sites: &DeviceSet,
    params: &SynthParams,
) -> Result<Dataset, ForecastError> {
    if days < 20 {
        return Err(ForecastError::Invalid(format!(
            "need at least 20 days, got {days}"
        )));
    }
    if sites.pv.is_empty() {
        return Err(ForecastError::Invalid("no PV sites".into()));
    }
    let caps: Vec<f64> = sites.pv.iter().map(|&(_, kw)| kw).collect();
    let n_sites = caps.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // one warm-up day supplies the first record's past-day series
    let total = days + 1;
    let mut sim: Vec<SimDay> = Vec::with_capacity(total);
    let mut cloud = vec![0.45; n_sites];
    let mut load_ar = 0.0f64;
    for d in 0..total {
        let doy = (d % 365) as f64;
        let season = 0.72 + 0.28 * (2.0 * std::f64::consts::PI * (doy - 172.0) / 365.0).cos();
        let half_day = 6.0 + 1.9 * (2.0 * std::f64::consts::PI * (doy - 172.0) / 365.0).cos();
        let sunrise = 12.0 - half_day;
        let sunset = 12.0 + half_day;
        let t_season = 13.0 + 11.5 * (2.0 * std::f64::consts::PI * (doy - 200.0) / 365.0).cos();

        let mut pv_power = Vec::with_capacity(n_sites);
        let mut pv_temp_fc = Vec::with_capacity(n_sites);
        let mut pv_irr_fc = Vec::with_capacity(n_sites);
        for s in 0..n_sites {
            cloud[s] = (0.62 * cloud[s]
                + 0.38 * 0.42
                + params.cloud_volatility * rng.gen_range(-1.0..1.0))
            .clamp(0.0, 0.95);
            let mut power = Vec::with_capacity(24);
            let mut temp_fc = Vec::with_capacity(24);
            let mut irr_fc = Vec::with_capacity(24);
            let mut jitter_prev: f64 = rng.gen_range(0.0..1.0);
            for h in 0..24 {
                let hour = h as f64 + 0.5;
                let clear = if hour > sunrise && hour < sunset {
                    let phase = std::f64::consts::PI * (hour - sunrise) / (sunset - sunrise);
                    1000.0 * season * phase.sin().powf(1.15)
                } else {
                    0.0
                };
                let jitter: f64 = rng.gen_range(0.0..1.0);
                let texture = 0.5 * (jitter + jitter_prev);
                jitter_prev = jitter;
                let atten = (1.0 - 0.9 * cloud[s] * (0.55 + 0.9 * texture)).clamp(0.06, 1.0);
                let irr = clear * atten;
                let temp = t_season + 6.0 * ((hour - 6.0) / 14.0 * std::f64::consts::PI).sin().max(0.0)
                    + rng.gen_range(-0.8..0.8);
                let cell = temp + 22.0 * irr / 1000.0;
                let derate = 1.0 - 0.004 * (cell - 25.0).max(0.0);
                let p = (caps[s] * (irr / 1000.0).min(1.0) * derate).max(0.0);
                power.push(p.min(caps[s]));
                // forecasts: noisy versions of the actual weather
                let irr_noise = 1.0 + params.irr_forecast_noise * rng.gen_range(-1.0..1.0);
                irr_fc.push((irr * irr_noise + 12.0 * rng.gen_range(-1.0..1.0)).max(0.0));
                temp_fc.push(temp + params.temp_forecast_noise * rng.gen_range(-1.0..1.0));
            }
            pv_power.push(power);
            pv_temp_fc.push(temp_fc);
            pv_irr_fc.push(irr_fc);
        }

        // system load: double-peak weekday shape, weekend reduction
        let weekend = d % 7 >= 5;
        let wk = if weekend { 0.84 } else { 1.0 };
        let l_season = 1.0 + 0.10 * (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.0).cos();
        load_ar = 0.8 * load_ar + params.load_noise * rng.gen_range(-1.0..1.0);
        let mut load_kw = Vec::with_capacity(24);
        let mut load_temp_fc = Vec::with_capacity(24);
        for h in 0..24 {
            let hour = h as f64;
            let shape = 0.58
                + 0.18 * (-((hour - 9.0) / 2.8).powi(2)).exp()
                + 0.42 * (-((hour - 19.0) / 3.0).powi(2)).exp()
                + 0.06 * (std::f64::consts::PI * hour / 12.0).sin();
            let noise = 1.0 + load_ar + 0.015 * rng.gen_range(-1.0..1.0f64);
            load_kw.push((params.peak_load_kw * shape * wk * l_season * noise).max(0.0));
            load_temp_fc.push(
                t_season + 5.0 * ((hour - 6.0) / 14.0 * std::f64::consts::PI).sin().max(0.0)
                    + params.temp_forecast_noise * rng.gen_range(-1.0..1.0),
            );
        }
        sim.push(SimDay {
            pv_power,
            pv_temp_fc,
            pv_irr_fc,
            load_kw,
            load_temp_fc,
        });
    }

    let mut records = Vec::with_capacity(days);
    for d in 1..total {
        let pv = (0..n_sites)
            .map(|s| SiteDay {
                past_power_kw: sim[d - 1].pv_power[s].clone(),
                temp_c: sim[d].pv_temp_fc[s].clone(),
                irradiance_wm2: sim[d].pv_irr_fc[s].clone(),
                target_kw: sim[d].pv_power[s].clone(),
            })
            .collect();
        let load = LoadDay {
            past_kw: sim[d - 1].load_kw.clone(),
            temp_c: sim[d].load_temp_fc.clone(),
            target_kw: sim[d].load_kw.clone(),
        };
        records.push(DayRecord {
            day: d - 1,
            pv,
            load,
        });
    }
    let split = (days as f64 * 0.8).floor() as usize;
    let dataset = Dataset {
        records,
        split,
        provenance: Provenance {
            schema_version: 1,
            seed,
            days,
            pv_caps_kw: caps,
            peak_load_kw: params.peak_load_kw,
        },
    };
    dataset.validate()?;
    Ok(dataset)
}
