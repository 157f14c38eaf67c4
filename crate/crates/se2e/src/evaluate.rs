//! Test-split evaluation: six contiguous cases with per-case MAPE, mean
//! losses under predicted and oracle decisions, regret, and violation rate.

use forecast::{dataset::HOURS, Dataset};
use gridflow::violation_rate;

use crate::chain::{oracle_day, run_day, DayFailure, DayInputs, ModelSet, TimestepOutcome};
use crate::context::RunContext;
use crate::report::{CaseMetrics, MetricsReport, REPORT_SCHEMA_VERSION};
use crate::PipelineError;

pub const N_CASES: usize = 6;
/// Bus id whose voltage trace lands in the report.
pub const MONITORED_BUS_ID: usize = 15;

/// Mean absolute percentage error over entries whose truth clears
/// `floor * scale`; None when nothing does.
pub fn mape(pred: &[f64], truth: &[f64], floor: f64, scale: f64) -> Option<f64> {
    let threshold = floor * scale;
    let mut acc = 0.0;
    let mut n = 0usize;
    for (p, y) in pred.iter().zip(truth) {
        if *y > threshold {
            acc += (p - y).abs() / y;
            n += 1;
        }
    }
    (n > 0).then(|| acc / n as f64)
}

/// Oracle outcomes for the test split, computed once and shared across
/// model evaluations.
pub struct Evaluator {
    oracle: Vec<Vec<TimestepOutcome>>,
}

impl Evaluator {
    pub fn new(ctx: &RunContext, dataset: &Dataset) -> Result<Self, PipelineError> {
        let mut oracle = Vec::with_capacity(dataset.test().len());
        let mut rolling = crate::chain::DayWarm::new(HOURS);
        for rec in dataset.test() {
            let inputs = DayInputs::from_record(rec);
            let outs =
                oracle_day(ctx, &inputs, Some(&mut rolling)).map_err(day_failure_to_error)?;
            oracle.push(outs);
        }
        Ok(Self { oracle })
    }

    pub fn oracle_mean_loss_kw(&self) -> f64 {
        let mut acc = 0.0;
        let mut n = 0;
        for day in &self.oracle {
            for t in day {
                acc += t.loss_kw;
                n += 1;
            }
        }
        acc / n.max(1) as f64
    }

    /// Evaluates a model set over the test split.
    pub fn evaluate(
        &self,
        ctx: &RunContext,
        models: &ModelSet,
        dataset: &Dataset,
        mode: &str,
        per_epoch: Vec<crate::report::EpochStats>,
    ) -> Result<MetricsReport, PipelineError> {
        let started = std::time::Instant::now();
        let test = dataset.test();
        assert_eq!(test.len(), self.oracle.len(), "oracle cache mismatch");
        let n_models = models.model_count();
        let monitored = ctx
            .net
            .index_of_id(MONITORED_BUS_ID)
            .unwrap_or(ctx.net.bus_count() - 1);

        struct DayEval {
            outcomes: Vec<TimestepOutcome>,
            pv_pred_kw: Vec<Vec<f64>>,
            load_pred_kw: Vec<f64>,
        }
        let mut days: Vec<DayEval> = Vec::with_capacity(test.len());
        let mut rolling = crate::chain::DayWarm::new(HOURS);
        for rec in test {
            let inputs = DayInputs::from_record(rec);
            let day = run_day(ctx, models, &inputs, false, Some(&mut rolling))
                .map_err(day_failure_to_error)?;
            days.push(DayEval {
                outcomes: day.per_t,
                pv_pred_kw: day.forward.pv_kw,
                load_pred_kw: day.forward.load_sys_kw,
            });
        }

        // contiguous equal-as-possible chronological cases
        let mut boundaries = Vec::with_capacity(N_CASES + 1);
        for k in 0..=N_CASES {
            boundaries.push(k * test.len() / N_CASES);
        }
        let floor = ctx.config.mape_floor;
        let mut cases = Vec::with_capacity(N_CASES);
        let mut negative_regret_instances = 0usize;
        for case in 0..N_CASES {
            let range = boundaries[case]..boundaries[case + 1];
            let slice = &days[range.clone()];
            let oracle = &self.oracle[range.clone()];
            let mut loss = 0.0;
            let mut oracle_loss = 0.0;
            let mut v_series = Vec::new();
            let mut n = 0usize;
            for (d, day) in slice.iter().enumerate() {
                for (t, out) in day.outcomes.iter().enumerate() {
                    loss += out.loss_kw;
                    oracle_loss += oracle[d][t].loss_kw;
                    if out.loss_kw - oracle[d][t].loss_kw < -1e-6 {
                        negative_regret_instances += 1;
                    }
                    v_series.push(out.v.clone());
                    n += 1;
                }
            }
            let n = n.max(1) as f64;
            // MAPE per model over the case's (day, hour) entries
            let mut mape_vals = Vec::with_capacity(n_models);
            for site in 0..models.pv.len() {
                let scale = models.pv[site].normalizer.target_scale;
                let mut pred = Vec::new();
                let mut truth = Vec::new();
                for (d, day) in slice.iter().enumerate() {
                    let rec = &test[range.start + d];
                    pred.extend_from_slice(&day.pv_pred_kw[site]);
                    truth.extend_from_slice(&rec.pv[site].target_kw);
                }
                mape_vals.push(mape(&pred, &truth, floor, scale));
            }
            if let Some(m) = &models.load {
                let scale = m.normalizer.target_scale;
                let mut pred = Vec::new();
                let mut truth = Vec::new();
                for (d, day) in slice.iter().enumerate() {
                    let rec = &test[range.start + d];
                    pred.extend_from_slice(&day.load_pred_kw);
                    truth.extend_from_slice(&rec.load.target_kw);
                }
                mape_vals.push(mape(&pred, &truth, floor, scale));
            }
            cases.push(CaseMetrics {
                case: case + 1,
                days: range.len(),
                power_loss_kw: loss / n,
                power_loss_oracle_kw: oracle_loss / n,
                regret_kw: (loss - oracle_loss) / n,
                violation_rate: violation_rate(&v_series, ctx.net.v_min2(), ctx.net.v_max2(), 1e-4),
                mape: mape_vals,
            });
        }
        let average = average_cases(&cases, n_models);

        // hour-of-day mean losses
        let mut hourly = vec![(0.0, 0.0); HOURS];
        let mut counts = vec![0usize; HOURS];
        for (d, day) in days.iter().enumerate() {
            for (t, out) in day.outcomes.iter().enumerate() {
                hourly[t].0 += out.loss_kw;
                hourly[t].1 += self.oracle[d][t].loss_kw;
                counts[t] += 1;
            }
        }
        for (h, c) in counts.iter().enumerate() {
            if *c > 0 {
                hourly[h].0 /= *c as f64;
                hourly[h].1 /= *c as f64;
            }
        }
        // first-week voltage trace at the monitored bus
        let mut trace = Vec::new();
        for day in days.iter().take(7) {
            for out in &day.outcomes {
                trace.push(out.v[monitored].sqrt());
            }
        }

        Ok(MetricsReport {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario: format!("{:?}", ctx.config.scenario).to_lowercase(),
            seed: ctx.config.seed,
            mode: mode.to_string(),
            mape_floor: floor,
            cases,
            average,
            negative_regret_instances,
            test_days: test.len(),
            hourly_loss_kw: hourly,
            monitored_bus: MONITORED_BUS_ID,
            weekly_voltage_trace: trace,
            per_epoch,
            wall_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

fn average_cases(cases: &[CaseMetrics], n_models: usize) -> CaseMetrics {
    let n = cases.len().max(1) as f64;
    let mut avg = CaseMetrics {
        case: 0,
        days: cases.iter().map(|c| c.days).sum(),
        power_loss_kw: cases.iter().map(|c| c.power_loss_kw).sum::<f64>() / n,
        power_loss_oracle_kw: cases.iter().map(|c| c.power_loss_oracle_kw).sum::<f64>() / n,
        regret_kw: cases.iter().map(|c| c.regret_kw).sum::<f64>() / n,
        violation_rate: cases.iter().map(|c| c.violation_rate).sum::<f64>() / n,
        mape: Vec::with_capacity(n_models),
    };
    for m in 0..n_models {
        let vals: Vec<f64> = cases.iter().filter_map(|c| c.mape[m]).collect();
        avg.mape.push(if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        });
    }
    avg
}

fn day_failure_to_error(f: DayFailure) -> PipelineError {
    match f {
        DayFailure::Dispatch { t, status } => PipelineError::Grid(gridflow::GridError::Injection(
            format!("dispatch failed at t={t}: {status:?}"),
        )),
        DayFailure::Evaluation { t, status } => PipelineError::Grid(
            gridflow::GridError::Injection(format!("evaluation failed at t={t}: {status:?}")),
        ),
        DayFailure::Error(e) => e,
    }
}

/// Convenience wrapper: build the oracle cache and evaluate one model set.
pub fn evaluate(
    ctx: &RunContext,
    models: &ModelSet,
    dataset: &Dataset,
    mode: &str,
    per_epoch: Vec<crate::report::EpochStats>,
) -> Result<MetricsReport, PipelineError> {
    Evaluator::new(ctx, dataset)?.evaluate(ctx, models, dataset, mode, per_epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0], 0.05, 10.0), Some(0.0));
        let pred: Vec<f64> = vec![1.1, 2.2, 3.3];
        let truth = vec![1.0, 2.0, 3.0];
        let m = mape(&pred, &truth, 0.05, 10.0).unwrap();
        assert!((m - 0.1).abs() < 1e-12);
        // nothing above the floor
        assert_eq!(mape(&[0.1], &[0.2], 0.05, 10.0), None);
    }
}
