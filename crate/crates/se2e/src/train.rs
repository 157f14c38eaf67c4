//! Training loops: MSE pretraining, plain MSE continuation, and the hybrid
//! stochastic descent that feeds regulation-loss gradients into every model.
//!
//! One gradient step consumes one day (all 24 timesteps); epochs iterate the
//! training split in chronological order.

use forecast::{mse_and_grad, Dataset, Gradients};
use gridflow::violation_rate;

use crate::chain::{run_day, DayFailure, DayInputs, DayWarm, ModelSet};
use crate::context::RunContext;
use crate::report::EpochStats;
use crate::PipelineError;

/// Per-model normalized targets for one record.
fn normalized_targets(models: &ModelSet, inputs: &DayInputs) -> (Vec<Vec<f64>>, Option<Vec<f64>>) {
    let pv = models
        .pv
        .iter()
        .enumerate()
        .map(|(site, m)| {
            inputs.truth_pv_kw[site]
                .iter()
                .map(|&kw| m.normalizer.normalize_target(kw))
                .collect()
        })
        .collect();
    let load = models.load.as_ref().map(|m| {
        inputs
            .truth_load_sys_kw
            .iter()
            .map(|&kw| m.normalizer.normalize_target(kw))
            .collect()
    });
    (pv, load)
}

/// One prediction-error epoch over the training split; returns the mean MSE
/// per model (PV sites first, load last).
pub fn mse_epoch(models: &mut ModelSet, dataset: &Dataset) -> Result<Vec<f64>, PipelineError> {
    let n_models = models.model_count();
    let mut sums = vec![0.0; n_models];
    let mut count = 0usize;
    for rec in dataset.train() {
        let inputs = DayInputs::from_record(rec);
        let (pv_targets, load_target) = normalized_targets(models, &inputs);
        count += 1;
        for site in 0..models.pv.len() {
            let model = &mut models.pv[site];
            let (pred, tape) = model.predict_normalized(&inputs.pv_features[site])?;
            let (loss, grad) = mse_and_grad(&pred, &pv_targets[site]);
            sums[site] += loss;
            let grads = model.mlp.backward(&tape, &grad)?;
            let mut adam = model.adam.clone();
            adam.step(&mut model.mlp, &grads);
            model.adam = adam;
        }
        if let (Some(model), Some(target)) = (models.load.as_mut(), load_target.as_ref()) {
            let (pred, tape) = model.predict_normalized(inputs.load_features.as_ref().unwrap())?;
            let (loss, grad) = mse_and_grad(&pred, target);
            sums[n_models - 1] += loss;
            let grads = model.mlp.backward(&tape, &grad)?;
            let mut adam = model.adam.clone();
            adam.step(&mut model.mlp, &grads);
            model.adam = adam;
        }
    }
    Ok(sums.iter().map(|s| s / count.max(1) as f64).collect())
}

/// MSE pretraining for `epochs` epochs; returns per-epoch mean MSE curves,
/// one row per epoch.
pub fn pretrain(
    models: &mut ModelSet,
    dataset: &Dataset,
    epochs: usize,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    let mut curves = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mses = mse_epoch(models, dataset)?;
        log::info!(
            "pretrain epoch {}: mean MSE {:.5}",
            epoch + 1,
            mses.iter().sum::<f64>() / mses.len() as f64
        );
        curves.push(mses);
    }
    Ok(curves)
}

pub struct HsgdEpochOutput {
    pub stats: EpochStats,
}

/// One hybrid epoch: per training day, a coordinated forward pass through
/// dispatch and evaluation, the coordinated backward pass through both
/// solution maps, the epsilon-weighted prediction-error gradient, and one
/// Adam step per model. Days whose dispatch fails are skipped and counted.
pub fn hsgd_epoch(
    ctx: &RunContext,
    models: &mut ModelSet,
    dataset: &Dataset,
    epoch: usize,
    warm: &mut [DayWarm],
) -> Result<HsgdEpochOutput, PipelineError> {
    let epsilon = ctx.config.epsilon;
    let n_models = models.model_count();
    let mut mse_sums = vec![0.0; n_models];
    let mut reg_loss_sum = 0.0;
    let mut loss_kw_sum = 0.0;
    let mut instances = 0usize;
    let mut skipped = 0usize;
    let mut clamp_events = 0usize;
    let mut v_series: Vec<Vec<f64>> = Vec::new();
    let total = dataset.train().len();

    for (day_idx, rec) in dataset.train().iter().enumerate() {
        let inputs = DayInputs::from_record(rec);
        // first touch of a day: adjacent days look alike hour by hour, so
        // seed from the previous day's embedding iterates
        if day_idx > 0
            && warm[day_idx].dec.iter().all(|w| w.is_none())
            && warm[day_idx - 1].dec.iter().any(|w| w.is_some())
        {
            warm[day_idx] = DayWarm {
                dec: warm[day_idx - 1].dec.clone(),
                eval: warm[day_idx - 1].eval.clone(),
            };
        }
        let day = match run_day(ctx, models, &inputs, true, Some(&mut warm[day_idx])) {
            Ok(day) => day,
            Err(DayFailure::Dispatch { t, status }) => {
                log::warn!("epoch {epoch}: day {day_idx} skipped (dispatch t={t} {status:?})");
                skipped += 1;
                continue;
            }
            Err(DayFailure::Evaluation { t, status }) => {
                log::warn!("epoch {epoch}: day {day_idx} skipped (evaluation t={t} {status:?})");
                skipped += 1;
                continue;
            }
            Err(DayFailure::Error(e)) => return Err(e),
        };
        clamp_events += day.clamp_events;
        reg_loss_sum += day.reg_loss_pu;
        for o in &day.per_t {
            loss_kw_sum += o.loss_kw;
            v_series.push(o.v.clone());
            instances += 1;
        }
        let (pv_targets, load_target) = normalized_targets(models, &inputs);
        // hybrid gradient: regulation part plus epsilon * mse part
        for site in 0..models.pv.len() {
            let model = &mut models.pv[site];
            let (_, mse_grad) = {
                let (loss, grad) = mse_and_grad(&day.forward.pv_norm[site], &pv_targets[site]);
                mse_sums[site] += loss;
                (loss, grad)
            };
            let mse_grads = model.mlp.backward(&day.forward.pv_tapes[site], &mse_grad)?;
            let mut total_grad = day.pv_grads[site].clone();
            total_grad.add_scaled(&mse_grads, epsilon);
            let mut adam = model.adam.clone();
            adam.step(&mut model.mlp, &total_grad);
            model.adam = adam;
        }
        if let (Some(model), Some(target), Some(reg_grad), Some(norm), Some(tape)) = (
            models.load.as_mut(),
            load_target.as_ref(),
            day.load_grad.as_ref(),
            day.forward.load_norm.as_ref(),
            day.forward.load_tape.as_ref(),
        ) {
            let (loss, mse_grad) = mse_and_grad(norm, target);
            mse_sums[n_models - 1] += loss;
            let mse_grads = model.mlp.backward(tape, &mse_grad)?;
            let mut total_grad = reg_grad.clone();
            total_grad.add_scaled(&mse_grads, epsilon);
            let mut adam = model.adam.clone();
            adam.step(&mut model.mlp, &total_grad);
            model.adam = adam;
        }
    }

    if (skipped as f64) > ctx.config.skip_budget * total as f64 {
        return Err(PipelineError::SolverBudget { skipped, total });
    }
    let days_used = (total - skipped).max(1) as f64;
    let stats = EpochStats {
        epoch,
        mean_mse: mse_sums.iter().map(|s| s / days_used).collect(),
        mean_reg_loss_pu: reg_loss_sum / days_used,
        mean_loss_kw: loss_kw_sum / instances.max(1) as f64,
        violation_rate: violation_rate(&v_series, ctx.net.v_min2(), ctx.net.v_max2(), 1e-4),
        days_skipped: skipped,
        clamp_events,
    };
    log::info!(
        "hsgd epoch {}: reg loss {:.6} p.u., mean loss {:.2} kW, violations {:.2}%, skipped {}",
        epoch + 1,
        stats.mean_reg_loss_pu,
        stats.mean_loss_kw,
        stats.violation_rate * 100.0,
        skipped
    );
    Ok(HsgdEpochOutput { stats })
}

/// Hybrid training over the configured number of epochs.
pub fn train_hsgd(
    ctx: &RunContext,
    models: &mut ModelSet,
    dataset: &Dataset,
) -> Result<Vec<EpochStats>, PipelineError> {
    let horizon = forecast::dataset::HOURS;
    let mut warm: Vec<DayWarm> = (0..dataset.train().len())
        .map(|_| DayWarm::new(horizon))
        .collect();
    let mut stats = Vec::with_capacity(ctx.config.train_epochs);
    for epoch in 0..ctx.config.train_epochs {
        let out = hsgd_epoch(ctx, models, dataset, epoch, &mut warm)?;
        stats.push(out.stats);
    }
    Ok(stats)
}

/// The plain-prediction baseline: the same number of additional epochs as
/// the hybrid run, but with prediction-error gradients only.
pub fn train_mse_baseline(
    ctx: &RunContext,
    models: &mut ModelSet,
    dataset: &Dataset,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    pretrain(models, dataset, ctx.config.train_epochs)
}

/// Gradients of the hybrid loss for one day without applying them: the
/// regulation part, the mse part, and the epsilon-weighted combination.
/// Used by additivity and dominance checks.
pub struct HybridParts {
    pub reg: Vec<Gradients>,
    pub mse: Vec<Gradients>,
    pub combined: Vec<Gradients>,
}

pub fn hybrid_gradients(
    ctx: &RunContext,
    models: &ModelSet,
    inputs: &DayInputs,
    epsilon: f64,
) -> Result<HybridParts, DayFailure> {
    let day = run_day(ctx, models, inputs, true, None)?;
    let (pv_targets, load_target) = normalized_targets(models, inputs);
    let mut reg = Vec::new();
    let mut mse = Vec::new();
    let mut combined = Vec::new();
    for site in 0..models.pv.len() {
        let model = &models.pv[site];
        let (_, grad) = mse_and_grad(&day.forward.pv_norm[site], &pv_targets[site]);
        let mse_g = model
            .mlp
            .backward(&day.forward.pv_tapes[site], &grad)
            .map_err(PipelineError::from)?;
        let mut c = day.pv_grads[site].clone();
        c.add_scaled(&mse_g, epsilon);
        reg.push(day.pv_grads[site].clone());
        mse.push(mse_g);
        combined.push(c);
    }
    if let (Some(model), Some(target), Some(reg_g), Some(norm), Some(tape)) = (
        models.load.as_ref(),
        load_target.as_ref(),
        day.load_grad.as_ref(),
        day.forward.load_norm.as_ref(),
        day.forward.load_tape.as_ref(),
    ) {
        let (_, grad) = mse_and_grad(norm, target);
        let mse_g = model.mlp.backward(tape, &grad).map_err(PipelineError::from)?;
        let mut c = reg_g.clone();
        c.add_scaled(&mse_g, epsilon);
        reg.push(reg_g.clone());
        mse.push(mse_g);
        combined.push(c);
    }
    Ok(HybridParts { reg, mse, combined })
}
