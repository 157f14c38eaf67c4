//! Small end-to-end fixture: a three-bus feeder, one PV predictor with a
//! [2, 4, 1] network, one SVC, one timestep. Small enough to finite-
//! difference the entire predict -> dispatch -> evaluate chain against the
//! analytic gradient.

use forecast::{AdamState, Mlp, Normalizer, PredictionModel};
use gridflow::three_bus_file;

use crate::chain::{run_day, DayInputs, ModelSet};
use crate::config::TrainConfig;
use crate::context::RunContext;
use crate::{rng_for, PipelineError};

pub struct ToyChain {
    pub ctx: RunContext,
    pub inputs: DayInputs,
}

/// Builds the fixture. The operating point is chosen interior: loads around
/// a quarter of feeder capability, PV mid-range, SVC bounds loose, so the
/// solution map stays smooth under parameter wiggles.
pub fn build_toy(tolerance: f64) -> Result<ToyChain, PipelineError> {
    let file = three_bus_file();
    let mut config = TrainConfig {
        scenario: gridflow::Scenario::Economic,
        solver_tolerance: tolerance,
        solver_max_iters: 400_000,
        hidden: vec![4],
        ..TrainConfig::default()
    };
    config.lambda = 1.0;
    let ctx = RunContext::new(&file, &config)?;
    let inputs = DayInputs {
        pv_features: vec![vec![0.6, 0.3]],
        load_features: None,
        truth_pv_kw: vec![vec![140.0]],
        truth_load_sys_kw: vec![240.0],
        horizon: 1,
    };
    Ok(ToyChain { ctx, inputs })
}

/// A fresh [2, 4, 1] PV model whose output sits mid-range (biased so the
/// clamp stays inactive and gradients flow).
pub fn toy_model(seed: u64) -> ModelSet {
    let mut mlp = Mlp::new_seeded(&[2, 4, 1], &mut rng_for(seed, "toy-pv"));
    let last = mlp.biases.len() - 1;
    mlp.biases[last][0] = 0.45;
    let normalizer = Normalizer {
        feat_min: vec![0.0, 0.0],
        feat_max: vec![1.0, 1.0],
        target_scale: 300.0,
    };
    let adam = AdamState::new(&mlp, 3e-4, 0.0);
    ModelSet {
        pv: vec![PredictionModel {
            kind: forecast::model::SeriesKind::Pv,
            site: Some(0),
            mlp,
            normalizer,
            adam,
        }],
        load: None,
    }
}

/// Regulation loss of the toy chain for the current parameters.
pub fn toy_loss(toy: &ToyChain, models: &ModelSet) -> Result<f64, PipelineError> {
    let day = run_day(&toy.ctx, models, &toy.inputs, false, None)
        .map_err(|f| PipelineError::Config(format!("toy chain failed: {f:?}")))?;
    Ok(day.reg_loss_pu)
}

pub struct FdCheck {
    pub draw: usize,
    pub max_abs_fd: f64,
    pub rel_err: f64,
}

/// Central-difference check of d(regulation loss)/d(theta) through the
/// whole chain, one model draw per case. Returns the vector-level relative
/// error per draw.
pub fn full_chain_fd_checks(
    seed: u64,
    draws: usize,
    step: f64,
    tolerance: f64,
) -> Result<Vec<FdCheck>, PipelineError> {
    let toy = build_toy(tolerance)?;
    let mut out = Vec::with_capacity(draws);
    for draw in 0..draws {
        let models = toy_model(seed.wrapping_add(draw as u64));
        let day = run_day(&toy.ctx, &models, &toy.inputs, true, None)
            .map_err(|f| PipelineError::Config(format!("toy chain failed: {f:?}")))?;
        let analytic = &day.pv_grads[0];

        let mut max_diff = 0.0f64;
        let mut max_fd = 0.0f64;
        let mut wiggle = |layer: usize, idx: usize, bias: bool, an: f64| -> Result<(), PipelineError> {
            let mut mp = models.pv[0].clone();
            let mut mm = models.pv[0].clone();
            if bias {
                mp.mlp.biases[layer][idx] += step;
                mm.mlp.biases[layer][idx] -= step;
            } else {
                mp.mlp.weights[layer][idx] += step;
                mm.mlp.weights[layer][idx] -= step;
            }
            let set_p = ModelSet {
                pv: vec![mp],
                load: None,
            };
            let set_m = ModelSet {
                pv: vec![mm],
                load: None,
            };
            let fd = (toy_loss(&toy, &set_p)? - toy_loss(&toy, &set_m)?) / (2.0 * step);
            max_diff = max_diff.max((an - fd).abs());
            max_fd = max_fd.max(fd.abs());
            Ok(())
        };
        for layer in 0..models.pv[0].mlp.layer_count() {
            for idx in 0..models.pv[0].mlp.weights[layer].len() {
                wiggle(layer, idx, false, analytic.weights[layer][idx])?;
            }
            for idx in 0..models.pv[0].mlp.biases[layer].len() {
                wiggle(layer, idx, true, analytic.biases[layer][idx])?;
            }
        }
        out.push(FdCheck {
            draw,
            max_abs_fd: max_fd,
            rel_err: max_diff / max_fd.max(1e-12),
        });
    }
    Ok(out)
}
