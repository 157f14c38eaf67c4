//! One day through the stack: predict, dispatch, evaluate, and pull the
//! regulation-loss gradient back into every predictor.
//!
//! Forward, per timestep: assemble the dispatch right-hand side from the
//! clamped predictions, solve it, fix its setpoints into the evaluation
//! program under ground truth, and read off the regulation loss (losses plus
//! weighted violations). Backward, per timestep: the evaluator's objective
//! gradient is its own cost vector, so pull it through the evaluation
//! program's solution map to the setpoint rows of `b`, inject that into the
//! dispatch program's setpoint variables, pull through the dispatch solution
//! map to the prediction rows, and accumulate per-model output gradients
//! through the clamp and capacity scaling. Timesteps are independent and run
//! in parallel; accumulation is an ordered reduction so runs reproduce
//! bit-for-bit.

use rayon::prelude::*;

use conic::{SolutionGradients, SolveStatus, WarmStart};
use forecast::{
    clamp_prediction, derive_reactive_kvar, load_features, pv_features, DayRecord, Dataset,
    Gradients, Mlp, Normalizer, PredictionModel, Tape,
};
use gridflow::ParamValues;

use crate::context::RunContext;
use crate::{rng_for, PipelineError};

pub struct ModelSet {
    pub pv: Vec<PredictionModel>,
    pub load: Option<PredictionModel>,
}

impl ModelSet {
    /// Fresh models with normalizers fitted on the training split: feature
    /// ranges from min-max, PV target scale = site capacity, load target
    /// scale = training peak demand.
    pub fn new(dataset: &Dataset, config: &crate::TrainConfig) -> Result<Self, PipelineError> {
        let n_sites = dataset.n_sites();
        let hours = forecast::dataset::HOURS;
        let mut pv = Vec::with_capacity(n_sites);
        for site in 0..n_sites {
            let rows: Vec<Vec<f64>> = dataset
                .train()
                .iter()
                .map(|r| pv_features(r, site))
                .collect();
            let normalizer = Normalizer::fit(&rows, dataset.provenance.pv_caps_kw[site])?;
            let mut dims = vec![rows[0].len()];
            dims.extend_from_slice(&config.hidden);
            dims.push(hours);
            let mlp = Mlp::new_seeded(&dims, &mut rng_for(config.seed, &format!("pv{site}")));
            let adam = forecast::AdamState::new(&mlp, config.learning_rate, config.decay);
            pv.push(PredictionModel {
                kind: forecast::model::SeriesKind::Pv,
                site: Some(site),
                mlp,
                normalizer,
                adam,
            });
        }
        let rows: Vec<Vec<f64>> = dataset.train().iter().map(load_features).collect();
        let peak = dataset
            .train()
            .iter()
            .flat_map(|r| r.load.target_kw.iter())
            .cloned()
            .fold(0.0f64, f64::max);
        let normalizer = Normalizer::fit(&rows, peak)?;
        let mut dims = vec![rows[0].len()];
        dims.extend_from_slice(&config.hidden);
        dims.push(hours);
        let mlp = Mlp::new_seeded(&dims, &mut rng_for(config.seed, "load"));
        let adam = forecast::AdamState::new(&mlp, config.learning_rate, config.decay);
        Ok(Self {
            pv,
            load: Some(PredictionModel {
                kind: forecast::model::SeriesKind::Load,
                site: None,
                mlp,
                normalizer,
                adam,
            }),
        })
    }

    pub fn model_count(&self) -> usize {
        self.pv.len() + usize::from(self.load.is_some())
    }

    pub fn save_all(&self, dir: &std::path::Path) -> Result<(), PipelineError> {
        for (i, m) in self.pv.iter().enumerate() {
            m.save(&dir.join(format!("pv{}.json", i + 1)))?;
        }
        if let Some(m) = &self.load {
            m.save(&dir.join("load.json"))?;
        }
        Ok(())
    }

    pub fn load_all(dir: &std::path::Path, n_sites: usize) -> Result<Self, PipelineError> {
        let mut pv = Vec::with_capacity(n_sites);
        for i in 0..n_sites {
            let path = dir.join(format!("pv{}.json", i + 1));
            if !path.exists() {
                return Err(PipelineError::MissingArtifact(path.display().to_string()));
            }
            pv.push(PredictionModel::load(&path)?);
        }
        let load_path = dir.join("load.json");
        if !load_path.exists() {
            return Err(PipelineError::MissingArtifact(load_path.display().to_string()));
        }
        Ok(Self {
            pv,
            load: Some(PredictionModel::load(&load_path)?),
        })
    }
}

/// Inputs for one day, decoupled from dataset records so small fixtures can
/// drive the same chain.
#[derive(Debug, Clone)]
pub struct DayInputs {
    pub pv_features: Vec<Vec<f64>>,
    pub load_features: Option<Vec<f64>>,
    /// Ground truth, kW: per site and per hour.
    pub truth_pv_kw: Vec<Vec<f64>>,
    pub truth_load_sys_kw: Vec<f64>,
    pub horizon: usize,
}

impl DayInputs {
    pub fn from_record(rec: &DayRecord) -> Self {
        let n_sites = rec.pv.len();
        Self {
            pv_features: (0..n_sites).map(|s| pv_features(rec, s)).collect(),
            load_features: Some(load_features(rec)),
            truth_pv_kw: rec.pv.iter().map(|s| s.target_kw.clone()).collect(),
            truth_load_sys_kw: rec.load.target_kw.clone(),
            horizon: forecast::dataset::HOURS,
        }
    }
}

/// Model outputs for a day, with everything backward needs.
pub struct DayForward {
    pub pv_norm: Vec<Vec<f64>>,
    pub pv_tapes: Vec<Tape>,
    pub pv_kw: Vec<Vec<f64>>,
    pub pv_inside: Vec<Vec<bool>>,
    pub load_norm: Option<Vec<f64>>,
    pub load_tape: Option<Tape>,
    pub load_sys_kw: Vec<f64>,
    pub load_inside: Vec<bool>,
    pub clamp_events: usize,
}

pub fn forward_models(
    models: &ModelSet,
    inputs: &DayInputs,
) -> Result<DayForward, PipelineError> {
    let mut pv_norm = Vec::new();
    let mut pv_tapes = Vec::new();
    let mut pv_kw = Vec::new();
    let mut pv_inside = Vec::new();
    let mut clamp_events = 0;
    for (model, feats) in models.pv.iter().zip(&inputs.pv_features) {
        let (norm, tape) = model.predict_normalized(feats)?;
        let raw_kw: Vec<f64> = norm
            .iter()
            .map(|&v| model.normalizer.denormalize_target(v))
            .collect();
        let cap = model.normalizer.target_scale;
        let (clamped, events) = clamp_prediction(&raw_kw, cap);
        clamp_events += events;
        pv_inside.push(raw_kw.iter().map(|&p| p > 0.0 && p < cap).collect());
        pv_norm.push(norm);
        pv_tapes.push(tape);
        pv_kw.push(clamped);
    }
    let (load_norm, load_tape, load_sys_kw, load_inside) = match (&models.load, &inputs.load_features)
    {
        (Some(model), Some(feats)) => {
            let (norm, tape) = model.predict_normalized(feats)?;
            let raw_kw: Vec<f64> = norm
                .iter()
                .map(|&v| model.normalizer.denormalize_target(v))
                .collect();
            let cap = model.normalizer.target_scale;
            let (clamped, events) = clamp_prediction(&raw_kw, cap);
            clamp_events += events;
            let inside = raw_kw.iter().map(|&p| p > 0.0 && p < cap).collect();
            (Some(norm), Some(tape), clamped, inside)
        }
        _ => (
            None,
            None,
            inputs.truth_load_sys_kw.clone(),
            vec![false; inputs.horizon],
        ),
    };
    Ok(DayForward {
        pv_norm,
        pv_tapes,
        pv_kw,
        pv_inside,
        load_norm,
        load_tape,
        load_sys_kw,
        load_inside,
        clamp_events,
    })
}

/// Per-timestep record kept for metrics.
#[derive(Debug, Clone)]
pub struct TimestepOutcome {
    pub q_hat_kvar: Vec<f64>,
    pub loss_kw: f64,
    pub penalty_pu2: f64,
    pub reg_loss_pu: f64,
    pub v: Vec<f64>,
    pub dec_iterations: usize,
    pub eval_iterations: usize,
}

pub struct DayOutcomeSummary {
    pub per_t: Vec<TimestepOutcome>,
    pub reg_loss_pu: f64,
    pub clamp_events: usize,
    /// Regulation-loss gradients per PV model and for the load model,
    /// in parameter space (present when gradients were requested).
    pub pv_grads: Vec<Gradients>,
    pub load_grad: Option<Gradients>,
    pub forward: DayForward,
}

pub struct DayWarm {
    pub dec: Vec<Option<WarmStart>>,
    pub eval: Vec<Option<WarmStart>>,
}

impl DayWarm {
    pub fn new(horizon: usize) -> Self {
        Self {
            dec: (0..horizon).map(|_| None).collect(),
            eval: (0..horizon).map(|_| None).collect(),
        }
    }
}

#[derive(Debug)]
pub enum DayFailure {
    Dispatch { t: usize, status: SolveStatus },
    Evaluation { t: usize, status: SolveStatus },
    Error(PipelineError),
}

impl From<PipelineError> for DayFailure {
    fn from(e: PipelineError) -> Self {
        DayFailure::Error(e)
    }
}

fn per_bus_loads(ctx: &RunContext, sys_kw: f64) -> (Vec<f64>, Vec<f64>) {
    let p: Vec<f64> = ctx.shares.iter().map(|s| s * sys_kw).collect();
    let q: Vec<f64> = p.iter().map(|&pk| derive_reactive_kvar(pk)).collect();
    (p, q)
}

struct TimestepWork {
    outcome: TimestepOutcome,
    pv_grad_kw: Vec<f64>,
    load_grad_kw: f64,
}

/// Runs one day through dispatch and evaluation; when `compute_grads` is
/// set, also pulls the regulation-loss gradient back to every model's
/// parameters (without applying it).
pub fn run_day(
    ctx: &RunContext,
    models: &ModelSet,
    inputs: &DayInputs,
    compute_grads: bool,
    warm: Option<&mut DayWarm>,
) -> Result<DayOutcomeSummary, DayFailure> {
    let horizon = inputs.horizon;
    let forward = forward_models(models, inputs)?;

    let mut local_warm;
    let warm = match warm {
        Some(w) => w,
        None => {
            local_warm = DayWarm::new(horizon);
            &mut local_warm
        }
    };

    let base_kw = ctx.net.base_kw();
    let results: Vec<Result<TimestepWork, DayFailure>> = warm
        .dec
        .par_iter_mut()
        .zip(warm.eval.par_iter_mut())
        .enumerate()
        .map(|(t, (warm_dec, warm_eval))| {
            // dispatch under predictions
            let pv_t: Vec<f64> = forward.pv_kw.iter().map(|s| s[t]).collect();
            let (pd_t, qd_t) = per_bus_loads(ctx, forward.load_sys_kw[t]);
            let dec_vals = ParamValues {
                pv_kw: &pv_t,
                load_p_kw: &pd_t,
                load_q_kvar: &qd_t,
                q_reg_kvar: None,
            };
            let (dec_sol, dec_b, new_warm) = ctx
                .decision
                .solve(&dec_vals, &ctx.settings, warm_dec.as_ref())
                .map_err(DayFailure::from)?;
            if dec_sol.status != SolveStatus::Optimal {
                return Err(DayFailure::Dispatch {
                    t,
                    status: dec_sol.status,
                });
            }
            *warm_dec = Some(new_warm);
            let lay = &ctx.decision.map.layout;
            let mut q_hat: Vec<f64> = (0..ctx.n_svc())
                .map(|d| dec_sol.x[lay.q_reg(d).unwrap()] * base_kw)
                .collect();
            ctx.clamp_setpoints(&mut q_hat);

            // evaluation under ground truth
            let truth_pv_t: Vec<f64> = inputs.truth_pv_kw.iter().map(|s| s[t]).collect();
            let (truth_pd_t, truth_qd_t) = per_bus_loads(ctx, inputs.truth_load_sys_kw[t]);
            let eval_vals = ParamValues {
                pv_kw: &truth_pv_t,
                load_p_kw: &truth_pd_t,
                load_q_kvar: &truth_qd_t,
                q_reg_kvar: Some(&q_hat),
            };
            let (eval_sol, eval_b, new_warm) = ctx
                .evaluation
                .solve(&eval_vals, &ctx.settings, warm_eval.as_ref())
                .map_err(DayFailure::from)?;
            if eval_sol.status != SolveStatus::Optimal {
                return Err(DayFailure::Evaluation {
                    t,
                    status: eval_sol.status,
                });
            }
            *warm_eval = Some(new_warm);
            let eval_out = gridflow::extract_outcome(&eval_sol, &ctx.evaluation.map, &ctx.net)
                .map_err(PipelineError::from)?;
            let reg_loss_pu: f64 = ctx
                .evaluation
                .template
                .c
                .iter()
                .zip(&eval_sol.x)
                .map(|(c, x)| c * x)
                .sum();
            let outcome = TimestepOutcome {
                q_hat_kvar: q_hat.clone(),
                loss_kw: eval_out.power_loss_kw,
                penalty_pu2: eval_out.penalty,
                reg_loss_pu,
                v: eval_out.v,
                dec_iterations: dec_sol.iterations,
                eval_iterations: eval_sol.iterations,
            };
            if !compute_grads {
                return Ok(TimestepWork {
                    outcome,
                    pv_grad_kw: vec![0.0; ctx.n_sites()],
                    load_grad_kw: 0.0,
                });
            }

            // Backward: evaluator objective -> setpoints. The gradient of the
            // optimal value in b is exactly -y* (what the solution-map
            // adjoint returns for the cost-vector gradient, cheaper by one
            // factorization); the identity is pinned by a test against the
            // full machinery.
            let db_eval: Vec<f64> = eval_sol.y.iter().map(|v| -v).collect();
            let _ = &eval_b;
            let pulled = ctx
                .evaluation
                .map
                .pull_back(&db_eval, &eval_vals)
                .map_err(PipelineError::from)?;
            // setpoints -> dispatch problem's variables
            let mut dx = vec![0.0; ctx.decision.template.n()];
            for d in 0..ctx.n_svc() {
                dx[lay.q_reg(d).unwrap()] = pulled.d_qreg_kvar[d] * base_kw;
            }
            let dec_problem = ctx.decision.instance(dec_b);
            let dec_grads = SolutionGradients::from_dx(dx, dec_problem.m());
            let dec_vjp = conic::vjp_solution_map(&dec_problem, &dec_sol, &dec_grads)
                .map_err(PipelineError::from)?;
            let pulled = ctx
                .decision
                .map
                .pull_back(&dec_vjp.db, &dec_vals)
                .map_err(PipelineError::from)?;
            let load_grad_kw: f64 = ctx
                .shares
                .iter()
                .enumerate()
                .map(|(bus, share)| {
                    share
                        * (pulled.d_load_p_kw[bus]
                            + derive_reactive_kvar(1.0) * pulled.d_load_q_kvar[bus])
                })
                .sum();
            Ok(TimestepWork {
                outcome,
                pv_grad_kw: pulled.d_pv_kw,
                load_grad_kw,
            })
        })
        .collect();

    // ordered reduction
    let mut per_t = Vec::with_capacity(horizon);
    let mut pv_grad_kw = vec![vec![0.0; horizon]; ctx.n_sites()];
    let mut load_grad_kw = vec![0.0; horizon];
    for (t, res) in results.into_iter().enumerate() {
        let work = res?;
        for (site, g) in work.pv_grad_kw.iter().enumerate() {
            pv_grad_kw[site][t] = *g;
        }
        load_grad_kw[t] = work.load_grad_kw;
        per_t.push(work.outcome);
    }
    let reg_loss_pu: f64 = per_t.iter().map(|o| o.reg_loss_pu).sum();

    // chain into model parameters (one backward per model per day)
    let mut pv_grads = Vec::new();
    let mut load_grad = None;
    if compute_grads {
        for (site, model) in models.pv.iter().enumerate() {
            let scale = model.normalizer.target_scale;
            let grad_norm: Vec<f64> = (0..horizon)
                .map(|t| {
                    if forward.pv_inside[site][t] {
                        pv_grad_kw[site][t] * scale
                    } else {
                        0.0
                    }
                })
                .collect();
            pv_grads.push(
                model
                    .mlp
                    .backward(&forward.pv_tapes[site], &grad_norm)
                    .map_err(PipelineError::from)?,
            );
        }
        if let (Some(model), Some(tape)) = (&models.load, &forward.load_tape) {
            let scale = model.normalizer.target_scale;
            let grad_norm: Vec<f64> = (0..horizon)
                .map(|t| {
                    if forward.load_inside[t] {
                        load_grad_kw[t] * scale
                    } else {
                        0.0
                    }
                })
                .collect();
            load_grad = Some(
                model
                    .mlp
                    .backward(tape, &grad_norm)
                    .map_err(PipelineError::from)?,
            );
        }
    }
    Ok(DayOutcomeSummary {
        per_t,
        reg_loss_pu,
        clamp_events: forward.clamp_events,
        pv_grads,
        load_grad,
        forward,
    })
}

/// Oracle dispatch: setpoints from solving the dispatch problem under the
/// truth, evaluated under the same truth. Model-free, so callers cache it.
pub fn oracle_day(
    ctx: &RunContext,
    inputs: &DayInputs,
    warm: Option<&mut DayWarm>,
) -> Result<Vec<TimestepOutcome>, DayFailure> {
    let horizon = inputs.horizon;
    let mut local_warm;
    let warm = match warm {
        Some(w) => w,
        None => {
            local_warm = DayWarm::new(horizon);
            &mut local_warm
        }
    };
    let base_kw = ctx.net.base_kw();
    let results: Vec<Result<TimestepOutcome, DayFailure>> = warm
        .dec
        .par_iter_mut()
        .zip(warm.eval.par_iter_mut())
        .enumerate()
        .map(|(t, (warm_dec, warm_eval))| {
            let pv_t: Vec<f64> = inputs.truth_pv_kw.iter().map(|s| s[t]).collect();
            let (pd_t, qd_t) = per_bus_loads(ctx, inputs.truth_load_sys_kw[t]);
            let vals = ParamValues {
                pv_kw: &pv_t,
                load_p_kw: &pd_t,
                load_q_kvar: &qd_t,
                q_reg_kvar: None,
            };
            let (dec_sol, _, new_warm) = ctx
                .decision
                .solve(&vals, &ctx.settings, warm_dec.as_ref())
                .map_err(DayFailure::from)?;
            if dec_sol.status != SolveStatus::Optimal {
                return Err(DayFailure::Dispatch {
                    t,
                    status: dec_sol.status,
                });
            }
            *warm_dec = Some(new_warm);
            let lay = &ctx.decision.map.layout;
            let mut q_star: Vec<f64> = (0..ctx.n_svc())
                .map(|d| dec_sol.x[lay.q_reg(d).unwrap()] * base_kw)
                .collect();
            ctx.clamp_setpoints(&mut q_star);
            let eval_vals = ParamValues {
                pv_kw: &pv_t,
                load_p_kw: &pd_t,
                load_q_kvar: &qd_t,
                q_reg_kvar: Some(&q_star),
            };
            let (eval_sol, _, new_warm) = ctx
                .evaluation
                .solve(&eval_vals, &ctx.settings, warm_eval.as_ref())
                .map_err(DayFailure::from)?;
            if eval_sol.status != SolveStatus::Optimal {
                return Err(DayFailure::Evaluation {
                    t,
                    status: eval_sol.status,
                });
            }
            *warm_eval = Some(new_warm);
            let out = gridflow::extract_outcome(&eval_sol, &ctx.evaluation.map, &ctx.net)
                .map_err(PipelineError::from)?;
            let reg_loss_pu: f64 = ctx
                .evaluation
                .template
                .c
                .iter()
                .zip(&eval_sol.x)
                .map(|(c, x)| c * x)
                .sum();
            Ok(TimestepOutcome {
                q_hat_kvar: q_star,
                loss_kw: out.power_loss_kw,
                penalty_pu2: out.penalty,
                reg_loss_pu,
                v: out.v,
                dec_iterations: dec_sol.iterations,
                eval_iterations: eval_sol.iterations,
            })
        })
        .collect();
    results.into_iter().collect()
}
