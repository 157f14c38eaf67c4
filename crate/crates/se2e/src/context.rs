//! Shared run state: the network under a scenario, compiled problem
//! structures with cached factorizations, and solve helpers.
//!
//! Both program families keep one structure for every timestep (only `b`
//! varies), so each gets a single [`PreparedProblem`] reused across the
//! entire run.

use conic::{ConicProblem, ConicSolution, PreparedProblem, SolveStatus, SolverSettings, WarmStart};
use gridflow::{
    build_decision_problem, build_evaluation_problem, DeviceSet, Injections, Network, NetworkFile,
    ParamMap, ParamValues,
};

use crate::config::TrainConfig;
use crate::PipelineError;

pub struct CompiledFamily {
    pub template: ConicProblem,
    pub map: ParamMap,
    pub prepared: PreparedProblem,
}

impl CompiledFamily {
    fn new(template: ConicProblem, map: ParamMap, settings: &SolverSettings) -> Result<Self, PipelineError> {
        let prepared = PreparedProblem::new(&template.a, &template.cones, settings)?;
        Ok(Self {
            template,
            map,
            prepared,
        })
    }

    pub fn solve(
        &self,
        vals: &ParamValues,
        settings: &SolverSettings,
        warm: Option<&WarmStart>,
    ) -> Result<(ConicSolution, Vec<f64>, WarmStart), PipelineError> {
        let b = self.map.assemble_b(vals)?;
        let (solution, next_warm) = self
            .prepared
            .solve_instance(&b, &self.template.c, settings, warm)?;
        Ok((solution, b, next_warm))
    }

    /// Problem instance sharing the template structure with a fresh `b`,
    /// for the derivative machinery.
    pub fn instance(&self, b: Vec<f64>) -> ConicProblem {
        ConicProblem {
            a: self.template.a.clone(),
            b,
            c: self.template.c.clone(),
            cones: self.template.cones.clone(),
        }
    }
}

pub struct RunContext {
    pub net: Network,
    pub dev: DeviceSet,
    /// Static per-bus share of the system load.
    pub shares: Vec<f64>,
    pub decision: CompiledFamily,
    pub evaluation: CompiledFamily,
    pub settings: SolverSettings,
    pub config: TrainConfig,
}

impl RunContext {
    pub fn new(file: &NetworkFile, config: &TrainConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let net = Network::from_file(file, config.scenario)?;
        let dev = DeviceSet::from_file(&file.devices, &net)?;
        let shares = net.load_shares();
        let mut settings = SolverSettings::default();
        settings.tolerance = config.solver_tolerance;
        settings.max_iters = config.solver_max_iters;

        let zeros = Injections::zeros(dev.pv.len(), net.bus_count(), 1);
        let (dp, dmap) = build_decision_problem(&net, &dev, &zeros, 0)?;
        let decision = CompiledFamily::new(dp, dmap, &settings)?;
        let zero_q = vec![0.0; dev.svc.len()];
        let (ep, emap) = build_evaluation_problem(&net, &dev, &zero_q, &zeros, config.lambda, 0)?;
        let evaluation = CompiledFamily::new(ep, emap, &settings)?;
        Ok(Self {
            net,
            dev,
            shares,
            decision,
            evaluation,
            settings,
            config: config.clone(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.dev.pv.len()
    }

    pub fn n_svc(&self) -> usize {
        self.dev.svc.len()
    }

    /// Clamps raw SVC setpoints to device bounds (numerical guard before
    /// the evaluator consumes them).
    pub fn clamp_setpoints(&self, q_kvar: &mut [f64]) {
        for (q, &(_, lo, hi)) in q_kvar.iter_mut().zip(&self.dev.svc) {
            *q = q.clamp(lo, hi);
        }
    }

    pub fn expect_optimal(solution: &ConicSolution) -> Result<(), PipelineError> {
        if solution.status != SolveStatus::Optimal {
            return Err(PipelineError::Grid(gridflow::GridError::NotOptimal(
                solution.status,
            )));
        }
        Ok(())
    }
}
