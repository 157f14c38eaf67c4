//! Unpacking solver output into engineering quantities.

use conic::{ConicSolution, SolveStatus};

use crate::builder::ParamMap;
use crate::network::{GridError, Network};

/// One timestep's regulation result in physical units.
#[derive(Debug, Clone)]
pub struct RegulationOutcome {
    /// SVC setpoints, kvar (empty when setpoints were parameters).
    pub q_reg_kvar: Vec<f64>,
    /// DG var outputs, kvar (multi-objective problems only).
    pub q_dg_kvar: Vec<f64>,
    /// Total line losses, kW.
    pub power_loss_kw: f64,
    /// Voltage-violation magnitude, p.u.^2 summed over buses.
    pub penalty: f64,
    /// Squared bus voltages, p.u.
    pub v: Vec<f64>,
    pub l: Vec<f64>,
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    /// max over branches of `l v_from - P^2 - Q^2` (near zero when the SOC
    /// relaxation is tight).
    pub relaxation_gap: f64,
}

pub fn extract_outcome(
    solution: &ConicSolution,
    map: &ParamMap,
    net: &Network,
) -> Result<RegulationOutcome, GridError> {
    if solution.status != SolveStatus::Optimal {
        return Err(GridError::NotOptimal(solution.status));
    }
    let lay = &map.layout;
    let base = net.base_kw();
    let x = &solution.x;
    let v: Vec<f64> = (0..lay.nb).map(|k| x[lay.v(k)]).collect();
    let l: Vec<f64> = (0..lay.nbr).map(|k| x[lay.l(k)]).collect();
    let p_flow: Vec<f64> = (0..lay.nbr).map(|k| x[lay.p(k)]).collect();
    let q_flow: Vec<f64> = (0..lay.nbr).map(|k| x[lay.q(k)]).collect();
    let q_reg_kvar: Vec<f64> = (0..lay.nsvc)
        .filter_map(|d| lay.q_reg(d))
        .map(|i| x[i] * base)
        .collect();
    let q_dg_kvar: Vec<f64> = (0..lay.ndg)
        .filter_map(|d| lay.q_dg(d))
        .map(|i| x[i] * base)
        .collect();
    let power_loss_kw: f64 = net
        .branches
        .iter()
        .zip(&l)
        .map(|(br, lk)| br.r_pu * lk)
        .sum::<f64>()
        * base;
    let vmin2 = net.v_min2();
    let vmax2 = net.v_max2();
    let penalty: f64 = (1..lay.nb)
        .map(|k| (v[k] - vmax2).max(0.0) + (vmin2 - v[k]).max(0.0))
        .sum();
    let relaxation_gap = net
        .branches
        .iter()
        .enumerate()
        .map(|(k, br)| l[k] * v[br.from] - p_flow[k] * p_flow[k] - q_flow[k] * q_flow[k])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RegulationOutcome {
        q_reg_kvar,
        q_dg_kvar,
        power_loss_kw,
        penalty,
        v,
        l,
        p_flow,
        q_flow,
        relaxation_gap,
    })
}
