//! Radial distribution feeder modeling and volt/var SOCP compilation.
//!
//! [`Network`] holds a per-unit radial feeder; [`builder`] compiles the
//! var-dispatch problem (minimize line losses subject to the branch-flow
//! relaxation and operating limits), the decision-evaluating problem (an
//! epigraph of the losses plus voltage-violation penalties under fixed var
//! setpoints), and a multi-objective variant with inverter-based DG var
//! support. [`sweep`] provides an independent backward/forward-sweep power
//! flow used for cross-checks.

pub mod builder;
pub mod metrics;
pub mod network;
pub mod outcome;
pub mod sweep;

pub use builder::{
    build_decision_problem, build_evaluation_problem, build_multiobjective_problem, ParamKey,
    ParamMap, ParamValues, RowLayout, VarLayout,
};
pub use metrics::{regret, violation_rate};
pub use network::{
    ieee33_file, three_bus_file, Branch, Bus, DeviceSet, DgUnit, GridError, Injections, Network,
    NetworkFile, PvSite, Scenario, SvcUnit,
};
pub use outcome::{extract_outcome, RegulationOutcome};
