//! Floating-point simulation of the discretized flows, drift of
//! conservation laws along them, and continuous-time reference integrators.

pub mod data;
pub mod drift;
pub mod network;
pub mod oracle;
pub mod sim;

pub use data::{make_synthetic_dataset, Dataset};
pub use drift::{evaluate_drift, law_point, write_drift_csv, DriftReport, RunManifest};
pub use oracle::{free_flow_check, integrate_dopri5, integrate_rk4, FreeFlowCheck, Oracle, OracleFlow, Trajectory};
pub use sim::{
    initial_parameters, initial_velocity, natural_gradient_step, simulate_between, simulate_flow, simulate_from,
    FlowRun, Geometry, RunSpec,
};
