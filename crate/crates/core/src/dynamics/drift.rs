use std::io::Write;

use serde::Serialize;

use super::sim::{FlowRun, RunSpec};
use crate::error::{Error, Result};
use crate::ratpoly::{Polynomial, VarKind, VariableSpace};

/// How velocities are estimated when laws are evaluated on a run.
pub const VELOCITY_CONVENTION: &str = "backward_difference";

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub law_id: String,
    pub values: Vec<f64>,
    /// `max_k |h_k − h_0|`.
    pub max_abs_drift: f64,
    /// `max_abs_drift / |h_0|`, or the absolute drift when `h_0 = 0`.
    pub relative_drift: f64,
    pub velocity: &'static str,
}

fn uses(law: &Polynomial, kinds: &[VarKind]) -> bool {
    let space = law.space();
    law.support().iter().any(|&i| kinds.contains(&space.kind(i)))
}

/// Point of `space` at time `t` with parameters `theta` and velocity
/// `thetadot`; a surrogate coordinate is set to `exp(τt)`.
pub fn law_point(space: &VariableSpace, t: f64, theta: &[f64], thetadot: &[f64], tau: Option<f64>) -> Vec<f64> {
    let p0 = space.param_range().start;
    let v0 = space.velocity_range().map_or(0, |r| r.start);
    (0..space.len())
        .map(|i| match space.kind(i) {
            VarKind::Time => t,
            VarKind::TimeSurrogate => (tau.unwrap_or(0.0) * t).exp(),
            VarKind::Parameter => theta[i - p0],
            VarKind::Velocity => thetadot[i - v0],
        })
        .collect()
}

/// Evaluates each law along the run.
pub fn evaluate_drift(run: &FlowRun, laws: &[(String, Polynomial)]) -> Result<Vec<DriftReport>> {
    let tau = run.spec.tau();
    laws.iter()
        .map(|(id, law)| {
            let space = law.space();
            if space.layers() != run.arch.layers() {
                return Err(Error::SpaceMismatch);
            }
            if tau.is_none() && uses(law, &[VarKind::Velocity, VarKind::TimeSurrogate]) {
                return Err(Error::LawRequiresMomentum);
            }
            let values: Vec<f64> = (0..run.trajectory.len())
                .map(|k| {
                    let p = law_point(space, run.time(k), &run.trajectory[k], &run.velocity(k), tau);
                    law.eval_f64(&p)
                })
                .collect();
            let h0 = values[0];
            let max_abs_drift = values.iter().map(|v| (v - h0).abs()).fold(0.0, f64::max);
            let relative_drift = if h0 == 0.0 {
                max_abs_drift
            } else {
                max_abs_drift / h0.abs()
            };
            Ok(DriftReport {
                law_id: id.clone(),
                values,
                max_abs_drift,
                relative_drift,
                velocity: VELOCITY_CONVENTION,
            })
        })
        .collect()
}

/// Writes `step,t,loss,law_id,value,drift`, one row per step and law.
pub fn write_drift_csv<W: Write>(out: W, run: &FlowRun, reports: &[DriftReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["step", "t", "loss", "law_id", "value", "drift"])
        .map_err(io)?;
    for k in 0..run.trajectory.len() {
        for r in reports {
            w.write_record([
                k.to_string(),
                run.time(k).to_string(),
                run.losses[k].to_string(),
                r.law_id.clone(),
                r.values[k].to_string(),
                (r.values[k] - r.values[0]).to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub spec: RunSpec,
    pub alpha: f64,
    pub beta: f64,
    pub tau: Option<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub velocity: &'static str,
    pub laws: Vec<LawSummary>,
    pub version: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct LawSummary {
    pub law_id: String,
    pub max_abs_drift: f64,
    pub relative_drift: f64,
}

impl RunManifest {
    pub fn new(run: &FlowRun, reports: &[DriftReport]) -> Self {
        Self {
            spec: run.spec.clone(),
            alpha: run.spec.alpha(),
            beta: run.spec.beta(),
            tau: run.spec.tau(),
            initial_loss: run.losses[0],
            final_loss: *run.losses.last().expect("nonempty"),
            velocity: VELOCITY_CONVENTION,
            laws: reports
                .iter()
                .map(|r| LawSummary {
                    law_id: r.law_id.clone(),
                    max_abs_drift: r.max_abs_drift,
                    relative_drift: r.relative_drift,
                })
                .collect(),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sim::{simulate_flow, Geometry};
    use crate::model::Architecture;
    use crate::ratpoly::{ExactScalar, TimeCoordinate};

    fn run(mu: f64) -> FlowRun {
        simulate_flow(&RunSpec {
            architecture: Architecture::two_layer(1, 1, 1).to_config(),
            geometry: Geometry::Euclidean,
            mu,
            nu: 1.0,
            delta: 1e-2,
            steps: 5,
            samples: 4,
            data_seed: 0,
            init_seed: 0,
            init_velocity: 0.0,
        })
        .unwrap()
    }

    #[test]
    fn constant_law_has_zero_drift_and_csv_shape() {
        let r = run(0.0);
        let space = Architecture::two_layer(1, 1, 1).parameter_space().unwrap();
        let c = Polynomial::constant(&space, ExactScalar::ratio(7, 3));
        let reports = evaluate_drift(&r, &[("c".into(), c)]).unwrap();
        assert_eq!(reports[0].max_abs_drift, 0.0);
        let mut buf = Vec::new();
        write_drift_csv(&mut buf, &r, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,t,loss,law_id,value,drift\n"));
        assert_eq!(text.lines().count(), 1 + 6);
    }

    #[test]
    fn velocity_law_needs_momentum() {
        let arch = Architecture::two_layer(1, 1, 1);
        let space = VariableSpace::lifted(arch.layers(), TimeCoordinate::Surrogate).unwrap();
        let dv = Polynomial::var(&space, space.velocity(0).unwrap());
        assert!(matches!(
            evaluate_drift(&run(0.0), &[("v".into(), dv.clone())]),
            Err(Error::LawRequiresMomentum)
        ));
        assert!(evaluate_drift(&run(1.0), &[("v".into(), dv)]).is_ok());
    }
}
