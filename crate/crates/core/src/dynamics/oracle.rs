//! Continuous-time flows integrated with adaptive Dormand–Prince or
//! classical Runge–Kutta, used as references for the discrete runs.

use nalgebra::DVector;
use ode_solvers::dop_shared::OutputType;
use ode_solvers::{Dopri5, Rk4, System};
use serde::Serialize;

use super::data::Dataset;
use super::network::{gram, loss_gradient, pseudo_inverse};
use super::sim::Geometry;
use crate::error::{Error, Result};
use crate::lift::{free_flow_invariant_pair, FreeFlow};
use crate::model::Architecture;

/// The continuous flow being integrated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum OracleFlow {
    /// `νθ̇ = −M(νθ)∇E`.
    FirstOrder { nu: f64 },
    /// `μθ̈ + νθ̇ = −M(μθ̇ + νθ)∇E`.
    SecondOrder { mu: f64, nu: f64 },
    /// `θ̈ + (3/t)θ̇ = −∇E` (Euclidean only).
    Nesterov,
}

impl OracleFlow {
    pub fn is_second_order(self) -> bool {
        !matches!(self, Self::FirstOrder { .. })
    }
}

#[derive(Clone)]
pub struct Oracle<'a> {
    pub arch: &'a Architecture,
    pub geometry: Geometry,
    pub flow: OracleFlow,
    pub data: &'a Dataset,
    mirrored: Vec<usize>,
}

impl<'a> Oracle<'a> {
    pub fn new(arch: &'a Architecture, geometry: Geometry, flow: OracleFlow, data: &'a Dataset) -> Result<Self> {
        match flow {
            OracleFlow::FirstOrder { nu } if nu <= 0.0 => {
                return Err(Error::Precondition("first-order flow needs ν > 0".into()))
            }
            OracleFlow::SecondOrder { mu, .. } if mu <= 0.0 => {
                return Err(Error::Precondition("second-order flow needs μ > 0".into()))
            }
            OracleFlow::Nesterov if geometry != Geometry::Euclidean => {
                return Err(Error::IncompatibleMetric("Nesterov oracle is Euclidean only".into()))
            }
            OracleFlow::SecondOrder { .. } if geometry == Geometry::NaturalGradient => {
                return Err(Error::Precondition("natural gradient is first order".into()))
            }
            _ => {}
        }
        Ok(Self {
            arch,
            geometry,
            flow,
            data,
            mirrored: geometry.mirrored(arch),
        })
    }

    /// `M(arg)∇E(θ)`.
    fn direction(&self, theta: &[f64], arg: impl Fn(usize) -> f64) -> Vec<f64> {
        let grad = loss_gradient(self.arch, theta, self.data).expect("validated dimensions");
        match self.geometry {
            Geometry::Euclidean => grad,
            Geometry::Mirror | Geometry::Icnn => {
                let mut g = grad;
                for &k in &self.mirrored {
                    g[k] *= arg(k);
                }
                g
            }
            Geometry::NaturalGradient => {
                let h = gram(self.arch, theta, self.data).expect("validated dimensions");
                (pseudo_inverse(&h) * DVector::from_vec(grad)).as_slice().to_vec()
            }
        }
    }
}

impl System<f64, DVector<f64>> for Oracle<'_> {
    fn system(&self, t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let d = self.arch.num_params();
        match self.flow {
            OracleFlow::FirstOrder { nu } => {
                let theta = y.as_slice();
                let m = self.direction(theta, |k| nu * theta[k]);
                for k in 0..d {
                    dy[k] = -m[k] / nu;
                }
            }
            OracleFlow::SecondOrder { mu, nu } => {
                let (theta, vel) = y.as_slice().split_at(d);
                let m = self.direction(theta, |k| mu * vel[k] + nu * theta[k]);
                for k in 0..d {
                    dy[k] = vel[k];
                    dy[d + k] = -(nu * vel[k] + m[k]) / mu;
                }
            }
            OracleFlow::Nesterov => {
                let (theta, vel) = y.as_slice().split_at(d);
                let m = self.direction(theta, |_| 1.0);
                for k in 0..d {
                    dy[k] = vel[k];
                    dy[d + k] = -3.0 / t * vel[k] - m[k];
                }
            }
        }
    }
}

/// Sampled solution; `states[i]` is `θ` or `(θ, θ̇)`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub params: usize,
}

impl Trajectory {
    pub fn theta(&self, i: usize) -> &[f64] {
        &self.states[i][..self.params]
    }

    /// `θ̇` for second-order states, otherwise empty.
    pub fn thetadot(&self, i: usize) -> &[f64] {
        &self.states[i][self.params..]
    }

    fn from_output(times: &[f64], ys: &[DVector<f64>], params: usize) -> Result<Self> {
        let states: Vec<Vec<f64>> = ys.iter().map(|y| y.as_slice().to_vec()).collect();
        if let Some(i) = states.iter().position(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite {
                step: i,
                what: "oracle state".into(),
            });
        }
        Ok(Self {
            times: times.to_vec(),
            states,
            params,
        })
    }
}

fn integration_error(e: ode_solvers::dop_shared::IntegrationError) -> Error {
    Error::NonFinite {
        step: 0,
        what: format!("integration failed: {e:?}"),
    }
}

fn integration_error_msg(what: &str) -> Error {
    Error::NonFinite {
        step: 0,
        what: format!("integration failed: {what}"),
    }
}

fn check_state(oracle: &Oracle, y0: &[f64]) -> Result<()> {
    let d = oracle.arch.num_params();
    let want = if oracle.flow.is_second_order() { 2 * d } else { d };
    if y0.len() != want {
        return Err(Error::DimensionMismatch {
            expected: want,
            got: y0.len(),
        });
    }
    Ok(())
}

/// Adaptive Dormand–Prince 5(4), sampled every `output_dt`. Each sample is
/// the endpoint of its own integration interval rather than an
/// interpolated value.
pub fn integrate_dopri5(
    oracle: Oracle,
    t0: f64,
    t1: f64,
    y0: &[f64],
    rtol: f64,
    atol: f64,
    output_dt: f64,
) -> Result<Trajectory> {
    check_state(&oracle, y0)?;
    if !(output_dt > 0.0 && t1 > t0) {
        return Err(Error::Precondition("need t1 > t0 and a positive output step".into()));
    }
    let params = oracle.arch.num_params();
    let intervals = ((t1 - t0) / output_dt).ceil().max(1.0) as usize;
    let mut times = vec![t0];
    let mut ys = vec![DVector::from_column_slice(y0)];
    for i in 1..=intervals {
        let (a, b) = (times[i - 1], (t0 + i as f64 * output_dt).min(t1));
        let mut solver = Dopri5::from_param(
            oracle.clone(),
            a,
            b,
            b - a,
            ys[i - 1].clone(),
            rtol,
            atol,
            0.9,
            0.04,
            0.2,
            10.0,
            b - a,
            0.0,
            100_000,
            1000,
            OutputType::Sparse,
        );
        solver.integrate().map_err(integration_error)?;
        let end = solver
            .y_out()
            .last()
            .cloned()
            .ok_or_else(|| integration_error_msg("no output"))?;
        times.push(b);
        ys.push(end);
    }
    Trajectory::from_output(&times, &ys, params)
}

/// Classical fourth-order Runge–Kutta with fixed step `h`.
pub fn integrate_rk4(oracle: Oracle, t0: f64, t1: f64, y0: &[f64], h: f64) -> Result<Trajectory> {
    check_state(&oracle, y0)?;
    let params = oracle.arch.num_params();
    let mut solver = Rk4::new(oracle, t0, DVector::from_column_slice(y0), t1, h);
    solver.integrate().map_err(integration_error)?;
    Trajectory::from_output(solver.x_out(), solver.y_out(), params)
}

struct FreeSystem(FreeFlow);

impl System<f64, DVector<f64>> for FreeSystem {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        dy.copy_from_slice(&self.0.rhs(y.as_slice()));
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeFlowCheck {
    pub tau: f64,
    pub t_end: f64,
    pub step: f64,
    /// `max_t |a(t) − a(0)|` over coordinates.
    pub max_dev_a: f64,
    /// `max_t |b(t) − b(0)|` over coordinates.
    pub max_dev_b: f64,
    /// Largest deviation of the integrated position from the closed form.
    pub max_dev_closed_form: f64,
}

/// Integrates `θ̈ + τθ̇ = 0` with RK4 and measures the two invariants.
pub fn free_flow_check(theta0: &[f64], thetadot0: &[f64], tau: f64, t_end: f64, step: f64) -> Result<FreeFlowCheck> {
    let flow = free_flow_invariant_pair(theta0, thetadot0, tau)?;
    let mut y0 = theta0.to_vec();
    y0.extend_from_slice(thetadot0);
    let mut solver = Rk4::new(FreeSystem(flow.clone()), 0.0, DVector::from_vec(y0), t_end, step);
    solver.integrate().map_err(integration_error)?;
    let d = theta0.len();
    let a0 = flow.invariant_a(theta0, thetadot0);
    let b0 = flow.invariant_b(0.0, thetadot0);
    let (mut da, mut db, mut dc) = (0.0f64, 0.0f64, 0.0f64);
    for (t, y) in solver.x_out().iter().zip(solver.y_out()) {
        let (theta, vel) = y.as_slice().split_at(d);
        let a = flow.invariant_a(theta, vel);
        let b = flow.invariant_b(*t, vel);
        for k in 0..d {
            da = da.max((a[k] - a0[k]).abs());
            db = db.max((b[k] - b0[k]).abs());
        }
        for (x, e) in theta.iter().zip(flow.position(*t)) {
            dc = dc.max((x - e).abs());
        }
    }
    Ok(FreeFlowCheck {
        tau,
        t_end,
        step,
        max_dev_a: da,
        max_dev_b: db,
        max_dev_closed_form: dc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::data::make_synthetic_dataset;

    #[test]
    fn free_flow_invariants() {
        let c = free_flow_check(&[1.0], &[2.0], 1.0, 2.0, 1e-3).unwrap();
        assert!(c.max_dev_a <= 1e-9 && c.max_dev_b <= 1e-9, "{c:?}");
        assert!(free_flow_check(&[1.0], &[2.0], 0.0, 2.0, 1e-3).is_err());
    }

    #[test]
    fn gradient_oracle_decreases_loss() {
        let arch = Architecture::two_layer(2, 2, 2);
        let data = make_synthetic_dataset(&arch, 8, 0, false).unwrap();
        let y0 = crate::dynamics::initial_parameters(&arch, Geometry::Euclidean, 1);
        let o = Oracle::new(&arch, Geometry::Euclidean, OracleFlow::FirstOrder { nu: 1.0 }, &data).unwrap();
        let tr = integrate_dopri5(o, 0.0, 0.5, &y0, 1e-10, 1e-12, 0.1).unwrap();
        let l0 = crate::dynamics::network::loss(&arch, tr.theta(0), &data).unwrap();
        let l1 = crate::dynamics::network::loss(&arch, tr.theta(tr.times.len() - 1), &data).unwrap();
        assert!(l1 < l0);
    }
}
