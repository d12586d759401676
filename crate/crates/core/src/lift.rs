//! Phase-space lifting of momentum flows.
//!
//! A momentum flow `θ̈ + τ(t)θ̇ = −M∇E` is rewritten on `(t, θ, θ̇)`; its
//! conservation laws are the common annihilators of
//! `χ_0 = (1, θ̇, −τ(t)θ̇)` and `χ_i = (0, 0, M∇φ_i)`. Heavy ball with `τ ≠ 0`
//! is solved in the surrogate `s = exp(τt)` so that laws stay polynomial;
//! Nesterov (`τ(t) = 3/t`) is handled by clearing the denominator.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratpoly::{ExactScalar, Polynomial, TimeCoordinate, VariableSpace, VectorField};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowSpec {
    Gradient,
    HeavyBall { tau: ExactScalar },
    Nesterov,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Gf,
    HeavyBall,
    Nesterov,
}

/// JSON form: `{ "flow": "gf"|"heavy_ball"|"nesterov", "tau": "p/q" }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub flow: FlowKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<ExactScalar>,
}

impl FlowSpec {
    pub fn heavy_ball(tau: ExactScalar) -> Result<Self> {
        if tau.is_negative() {
            return Err(Error::InvalidFlow("heavy-ball damping must be ≥ 0".into()));
        }
        Ok(Self::HeavyBall { tau })
    }

    pub fn from_config(c: &FlowConfig) -> Result<Self> {
        match c.flow {
            FlowKind::Gf => Ok(Self::Gradient),
            FlowKind::Nesterov => Ok(Self::Nesterov),
            FlowKind::HeavyBall => Self::heavy_ball(c.tau.clone().unwrap_or_else(ExactScalar::one)),
        }
    }

    pub fn to_config(&self) -> FlowConfig {
        match self {
            Self::Gradient => FlowConfig {
                flow: FlowKind::Gf,
                tau: None,
            },
            Self::HeavyBall { tau } => FlowConfig {
                flow: FlowKind::HeavyBall,
                tau: Some(tau.clone()),
            },
            Self::Nesterov => FlowConfig {
                flow: FlowKind::Nesterov,
                tau: None,
            },
        }
    }

    pub fn is_momentum(&self) -> bool {
        !matches!(self, Self::Gradient)
    }
}

/// The lifted family `χ_0, χ_1, …, χ_d` on `(time-like, θ, θ̇)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedSystem {
    pub space: Arc<VariableSpace>,
    pub fields: Vec<VectorField>,
    pub flow: FlowSpec,
    /// The time-like coordinate is `s = exp(τt)`.
    pub surrogate: bool,
}

/// Moves parameter-block components `M∇φ_i` onto the velocity block.
fn velocity_fields(fields: &[VectorField], space: &Arc<VariableSpace>) -> Result<Vec<VectorField>> {
    let vel = space
        .velocity_range()
        .ok_or_else(|| Error::InvalidSpace("lifted space needs a velocity block".into()))?;
    fields
        .iter()
        .map(|f| {
            if f.space().as_ref() != space.as_ref() {
                return Err(Error::SpaceMismatch);
            }
            if space.time_index().is_some_and(|t| !f.component(t).is_zero()) {
                return Err(Error::Precondition(
                    "metric fields must vanish on the time coordinate".into(),
                ));
            }
            let mut comps = vec![Polynomial::zero(space); space.len()];
            for (p, v) in space.param_range().zip(vel.clone()) {
                if !f.component(v).is_zero() {
                    return Err(Error::Precondition(
                        "metric fields must vanish on the velocity block".into(),
                    ));
                }
                comps[v] = f.component(p).clone();
            }
            VectorField::new(space, comps)
        })
        .collect()
}

/// `χ_0` with the given time component and damping applied to `θ̇`:
/// `(time, factor·θ̇, damping·θ̇)`.
fn drift_field(
    space: &Arc<VariableSpace>,
    time_component: Polynomial,
    position_factor: &Polynomial,
    damping: &Polynomial,
) -> Result<VectorField> {
    let mut comps = vec![Polynomial::zero(space); space.len()];
    comps[0] = time_component;
    let vel = space.velocity_range().expect("velocity block");
    for (p, v) in space.param_range().zip(vel) {
        let vdot = Polynomial::var(space, v);
        comps[p] = position_factor * &vdot;
        comps[v] = damping * &vdot;
    }
    VectorField::new(space, comps)
}

/// Builds `χ_0..χ_d` from the metric fields `M∇φ_i` (given on the parameter
/// block of a lifted space whose time coordinate is `t`).
pub fn lift_momentum(fields: &[VectorField], flow: &FlowSpec, space: &Arc<VariableSpace>) -> Result<LiftedSystem> {
    if space.time_kind() != TimeCoordinate::Time {
        return Err(Error::InvalidSpace("lifted space must start with t".into()));
    }
    match flow {
        FlowSpec::Gradient => Err(Error::GradientFlowNotLiftable),
        FlowSpec::Nesterov => nesterov_cleared(fields, space),
        FlowSpec::HeavyBall { tau } => {
            let one = Polynomial::one(space);
            let chi0 = drift_field(space, one.clone(), &one, &Polynomial::constant(space, -tau))?;
            let mut out = vec![chi0];
            out.extend(velocity_fields(fields, space)?);
            Ok(LiftedSystem {
                space: space.clone(),
                fields: out,
                flow: flow.clone(),
                surrogate: false,
            })
        }
    }
}

/// Rewrites a heavy-ball system in `s = exp(τt)`:
/// `χ̃_i(s, θ, θ̇) = diag(τs, 1, …, 1) χ_i(0, θ, θ̇)`.
pub fn heavy_ball_surrogate(system: &LiftedSystem) -> Result<LiftedSystem> {
    let tau = match &system.flow {
        FlowSpec::HeavyBall { tau } => tau,
        _ => return Err(Error::InvalidFlow("surrogate applies to heavy ball only".into())),
    };
    if system.surrogate {
        return Err(Error::Precondition("system already uses the surrogate".into()));
    }
    if tau.is_zero() {
        return Err(Error::SurrogateUndefined);
    }
    let space = system.space.with_time(TimeCoordinate::Surrogate)?;
    let s = Polynomial::var(&space, 0);
    let fields = system
        .fields
        .iter()
        .map(|f| {
            let comps: Vec<Polynomial> = f
                .components()
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let at_zero = Polynomial::from_terms(
                        &space,
                        p.terms()
                            .iter()
                            .filter(|(e, _)| e[0] == 0)
                            .map(|(e, c)| (e.clone(), c.clone())),
                    )?;
                    Ok(if i == 0 {
                        &(&at_zero * &s) * &Polynomial::constant(&space, tau.clone())
                    } else {
                        at_zero
                    })
                })
                .collect::<Result<_>>()?;
            VectorField::new(&space, comps)
        })
        .collect::<Result<_>>()?;
    Ok(LiftedSystem {
        space,
        fields,
        flow: system.flow.clone(),
        surrogate: true,
    })
}

/// Nesterov system with `χ_0` multiplied by `t`: `(t, tθ̇, −3θ̇)`. On `t > 0`
/// this has the same annihilators as the original `(1, θ̇, −(3/t)θ̇)`.
pub fn nesterov_cleared(fields: &[VectorField], space: &Arc<VariableSpace>) -> Result<LiftedSystem> {
    if space.time_kind() != TimeCoordinate::Time {
        return Err(Error::InvalidSpace("Nesterov needs the time variable t".into()));
    }
    let t = Polynomial::var(space, 0);
    let chi0 = drift_field(
        space,
        t.clone(),
        &t,
        &Polynomial::constant(space, ExactScalar::from_int(-3)),
    )?;
    let mut out = vec![chi0];
    out.extend(velocity_fields(fields, space)?);
    Ok(LiftedSystem {
        space: space.clone(),
        fields: out,
        flow: FlowSpec::Nesterov,
        surrogate: false,
    })
}

/// Closed-form free flow `θ̈ + τθ̇ = 0` and its two invariants
/// `a = θ + θ̇/τ` and `b = θ̇·exp(τt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeFlow {
    pub theta0: Vec<f64>,
    pub thetadot0: Vec<f64>,
    pub tau: f64,
}

impl FreeFlow {
    pub fn position(&self, t: f64) -> Vec<f64> {
        let k = (1.0 - (-self.tau * t).exp()) / self.tau;
        self.theta0
            .iter()
            .zip(&self.thetadot0)
            .map(|(x, v)| x + v * k)
            .collect()
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let k = (-self.tau * t).exp();
        self.thetadot0.iter().map(|v| v * k).collect()
    }

    pub fn invariant_a(&self, theta: &[f64], thetadot: &[f64]) -> Vec<f64> {
        theta.iter().zip(thetadot).map(|(x, v)| x + v / self.tau).collect()
    }

    pub fn invariant_b(&self, t: f64, thetadot: &[f64]) -> Vec<f64> {
        let k = (self.tau * t).exp();
        thetadot.iter().map(|v| v * k).collect()
    }

    /// Right-hand side of the first-order system on `(θ, θ̇)`.
    pub fn rhs(&self, state: &[f64]) -> Vec<f64> {
        let d = state.len() / 2;
        let mut out = state[d..].to_vec();
        out.extend(state[d..].iter().map(|v| -self.tau * v));
        out
    }
}

pub fn free_flow_invariant_pair(theta0: &[f64], thetadot0: &[f64], tau: f64) -> Result<FreeFlow> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::InvalidFlow("free-flow invariants need τ > 0".into()));
    }
    if theta0.len() != thetadot0.len() {
        return Err(Error::DimensionMismatch {
            expected: theta0.len(),
            got: thetadot0.len(),
        });
    }
    Ok(FreeFlow {
        theta0: theta0.to_vec(),
        thetadot0: thetadot0.to_vec(),
        tau,
    })
}
