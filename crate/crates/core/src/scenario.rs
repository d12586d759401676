//! A configuration `{architecture, metric, flow}` and the field system,
//! certificate, degree bounds and reference counts it determines.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{
    balancedness_gf_laws, icnn_gf_laws, lie_dim, lie_dim_gf, nmf_gf_laws, pca_momentum_laws, predicted_counts,
    LawFamily,
};
use crate::lift::{heavy_ball_surrogate, lift_momentum, FlowConfig, FlowKind, FlowSpec};
use crate::model::{
    apply_metric, build_phi, grad_phi, Architecture, ArchitectureConfig, FlowMode, MetricConfig, MetricKind, MetricSpec,
};
use crate::ratpoly::{TimeCoordinate, VariableSpace, VectorField};
use crate::witness::Genericity;

/// Samples used to estimate the generic rank of `∂φ`.
pub const RANK_SAMPLES: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub arch: Architecture,
    pub metric: MetricSpec,
    pub flow: FlowSpec,
}

/// JSON form. `flow` may be omitted, in which case it follows the metric's
/// mode (`gf`, or heavy ball with the metric's `tau`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub architecture: ArchitectureConfig,
    pub metric: MetricConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
}

/// The fields whose common annihilators are the laws, on their space.
#[derive(Clone, Debug)]
pub struct FieldSystem {
    pub space: Arc<VariableSpace>,
    pub fields: Vec<VectorField>,
    pub mode: FlowMode,
    /// Number of parameters `D`.
    pub params: usize,
    /// `D` (gradient) or `2D+1` (momentum).
    pub ambient: usize,
    pub certificate: Genericity,
}

impl Scenario {
    pub fn new(arch: Architecture, metric: MetricKind, flow: FlowSpec) -> Result<Self> {
        arch.validate()?;
        let mode = if flow.is_momentum() { FlowMode::Mf } else { FlowMode::Gf };
        let tau = match &flow {
            FlowSpec::HeavyBall { tau } => tau.clone(),
            _ => crate::ratpoly::ExactScalar::one(),
        };
        if metric != MetricKind::Euclidean && flow == FlowSpec::Nesterov {
            return Err(Error::IncompatibleMetric(
                "mirror metrics under Nesterov are not polynomial".into(),
            ));
        }
        if metric == MetricKind::Icnn && !matches!(arch, Architecture::Relu2 { bias: true, .. }) {
            return Err(Error::IncompatibleMetric(
                "hybrid metric needs a biased relu2 network".into(),
            ));
        }
        Ok(Self {
            arch,
            metric: MetricSpec::new(metric, mode, tau),
            flow,
        })
    }

    pub fn from_config(c: &ScenarioConfig) -> Result<Self> {
        let arch = Architecture::from_config(&c.architecture)?;
        let flow = match &c.flow {
            Some(f) => FlowSpec::from_config(f)?,
            None => match c.metric.mode {
                FlowMode::Gf => FlowSpec::Gradient,
                FlowMode::Mf => FlowSpec::heavy_ball(c.metric.tau.clone())?,
            },
        };
        let mode = if flow.is_momentum() { FlowMode::Mf } else { FlowMode::Gf };
        if mode != c.metric.mode {
            return Err(Error::InvalidFlow(format!(
                "metric mode {:?} disagrees with flow {:?}",
                c.metric.mode,
                flow.to_config().flow
            )));
        }
        if let (
            Some(FlowConfig {
                flow: FlowKind::HeavyBall,
                tau: Some(t),
            }),
            true,
        ) = (&c.flow, c.metric.metric != MetricKind::Euclidean)
        {
            if *t != c.metric.tau {
                return Err(Error::InvalidFlow("metric tau and flow tau differ".into()));
            }
        }
        Self::new(arch, c.metric.metric, flow)
    }

    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            architecture: self.arch.to_config(),
            metric: self.metric.to_config(),
            flow: Some(self.flow.to_config()),
        }
    }

    pub fn mode(&self) -> FlowMode {
        self.metric.mode
    }

    /// Default `(degree, time_degree_cap)` for the solver.
    pub fn default_degree(&self) -> (u32, u32) {
        match &self.flow {
            FlowSpec::Gradient => (2, 0),
            FlowSpec::HeavyBall { .. } => (3, 1),
            FlowSpec::Nesterov => (5, 3),
        }
    }

    /// Builds the field system: metric gradient fields for gradient flows,
    /// the lifted family (in `s = exp(τt)` when `τ ≠ 0`) for momentum flows.
    pub fn system(&self) -> Result<FieldSystem> {
        let phi = build_phi(&self.arch)?;
        let params = self.arch.num_params();
        let (space, fields) = match &self.flow {
            FlowSpec::Gradient => {
                let g = grad_phi(&phi, &phi.space)?;
                (phi.space.clone(), apply_metric(&self.metric, &g, &phi.space)?)
            }
            flow => {
                let space = VariableSpace::lifted(self.arch.layers(), TimeCoordinate::Time)?;
                let g = grad_phi(&phi, &space)?;
                let m = apply_metric(&self.metric, &g, &space)?;
                let mut sys = lift_momentum(&m, flow, &space)?;
                if matches!(flow, FlowSpec::HeavyBall { tau } if !tau.is_zero()) {
                    sys = heavy_ball_surrogate(&sys)?;
                }
                (sys.space, sys.fields)
            }
        };
        let certificate = self.certificate(&space)?;
        Ok(FieldSystem {
            ambient: space.len(),
            space,
            fields,
            mode: self.mode(),
            params,
            certificate,
        })
    }

    /// Full rank of the stacked `(U; V)` (gradient) or `(U; V; U̇; V̇)`
    /// (momentum) for two-layer linear networks; otherwise the generic rank
    /// of the Jacobian of `φ`.
    pub fn certificate(&self, space: &Arc<VariableSpace>) -> Result<Genericity> {
        if let Some((n, m, r)) = self.arch.two_layer_dims() {
            let index = |velocity: bool, k: usize| {
                if velocity {
                    space.velocity(k).expect("velocity block")
                } else {
                    space.param(k)
                }
            };
            let mut matrix = Vec::new();
            for velocity in [false, true] {
                if velocity && !space.has_velocity() {
                    break;
                }
                for k in 0..n {
                    matrix.push((0..r).map(|j| index(velocity, space.entry(0, k, j))).collect());
                }
                for l in 0..m {
                    matrix.push((0..r).map(|j| index(velocity, space.entry(1, j, l))).collect());
                }
            }
            return Ok(Genericity::FullRank { matrix });
        }
        let phi = build_phi(&self.arch)?;
        let g = grad_phi(&phi, space)?;
        let matrix = g
            .iter()
            .map(|f| space.param_range().map(|i| f.component(i).clone()).collect())
            .collect();
        Genericity::poly_rank(matrix, space, 0, RANK_SAMPLES)
    }

    /// Closed-form families applicable to this scenario, in `space`.
    pub fn closed_form(&self, space: &Arc<VariableSpace>) -> Result<Vec<LawFamily>> {
        use MetricKind::*;
        match (&self.arch, self.metric.kind, self.mode()) {
            (_, Euclidean, FlowMode::Gf) => balancedness_gf_laws(&self.arch, space),
            (Architecture::Linear { .. }, Euclidean, FlowMode::Mf) => pca_momentum_laws(&self.arch, &self.flow, space),
            (Architecture::Linear { .. }, Mirror, FlowMode::Gf) => {
                let (n, m, r) = self
                    .arch
                    .two_layer_dims()
                    .ok_or_else(|| Error::InvalidArchitecture("mirror families need a two-layer network".into()))?;
                nmf_gf_laws(n, m, r, space)
            }
            (&Architecture::Relu2 { n, m, r, .. }, Icnn, FlowMode::Gf) => icnn_gf_laws(n, m, r, space),
            _ => Ok(Vec::new()),
        }
    }

    /// Law count from a closed formula, when one applies.
    pub fn formula_count(&self) -> Option<usize> {
        use MetricKind::*;
        let two = self.arch.two_layer_dims();
        match (&self.arch, self.metric.kind, &self.flow) {
            (Architecture::Linear { .. }, Euclidean, FlowSpec::Gradient) => {
                let (n, m, r) = two?;
                predicted_counts(n, m, r, FlowMode::Gf, None).ok()
            }
            (Architecture::Linear { .. }, Euclidean, FlowSpec::HeavyBall { tau }) if !tau.is_zero() => {
                let (n, m, r) = two?;
                predicted_counts(n, m, r, FlowMode::Mf, None).ok()
            }
            (Architecture::Linear { .. }, Mirror, FlowSpec::Gradient) => two.map(|(_, _, r)| r),
            (Architecture::Linear { .. }, Mirror, FlowSpec::HeavyBall { tau }) if !tau.is_zero() => two.map(|_| 0),
            (&Architecture::Relu2 { r, out_bias: false, .. }, Euclidean, FlowSpec::Gradient) => Some(r),
            (
                Architecture::Relu2 {
                    bias: false,
                    out_bias: false,
                    ..
                },
                Euclidean,
                FlowSpec::HeavyBall { tau },
            ) if !tau.is_zero() => Some(0),
            (&Architecture::Relu2 { r, out_bias: false, .. }, Icnn, FlowSpec::Gradient) => Some(r),
            (Architecture::Relu2 { out_bias: false, .. }, Icnn, FlowSpec::HeavyBall { tau }) if !tau.is_zero() => {
                Some(0)
            }
            _ => None,
        }
    }

    /// Trace dimension from a closed formula, when one applies.
    pub fn formula_lie_dim(&self) -> Option<usize> {
        let (n, m, r) = self.arch.two_layer_dims()?;
        if self.metric.kind != MetricKind::Euclidean {
            return None;
        }
        match &self.flow {
            FlowSpec::Gradient => lie_dim_gf(n, m, r).ok(),
            FlowSpec::HeavyBall { tau } if !tau.is_zero() => lie_dim(n, m, r).ok(),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::ExactScalar;

    #[test]
    fn config_defaults_and_checks() {
        let c: ScenarioConfig = serde_json::from_str(
            r#"{"architecture":{"kind":"linear","dims":[2,2,2]},"metric":{"metric":"euclidean","mode":"mf"}}"#,
        )
        .unwrap();
        let s = Scenario::from_config(&c).unwrap();
        assert_eq!(
            s.flow,
            FlowSpec::HeavyBall {
                tau: ExactScalar::one()
            }
        );
        assert_eq!(s.formula_count(), Some(1));

        let bad: ScenarioConfig = serde_json::from_str(
            r#"{"architecture":{"kind":"linear","dims":[2,2,2]},"metric":{"metric":"euclidean","mode":"gf"},"flow":{"flow":"nesterov"}}"#,
        )
        .unwrap();
        assert!(Scenario::from_config(&bad).is_err());
        assert!(serde_json::from_str::<ScenarioConfig>(
            r#"{"architecture":{"kind":"linear","dims":[1,1,1]},"metric":{"metric":"euclidean","mode":"gf"},"x":1}"#
        )
        .is_err());
    }

    #[test]
    fn systems_have_expected_shape() {
        let s = Scenario::new(
            Architecture::two_layer(2, 1, 2),
            MetricKind::Euclidean,
            FlowSpec::heavy_ball(ExactScalar::one()).unwrap(),
        )
        .unwrap();
        let sys = s.system().unwrap();
        assert_eq!(sys.params, 6);
        assert_eq!(sys.ambient, 13);
        assert_eq!(sys.fields.len(), 1 + 2);
        assert_eq!(sys.space.time_kind(), TimeCoordinate::Surrogate);
        match &sys.certificate {
            Genericity::FullRank { matrix } => assert_eq!(matrix.len(), 6),
            _ => panic!("expected a full-rank certificate"),
        }

        let s = Scenario::new(Architecture::relu2(2, 2, 1, true), MetricKind::Icnn, FlowSpec::Gradient).unwrap();
        let sys = s.system().unwrap();
        assert_eq!(sys.ambient, 5);
        assert!(matches!(sys.certificate, Genericity::PolyRank { rank: 4, .. }));
    }
}
