//! Architectures, their reparameterizations `φ`, the gradient fields `∇φ_i`
//! and the metrics turning them into `M∇φ_i`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratpoly::{Block, ExactScalar, LayerShape, PolyMatrix, Polynomial, VariableSpace, VectorField};

/// Network architecture. `Linear` uses widths `n_0..n_q` with
/// `U_i ∈ ℝ^{n_{i−1}×n_i}`; `Relu2` is `x ↦ U σ(Vᵀx + b) + c` with
/// `U ∈ ℝ^{n×r}`, `V ∈ ℝ^{m×r}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Architecture {
    Linear {
        widths: Vec<usize>,
    },
    Relu2 {
        n: usize,
        m: usize,
        r: usize,
        bias: bool,
        out_bias: bool,
    },
}

/// JSON form: `{ "kind": "linear"|"relu2", "dims": [...], "bias": bool }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub kind: String,
    pub dims: Vec<usize>,
    #[serde(default)]
    pub bias: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub out_bias: bool,
}

impl Architecture {
    pub fn linear(widths: &[usize]) -> Result<Self> {
        let a = Self::Linear {
            widths: widths.to_vec(),
        };
        a.validate()?;
        Ok(a)
    }

    /// Two-layer linear network `UVᵀ` with `U ∈ ℝ^{n×r}`, `V ∈ ℝ^{m×r}`.
    pub fn two_layer(n: usize, m: usize, r: usize) -> Self {
        Self::Linear { widths: vec![n, r, m] }
    }

    pub fn relu2(n: usize, m: usize, r: usize, bias: bool) -> Self {
        Self::Relu2 {
            n,
            m,
            r,
            bias,
            out_bias: false,
        }
    }

    pub fn from_config(c: &ArchitectureConfig) -> Result<Self> {
        let a = match c.kind.as_str() {
            "linear" => {
                if c.bias || c.out_bias {
                    return Err(Error::InvalidArchitecture("linear networks take no bias".into()));
                }
                Self::Linear { widths: c.dims.clone() }
            }
            "relu2" => match c.dims.as_slice() {
                &[n, m, r] => Self::Relu2 {
                    n,
                    m,
                    r,
                    bias: c.bias,
                    out_bias: c.out_bias,
                },
                _ => return Err(Error::InvalidArchitecture("relu2 expects dims [n, m, r]".into())),
            },
            other => return Err(Error::InvalidArchitecture(format!("unsupported kind {other:?}"))),
        };
        a.validate()?;
        Ok(a)
    }

    pub fn to_config(&self) -> ArchitectureConfig {
        match self {
            Self::Linear { widths } => ArchitectureConfig {
                kind: "linear".into(),
                dims: widths.clone(),
                bias: false,
                out_bias: false,
            },
            &Self::Relu2 {
                n,
                m,
                r,
                bias,
                out_bias,
            } => ArchitectureConfig {
                kind: "relu2".into(),
                dims: vec![n, m, r],
                bias,
                out_bias,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Linear { widths } => {
                if widths.len() < 3 {
                    return Err(Error::InvalidArchitecture(
                        "linear networks need at least two layers".into(),
                    ));
                }
                if widths.contains(&0) {
                    return Err(Error::InvalidArchitecture("widths must be ≥ 1".into()));
                }
            }
            Self::Relu2 { n, m, r, .. } => {
                if *n == 0 || *m == 0 || *r == 0 {
                    return Err(Error::InvalidArchitecture("widths must be ≥ 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        match self {
            Self::Linear { widths } => widths
                .windows(2)
                .enumerate()
                .map(|(i, w)| LayerShape::new(format!("U{}", i + 1), w[0], w[1]))
                .collect(),
            &Self::Relu2 {
                n,
                m,
                r,
                bias,
                out_bias,
            } => {
                let mut l = vec![LayerShape::new("U", n, r), LayerShape::new("V", m, r)];
                if bias {
                    l.push(LayerShape::new("b", 1, r));
                }
                if out_bias {
                    l.push(LayerShape::new("c", n, 1));
                }
                l
            }
        }
    }

    /// Number of parameters `D`.
    pub fn num_params(&self) -> usize {
        self.layers().iter().map(LayerShape::len).sum()
    }

    /// `Some((n, m, r))` for two-layer linear networks.
    pub fn two_layer_dims(&self) -> Option<(usize, usize, usize)> {
        match self {
            Self::Linear { widths } if widths.len() == 3 => Some((widths[0], widths[2], widths[1])),
            _ => None,
        }
    }

    pub fn parameter_space(&self) -> Result<Arc<VariableSpace>> {
        VariableSpace::parameters(self.layers())
    }
}

/// Components `φ_1..φ_d` of the reparameterization, polynomials in `θ` only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReparamMap {
    pub space: Arc<VariableSpace>,
    pub components: Vec<Polynomial>,
}

impl ReparamMap {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Builds `φ` over the architecture's parameter space.
///
/// Linear: the entries of `U_1⋯U_q` (column-major). ReLU: per neuron `j`, the
/// entries of `u_j v_jᵀ`, then `u_j b_j` with bias, then `c` with output bias.
pub fn build_phi(arch: &Architecture) -> Result<ReparamMap> {
    arch.validate()?;
    let space = arch.parameter_space()?;
    let components = match arch {
        Architecture::Linear { widths } => {
            let mut prod = PolyMatrix::layer(&space, 0, Block::Parameter);
            for i in 1..widths.len() - 1 {
                prod = prod.mul(&PolyMatrix::layer(&space, i, Block::Parameter));
            }
            prod.column_major()
        }
        &Architecture::Relu2 {
            n,
            m,
            r,
            bias,
            out_bias,
        } => {
            let var = |layer: usize, row: usize, col: usize| {
                Polynomial::var(&space, space.param(space.entry(layer, row, col)))
            };
            let mut out = Vec::new();
            for j in 0..r {
                for l in 0..m {
                    for k in 0..n {
                        out.push(&var(0, k, j) * &var(1, l, j));
                    }
                }
                if bias {
                    for k in 0..n {
                        out.push(&var(0, k, j) * &var(2, 0, j));
                    }
                }
            }
            if out_bias {
                let c = if bias { 3 } else { 2 };
                for k in 0..n {
                    out.push(var(c, k, 0));
                }
            }
            out
        }
    };
    Ok(ReparamMap { space, components })
}

/// `∇φ_i` as fields of `space`, nonzero on the parameter block only.
pub fn grad_phi(phi: &ReparamMap, space: &Arc<VariableSpace>) -> Result<Vec<VectorField>> {
    if phi.space.layers() != space.layers() {
        return Err(Error::SpaceMismatch);
    }
    let d = phi.space.param_dim();
    let var_map: Vec<usize> = (0..d).map(|k| space.param(k)).collect();
    phi.components
        .iter()
        .map(|p| {
            let mut comps = vec![Polynomial::zero(space); space.len()];
            for k in 0..d {
                comps[space.param(k)] = p.partial(phi.space.param(k))?.embed(space, &var_map)?;
            }
            VectorField::new(space, comps)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    /// Shannon-entropy mirror geometry on every coordinate.
    Mirror,
    /// Mirror geometry on the `U` block, Euclidean on `V` and `b`.
    Icnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    Gf,
    Mf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub mode: FlowMode,
    /// Damping used by the momentum mirror argument `θ̇ + τθ`.
    pub tau: ExactScalar,
}

/// JSON form: `{ "metric": "euclidean"|"mirror"|"icnn", "mode": "gf"|"mf", "tau": "p/q" }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub metric: MetricKind,
    pub mode: FlowMode,
    #[serde(default = "default_tau")]
    pub tau: ExactScalar,
}

fn default_tau() -> ExactScalar {
    ExactScalar::one()
}

impl MetricSpec {
    pub fn new(kind: MetricKind, mode: FlowMode, tau: ExactScalar) -> Self {
        Self { kind, mode, tau }
    }

    pub fn euclidean(mode: FlowMode) -> Self {
        Self::new(MetricKind::Euclidean, mode, ExactScalar::one())
    }

    pub fn from_config(c: &MetricConfig) -> Self {
        Self::new(c.metric, c.mode, c.tau.clone())
    }

    pub fn to_config(&self) -> MetricConfig {
        MetricConfig {
            metric: self.kind,
            mode: self.mode,
            tau: self.tau.clone(),
        }
    }
}

/// Multiplies each parameter-block component by the diagonal metric entry.
///
/// Gradient mode uses `diag(θ)`; momentum mode uses `diag(θ̇ + τθ)`, which
/// needs a velocity block. `Icnn` only touches the `U` block.
pub fn apply_metric(
    metric: &MetricSpec,
    fields: &[VectorField],
    space: &Arc<VariableSpace>,
) -> Result<Vec<VectorField>> {
    if metric.kind == MetricKind::Euclidean {
        return Ok(fields.to_vec());
    }
    if metric.mode == FlowMode::Mf && !space.has_velocity() {
        return Err(Error::IncompatibleMetric(
            "momentum mirror metric needs a velocity block".into(),
        ));
    }
    let d = space.param_dim();
    let mirrored: Vec<usize> = match metric.kind {
        MetricKind::Mirror => (0..d).collect(),
        MetricKind::Icnn => {
            let u = space
                .layer_by_name("U")
                .ok_or_else(|| Error::IncompatibleMetric("hybrid metric needs a `U` layer".into()))?;
            let off = space.layer_offset(u);
            (off..off + space.layers()[u].len()).collect()
        }
        MetricKind::Euclidean => unreachable!(),
    };
    let weight = |k: usize| -> Polynomial {
        let theta = Polynomial::var(space, space.param(k));
        match metric.mode {
            FlowMode::Gf => theta,
            FlowMode::Mf => {
                let v = Polynomial::var(space, space.velocity(k).expect("checked"));
                &v + &theta.scale(&metric.tau)
            }
        }
    };
    fields
        .iter()
        .map(|f| {
            let mut comps = f.components().to_vec();
            for &k in &mirrored {
                let i = space.param(k);
                if !comps[i].is_zero() {
                    comps[i] = comps[i].checked_mul(&weight(k))?;
                }
            }
            VectorField::new(space, comps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: &Polynomial) -> String {
        p.to_string()
    }

    #[test]
    fn linear_121_phi() {
        let phi = build_phi(&Architecture::linear(&[1, 2, 1]).unwrap()).unwrap();
        assert_eq!(phi.len(), 1);
        assert_eq!(names(&phi.components[0]), "U1[1,1]*U2[1,1] + U1[1,2]*U2[2,1]");
        let g = grad_phi(&phi, &phi.space).unwrap();
        let s = &phi.space;
        let v = |i| Polynomial::var(s, i);
        // (u1, u2, v1, v2) ↦ (v1, v2, u1, u2)
        assert_eq!(g[0].components(), &[v(2), v(3), v(0), v(1)]);
    }

    #[test]
    fn linear_212_phi_matches_entry_formulas() {
        let phi = build_phi(&Architecture::linear(&[2, 1, 2]).unwrap()).unwrap();
        assert_eq!(phi.len(), 4);
        let s = &phi.space;
        // U1 is 2×1 (vars 0,1), U2 is 1×2 (vars 2,3); entry (i,j) = U1[i]·U2[j].
        let v = |i| Polynomial::var(s, i);
        let expected = [&v(0) * &v(2), &v(1) * &v(2), &v(0) * &v(3), &v(1) * &v(3)];
        assert_eq!(phi.components, expected);
    }

    #[test]
    fn relu_bias_phi() {
        let phi = build_phi(&Architecture::relu2(1, 1, 1, true)).unwrap();
        let s = &phi.space;
        let v = |i| Polynomial::var(s, i);
        assert_eq!(phi.components, vec![&v(0) * &v(1), &v(0) * &v(2)]);
        let g = grad_phi(&phi, s).unwrap();
        assert_eq!(g[0].components(), &[v(1), v(0), Polynomial::zero(s)]);
        assert_eq!(g[1].components(), &[v(2), Polynomial::zero(s), v(0)]);
    }

    #[test]
    fn relu_output_bias_gives_unit_fields() {
        let arch = Architecture::Relu2 {
            n: 2,
            m: 1,
            r: 1,
            bias: false,
            out_bias: true,
        };
        let phi = build_phi(&arch).unwrap();
        assert_eq!(phi.len(), 2 + 2);
        let g = grad_phi(&phi, &phi.space).unwrap();
        let c0 = phi.space.param(phi.space.entry(2, 0, 0));
        let unit: Vec<bool> = g[2].components().iter().map(|p| !p.is_zero()).collect();
        assert_eq!(unit.iter().filter(|&&b| b).count(), 1);
        assert!(g[2].component(c0).is_constant());
    }

    #[test]
    fn metrics() {
        let phi = build_phi(&Architecture::relu2(1, 1, 1, true)).unwrap();
        let s = &phi.space;
        let v = |i| Polynomial::var(s, i);
        let g = grad_phi(&phi, s).unwrap();
        let e = apply_metric(&MetricSpec::euclidean(FlowMode::Gf), &g, s).unwrap();
        assert_eq!(e, g);

        let icnn = MetricSpec::new(MetricKind::Icnn, FlowMode::Gf, ExactScalar::one());
        let h = apply_metric(&icnn, &g, s).unwrap();
        assert_eq!(h[0].components(), &[&v(0) * &v(1), v(0), Polynomial::zero(s)]);
        assert_eq!(h[1].components(), &[&v(0) * &v(2), Polynomial::zero(s), v(0)]);

        let uv = build_phi(&Architecture::linear(&[1, 1, 1]).unwrap()).unwrap();
        let s2 = &uv.space;
        let w = |i| Polynomial::var(s2, i);
        let g2 = grad_phi(&uv, s2).unwrap();
        let mirror = MetricSpec::new(MetricKind::Mirror, FlowMode::Gf, ExactScalar::one());
        let m = apply_metric(&mirror, &g2, s2).unwrap();
        assert_eq!(m[0].components(), &[&w(0) * &w(1), &w(0) * &w(1)]);

        let mf = MetricSpec::new(MetricKind::Mirror, FlowMode::Mf, ExactScalar::one());
        assert!(matches!(apply_metric(&mf, &g2, s2), Err(Error::IncompatibleMetric(_))));
    }

    #[test]
    fn config_round_trip_and_errors() {
        let c: ArchitectureConfig = serde_json::from_str(r#"{"kind":"relu2","dims":[2,2,3],"bias":true}"#).unwrap();
        let a = Architecture::from_config(&c).unwrap();
        assert_eq!(a.num_params(), (2 + 2 + 1) * 3);
        assert_eq!(a.to_config(), c);
        let bad: ArchitectureConfig = serde_json::from_str(r#"{"kind":"conv","dims":[1]}"#).unwrap();
        assert!(Architecture::from_config(&bad).is_err());
        assert!(serde_json::from_str::<ArchitectureConfig>(r#"{"kind":"linear","dims":[1],"x":1}"#).is_err());
        assert!(Architecture::linear(&[2, 2]).is_err());
    }
}
