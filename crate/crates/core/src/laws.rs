//! Closed-form conservation-law families and law-count formulas.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::FlowSpec;
use crate::model::{Architecture, FlowMode};
use crate::ratpoly::{ExactScalar, Polynomial, PolynomialJson, TimeCoordinate, VariableSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    BalancednessGf,
    ReluGf,
    PcaMf,
    #[serde(rename = "pca_mf_extra_11")]
    PcaMfExtra11,
    NmfGf,
    IcnnGf,
}

/// One closed-form law with the indices it was generated from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LawFamily {
    pub name: FamilyName,
    /// Layer pair `(i, i+1)` (1-based) or hidden neuron (1-based).
    pub index: usize,
    /// `(k, l)` (1-based) of the skew or one-hot matrix, when used.
    pub a: Option<(usize, usize)>,
    pub realization: Polynomial,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LawFamilyJson {
    pub family: FamilyName,
    pub i: usize,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<[usize; 2]>,
    pub law: PolynomialJson,
}

impl FamilyName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BalancednessGf => "balancedness_gf",
            Self::ReluGf => "relu_gf",
            Self::PcaMf => "pca_mf",
            Self::PcaMfExtra11 => "pca_mf_extra_11",
            Self::NmfGf => "nmf_gf",
            Self::IcnnGf => "icnn_gf",
        }
    }
}

impl LawFamily {
    /// `family[i]` or `family[i](k,l)`.
    pub fn id(&self) -> String {
        match self.a {
            Some((k, l)) => format!("{}[{}]({k},{l})", self.name.as_str(), self.index),
            None => format!("{}[{}]", self.name.as_str(), self.index),
        }
    }

    pub fn to_json(&self) -> LawFamilyJson {
        LawFamilyJson {
            family: self.name,
            i: self.index,
            a: self.a.map(|(k, l)| [k, l]),
            law: self.realization.to_json(),
        }
    }
}

/// Variable accessors for the parameter and velocity blocks of `space`.
struct Vars<'a> {
    space: &'a Arc<VariableSpace>,
}

impl Vars<'_> {
    fn p(&self, layer: usize, row: usize, col: usize) -> Polynomial {
        let s = self.space;
        Polynomial::var(s, s.param(s.entry(layer, row, col)))
    }

    fn d(&self, layer: usize, row: usize, col: usize) -> Polynomial {
        let s = self.space;
        Polynomial::var(s, s.velocity(s.entry(layer, row, col)).expect("velocity block"))
    }
}

fn check_layers(arch: &Architecture, space: &VariableSpace) -> Result<()> {
    let want = arch.layers();
    if space.layers().len() < want.len() || space.layers()[..want.len()] != want[..] {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

fn sum(space: &Arc<VariableSpace>, items: impl IntoIterator<Item = Polynomial>) -> Polynomial {
    items.into_iter().fold(Polynomial::zero(space), |acc, p| &acc + &p)
}

/// Linear: upper-triangle entries of `U_iᵀU_i − U_{i+1}U_{i+1}ᵀ` for each
/// adjacent pair. ReLU: `‖u_j‖² − ‖v_j‖²` per neuron, minus `b_j²` with bias.
pub fn balancedness_gf_laws(arch: &Architecture, space: &Arc<VariableSpace>) -> Result<Vec<LawFamily>> {
    arch.validate()?;
    check_layers(arch, space)?;
    let v = Vars { space };
    let mut out = Vec::new();
    match arch {
        Architecture::Linear { widths } => {
            for i in 0..widths.len() - 2 {
                let (rows, n, cols) = (widths[i], widths[i + 1], widths[i + 2]);
                for k in 0..n {
                    for l in k..n {
                        let left = sum(space, (0..rows).map(|a| &v.p(i, a, k) * &v.p(i, a, l)));
                        let right = sum(space, (0..cols).map(|b| &v.p(i + 1, k, b) * &v.p(i + 1, l, b)));
                        out.push(LawFamily {
                            name: FamilyName::BalancednessGf,
                            index: i + 1,
                            a: Some((k + 1, l + 1)),
                            realization: &left - &right,
                        });
                    }
                }
            }
        }
        &Architecture::Relu2 { n, m, r, bias, .. } => {
            for j in 0..r {
                let mut h =
                    &sum(space, (0..n).map(|k| v.p(0, k, j).pow(2))) - &sum(space, (0..m).map(|l| v.p(1, l, j).pow(2)));
                if bias {
                    h = &h - &v.p(2, 0, j).pow(2);
                }
                out.push(LawFamily {
                    name: FamilyName::ReluGf,
                    index: j + 1,
                    a: None,
                    realization: h,
                });
            }
        }
    }
    Ok(out)
}

/// Time factor turning the momentum families into exact laws of `flow`.
fn momentum_factor(flow: &FlowSpec, space: &Arc<VariableSpace>) -> Result<Polynomial> {
    let kind = space.time_kind();
    match flow {
        FlowSpec::Gradient => Err(Error::LawRequiresMomentum),
        FlowSpec::HeavyBall { tau } if tau.is_zero() => Ok(Polynomial::one(space)),
        FlowSpec::HeavyBall { .. } if kind == TimeCoordinate::Surrogate => Ok(Polynomial::var(space, 0)),
        FlowSpec::HeavyBall { .. } => Err(Error::InvalidFlow(
            "heavy-ball laws with τ ≠ 0 live in the surrogate space".into(),
        )),
        FlowSpec::Nesterov if kind == TimeCoordinate::Time => Ok(Polynomial::var(space, 0).pow(3)),
        FlowSpec::Nesterov => Err(Error::InvalidFlow("Nesterov laws need the time variable t".into())),
    }
}

/// Momentum laws of linear networks: for each adjacent pair and each
/// elementary skew `A = E_kl − E_lk`,
/// `factor·(⟨U̇_i, U_iA⟩ + ⟨U̇_{i+1}, AᵀU_{i+1}⟩)`, plus
/// `factor·(⟨U̇_i, U_{i+1}ᵀA⟩ + ⟨U̇_{i+1}ᵀ, U_iA⟩)` when both outer widths are 1.
/// The factor is `s` (heavy ball), `t³` (Nesterov) or 1 (`τ = 0`).
pub fn pca_momentum_laws(arch: &Architecture, flow: &FlowSpec, space: &Arc<VariableSpace>) -> Result<Vec<LawFamily>> {
    let Architecture::Linear { widths } = arch else {
        return Err(Error::InvalidArchitecture(
            "momentum families need a linear network".into(),
        ));
    };
    arch.validate()?;
    check_layers(arch, space)?;
    if !space.has_velocity() {
        return Err(Error::LawRequiresMomentum);
    }
    let factor = momentum_factor(flow, space)?;
    let v = Vars { space };
    let mut out = Vec::new();
    for i in 0..widths.len() - 2 {
        let (rows, n, cols) = (widths[i], widths[i + 1], widths[i + 2]);
        for k in 0..n {
            for l in k + 1..n {
                let first = sum(
                    space,
                    (0..rows).map(|a| &(&v.d(i, a, l) * &v.p(i, a, k)) - &(&v.d(i, a, k) * &v.p(i, a, l))),
                );
                let second = sum(
                    space,
                    (0..cols)
                        .map(|b| &(&v.d(i + 1, l, b) * &v.p(i + 1, k, b)) - &(&v.d(i + 1, k, b) * &v.p(i + 1, l, b))),
                );
                out.push(LawFamily {
                    name: FamilyName::PcaMf,
                    index: i + 1,
                    a: Some((k + 1, l + 1)),
                    realization: &factor * &(&first + &second),
                });
                if rows == 1 && cols == 1 {
                    let extra = &(&(&v.d(i, 0, l) * &v.p(i + 1, k, 0)) - &(&v.d(i, 0, k) * &v.p(i + 1, l, 0)))
                        + &(&(&v.d(i + 1, l, 0) * &v.p(i, 0, k)) - &(&v.d(i + 1, k, 0) * &v.p(i, 0, l)));
                    out.push(LawFamily {
                        name: FamilyName::PcaMfExtra11,
                        index: i + 1,
                        a: Some((k + 1, l + 1)),
                        realization: &factor * &extra,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Mirror-flow laws of `UVᵀ`: column sums `Σ_k U[k,j] − Σ_l V[l,j]`.
/// `space` must hold the linear network `[n, r, m]` (so `V = U2ᵀ`).
pub fn nmf_gf_laws(n: usize, m: usize, r: usize, space: &Arc<VariableSpace>) -> Result<Vec<LawFamily>> {
    let arch = Architecture::two_layer(n, m, r);
    arch.validate()?;
    check_layers(&arch, space)?;
    let v = Vars { space };
    Ok((0..r)
        .map(|j| LawFamily {
            name: FamilyName::NmfGf,
            index: j + 1,
            a: None,
            realization: &sum(space, (0..n).map(|k| v.p(0, k, j))) - &sum(space, (0..m).map(|l| v.p(1, j, l))),
        })
        .collect())
}

/// Hybrid-metric laws of a biased ReLU network:
/// `Σ_k U[k,j] − ½(‖v_j‖² + b_j²)`.
pub fn icnn_gf_laws(n: usize, m: usize, r: usize, space: &Arc<VariableSpace>) -> Result<Vec<LawFamily>> {
    let arch = Architecture::relu2(n, m, r, true);
    arch.validate()?;
    check_layers(&arch, space)?;
    let v = Vars { space };
    let half = ExactScalar::ratio(1, 2);
    Ok((0..r)
        .map(|j| {
            let sq = &sum(space, (0..m).map(|l| v.p(1, l, j).pow(2))) + &v.p(2, 0, j).pow(2);
            LawFamily {
                name: FamilyName::IcnnGf,
                index: j + 1,
                a: None,
                realization: &sum(space, (0..n).map(|k| v.p(0, k, j))) - &sq.scale(&half),
            }
        })
        .collect())
}

/// Generic ranks `min(r, n+m)` (gradient) and `min(r, 2(n+m))` (momentum).
pub fn generic_rank(n: usize, m: usize, r: usize, mode: FlowMode) -> usize {
    match mode {
        FlowMode::Gf => r.min(n + m),
        FlowMode::Mf => r.min(2 * (n + m)),
    }
}

/// Number of independent laws of `UVᵀ` (`U ∈ ℝ^{n×r}`, `V ∈ ℝ^{m×r}`)
/// under the Euclidean gradient or momentum flow.
pub fn predicted_counts(n: usize, m: usize, r: usize, mode: FlowMode, rank_override: Option<usize>) -> Result<usize> {
    if n == 0 || m == 0 || r == 0 {
        return Err(Error::InvalidArchitecture("widths must be ≥ 1".into()));
    }
    let rk = rank_override.unwrap_or_else(|| generic_rank(n, m, r, mode));
    if rk > r {
        return Err(Error::Precondition(format!("rank {rk} exceeds r = {r}")));
    }
    match mode {
        FlowMode::Gf => Ok(rk * (2 * r + 1 - rk) / 2),
        FlowMode::Mf if n == 1 && m == 1 && rank_override.is_none() => {
            if r >= 4 {
                Ok(4 * r - 6)
            } else {
                Err(Error::FormulaNotCovered)
            }
        }
        FlowMode::Mf => Ok(rk * (2 * r - 1).saturating_sub(rk) / 2),
    }
}

/// `N_GF − N_MF`.
pub fn gap(n: usize, m: usize, r: usize) -> Result<i64> {
    Ok(predicted_counts(n, m, r, FlowMode::Gf, None)? as i64 - predicted_counts(n, m, r, FlowMode::Mf, None)? as i64)
}

/// Dimension of the trace of the momentum Lie algebra at a generic point.
pub fn lie_dim(n: usize, m: usize, r: usize) -> Result<usize> {
    if n == 0 || m == 0 || r == 0 {
        return Err(Error::InvalidArchitecture("widths must be ≥ 1".into()));
    }
    let w = n + m;
    if n == 1 && m == 1 {
        return if r >= 4 { Ok(7) } else { Err(Error::FormulaNotCovered) };
    }
    Ok(if 2 * w <= r {
        w * (2 * w + 1) + 1
    } else {
        2 * w * r + 1 - r * (r - 1) / 2
    })
}

/// Dimension of the trace of the gradient Lie algebra at a generic point.
pub fn lie_dim_gf(n: usize, m: usize, r: usize) -> Result<usize> {
    Ok((n + m) * r - predicted_counts(n, m, r, FlowMode::Gf, None)?)
}

/// Count of the independent skew families: `(n+m)[(r−2(n+m)) + r−1]` when
/// `2(n+m) ≤ r`, otherwise `r(r−1)/2`.
pub fn skew_family_count(n: usize, m: usize, r: usize) -> usize {
    let w = n + m;
    if 2 * w <= r {
        w * ((r - 2 * w) + r - 1)
    } else {
        r * (r - 1) / 2
    }
}
