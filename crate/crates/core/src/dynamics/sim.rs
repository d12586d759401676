use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::{make_synthetic_dataset, Dataset};
use super::network::{gram, loss, loss_gradient, pseudo_inverse};
use crate::error::{Error, Result};
use crate::model::{Architecture, ArchitectureConfig};

/// Geometry of a simulated flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Euclidean,
    Mirror,
    Icnn,
    NaturalGradient,
}

impl Geometry {
    /// Parameter indices carrying the mirror metric.
    pub fn mirrored(self, arch: &Architecture) -> Vec<usize> {
        match self {
            Self::Mirror => (0..arch.num_params()).collect(),
            Self::Icnn => (0..arch.layers()[0].len()).collect(),
            _ => Vec::new(),
        }
    }
}

/// Parameters of a discretized run of `μθ̈ + νθ̇ = −M∇E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub architecture: ArchitectureConfig,
    pub geometry: Geometry,
    pub mu: f64,
    pub nu: f64,
    pub delta: f64,
    pub steps: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub init_seed: u64,
    /// Scale of a standard-normal initial velocity; 0 is a cold start.
    #[serde(default)]
    pub init_velocity: f64,
}

fn default_samples() -> usize {
    16
}

impl RunSpec {
    /// `α = δ/(ν + μ/δ)`.
    pub fn alpha(&self) -> f64 {
        self.delta / (self.nu + self.mu / self.delta)
    }

    /// `β = μ/(δν + μ)`.
    pub fn beta(&self) -> f64 {
        self.mu / (self.delta * self.nu + self.mu)
    }

    /// Damping `τ = ν/μ` of the continuous momentum flow.
    pub fn tau(&self) -> Option<f64> {
        (self.mu > 0.0).then(|| self.nu / self.mu)
    }

    pub fn validate(&self) -> Result<Architecture> {
        let arch = Architecture::from_config(&self.architecture)?;
        let ok = self.delta > 0.0
            && self.mu >= 0.0
            && self.nu >= 0.0
            && self.mu + self.nu > 0.0
            && self.init_velocity >= 0.0
            && self.init_velocity.is_finite()
            && self.delta.is_finite()
            && self.mu.is_finite()
            && self.nu.is_finite();
        if !ok {
            return Err(Error::Precondition(
                "need δ > 0, μ, ν ≥ 0, μ + ν > 0 and a finite non-negative velocity scale".into(),
            ));
        }
        if self.geometry == Geometry::NaturalGradient && self.mu != 0.0 {
            return Err(Error::Precondition(
                "natural gradient runs are first order (μ = 0)".into(),
            ));
        }
        if self.geometry == Geometry::Icnn && !matches!(arch, Architecture::Relu2 { bias: true, .. }) {
            return Err(Error::IncompatibleMetric(
                "hybrid metric needs a biased relu2 network".into(),
            ));
        }
        Ok(arch)
    }
}

/// A completed run: states `θ_0..θ_K` and the loss at each.
#[derive(Clone, Debug)]
pub struct FlowRun {
    pub spec: RunSpec,
    pub arch: Architecture,
    pub dataset: Dataset,
    pub trajectory: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    /// `θ_{−1}`.
    pub previous: Vec<f64>,
}

impl FlowRun {
    /// Backward difference `(θ_k − θ_{k−1})/δ`.
    pub fn velocity(&self, k: usize) -> Vec<f64> {
        let before = if k == 0 {
            &self.previous
        } else {
            &self.trajectory[k - 1]
        };
        self.trajectory[k]
            .iter()
            .zip(before)
            .map(|(a, b)| (a - b) / self.spec.delta)
            .collect()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.spec.delta
    }
}

/// Unit-scale initial parameters: standard normal, except mirrored
/// coordinates which are uniform in `[0.5, 1.5]`.
pub fn initial_parameters(arch: &Architecture, geometry: Geometry, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mirrored = geometry.mirrored(arch);
    (0..arch.num_params())
        .map(|k| {
            if mirrored.contains(&k) {
                rng.random_range(0.5..1.5)
            } else {
                StandardNormal.sample(&mut rng)
            }
        })
        .collect()
}

fn check_finite(step: usize, what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            step,
            what: what.into(),
        })
    }
}

/// `M_k∇E(θ_k)`, with the mirror metric evaluated at
/// `μ(θ_k − θ_{k−1})/δ + νθ_k`.
fn preconditioned(
    spec: &RunSpec,
    arch: &Architecture,
    mirrored: &[usize],
    data: &Dataset,
    prev: &[f64],
    cur: &[f64],
) -> Result<Vec<f64>> {
    let grad = loss_gradient(arch, cur, data)?;
    Ok(match spec.geometry {
        Geometry::Euclidean => grad,
        Geometry::Mirror | Geometry::Icnn => {
            let mut g = grad;
            for &k in mirrored {
                g[k] *= spec.mu * (cur[k] - prev[k]) / spec.delta + spec.nu * cur[k];
            }
            g
        }
        Geometry::NaturalGradient => {
            let h = gram(arch, cur, data)?;
            (pseudo_inverse(&h) * DVector::from_vec(grad)).as_slice().to_vec()
        }
    })
}

/// Initial velocity `v_0` with `θ_{−1} = θ_0 − δv_0`; drawn after the
/// parameters from the same seed.
pub fn initial_velocity(arch: &Architecture, geometry: Geometry, seed: u64, scale: f64) -> Vec<f64> {
    if scale == 0.0 {
        return vec![0.0; arch.num_params()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mirrored = geometry.mirrored(arch);
    for k in 0..arch.num_params() {
        if mirrored.contains(&k) {
            let _: f64 = rng.random_range(0.5..1.5);
        } else {
            let _: f64 = StandardNormal.sample(&mut rng);
        }
    }
    (0..arch.num_params())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect()
}

/// Runs `θ_{k+1} = θ_k − αM_k∇E(θ_k) + β(θ_k − θ_{k−1})`; with
/// `init_velocity = 0` this is a cold start (`θ_{−1} = θ_0`).
pub fn simulate_flow(spec: &RunSpec) -> Result<FlowRun> {
    let arch = spec.validate()?;
    let nonnegative = spec.geometry == Geometry::Mirror;
    let dataset = make_synthetic_dataset(&arch, spec.samples, spec.data_seed, nonnegative)?;
    let theta0 = initial_parameters(&arch, spec.geometry, spec.init_seed);
    let v0 = initial_velocity(&arch, spec.geometry, spec.init_seed, spec.init_velocity);
    let previous = theta0.iter().zip(&v0).map(|(t, v)| t - spec.delta * v).collect();
    simulate_between(spec, arch, dataset, previous, theta0)
}

/// Cold start from given data and initial parameters.
pub fn simulate_from(spec: &RunSpec, arch: Architecture, dataset: Dataset, theta0: Vec<f64>) -> Result<FlowRun> {
    simulate_between(spec, arch, dataset, theta0.clone(), theta0)
}

/// Runs the recursion from `θ_{−1} = previous` and `θ_0 = theta0`.
pub fn simulate_between(
    spec: &RunSpec,
    arch: Architecture,
    dataset: Dataset,
    previous: Vec<f64>,
    theta0: Vec<f64>,
) -> Result<FlowRun> {
    spec.validate()?;
    for v in [&previous, &theta0] {
        if v.len() != arch.num_params() {
            return Err(Error::DimensionMismatch {
                expected: arch.num_params(),
                got: v.len(),
            });
        }
    }
    let (alpha, beta) = (spec.alpha(), spec.beta());
    let mirrored = spec.geometry.mirrored(&arch);
    if let Some(&k) = mirrored.iter().find(|&&k| theta0[k] <= 0.0) {
        return Err(Error::PositivityViolation { step: 0, coord: k });
    }
    let mut trajectory = vec![theta0.clone()];
    let mut losses = vec![loss(&arch, &theta0, &dataset)?];
    check_finite(0, "loss", &losses)?;
    let mut prev = previous.clone();
    let mut cur = theta0;
    for step in 1..=spec.steps {
        let dir = preconditioned(spec, &arch, &mirrored, &dataset, &prev, &cur)?;
        let next: Vec<f64> = (0..cur.len())
            .map(|k| cur[k] - alpha * dir[k] + beta * (cur[k] - prev[k]))
            .collect();
        check_finite(step, "parameters", &next)?;
        if let Some(&k) = mirrored.iter().find(|&&k| next[k] <= 0.0) {
            return Err(Error::PositivityViolation { step, coord: k });
        }
        let l = loss(&arch, &next, &dataset)?;
        check_finite(step, "loss", &[l])?;
        losses.push(l);
        trajectory.push(next.clone());
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(FlowRun {
        spec: spec.clone(),
        arch,
        dataset,
        trajectory,
        losses,
        previous,
    })
}

/// One step `θ′ = θ − δ·H^†∇E(θ)`.
pub fn natural_gradient_step(arch: &Architecture, theta: &[f64], data: &Dataset, delta: f64) -> Result<Vec<f64>> {
    let grad = DVector::from_vec(loss_gradient(arch, theta, data)?);
    let step = pseudo_inverse(&gram(arch, theta, data)?) * grad;
    let out: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t - delta * s).collect();
    check_finite(1, "parameters", &out)?;
    Ok(out)
}
