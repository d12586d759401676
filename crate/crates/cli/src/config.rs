use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use conslaw::dynamics::Geometry;
use conslaw::lift::{FlowConfig, FlowKind};
use conslaw::model::{ArchitectureConfig, FlowMode, MetricConfig, MetricKind};
use conslaw::ratpoly::ExactScalar;
use conslaw::scenario::{Scenario, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Count,
    ClosedForm,
    Compare,
    Simulate,
    FreeFlow,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Discretized run settings for `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Defaults to the metric's geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub data_seed: u64,
    /// Defaults to the job seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_seed: Option<u64>,
    #[serde(default)]
    pub init_velocity: f64,
    /// Largest admissible absolute drift; unchecked when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Settings for `free-flow`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeFlowConfig {
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Number of random initial conditions, seeded `seed, seed+1, …`.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_free_tol")]
    pub tolerance: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            geometry: None,
            mu: 0.0,
            nu: one(),
            delta: default_delta(),
            steps: default_steps(),
            samples: default_samples(),
            data_seed: 0,
            init_seed: None,
            init_velocity: 0.0,
            tolerance: None,
        }
    }
}

impl Default for FreeFlowConfig {
    fn default() -> Self {
        Self {
            tau: one(),
            t_end: default_t_end(),
            step: default_step(),
            runs: default_runs(),
            dim: default_dim(),
            tolerance: default_free_tol(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    1e-3
}
fn default_steps() -> usize {
    1000
}
fn default_samples() -> usize {
    16
}
fn default_t_end() -> f64 {
    2.0
}
fn default_step() -> f64 {
    1e-3
}
fn default_runs() -> usize {
    10
}
fn default_dim() -> usize {
    4
}
fn default_free_tol() -> f64 {
    1e-9
}

/// One job, as read from `--config` or assembled from flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<ArchitectureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_degree_cap: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lie_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_flow: Option<FreeFlowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

impl JobConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            architecture: None,
            metric: None,
            flow: None,
            degree: None,
            time_degree_cap: None,
            seed: 0,
            lie_cap: None,
            simulation: None,
            free_flow: None,
            output: None,
            format: Format::Json,
        }
    }

    /// The scenario; a missing metric is Euclidean in the flow's mode.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let architecture = self
            .architecture
            .clone()
            .ok_or_else(|| CliError::Config(format!("{:?} needs an architecture", self.command)))?;
        let metric = self.metric.clone().unwrap_or_else(|| MetricConfig {
            metric: MetricKind::Euclidean,
            mode: match self.flow.as_ref().map(|f| f.flow) {
                Some(FlowKind::HeavyBall) | Some(FlowKind::Nesterov) => FlowMode::Mf,
                _ => FlowMode::Gf,
            },
            tau: self
                .flow
                .as_ref()
                .and_then(|f| f.tau.clone())
                .unwrap_or_else(ExactScalar::one),
        });
        let config = ScenarioConfig {
            architecture,
            metric,
            flow: self.flow.clone(),
        };
        Scenario::from_config(&config).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Parses a job file holding one job or a list of jobs.
pub fn parse_jobs(text: &str) -> serde_json::Result<Vec<JobConfig>> {
    match serde_json::from_str::<serde_json::Value>(text)? {
        v @ serde_json::Value::Array(_) => serde_json::from_value(v),
        v => Ok(vec![serde_json::from_value(v)?]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArchKind {
    Linear,
    Relu2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Mirror,
    Icnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Gf,
    Mf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FlowArg {
    Gf,
    HeavyBall,
    Nesterov,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeometryArg {
    Euclidean,
    Mirror,
    Icnn,
    NaturalGradient,
}

/// Discover, count and check conservation laws of training flows.
#[derive(Debug, Parser)]
#[command(name = "conslaw", version)]
pub struct Cli {
    /// What to run; taken from the job file when `--config` is given.
    #[arg(value_enum)]
    pub command: Option<Command>,

    /// JSON job file (one job or an array of jobs).
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub arch: Option<ArchKind>,
    /// Widths `n0,…,nq` (linear) or `n,m,r` (relu2).
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Hidden bias for relu2.
    #[arg(long)]
    pub bias: bool,
    /// Output bias for relu2.
    #[arg(long)]
    pub out_bias: bool,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Damping, as an exact rational such as `1` or `1/2`.
    #[arg(long)]
    pub tau: Option<ExactScalar>,
    /// Defaults to gf or heavy ball according to `--mode`.
    #[arg(long, value_enum)]
    pub flow: Option<FlowArg>,
    /// Total degree of the law ansatz.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Largest power of the time-like variable in the ansatz.
    #[arg(long)]
    pub time_degree_cap: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bracket rounds before Lie generation gives up.
    #[arg(long)]
    pub lie_cap: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for a job list.
    #[arg(long)]
    pub jobs: Option<usize>,

    #[arg(long, value_enum, help_heading = "Simulation")]
    pub geometry: Option<GeometryArg>,
    #[arg(long, help_heading = "Simulation")]
    pub mu: Option<f64>,
    #[arg(long, help_heading = "Simulation")]
    pub nu: Option<f64>,
    #[arg(long, help_heading = "Simulation")]
    pub delta: Option<f64>,
    #[arg(long, help_heading = "Simulation")]
    pub steps: Option<usize>,
    #[arg(long, help_heading = "Simulation")]
    pub samples: Option<usize>,
    #[arg(long, help_heading = "Simulation")]
    pub data_seed: Option<u64>,
    #[arg(long, help_heading = "Simulation")]
    pub init_velocity: Option<f64>,
    /// Drift (simulate) or invariant deviation (free-flow) bound.
    #[arg(long)]
    pub tolerance: Option<f64>,

    #[arg(long, help_heading = "Free flow")]
    pub damping: Option<f64>,
    #[arg(long, help_heading = "Free flow")]
    pub t_end: Option<f64>,
    #[arg(long, help_heading = "Free flow")]
    pub step: Option<f64>,
    #[arg(long, help_heading = "Free flow")]
    pub runs: Option<usize>,
    #[arg(long, help_heading = "Free flow")]
    pub dim: Option<usize>,
}

impl Cli {
    fn has_inline_job(&self) -> bool {
        self.arch.is_some()
            || self.dims.is_some()
            || self.bias
            || self.out_bias
            || self.metric.is_some()
            || self.mode.is_some()
            || self.tau.is_some()
            || self.flow.is_some()
            || self.degree.is_some()
            || self.time_degree_cap.is_some()
            || self.seed.is_some()
            || self.lie_cap.is_some()
            || self.geometry.is_some()
            || self.mu.is_some()
            || self.nu.is_some()
            || self.delta.is_some()
            || self.steps.is_some()
            || self.samples.is_some()
            || self.data_seed.is_some()
            || self.init_velocity.is_some()
            || self.tolerance.is_some()
            || self.damping.is_some()
            || self.t_end.is_some()
            || self.step.is_some()
            || self.runs.is_some()
            || self.dim.is_some()
    }

    /// The jobs to run. `--out` and `--format` override the job file.
    pub fn jobs(&self) -> Result<Vec<JobConfig>, CliError> {
        let mut jobs = match &self.config {
            Some(path) => {
                if self.has_inline_job() {
                    return Err(CliError::Config(
                        "--config cannot be combined with inline job flags".into(),
                    ));
                }
                let text =
                    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let mut jobs = parse_jobs(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                if let Some(c) = self.command {
                    if jobs.len() != 1 {
                        return Err(CliError::Config("a command override needs a single job".into()));
                    }
                    jobs[0].command = c;
                }
                jobs
            }
            None => vec![self.inline_job()?],
        };
        if jobs.is_empty() {
            return Err(CliError::Config("empty job list".into()));
        }
        let single = jobs.len() == 1;
        for j in &mut jobs {
            if let (Some(out), true) = (&self.out, single) {
                j.output = Some(out.clone());
            }
            if let Some(f) = self.format {
                j.format = f;
            }
        }
        if jobs.len() > 1 && jobs.iter().any(|j| j.format == Format::Csv) {
            return Err(CliError::Config("job lists report in JSON only".into()));
        }
        Ok(jobs)
    }

    fn inline_job(&self) -> Result<JobConfig, CliError> {
        let command = self
            .command
            .ok_or_else(|| CliError::Config("missing command (or --config)".into()))?;
        let mut job = JobConfig::new(command);
        job.seed = self.seed.unwrap_or(0);
        job.degree = self.degree;
        job.time_degree_cap = self.time_degree_cap;
        job.lie_cap = self.lie_cap;
        if let Some(kind) = self.arch {
            let dims = self
                .dims
                .clone()
                .ok_or_else(|| CliError::Config("--arch needs --dims".into()))?;
            job.architecture = Some(ArchitectureConfig {
                kind: match kind {
                    ArchKind::Linear => "linear",
                    ArchKind::Relu2 => "relu2",
                }
                .into(),
                dims,
                bias: self.bias,
                out_bias: self.out_bias,
            });
        } else if self.dims.is_some() {
            return Err(CliError::Config("--dims needs --arch".into()));
        }
        let flow = self.flow.map(|f| FlowConfig {
            flow: match f {
                FlowArg::Gf => FlowKind::Gf,
                FlowArg::HeavyBall => FlowKind::HeavyBall,
                FlowArg::Nesterov => FlowKind::Nesterov,
            },
            tau: if f == FlowArg::HeavyBall {
                self.tau.clone()
            } else {
                None
            },
        });
        if self.metric.is_some() || self.mode.is_some() || self.tau.is_some() {
            let mode = match self.mode {
                Some(ModeArg::Mf) => FlowMode::Mf,
                Some(ModeArg::Gf) => FlowMode::Gf,
                None => match flow.as_ref().map(|f| f.flow) {
                    Some(FlowKind::HeavyBall) | Some(FlowKind::Nesterov) => FlowMode::Mf,
                    _ => FlowMode::Gf,
                },
            };
            job.metric = Some(MetricConfig {
                metric: match self.metric.unwrap_or(MetricArg::Euclidean) {
                    MetricArg::Euclidean => MetricKind::Euclidean,
                    MetricArg::Mirror => MetricKind::Mirror,
                    MetricArg::Icnn => MetricKind::Icnn,
                },
                mode,
                tau: self.tau.clone().unwrap_or_else(ExactScalar::one),
            });
        }
        job.flow = flow;
        if command == Command::Simulate {
            let d = SimulationConfig::default();
            job.simulation = Some(SimulationConfig {
                geometry: self.geometry.map(|g| match g {
                    GeometryArg::Euclidean => Geometry::Euclidean,
                    GeometryArg::Mirror => Geometry::Mirror,
                    GeometryArg::Icnn => Geometry::Icnn,
                    GeometryArg::NaturalGradient => Geometry::NaturalGradient,
                }),
                mu: self.mu.unwrap_or(d.mu),
                nu: self.nu.unwrap_or(d.nu),
                delta: self.delta.unwrap_or(d.delta),
                steps: self.steps.unwrap_or(d.steps),
                samples: self.samples.unwrap_or(d.samples),
                data_seed: self.data_seed.unwrap_or(d.data_seed),
                init_seed: None,
                init_velocity: self.init_velocity.unwrap_or(d.init_velocity),
                tolerance: self.tolerance,
            });
        }
        if command == Command::FreeFlow {
            let d = FreeFlowConfig::default();
            job.free_flow = Some(FreeFlowConfig {
                tau: self.damping.unwrap_or(d.tau),
                t_end: self.t_end.unwrap_or(d.t_end),
                step: self.step.unwrap_or(d.step),
                runs: self.runs.unwrap_or(d.runs),
                dim: self.dim.unwrap_or(d.dim),
                tolerance: self.tolerance.unwrap_or(d.tolerance),
            });
        }
        Ok(job)
    }
}
