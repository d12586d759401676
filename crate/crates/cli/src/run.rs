use std::path::PathBuf;

use conslaw::dynamics::{
    evaluate_drift, free_flow_check, simulate_flow, write_drift_csv, FlowRun, FreeFlowCheck, Geometry, RunManifest,
    RunSpec,
};
use conslaw::laws::{pca_momentum_laws, LawFamilyJson};
use conslaw::lie::{generate_lie_algebra, LieBasis, LieOptions, StopReason};
use conslaw::lift::FlowSpec;
use conslaw::model::{Architecture, MetricKind};
use conslaw::ratpoly::{ExactScalar, Polynomial, PolynomialJson, TimeCoordinate, VariableSpace};
use conslaw::scenario::{FieldSystem, Scenario};
use conslaw::solver::{count_independent, solve_laws, verify_law, LawBasis, SolveOptions};
use conslaw::witness::Witness;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{Command, FreeFlowConfig, JobConfig, SimulationConfig};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Mismatch,
    Error,
}

/// One failed assertion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<&'static str>,
}

impl Mismatch {
    fn new(code: &'static str, message: String) -> Self {
        Self {
            code,
            message,
            hint: None,
        }
    }

    fn hint(mut self, hint: &'static str) -> Self {
        self.hint = Some(hint);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: Command,
    pub version: &'static str,
    pub config: JobConfig,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Outcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mismatch: Vec<Mismatch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => 0,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Solve(SolveReport),
    Count(LieReport),
    ClosedForm(ClosedFormReport),
    Compare(CompareReport),
    Simulate(SimulateReport),
    FreeFlow(FreeFlowReport),
}

#[derive(Clone, Debug, Serialize)]
pub struct LawEntry {
    pub text: String,
    pub law: PolynomialJson,
}

impl LawEntry {
    fn new(p: &Polynomial) -> Self {
        Self {
            text: p.to_string(),
            law: p.to_json(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub variables: Vec<String>,
    pub ambient: usize,
    pub degree: u32,
    pub time_degree_cap: u32,
    pub columns: usize,
    pub rows: usize,
    /// Nullspace dimension, constants included.
    pub nullity: usize,
    /// Functionally independent laws (gradient rank at the witness).
    pub count: usize,
    pub witness: Witness,
    pub laws: Vec<LawEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LieReport {
    pub ambient: usize,
    pub dim: usize,
    /// `ambient − dim`; an upper bound when `exact` is false.
    pub law_count: usize,
    pub exact: bool,
    pub stop: StopReason,
    pub iterations: usize,
    pub cap: usize,
    pub trace: Vec<usize>,
    pub basis_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula_dim: Option<usize>,
    pub witness: Witness,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyEntry {
    pub id: String,
    #[serde(flatten)]
    pub family: LawFamilyJson,
    pub text: String,
    pub conserved: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedFormReport {
    pub variables: Vec<String>,
    pub families: Vec<FamilyEntry>,
    /// Gradient rank of the families at the witness.
    pub rank: usize,
    pub witness: Witness,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverSummary {
    pub count: usize,
    pub degree: u32,
    pub time_degree_cap: u32,
    pub nullity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LieSummary {
    pub dim: usize,
    pub count: usize,
    pub exact: bool,
    pub stop: StopReason,
    pub trace: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedFormSummary {
    pub families: usize,
    pub conserved: bool,
    pub rank: usize,
    /// Rank of the families together with the solver laws.
    pub joint_rank: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub ambient: usize,
    pub solver: SolverSummary,
    pub lie: LieSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula_lie_dim: Option<usize>,
    pub closed_form: ClosedFormSummary,
    pub witness: Witness,
    pub laws: Vec<LawEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub manifest: RunManifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_csv: Option<PathBuf>,
    #[serde(skip)]
    pub run: Option<Box<(FlowRun, Vec<conslaw::dynamics::DriftReport>)>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeFlowRun {
    pub seed: u64,
    #[serde(flatten)]
    pub check: FreeFlowCheck,
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeFlowReport {
    pub tolerance: f64,
    pub max_dev_a: f64,
    pub max_dev_b: f64,
    pub runs: Vec<FreeFlowRun>,
}

/// Runs one job. `Err` is returned only for configuration errors.
pub fn run_job(job: &JobConfig) -> Result<Report, CliError> {
    let mut report = Report {
        command: job.command,
        version: VERSION,
        config: job.clone(),
        status: Status::Ok,
        result: None,
        mismatch: Vec::new(),
        error: None,
    };
    let outcome = match job.command {
        Command::Solve => solve(job).map(|(r, m)| (Outcome::Solve(r), m)),
        Command::Count => count(job).map(|(r, m)| (Outcome::Count(r), m)),
        Command::ClosedForm => closed_form(job).map(|(r, m)| (Outcome::ClosedForm(r), m)),
        Command::Compare => compare(job).map(|(r, m)| (Outcome::Compare(r), m)),
        Command::Simulate => simulate(job).map(|(r, m)| (Outcome::Simulate(r), m)),
        Command::FreeFlow => free_flow(job).map(|(r, m)| (Outcome::FreeFlow(r), m)),
    };
    match outcome {
        Ok((result, mismatch)) => {
            if !mismatch.is_empty() {
                report.status = Status::Mismatch;
            }
            report.result = Some(result);
            report.mismatch = mismatch;
        }
        Err(CliError::Run(e)) => {
            report.status = Status::Error;
            report.mismatch = vec![Mismatch::new("runtime_error", e.to_string())];
            report.error = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

type Checked<T> = Result<(T, Vec<Mismatch>), CliError>;

struct Prepared {
    scenario: Scenario,
    system: FieldSystem,
}

fn prepare(job: &JobConfig) -> Result<Prepared, CliError> {
    let scenario = job.scenario()?;
    let system = scenario.system()?;
    Ok(Prepared { scenario, system })
}

fn solve_with(job: &JobConfig, p: &Prepared) -> Result<LawBasis, CliError> {
    let (d, cap) = p.scenario.default_degree();
    let opts = SolveOptions::new(job.degree.unwrap_or(d), job.time_degree_cap.unwrap_or(cap), job.seed);
    Ok(solve_laws(&p.system.fields, &opts, &p.system.certificate)?)
}

fn lie_with(job: &JobConfig, p: &Prepared) -> Result<LieBasis, CliError> {
    let mut opts = LieOptions {
        seed: job.seed,
        ..LieOptions::default()
    };
    if let Some(cap) = job.lie_cap {
        opts.cap = cap;
    }
    Ok(generate_lie_algebra(&p.system.fields, &p.system.certificate, &opts)?)
}

fn solve(job: &JobConfig) -> Checked<SolveReport> {
    let p = prepare(job)?;
    let b = solve_with(job, &p)?;
    Ok((
        SolveReport {
            variables: p.system.space.names().to_vec(),
            ambient: p.system.ambient,
            degree: b.degree,
            time_degree_cap: b.time_degree_cap,
            columns: b.columns,
            rows: b.rows,
            nullity: b.nullity,
            count: b.independent,
            witness: b.witness.clone(),
            laws: b.laws.iter().map(LawEntry::new).collect(),
        },
        Vec::new(),
    ))
}

fn count(job: &JobConfig) -> Checked<LieReport> {
    let p = prepare(job)?;
    let lie = lie_with(job, &p)?;
    let dim = lie.dim();
    let formula_dim = p.scenario.formula_lie_dim();
    let mut mismatch = Vec::new();
    if let Some(f) = formula_dim {
        if f != dim && (lie.stop.is_exact() || dim > f) {
            mismatch.push(Mismatch::new(
                "lie_formula_mismatch",
                format!("computed dimension {dim}, formula {f}"),
            ));
        } else if f != dim {
            mismatch.push(
                Mismatch::new(
                    "lie_not_closed",
                    format!(
                        "dimension {dim} is a lower bound (stopped: {:?}), formula {f}",
                        lie.stop
                    ),
                )
                .hint("raise --lie-cap"),
            );
        }
    }
    Ok((
        LieReport {
            ambient: p.system.ambient,
            dim,
            law_count: p.system.ambient - dim,
            exact: lie.stop.is_exact(),
            stop: lie.stop,
            iterations: lie.iterations,
            cap: lie.cap,
            trace: lie.trace.clone(),
            basis_size: lie.basis.len(),
            formula_dim,
            witness: lie.witness.clone(),
            warnings: lie.warnings.clone(),
        },
        mismatch,
    ))
}

struct FamilyCheck {
    entries: Vec<FamilyEntry>,
    laws: Vec<Polynomial>,
    conserved: bool,
}

fn check_families(p: &Prepared) -> Result<FamilyCheck, CliError> {
    let families = p.scenario.closed_form(&p.system.space)?;
    let mut entries = Vec::new();
    let mut conserved = true;
    for f in &families {
        let ok = verify_law(&f.realization, &p.system.fields)?.is_none();
        conserved &= ok;
        entries.push(FamilyEntry {
            id: f.id(),
            family: f.to_json(),
            text: f.realization.to_string(),
            conserved: ok,
        });
    }
    Ok(FamilyCheck {
        entries,
        laws: families.into_iter().map(|f| f.realization).collect(),
        conserved,
    })
}

fn not_conserved(c: &FamilyCheck) -> Vec<Mismatch> {
    c.entries
        .iter()
        .filter(|e| !e.conserved)
        .map(|e| Mismatch::new("closed_form_not_conserved", format!("{} is not annihilated", e.id)))
        .collect()
}

fn closed_form(job: &JobConfig) -> Checked<ClosedFormReport> {
    let p = prepare(job)?;
    let check = check_families(&p)?;
    let witness = conslaw::witness::find_witness(&p.system.space, &p.system.certificate, job.seed)?;
    let rank = count_independent(&check.laws, &witness.point)?;
    let mismatch = not_conserved(&check);
    Ok((
        ClosedFormReport {
            variables: p.system.space.names().to_vec(),
            families: check.entries,
            rank,
            witness,
        },
        mismatch,
    ))
}

fn compare(job: &JobConfig) -> Checked<CompareReport> {
    let p = prepare(job)?;
    let basis = solve_with(job, &p)?;
    let lie = lie_with(job, &p)?;
    let check = check_families(&p)?;
    let ambient = p.system.ambient;
    let solver = basis.independent;
    let lie_dim = lie.dim();
    let lie_count = ambient - lie_dim;
    let exact = lie.stop.is_exact();
    let formula = p.scenario.formula_count();
    let rank = count_independent(&check.laws, &basis.witness.point)?;
    let joint: Vec<Polynomial> = basis.laws.iter().chain(&check.laws).cloned().collect();
    let joint_rank = count_independent(&joint, &basis.witness.point)?;

    let mut mismatch = not_conserved(&check);
    if solver > lie_count {
        mismatch.push(Mismatch::new(
            "solver_exceeds_lie",
            format!("solver found {solver} independent laws but the Lie bound is {lie_count}"),
        ));
    } else if solver < lie_count {
        let m = if exact {
            Mismatch::new(
                "solver_below_lie",
                format!("solver {solver} < Lie {lie_count} at degree {}", basis.degree),
            )
            .hint("raise degree")
        } else {
            Mismatch::new(
                "lie_not_closed",
                format!(
                    "solver {solver} < Lie bound {lie_count}; generation stopped: {:?}",
                    lie.stop
                ),
            )
            .hint("raise --lie-cap or degree")
        };
        mismatch.push(m);
    }
    if let Some(f) = formula {
        if f != solver || f != lie_count {
            mismatch.push(Mismatch::new(
                "formula_mismatch",
                format!("formula {f}, solver {solver}, Lie {lie_count}"),
            ));
        }
    }
    if joint_rank > solver {
        mismatch.push(Mismatch::new(
            "closed_form_outside_span",
            format!("closed-form families raise the rank from {solver} to {joint_rank}"),
        ));
    }
    Ok((
        CompareReport {
            ambient,
            solver: SolverSummary {
                count: solver,
                degree: basis.degree,
                time_degree_cap: basis.time_degree_cap,
                nullity: basis.nullity,
            },
            lie: LieSummary {
                dim: lie_dim,
                count: lie_count,
                exact,
                stop: lie.stop,
                trace: lie.trace.clone(),
            },
            formula,
            formula_lie_dim: p.scenario.formula_lie_dim(),
            closed_form: ClosedFormSummary {
                families: check.laws.len(),
                conserved: check.conserved,
                rank,
                joint_rank,
            },
            witness: basis.witness.clone(),
            laws: basis.laws.iter().map(LawEntry::new).collect(),
        },
        mismatch,
    ))
}

fn geometry_metric(g: Geometry) -> MetricKind {
    match g {
        Geometry::Euclidean | Geometry::NaturalGradient => MetricKind::Euclidean,
        Geometry::Mirror => MetricKind::Mirror,
        Geometry::Icnn => MetricKind::Icnn,
    }
}

/// Laws to track along a run: the geometry's gradient-flow families and,
/// for Euclidean momentum runs of linear networks, the momentum families.
fn tracked_laws(arch: &Architecture, spec: &RunSpec) -> Result<Vec<(String, Polynomial)>, CliError> {
    let gf = Scenario::new(arch.clone(), geometry_metric(spec.geometry), FlowSpec::Gradient)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut laws: Vec<(String, Polynomial)> = gf
        .closed_form(&arch.parameter_space()?)?
        .into_iter()
        .map(|f| (f.id(), f.realization))
        .collect();
    if let (Some(tau), Geometry::Euclidean, Architecture::Linear { .. }) = (spec.tau(), spec.geometry, arch) {
        let (time, flow) = if tau == 0.0 {
            (TimeCoordinate::Time, FlowSpec::heavy_ball(ExactScalar::zero())?)
        } else {
            (TimeCoordinate::Surrogate, FlowSpec::heavy_ball(ExactScalar::one())?)
        };
        let space = VariableSpace::lifted(arch.layers(), time)?;
        laws.extend(
            pca_momentum_laws(arch, &flow, &space)?
                .into_iter()
                .map(|f| (f.id(), f.realization)),
        );
    }
    Ok(laws)
}

fn run_spec(job: &JobConfig, sim: &SimulationConfig) -> Result<RunSpec, CliError> {
    let architecture = job
        .architecture
        .clone()
        .ok_or_else(|| CliError::Config("simulate needs an architecture".into()))?;
    let geometry = sim.geometry.unwrap_or(match job.metric.as_ref().map(|m| m.metric) {
        Some(MetricKind::Mirror) => Geometry::Mirror,
        Some(MetricKind::Icnn) => Geometry::Icnn,
        _ => Geometry::Euclidean,
    });
    let spec = RunSpec {
        architecture,
        geometry,
        mu: sim.mu,
        nu: sim.nu,
        delta: sim.delta,
        steps: sim.steps,
        samples: sim.samples,
        data_seed: sim.data_seed,
        init_seed: sim.init_seed.unwrap_or(job.seed),
        init_velocity: sim.init_velocity,
    };
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(spec)
}

fn simulate(job: &JobConfig) -> Checked<SimulateReport> {
    let sim = job.simulation.clone().unwrap_or_default();
    let spec = run_spec(job, &sim)?;
    let arch = spec.validate()?;
    let laws = tracked_laws(&arch, &spec)?;
    let run = simulate_flow(&spec)?;
    let drift = evaluate_drift(&run, &laws)?;
    let mut mismatch = Vec::new();
    if let Some(tol) = sim.tolerance {
        for r in drift.iter().filter(|r| r.max_abs_drift > tol) {
            mismatch.push(Mismatch::new(
                "drift_exceeds_tolerance",
                format!("{} drifted by {:e} > {tol:e}", r.law_id, r.max_abs_drift),
            ));
        }
    }
    Ok((
        SimulateReport {
            manifest: RunManifest::new(&run, &drift),
            drift_csv: None,
            run: Some(Box::new((run, drift))),
        },
        mismatch,
    ))
}

fn free_flow(job: &JobConfig) -> Checked<FreeFlowReport> {
    let cfg: FreeFlowConfig = job.free_flow.clone().unwrap_or_default();
    let ok = cfg.tau > 0.0 && cfg.t_end > 0.0 && cfg.step > 0.0 && cfg.runs > 0 && cfg.dim > 0;
    if !ok {
        return Err(CliError::Config(
            "free flow needs positive damping, horizon, step, runs and dimension".into(),
        ));
    }
    let mut runs = Vec::new();
    for seed in job.seed..job.seed + cfg.runs as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Vec<f64> { (0..cfg.dim).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let (theta, vel) = (draw(), draw());
        let check = free_flow_check(&theta, &vel, cfg.tau, cfg.t_end, cfg.step)?;
        runs.push(FreeFlowRun { seed, check });
    }
    let max_dev_a = runs.iter().map(|r| r.check.max_dev_a).fold(0.0, f64::max);
    let max_dev_b = runs.iter().map(|r| r.check.max_dev_b).fold(0.0, f64::max);
    let mut mismatch = Vec::new();
    if max_dev_a.max(max_dev_b) > cfg.tolerance {
        mismatch.push(Mismatch::new(
            "invariant_drift",
            format!("max deviation a {max_dev_a:e}, b {max_dev_b:e} > {:e}", cfg.tolerance),
        ));
    }
    Ok((
        FreeFlowReport {
            tolerance: cfg.tolerance,
            max_dev_a,
            max_dev_b,
            runs,
        },
        mismatch,
    ))
}

/// The drift CSV of a finished simulation.
pub fn drift_csv(report: &SimulateReport) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    if let Some(run) = &report.run {
        write_drift_csv(&mut buf, &run.0, &run.1)?;
    }
    Ok(buf)
}
