//! The `conslaw` command line: job configuration, execution and report
//! output. Exit status is 0 when every asserted equality or tolerance holds,
//! 1 on a mismatch or runtime failure, and 2 on a configuration error.

pub mod config;
pub mod run;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

pub use config::{Cli, Command, Format, FreeFlowConfig, JobConfig, SimulationConfig};
pub use run::{run_job, Mismatch, Outcome, Report, Status};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] conslaw::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.into())
    }
}

fn csv_body(report: &Report) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match &report.result {
        None => {}
        Some(Outcome::Simulate(s)) => return run::drift_csv(s),
        Some(Outcome::Solve(s)) => {
            w.write_record(["index", "law"])?;
            for (i, l) in s.laws.iter().enumerate() {
                w.write_record([i.to_string(), l.text.clone()])?;
            }
        }
        Some(Outcome::Count(c)) => {
            w.write_record(["round", "trace_rank"])?;
            for (i, t) in c.trace.iter().enumerate() {
                w.write_record([i.to_string(), t.to_string()])?;
            }
        }
        Some(Outcome::ClosedForm(c)) => {
            w.write_record(["id", "conserved", "law"])?;
            for f in &c.families {
                w.write_record([f.id.clone(), f.conserved.to_string(), f.text.clone()])?;
            }
        }
        Some(Outcome::Compare(c)) => {
            w.write_record(["source", "count"])?;
            w.write_record(["solver".to_string(), c.solver.count.to_string()])?;
            w.write_record(["lie".to_string(), c.lie.count.to_string()])?;
            if let Some(f) = c.formula {
                w.write_record(["formula".to_string(), f.to_string()])?;
            }
            w.write_record(["closed_form_rank".to_string(), c.closed_form.rank.to_string()])?;
        }
        Some(Outcome::FreeFlow(f)) => {
            w.write_record(["seed", "max_dev_a", "max_dev_b", "max_dev_closed_form"])?;
            for r in &f.runs {
                w.write_record([
                    r.seed.to_string(),
                    r.check.max_dev_a.to_string(),
                    r.check.max_dev_b.to_string(),
                    r.check.max_dev_closed_form.to_string(),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn json_body<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Run(e.into()))?;
    out.push(b'\n');
    Ok(out)
}

fn write_to(path: Option<&Path>, body: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().lock().write_all(body)?,
    }
    Ok(())
}

/// Writes a report where its job asks. A JSON simulation report written to
/// a file gets its drift CSV next to it.
pub fn emit(report: &mut Report, path: Option<&Path>) -> Result<(), CliError> {
    match report.config.format {
        Format::Csv => {
            write_to(path, &csv_body(report)?)?;
            if report.status != Status::Ok {
                eprintln!("{}", serde_json::to_string(&report.mismatch).expect("serializable"));
            }
        }
        Format::Json => {
            if let (Some(p), Some(Outcome::Simulate(s))) = (path, &mut report.result) {
                let csv_path = p.with_extension("csv");
                std::fs::write(&csv_path, run::drift_csv(s)?)?;
                s.drift_csv = Some(csv_path);
            }
            write_to(path, &json_body(report)?)?;
        }
    }
    Ok(())
}

/// Runs every job and writes the reports; returns the exit status.
pub fn execute(cli: &Cli) -> i32 {
    let jobs = match cli.jobs() {
        Ok(j) => j,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    if jobs.len() == 1 {
        let job = &jobs[0];
        return match run_job(job).and_then(|mut r| {
            emit(&mut r, job.output.as_deref())?;
            Ok(r)
        }) {
            Ok(r) => r.exit_code(),
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        };
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let results: Vec<Result<Report, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let mut r = run_job(job)?;
                if let Some(p) = &job.output {
                    emit(&mut r, Some(p))?;
                }
                Ok(r)
            })
            .collect()
    });
    let mut code = 0;
    let mut entries = Vec::new();
    for r in results {
        match r {
            Ok(r) => {
                code = code.max(r.exit_code());
                entries.push(serde_json::to_value(&r).expect("serializable"));
            }
            Err(e) => {
                code = code.max(e.exit_code());
                entries.push(serde_json::json!({ "status": "config_error", "error": e.to_string() }));
            }
        }
    }
    match json_body(&entries).and_then(|b| write_to(cli.out.as_deref(), &b)) {
        Ok(()) => code,
        Err(e) => {
            eprintln!("{e}");
            1
        }
    }
}
