//! Scenario runner behind the `thermosym` command.

pub mod config;
pub mod report;
pub mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;
use thermosym::Error;

use config::UsageError;
use report::{Check, Outcome, Relation, Report};
use scenarios::*;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub scenario: String,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    Internal(anyhow::Error),
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Internal(e)
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => EXIT_USAGE,
            RunError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(e) => write!(f, "usage error: {e}"),
            RunError::Internal(e) => write!(f, "error: {e:#}"),
        }
    }
}

/// Core errors that describe bad input rather than a numerical failure.
fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter { .. } | Error::InvalidWindow { .. } | Error::InvalidDimension { .. }
    )
}

/// Resolves the config, runs the scenario and writes every output file.
/// Returns the report and the exit code it implies.
pub fn run(args: &RunArgs) -> Result<(Report, i32), RunError> {
    match args.scenario.as_str() {
        "symmetry" => run_as::<SymmetryParams>(args),
        "spectrum" => run_as::<SpectrumParams>(args),
        "degeneracy" => run_as::<DegeneracyParams>(args),
        "evolve" => run_as::<EvolveParams>(args),
        "gaussian" => run_as::<GaussianParams>(args),
        "fokker-planck" => run_as::<FokkerPlanckParams>(args),
        "hpz-breaking" => run_as::<HpzBreakingParams>(args),
        "ekert" => run_as::<EkertParams>(args),
        "coth-scan" => run_as::<CothScanParams>(args),
        other => Err(UsageError(format!("unknown scenario `{other}`; expected one of {}", NAMES.join(", "))).into()),
    }
}

fn run_as<S: Scenario>(args: &RunArgs) -> Result<(Report, i32), RunError> {
    let mut table = config::load_table(args.config.as_deref())?;
    config::apply_overrides(&mut table, &args.overrides)?;
    config::take_scenario_key(&mut table, S::NAME)?;
    let params: S = config::deserialize(table, S::NAME)?;
    params.validate()?;
    let resolved = config::resolved_toml(S::NAME, &params)?;
    let echo = serde_json::to_value(&params).map_err(anyhow::Error::from)?;

    let start = Instant::now();
    let result = params.run();
    let wall = start.elapsed().as_secs_f64();

    let (outcome, error) = match result {
        Ok(o) => (o, None),
        Err(e) if is_input_error(&e) => return Err(UsageError(e.to_string()).into()),
        Err(e) => {
            let mut o = Outcome::default();
            o.check(Check::failed("execution", S::TAG, 0.0, Relation::Equal, &e));
            (o, Some(e.to_string()))
        }
    };

    fs::create_dir_all(&args.out)
        .map_err(|e| anyhow::anyhow!("cannot create output directory {}: {e}", args.out.display()))?;
    write_outputs(&args.out, &resolved, &outcome)?;

    let pass = error.is_none() && outcome.checks.iter().all(|c| c.pass);
    let mut outputs = vec!["report.json".to_string(), "config.toml".to_string()];
    outputs.extend(outcome.tables.iter().map(|t| t.file_name.clone()));
    let report = Report {
        scenario: S::NAME.to_string(),
        paper_tag: S::TAG.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        pass,
        config: echo,
        checks: outcome.checks,
        diagnostics: outcome.diagnostics,
        outputs,
        error: error.clone(),
        wall_time_s: wall,
    };
    report.write(&args.out)?;
    let code = if error.is_some() {
        EXIT_INTERNAL
    } else if pass {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    };
    Ok((report, code))
}

fn write_outputs(dir: &Path, resolved: &str, outcome: &Outcome) -> anyhow::Result<()> {
    let path = dir.join("config.toml");
    fs::write(&path, resolved).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    for t in &outcome.tables {
        t.write(dir)?;
    }
    Ok(())
}

/// Report as JSON with the wall time removed, for comparing runs.
pub fn comparable(report: &Value) -> Value {
    let mut v = report.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("wall_time_s");
    }
    v
}
