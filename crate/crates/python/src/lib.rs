use std::path::PathBuf;

use gridcell::cli::{execute, write_artifacts, CommandKind, Common, RunConfig, DEFAULT_CONFIG, DEFAULT_PROFILES};
use gridcell::geometry::{self, CoverageInputs};
use gridcell::policy::{run_policy, Outlook, PurchaseRule};
use gridcell::scenario::{load_profiles, parse_profiles_csv};
use gridcell::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(gridcell_py, InfeasibleLoadError, PyException);
create_exception!(gridcell_py, BudgetExceededError, PyException);

fn to_py(err: Error) -> PyErr {
    let msg = err.to_string();
    match err {
        Error::InfeasibleLoad { .. } => InfeasibleLoadError::new_err(msg),
        Error::BudgetExceeded { .. } => BudgetExceededError::new_err(msg),
        Error::Io(_) => PyOSError::new_err(msg),
        Error::Parse { .. } | Error::Validation(_) | Error::Domain(_) | Error::PreconditionViolation(_) => {
            PyValueError::new_err(msg)
        }
        _ => PyRuntimeError::new_err(msg),
    }
}

fn config(overrides: Option<Vec<String>>) -> PyResult<RunConfig> {
    RunConfig::from_toml(DEFAULT_CONFIG, &overrides.unwrap_or_default()).map_err(to_py)
}

/// Analytic success probability at active probability `rho` and MT density `lambda_m`.
#[pyfunction]
#[pyo3(signature = (rho, lambda_m, overrides=None))]
fn success_probability(rho: f64, lambda_m: f64, overrides: Option<Vec<String>>) -> PyResult<f64> {
    let cfg = config(overrides)?;
    let inp = CoverageInputs::new(rho, lambda_m).map_err(to_py)?;
    geometry::success_probability(&cfg.network, &inp).map_err(to_py)
}

/// Smallest active probability meeting the outage target.
#[pyfunction]
#[pyo3(signature = (lambda_m, overrides=None))]
fn rho_min(lambda_m: f64, overrides: Option<Vec<String>>) -> PyResult<f64> {
    let cfg = config(overrides)?;
    geometry::rho_min(&cfg.network, lambda_m).map_err(to_py)
}

/// Purchase schedule over a profile file (built-in 24-hour profile by default).
#[pyfunction]
#[pyo3(signature = (profiles=None, rule="suboptimal", overrides=None))]
fn schedule<'py>(
    py: Python<'py>,
    profiles: Option<PathBuf>,
    rule: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(overrides)?;
    let rule: PurchaseRule = rule.parse().map_err(to_py)?;
    let rows = match profiles {
        Some(path) => load_profiles(&path),
        None => parse_profiles_csv(DEFAULT_PROFILES),
    }
    .map_err(to_py)?;
    let outlook = Outlook::from_profiles(&cfg.network, &rows, cfg.lambda_m_all).map_err(to_py)?;
    let s = run_policy(&cfg.network, &outlook, rule).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t", rows.iter().map(|p| p.t).collect::<Vec<_>>())?;
    out.set_item("rho", s.rho)?;
    out.set_item("g", s.g)?;
    out.set_item("storage", s.storage)?;
    out.set_item("e_min", outlook.e_min())?;
    out.set_item("total_cost", s.total_cost)?;
    Ok(out)
}

/// Runs a batch command and writes its tables into `out`; returns the file names.
#[pyfunction]
#[pyo3(signature = (command, out, seed=0, config=None, profiles=None, overrides=None))]
fn run(
    command: &str,
    out: PathBuf,
    seed: u64,
    config: Option<PathBuf>,
    profiles: Option<PathBuf>,
    overrides: Option<Vec<String>>,
) -> PyResult<Vec<String>> {
    let kind = match command {
        "analyze" => CommandKind::Analyze,
        "schedule" => CommandKind::Schedule,
        "oracle" => CommandKind::Oracle,
        "errors" => CommandKind::Errors,
        "compare" => CommandKind::Compare,
        other => return Err(PyValueError::new_err(format!("unknown command '{other}'"))),
    };
    let common = Common { config, profiles, seed, out, overrides: overrides.unwrap_or_default() };
    let artifacts = execute(kind, &common).map_err(to_py)?;
    write_artifacts(&common.out, &artifacts).map_err(to_py)?;
    Ok(artifacts.into_iter().map(|(name, _)| name).collect())
}

#[pymodule]
pub fn gridcell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfeasibleLoadError", m.py().get_type::<InfeasibleLoadError>())?;
    m.add("BudgetExceededError", m.py().get_type::<BudgetExceededError>())?;
    m.add_function(wrap_pyfunction!(success_probability, m)?)?;
    m.add_function(wrap_pyfunction!(rho_min, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
