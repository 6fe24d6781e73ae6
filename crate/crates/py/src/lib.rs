//! Python bindings for the solver, the potential checks and the CLI driver.

use std::collections::BTreeMap;
use std::path::PathBuf;

use hvi_core::assembly::{estimate_coercivity, ProblemData};
use hvi_core::cli::{describe_potential, run_file, Command};
use hvi_core::mesh::Mesh;
use hvi_core::potentials::{available_ids, PotentialSpec};
use hvi_core::solver::{solve_dirichlet, solve_hvi, solve_robin, solve_robin_lumped, solve_vi_convex, SolverOptions};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Discrete solution on the structured unit-square mesh.
#[pyclass(frozen, get_all)]
struct Solution {
    x: Vec<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
    v_norm: f64,
    iterations: usize,
    converged: bool,
    /// Largest certificate residual; `None` for the linear problems.
    certificate_max: Option<f64>,
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        let cert = self.certificate_max.map_or("None".to_string(), |c| format!("{c:e}"));
        let converged = if self.converged { "True" } else { "False" };
        format!("Solution(vertices={}, converged={converged}, iterations={}, certificate_max={cert})", self.u.len(), self.iterations)
    }
}

/// Solves on `unit_square(n)` with constant data.
///
/// `problem` is one of `hvi`, `convex_vi`, `robin`, `robin_lumped`, `dirichlet`.
#[pyfunction]
#[pyo3(signature = (n, alpha, b, g=0.0, q=0.0, potential="quadratic", params=None, problem="hvi", seed=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    n: usize,
    alpha: f64,
    b: f64,
    g: f64,
    q: f64,
    potential: &str,
    params: Option<BTreeMap<String, f64>>,
    problem: &str,
    seed: Option<u64>,
) -> PyResult<Solution> {
    let mesh = Mesh::unit_square(n).map_err(value_error)?;
    let data = ProblemData::constant(&mesh, g, q, b, alpha).map_err(value_error)?;
    let spec = || PotentialSpec::from_id(potential, b, &params.clone().unwrap_or_default()).map_err(value_error);
    let opts = SolverOptions { seed, ..SolverOptions::default() };
    let report = match problem {
        "hvi" => solve_hvi(&mesh, &data, &spec()?, &opts),
        "convex_vi" => solve_vi_convex(&mesh, &data, &spec()?, &opts),
        "robin" => solve_robin(&mesh, &data),
        "robin_lumped" => solve_robin_lumped(&mesh, &data),
        "dirichlet" => solve_dirichlet(&mesh, &data),
        other => return Err(value_error(format!("unknown problem '{other}'"))),
    }
    .map_err(value_error)?;
    Ok(Solution {
        x: mesh.vertices().iter().map(|p| p[0]).collect(),
        y: mesh.vertices().iter().map(|p| p[1]).collect(),
        v_norm: report.solution.v_norm,
        u: report.solution.values,
        iterations: report.iterations,
        converged: report.converged,
        certificate_max: report.certificate.map(|c| c.max()),
    })
}

/// `(m_a, gamma_norm)` on `unit_square(n)`.
#[pyfunction]
fn coercivity(n: usize) -> PyResult<(f64, f64)> {
    let mesh = Mesh::unit_square(n).map_err(value_error)?;
    let est = estimate_coercivity(&mesh).map_err(value_error)?;
    Ok((est.m_a, est.gamma_norm))
}

/// `(consistent, report_text)` for a potential.
#[pyfunction]
#[pyo3(signature = (id, b=1.0, params=None))]
fn check_potential(id: &str, b: f64, params: Option<BTreeMap<String, f64>>) -> PyResult<(bool, String)> {
    let d = describe_potential(id, &params.unwrap_or_default(), b).map_err(value_error)?;
    Ok((d.consistent, d.text))
}

#[pyfunction]
fn potentials() -> Vec<&'static str> {
    available_ids()
}

/// Runs a config file like the `hvi` binary; returns the exit status.
#[pyfunction]
#[pyo3(signature = (command, config, out=None))]
fn run(command: &str, config: PathBuf, out: Option<PathBuf>) -> PyResult<i32> {
    let command = match command {
        "solve" => Command::Solve,
        "experiment" => Command::Experiment,
        "check-potential" => Command::CheckPotential,
        other => return Err(value_error(format!("unknown command '{other}'"))),
    };
    Ok(run_file(command, &config, out.as_deref()).status)
}

#[pymodule]
fn hvi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(coercivity, m)?)?;
    m.add_function(wrap_pyfunction!(check_potential, m)?)?;
    m.add_function(wrap_pyfunction!(potentials, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
