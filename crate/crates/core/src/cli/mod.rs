//! Batch front-end: reads a run configuration, dispatches solves, experiments
//! and potential checks, and writes deterministic output files.
//!
//! Exit status: 0 when every verdict passes and every solve is certified, 1
//! when a verdict or certificate fails, 2 on configuration, input or solver
//! errors. Any nonzero status comes with `error.json` in the output directory.

pub mod config;
pub mod expr;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use crate::assembly::{BoundaryDatum, Flux, ProblemData};
use crate::mesh::Mesh;
use crate::potentials::{
    check_growth, check_hhh, check_sign_condition, check_strict_condition, estimate_relaxed_monotonicity,
    hhh_gate, pair_grid, CheckReport, GrowthReport, HhhGate, PotentialError, PotentialSpec, RelaxedMonotonicity,
    SampleGrid, BREAKPOINT_OFFSET, DEFAULT_C_GRID,
};
use crate::solver::{
    solve_dirichlet, solve_hvi, solve_robin, solve_robin_lumped, solve_vi_convex, SolveReport, SolverError,
};
use crate::verification::{
    bump_sequence, refinement_study, verify_alpha_convergence, verify_comparison, verify_continuous_dependence,
    verify_linear_theorem, verify_monotonicity, ConvergenceOptions, ExperimentOptions, ExperimentReport,
    RefinementProblem, RefinementSetup, VerificationError, DEFAULT_ALPHAS,
};

pub use config::{
    parse_config, Command, ConfigError, ConfigErrors, ExperimentKind, MeshSpec, RefinementKind, RunConfig, SolveProblem,
};
pub use expr::Expr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const ERROR_FILE: &str = "error.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration:\n{0}")]
    Config(ConfigErrors),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("mesh {path}: {message}")]
    Mesh { path: String, message: String },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Io { .. } => "io",
            RunError::Mesh { .. } => "mesh",
            RunError::Potential(_) => "potential",
            RunError::Problem(_) => "problem",
            RunError::Solver(_) => "solver",
            RunError::Verification(_) => "verification",
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "status": "error", "kind": self.kind(), "message": self.to_string() });
        match self {
            RunError::Config(errs) => {
                v["errors"] = errs.0.iter().map(|e| json!({ "line": e.line, "key": e.key, "message": e.message })).collect();
            }
            RunError::Io { path, .. } => v["path"] = json!(path.display().to_string()),
            RunError::Mesh { path, .. } => v["path"] = json!(path),
            _ => {}
        }
        v
    }

    fn missing(key: &str, what: &str) -> Self {
        RunError::Config(ConfigErrors(vec![ConfigError { line: 0, key: key.into(), message: format!("required {what}") }]))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io { path: path.to_path_buf(), message: e.to_string() }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub status: i32,
    /// Files written, in order.
    pub files: Vec<PathBuf>,
    /// One-line human summary.
    pub message: String,
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let stale = dir.join(ERROR_FILE);
        if stale.exists() {
            fs::remove_file(&stale).map_err(|e| io_error(&stale, e))?;
        }
        Ok(Output { dir: dir.to_path_buf(), files: vec![] })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

fn write_error_file(dir: &Path, value: &serde_json::Value) -> Option<PathBuf> {
    fs::create_dir_all(dir).ok()?;
    let path = dir.join(ERROR_FILE);
    let text = serde_json::to_string_pretty(value).ok()? + "\n";
    fs::write(&path, text).ok()?;
    Some(path)
}

fn failed(dir: &Path, err: &RunError, mut files: Vec<PathBuf>) -> RunOutcome {
    files.extend(write_error_file(dir, &err.to_json()));
    RunOutcome { status: EXIT_ERROR, files, message: err.to_string() }
}

/// Reads, parses and runs a configuration file. Relative paths in the file are
/// taken relative to its directory. `out` overrides `output.dir`.
pub fn run_file(command: Command, config_path: &Path, out: Option<&Path>) -> RunOutcome {
    let fallback = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => return failed(&fallback, &io_error(config_path, e), vec![]),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errs) => return failed(&fallback, &RunError::Config(errs), vec![]),
    };
    if let Some(c) = cfg.command {
        if c != command {
            let err = ConfigError {
                line: text.lines().position(|l| l.trim_start().starts_with("command")).map_or(0, |i| i + 1),
                key: "command".into(),
                message: format!("config is for '{}' but '{}' was invoked", c.as_str(), command.as_str()),
            };
            return failed(&fallback, &RunError::Config(ConfigErrors(vec![err])), vec![]);
        }
    }
    cfg.command = Some(command);
    cfg.resolve_paths(config_path.parent().unwrap_or(Path::new(".")));
    let dir = match (out, &cfg.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => return failed(&fallback, &RunError::missing("output.dir", "output directory (--out or output.dir)"), vec![]),
    };
    run(&cfg, &dir)
}

/// Executes a parsed configuration, writing results into `out`.
pub fn run(config: &RunConfig, out: &Path) -> RunOutcome {
    let mut output = match Output::new(out) {
        Ok(o) => o,
        Err(e) => return failed(out, &e, vec![]),
    };
    let result = match config.command {
        Some(Command::Solve) => run_solve(config, &mut output),
        Some(Command::Experiment) => run_experiment(config, &mut output),
        Some(Command::CheckPotential) => run_check(config, &mut output),
        None => Err(RunError::missing("command", "command")),
    };
    match result {
        Ok((true, message)) => RunOutcome { status: EXIT_OK, files: output.files, message },
        Ok((false, message)) => {
            let v = json!({ "status": "fail", "kind": "verdict", "message": message });
            let mut files = output.files;
            files.extend(write_error_file(out, &v));
            RunOutcome { status: EXIT_VERDICT, files, message }
        }
        Err(e) => failed(out, &e, output.files),
    }
}

fn load_mesh(config: &RunConfig) -> Result<Mesh, RunError> {
    match &config.mesh {
        None => Err(RunError::missing("mesh.n", "mesh (mesh.n or mesh.file)")),
        Some(MeshSpec::UnitSquare(n)) => {
            Mesh::unit_square(*n).map_err(|e| RunError::Mesh { path: format!("unit_square({n})"), message: e.to_string() })
        }
        Some(MeshSpec::File(path)) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            Mesh::from_text(&text).map_err(|e| RunError::Mesh { path: path.display().to_string(), message: e.to_string() })
        }
    }
}

/// Problem data on `mesh`: `g` and `q` evaluated at the vertices.
fn build_data(config: &RunConfig, mesh: &Mesh, alpha: f64) -> Result<ProblemData, RunError> {
    let b = config.b.as_ref().ok_or_else(|| RunError::missing("problem.b", "boundary datum"))?;
    let nodal = |e: &Expr| -> Vec<f64> { mesh.vertices().iter().map(|p| e.eval(p[0], p[1])).collect() };
    let g = nodal(&config.g);
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(RunError::Problem(format!("problem.g is not finite at vertex {i}")));
    }
    let q = match config.q.constant() {
        Some(c) => Flux::Constant(c),
        None => Flux::Nodal(nodal(&config.q)),
    };
    let b = match b.constant() {
        Some(c) => BoundaryDatum::Constant(c),
        None => BoundaryDatum::Nodal(nodal(b)),
    };
    ProblemData::new(g, q, b, alpha).map_err(|e| RunError::Problem(e.to_string()))
}

fn build_potential(config: &RunConfig) -> Result<PotentialSpec, RunError> {
    let pc = config.potential.as_ref().ok_or_else(|| RunError::missing("potential.id", "potential"))?;
    let b = match (pc.b, config.b.as_ref().and_then(Expr::constant)) {
        (Some(b), _) | (None, Some(b)) => b,
        (None, None) => return Err(RunError::missing("potential.b", "potential anchor when problem.b is not a constant")),
    };
    Ok(PotentialSpec::from_id(&pc.id, b, &pc.params)?)
}

fn e(v: f64) -> String {
    format!("{v:e}")
}

fn solution_csv(mesh: &Mesh, u: &[f64]) -> String {
    let mut s = String::from("vertex_id,x,y,u\n");
    for (i, (p, v)) in mesh.vertices().iter().zip(u).enumerate() {
        writeln!(s, "{i},{:.16e},{:.16e},{:.16e}", p[0], p[1], v).unwrap();
    }
    s
}

fn run_solve(config: &RunConfig, out: &mut Output) -> Result<(bool, String), RunError> {
    let mesh = load_mesh(config)?;
    let problem = config.solve_problem;
    let alpha = match (config.alpha, problem) {
        (Some(a), _) => a,
        (None, SolveProblem::Dirichlet) => 1.0,
        (None, _) => return Err(RunError::missing("problem.alpha", "heat transfer coefficient")),
    };
    let data = build_data(config, &mesh, alpha)?;
    let potential = if problem.needs_potential() { Some(build_potential(config)?) } else { None };
    let report: SolveReport = match (problem, &potential) {
        (SolveProblem::Hvi, Some(p)) => solve_hvi(&mesh, &data, p, &config.solver)?,
        (SolveProblem::ConvexVi, Some(p)) => solve_vi_convex(&mesh, &data, p, &config.solver)?,
        (SolveProblem::Robin, _) => solve_robin(&mesh, &data)?,
        (SolveProblem::RobinLumped, _) => solve_robin_lumped(&mesh, &data)?,
        (SolveProblem::Dirichlet, _) => solve_dirichlet(&mesh, &data)?,
        _ => unreachable!("potential built for inclusion problems"),
    };
    let opts = &config.solver;
    let certified = report.converged && report.certificate.as_ref().is_none_or(|c| c.passes(opts.tol_interior, opts.tol_inclusion));

    out.write("mesh.txt", &mesh.to_text())?;
    out.write("solution.csv", &solution_csv(&mesh, &report.solution.values))?;

    let mut s = String::new();
    writeln!(s, "problem = {}", problem.as_str()).unwrap();
    writeln!(s, "potential = {}", potential.as_ref().map_or("none", |p| p.id())).unwrap();
    if let Some(p) = &potential {
        for (k, v) in p.params() {
            writeln!(s, "potential.{k} = {}", e(v)).unwrap();
        }
        writeln!(s, "potential.b = {}", e(p.b)).unwrap();
    }
    writeln!(s, "alpha = {}", e(alpha)).unwrap();
    writeln!(s, "vertices = {}", mesh.num_vertices()).unwrap();
    writeln!(s, "iterations = {}", report.iterations).unwrap();
    writeln!(s, "forced_steps = {}", report.forced_steps).unwrap();
    writeln!(s, "converged = {}", report.converged).unwrap();
    writeln!(s, "linear_residual = {}", e(report.linear_residual)).unwrap();
    if let Some(c) = &report.certificate {
        writeln!(s, "interior_residual_max = {}", e(c.interior_residual_max)).unwrap();
        writeln!(s, "gamma3_inclusion_max = {}", e(c.gamma3_inclusion_max)).unwrap();
        writeln!(s, "certificate_max = {}", e(c.max())).unwrap();
        writeln!(s, "tol_interior = {}", e(opts.tol_interior)).unwrap();
        writeln!(s, "tol_inclusion = {}", e(opts.tol_inclusion)).unwrap();
    }
    writeln!(s, "v_norm = {}", e(report.solution.v_norm)).unwrap();
    writeln!(s, "u_max = {}", e(report.solution.max())).unwrap();
    writeln!(s, "certified = {certified}").unwrap();
    out.write("certificate.txt", &s)?;

    let msg = format!(
        "{} solve on {} vertices: {}",
        problem.as_str(),
        mesh.num_vertices(),
        if certified { "certified" } else { "NOT certified" }
    );
    Ok((certified, msg))
}

fn run_experiment(config: &RunConfig, out: &mut Output) -> Result<(bool, String), RunError> {
    let ex = &config.experiment;
    let kind = ex.kind.ok_or_else(|| RunError::missing("experiment.kind", "experiment kind"))?;
    let opts = ExperimentOptions { solver: config.solver.clone(), workers: ex.workers };
    let alphas = |default: &[f64]| config.alphas.clone().unwrap_or_else(|| default.to_vec());
    let base_alpha = config.alpha.unwrap_or(1.0);

    let report: ExperimentReport = match kind {
        ExperimentKind::LinearTheorem => {
            let mesh = load_mesh(config)?;
            let data = build_data(config, &mesh, base_alpha)?;
            verify_linear_theorem(&mesh, &data, &alphas(&DEFAULT_ALPHAS), &opts)?
        }
        ExperimentKind::Comparison => {
            let mesh = load_mesh(config)?;
            let data = build_data(config, &mesh, base_alpha)?;
            let p = build_potential(config)?;
            verify_comparison(&mesh, &data, &p, &alphas(&[1.0, 10.0, 100.0]), &opts)?
        }
        ExperimentKind::Monotonicity => {
            let mesh = load_mesh(config)?;
            let data = build_data(config, &mesh, base_alpha)?;
            let p = build_potential(config)?;
            let pairs = match &ex.pairs {
                Some(p) => p.clone(),
                None => {
                    let mut a = alphas(&[1.0, 10.0, 100.0]);
                    a.sort_by(f64::total_cmp);
                    a.windows(2).map(|w| (w[0], w[1])).collect()
                }
            };
            verify_monotonicity(&mesh, &data, &p, &pairs, ex.allow_out_of_scope, &opts)?
        }
        ExperimentKind::AlphaConvergence => {
            let mesh = load_mesh(config)?;
            let data = build_data(config, &mesh, base_alpha)?;
            let p = build_potential(config)?;
            let conv = ConvergenceOptions { target_relative: ex.target_relative, slope_range: ex.slope_range };
            verify_alpha_convergence(&mesh, &data, &p, &alphas(&[1.0, 10.0, 100.0, 1_000.0]), &conv, &opts)?
        }
        ExperimentKind::ContinuousDependence => {
            let mesh = load_mesh(config)?;
            let alpha = config.alpha.ok_or_else(|| RunError::missing("problem.alpha", "heat transfer coefficient"))?;
            let data = build_data(config, &mesh, alpha)?;
            let p = build_potential(config)?;
            let perts = bump_sequence(&mesh, &data, &ex.levels)?;
            verify_continuous_dependence(&mesh, &data, &p, &perts, &opts)?
        }
        ExperimentKind::Refinement => {
            let exact = ex.exact.clone().ok_or_else(|| RunError::missing("experiment.exact", "exact solution"))?;
            let problem = match ex.problem {
                RefinementKind::Dirichlet => RefinementProblem::Dirichlet,
                RefinementKind::Robin => RefinementProblem::Robin,
                RefinementKind::Hvi => RefinementProblem::Hvi(build_potential(config)?),
            };
            let data = |m: &Mesh| build_data(config, m, base_alpha).map_err(|e| VerificationError::Precondition(e.to_string()));
            let exact_fn = |x: f64, y: f64| exact.eval(x, y);
            let setup = RefinementSetup {
                problem,
                n_list: ex.n_list.clone(),
                alpha: base_alpha,
                data: &data,
                exact: &exact_fn,
                affine: ex.affine,
            };
            refinement_study(&setup, &opts)?
        }
    };

    let id = kind.as_str();
    out.write(&format!("{id}.csv"), &report.to_csv())?;
    out.write(&format!("{id}_summary.txt"), &report.summary())?;
    let passed = report.passed();
    Ok((passed, format!("experiment {id}: {}", if passed { "pass" } else { "FAIL" })))
}

fn run_check(config: &RunConfig, out: &mut Output) -> Result<(bool, String), RunError> {
    let pc = config.potential.as_ref().ok_or_else(|| RunError::missing("potential.id", "potential"))?;
    let b = pc.b.or_else(|| config.b.as_ref().and_then(Expr::constant)).unwrap_or(1.0);
    let d = describe_potential(&pc.id, &pc.params, b)?;
    out.write("potential.txt", &d.text)?;
    Ok((d.consistent, format!("potential {}: declared properties {}", pc.id, if d.consistent { "confirmed" } else { "CONTRADICTED" })))
}

/// Sampled properties of a potential with a value table around its breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialDescription {
    pub potential: PotentialSpec,
    pub growth: GrowthReport,
    pub sign: CheckReport,
    pub strict: CheckReport,
    pub relaxed: RelaxedMonotonicity,
    /// Admission test used by the monotonicity experiment.
    pub hhh: HhhGate,
    /// The literal condition for every `c` over the whole pair grid.
    pub hhh_literal: CheckReport,
    /// Declared growth constants, `m_j` and convexity agree with the checks.
    pub consistent: bool,
    pub text: String,
}

/// Tolerance when comparing a sampled `m_j` with the declared one.
pub const M_J_SLACK: f64 = 1e-6;

fn table_points(p: &PotentialSpec) -> Vec<f64> {
    let mut pts: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|d| p.b + d).collect();
    for k in p.breakpoints() {
        pts.extend([k - 0.5, k - BREAKPOINT_OFFSET, k, k + BREAKPOINT_OFFSET, k + 0.5]);
    }
    SampleGrid::from_points(pts).points().to_vec()
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Tabulates `j`, `∂j` and `j⁰(r; b - r)` and runs every hypothesis check.
pub fn describe_potential(id: &str, params: &BTreeMap<String, f64>, b: f64) -> Result<PotentialDescription, PotentialError> {
    let p = PotentialSpec::from_id(id, b, params)?;
    let grid = SampleGrid::default_for(&p);
    let growth = check_growth(&p, &grid, None);
    let sign = check_sign_condition(&p, &grid);
    let strict = check_strict_condition(&p, &grid);
    let relaxed = estimate_relaxed_monotonicity(&p, &grid);
    let hhh = hhh_gate(&p, &grid, &DEFAULT_C_GRID);
    let hhh_literal = check_hhh(&p, &pair_grid(&p), &DEFAULT_C_GRID);

    let growth_ok = p.growth.is_none() || growth.check.passed;
    let m_j_ok = p.m_j.is_none_or(|m| relaxed.m_j <= m + M_J_SLACK);
    let convex_ok = !p.convex || hhh.convexity.passed;
    let consistent = growth_ok && m_j_ok && convex_ok;

    let mut t = String::new();
    writeln!(t, "potential {} (b = {})", p.id(), e(p.b)).unwrap();
    for (k, v) in p.params() {
        writeln!(t, "  {k} = {}", e(v)).unwrap();
    }
    let declared_growth = p.growth.map_or("superlinear".to_string(), |g| format!("c0 = {}, c1 = {}", e(g.c0), e(g.c1)));
    writeln!(t, "declared: growth {declared_growth}; m_j {}; convex {}", p.m_j.map_or("unknown".into(), e), p.convex).unwrap();
    writeln!(t).unwrap();
    writeln!(t, "{:>20}  {:>17}  {:>37}  {:>17}", "r", "j(r)", "subdifferential", "j0(r; b-r)").unwrap();
    for r in table_points(&p) {
        let s = p.subdiff(r);
        let interval = format!("[{:.9e}, {:.9e}]", s.lo, s.hi);
        writeln!(t, "{:>20.12e}  {:>17.9e}  {:>37}  {:>17.9e}", r, p.value(r), interval, p.j0(r, p.b - r)).unwrap();
    }
    writeln!(t).unwrap();
    writeln!(t, "checks ({} grid points):", grid.len()).unwrap();
    writeln!(
        t,
        "  growth: {} (fitted c0 = {}, c1 = {})",
        if p.growth.is_some() { verdict(growth.check.passed) } else { "not declared" },
        e(growth.fitted.c0),
        e(growth.fitted.c1)
    )
    .unwrap();
    writeln!(t, "  sign condition j0(r; b-r) <= 0: {}", verdict(sign.passed)).unwrap();
    writeln!(t, "  strict sign condition for r != b: {}", verdict(strict.passed)).unwrap();
    let at = relaxed.at.map_or(String::new(), |(r, s)| format!(" at ({}, {})", e(r), e(s)));
    writeln!(t, "  relaxed monotonicity: m_j estimate {}{at} ({})", e(relaxed.m_j), if m_j_ok { "consistent" } else { "exceeds declared" })
        .unwrap();
    writeln!(t, "  HHH: {}", verdict(hhh.passed())).unwrap();
    writeln!(t, "    {}", hhh.convexity).unwrap();
    writeln!(t, "    {}", hhh.comparison_range).unwrap();
    writeln!(t, "    literal, all c, pair grid: {}", verdict(hhh_literal.passed)).unwrap();
    writeln!(t, "declared properties: {}", if consistent { "confirmed" } else { "CONTRADICTED" }).unwrap();

    Ok(PotentialDescription { potential: p, growth, sign, strict, relaxed, hhh, hhh_literal, consistent, text: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::available_ids;

    #[test]
    fn abs_description() {
        let d = describe_potential("abs", &BTreeMap::new(), 1.0).unwrap();
        assert!(d.potential.convex);
        assert!(d.relaxed.m_j <= 1e-12);
        assert!(d.sign.passed && d.strict.passed && d.growth.check.passed && d.hhh.passed());
        assert!(d.consistent);
        assert!(d.text.contains("HHH: pass"));
    }

    #[test]
    fn exp_quadratic_description() {
        let d = describe_potential("exp_quadratic", &BTreeMap::new(), 1.0).unwrap();
        assert!(d.relaxed.m_j <= 1.0 + 1e-6 && d.relaxed.m_j > 0.5);
        assert!(d.sign.passed);
        assert!(!d.hhh.passed());
        assert!(d.consistent);
    }

    #[test]
    fn unknown_id_lists_all() {
        let err = describe_potential("nope", &BTreeMap::new(), 1.0).unwrap_err();
        let msg = err.to_string();
        for id in available_ids() {
            assert!(msg.contains(id), "{msg}");
        }
    }

    #[test]
    fn table_straddles_breakpoints() {
        let p = PotentialSpec::abs(1.0);
        let pts = table_points(&p);
        assert!(pts.contains(&(1.0 - BREAKPOINT_OFFSET)) && pts.contains(&1.0) && pts.contains(&(1.0 + BREAKPOINT_OFFSET)));
    }
}
