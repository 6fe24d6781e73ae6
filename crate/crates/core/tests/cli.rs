use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hvi_core::mesh::Mesh;
use hvi_core::potentials::available_ids;
use tempfile::TempDir;

struct Run {
    status: i32,
    out: PathBuf,
}

impl Run {
    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn error(&self) -> serde_json::Value {
        serde_json::from_str(&self.read("error.json")).unwrap()
    }
}

fn hvi(dir: &Path, command: &str, config: &str, out: &str) -> Run {
    let cfg = dir.join(format!("{out}.cfg"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(out);
    let status = Command::new(env!("CARGO_BIN_EXE_hvi"))
        .args([command, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap();
    Run { status, out }
}

fn summary_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing in\n{text}"))
        .to_string()
}

fn csv_column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

const EXP_QUADRATIC_SOLVE: &str = "\
command = solve
mesh.n = 16
problem.g = -1
problem.q = 0.5
problem.b = 1
problem.alpha = 10
potential.id = exp_quadratic
";

#[test]
fn solve_writes_certified_solution() {
    let dir = TempDir::new().unwrap();
    let run = hvi(dir.path(), "solve", EXP_QUADRATIC_SOLVE, "out");
    assert_eq!(run.status, 0);
    let cert = run.read("certificate.txt");
    let max: f64 = summary_value(&cert, "certificate_max").parse().unwrap();
    let tol: f64 = summary_value(&cert, "tol_inclusion").parse().unwrap();
    assert!(max <= tol);
    assert_eq!(summary_value(&cert, "certified"), "true");
    let csv = run.read("solution.csv");
    assert!(csv.starts_with("vertex_id,x,y,u\n"));
    assert_eq!(csv.lines().count(), 1 + 17 * 17);
    let mesh = Mesh::from_text(&run.read("mesh.txt")).unwrap();
    assert_eq!(mesh, Mesh::unit_square(16).unwrap());
    let u_max = csv_column(&csv, "u").iter().map(|s| s.parse::<f64>().unwrap()).fold(f64::MIN, f64::max);
    assert!(u_max <= 1.0 + 1e-9);
    assert!(!run.out.join("error.json").exists());
}

#[test]
fn minimal_config_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = "command=solve\nmesh.n=8\nproblem.b=1\nproblem.alpha=10\npotential.id=quadratic\n";
    assert_eq!(hvi(dir.path(), "solve", cfg, "out").status, 0);
}

#[test]
fn linear_solves_from_mesh_file() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("square.msh"), Mesh::unit_square(4).unwrap().to_text()).unwrap();
    for (problem, expected) in [("dirichlet", 1.0), ("robin", 0.9), ("robin_lumped", 0.9)] {
        let cfg = format!("mesh.file = square.msh\nproblem.b = 1\nproblem.alpha = 9\nsolve.problem = {problem}\n");
        let run = hvi(dir.path(), "solve", &cfg, problem);
        assert_eq!(run.status, 0, "{problem}");
        let csv = run.read("solution.csv");
        let (xs, us) = (csv_column(&csv, "x"), csv_column(&csv, "u"));
        for (x, u) in xs.iter().zip(&us) {
            let (x, u): (f64, f64) = (x.parse().unwrap(), u.parse().unwrap());
            assert!((u - expected * x).abs() <= 1e-10, "{problem}: u({x}) = {u}");
        }
    }
}

#[test]
fn alpha_convergence_errors_decrease() {
    let dir = TempDir::new().unwrap();
    let cfg = "\
mesh.n = 8
problem.b = 1
problem.alphas = 1, 10, 100, 1000
potential.id = quadratic
experiment.kind = alpha_convergence
";
    let run = hvi(dir.path(), "experiment", cfg, "out");
    assert_eq!(run.status, 0);
    let csv = run.read("alpha_convergence.csv");
    assert!(csv.starts_with("case_id,n,alpha,potential,err_V,margin_min,certificate_max,verdict\n"));
    let errs: Vec<f64> = csv_column(&csv, "err_V").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(errs.len(), 4);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(run.read("alpha_convergence_summary.txt").contains("pass"));
}

#[test]
fn missing_mesh_file_names_path() {
    let dir = TempDir::new().unwrap();
    let cfg = "mesh.file = absent/mesh.txt\nproblem.b = 1\nproblem.alpha = 1\npotential.id = quadratic\n";
    let run = hvi(dir.path(), "solve", cfg, "out");
    assert_eq!(run.status, 2);
    let err = run.error();
    assert_eq!(err["kind"], "io");
    assert!(err["path"].as_str().unwrap().ends_with("absent/mesh.txt"));
}

#[test]
fn invalid_mesh_file_reports_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.msh"), "meshfmt 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 7\nboundary 0\n").unwrap();
    let cfg = "mesh.file = bad.msh\nproblem.b = 1\nproblem.alpha = 1\npotential.id = quadratic\n";
    let run = hvi(dir.path(), "solve", cfg, "out");
    assert_eq!(run.status, 2);
    let err = run.error();
    assert_eq!(err["kind"], "mesh");
    assert!(err["message"].as_str().unwrap().contains("line 7"), "{err}");
}

#[test]
fn configuration_errors_are_listed() {
    let dir = TempDir::new().unwrap();
    let cfg = "mesh.n = 8\nproblem.alpha = -1\nproblem.b = 1\nmesh.n = 16\nproblem.alpah = 2\n";
    let run = hvi(dir.path(), "solve", cfg, "out");
    assert_eq!(run.status, 2);
    let err = run.error();
    assert_eq!(err["kind"], "config");
    let errors = err["errors"].as_array().unwrap();
    let find = |line: u64| errors.iter().find(|e| e["line"] == line).unwrap_or_else(|| panic!("line {line}: {err}"));
    assert_eq!(find(2)["message"], "problem.alpha must be positive");
    let dup = find(4)["message"].as_str().unwrap();
    assert!(dup.contains("line 1") && dup.contains("line 4"));
    assert!(find(5)["message"].as_str().unwrap().contains("problem.alpha"));
}

#[test]
fn command_mismatch_rejected() {
    let dir = TempDir::new().unwrap();
    let run = hvi(dir.path(), "experiment", EXP_QUADRATIC_SOLVE, "out");
    assert_eq!(run.status, 2);
    assert_eq!(run.error()["errors"][0]["key"], "command");
}

#[test]
fn check_potential_reports() {
    let dir = TempDir::new().unwrap();
    let run = hvi(dir.path(), "check-potential", "potential.id = abs\npotential.b = 1\n", "abs");
    assert_eq!(run.status, 0);
    let text = run.read("potential.txt");
    assert!(text.contains("HHH: pass"));
    assert!(text.contains("sign condition j0(r; b-r) <= 0: pass"));
    assert!(text.contains("m_j estimate 0e0"));

    let run = hvi(dir.path(), "check-potential", "potential.id = exp_quadratic\nproblem.b = 1\n", "exp");
    assert_eq!(run.status, 0);
    let text = run.read("potential.txt");
    assert!(text.contains("HHH: fail"));
    assert!(text.contains("strict sign condition for r != b: pass"));

    let run = hvi(dir.path(), "check-potential", "potential.id = cubic\n", "unknown");
    assert_eq!(run.status, 2);
    let msg = run.error()["message"].as_str().unwrap().to_string();
    for id in available_ids() {
        assert!(msg.contains(id), "{msg}");
    }
}

#[test]
fn failed_verdict_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = "\
mesh.n = 4
problem.b = 1
potential.id = quadratic
experiment.kind = alpha_convergence
experiment.slope_min = 0
experiment.slope_max = 1
";
    let run = hvi(dir.path(), "experiment", cfg, "out");
    assert_eq!(run.status, 1);
    assert_eq!(run.error()["kind"], "verdict");
    assert!(run.read("alpha_convergence.csv").lines().count() > 1);
}

#[test]
fn out_of_scope_monotonicity_is_labelled() {
    let dir = TempDir::new().unwrap();
    let base = "mesh.n = 8\nproblem.g = -1\nproblem.q = 0.5\nproblem.b = 1\npotential.id = exp_quadratic\nexperiment.kind = monotonicity\nexperiment.pairs = 1:10\n";
    let refused = hvi(dir.path(), "experiment", base, "refused");
    assert_eq!(refused.status, 2);
    let run = hvi(dir.path(), "experiment", &format!("{base}experiment.override = true\n"), "override");
    assert_eq!(run.status, 0);
    assert!(csv_column(&run.read("monotonicity.csv"), "verdict").iter().all(|v| v == "outside theorem scope"));
}

#[test]
fn experiment_outputs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = "\
mesh.n = 8
problem.g = -1
problem.q = 0.5
problem.b = 1
problem.alpha = 0.5
potential.id = exp_quadratic
experiment.kind = continuous_dependence
experiment.workers = WORKERS
";
    let a = hvi(dir.path(), "experiment", &cfg.replace("WORKERS", "1"), "a");
    let b = hvi(dir.path(), "experiment", &cfg.replace("WORKERS", "1"), "b");
    let c = hvi(dir.path(), "experiment", &cfg.replace("WORKERS", "4"), "c");
    assert_eq!(a.status, 0);
    for name in ["continuous_dependence.csv", "continuous_dependence_summary.txt"] {
        assert_eq!(a.read(name), b.read(name));
    }
    assert_eq!(a.read("continuous_dependence.csv"), c.read("continuous_dependence.csv"));
}

#[test]
fn refinement_study_from_config() {
    let dir = TempDir::new().unwrap();
    let cfg = "\
problem.g = -1
problem.b = 1
experiment.kind = refinement
experiment.n_list = 4 8 16
experiment.exact = x^2/2 + 0.5*x
";
    let run = hvi(dir.path(), "experiment", cfg, "out");
    assert_eq!(run.status, 0, "{}", run.read("refinement_summary.txt"));
    let errs: Vec<f64> = csv_column(&run.read("refinement.csv"), "err_V").iter().map(|s| s.parse().unwrap()).collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1] - 4.0).abs() < 0.25);
    }
}
