//! Flat `section.key = value` run configuration.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use super::expr::Expr;
use crate::solver::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Experiment,
    CheckPotential,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Experiment => "experiment",
            Command::CheckPotential => "check-potential",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "solve" => Some(Command::Solve),
            "experiment" => Some(Command::Experiment),
            "check-potential" => Some(Command::CheckPotential),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSpec {
    UnitSquare(usize),
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveProblem {
    Hvi,
    ConvexVi,
    Robin,
    RobinLumped,
    Dirichlet,
}

impl SolveProblem {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveProblem::Hvi => "hvi",
            SolveProblem::ConvexVi => "convex_vi",
            SolveProblem::Robin => "robin",
            SolveProblem::RobinLumped => "robin_lumped",
            SolveProblem::Dirichlet => "dirichlet",
        }
    }

    pub fn needs_potential(self) -> bool {
        matches!(self, SolveProblem::Hvi | SolveProblem::ConvexVi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    LinearTheorem,
    Comparison,
    Monotonicity,
    AlphaConvergence,
    ContinuousDependence,
    Refinement,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::LinearTheorem,
        ExperimentKind::Comparison,
        ExperimentKind::Monotonicity,
        ExperimentKind::AlphaConvergence,
        ExperimentKind::ContinuousDependence,
        ExperimentKind::Refinement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::LinearTheorem => "linear_theorem",
            ExperimentKind::Comparison => "comparison",
            ExperimentKind::Monotonicity => "monotonicity",
            ExperimentKind::AlphaConvergence => "alpha_convergence",
            ExperimentKind::ContinuousDependence => "continuous_dependence",
            ExperimentKind::Refinement => "refinement",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Problem solved at each level of a refinement study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinementKind {
    Dirichlet,
    Robin,
    Hvi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialConfig {
    pub id: String,
    pub b: Option<f64>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    /// Run monotonicity for potentials outside the theorem's hypotheses.
    pub allow_out_of_scope: bool,
    pub workers: usize,
    pub pairs: Option<Vec<(f64, f64)>>,
    pub levels: Vec<u32>,
    pub target_relative: f64,
    pub slope_range: Option<(f64, f64)>,
    pub n_list: Vec<usize>,
    pub exact: Option<Expr>,
    pub affine: bool,
    pub problem: RefinementKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: None,
            allow_out_of_scope: false,
            workers: 1,
            pairs: None,
            levels: vec![0, 1, 2, 3, 4],
            target_relative: 1e-2,
            slope_range: None,
            n_list: vec![4, 8, 16, 32],
            exact: None,
            affine: false,
            problem: RefinementKind::Dirichlet,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub mesh: Option<MeshSpec>,
    pub g: Expr,
    pub q: Expr,
    pub b: Option<Expr>,
    pub alpha: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub potential: Option<PotentialConfig>,
    pub solver: SolverOptions,
    pub solve_problem: SolveProblem,
    pub experiment: ExperimentConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            mesh: None,
            g: Expr::Num(0.0),
            q: Expr::Num(0.0),
            b: None,
            alpha: None,
            alphas: None,
            potential: None,
            solver: SolverOptions::default(),
            solve_problem: SolveProblem::Hvi,
            experiment: ExperimentConfig::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    /// Makes a relative mesh path relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(MeshSpec::File(p)) = &mut self.mesh {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = &mut self.output_dir {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    /// 1-based line; 0 when the error concerns the file as a whole.
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.key, self.message)
        } else {
            write!(f, "line {}: {}: {}", self.line, self.key, self.message)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

pub const KNOWN_KEYS: &[&str] = &[
    "command",
    "mesh.n",
    "mesh.file",
    "problem.g",
    "problem.q",
    "problem.b",
    "problem.alpha",
    "problem.alphas",
    "potential.id",
    "potential.b",
    "solver.tol_interior",
    "solver.tol_inclusion",
    "solver.max_iters",
    "solver.damping_init",
    "solver.seed",
    "solve.problem",
    "experiment.kind",
    "experiment.override",
    "experiment.workers",
    "experiment.pairs",
    "experiment.levels",
    "experiment.target_relative",
    "experiment.slope_min",
    "experiment.slope_max",
    "experiment.n_list",
    "experiment.exact",
    "experiment.affine",
    "experiment.problem",
    "output.dir",
    "potential.params.",
];

const PARAM_PREFIX: &str = "potential.params.";

fn is_known(key: &str) -> bool {
    if let Some(name) = key.strip_prefix(PARAM_PREFIX) {
        return !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    }
    KNOWN_KEYS.iter().any(|k| !k.ends_with('.') && *k == key)
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.chars().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Closest known key by edit distance; ties go to the first in table order.
pub fn suggest_key(key: &str) -> &'static str {
    KNOWN_KEYS
        .iter()
        .min_by_key(|k| levenshtein(key, k))
        .copied()
        .unwrap_or("command")
}

struct Entry {
    line: usize,
    value: String,
}

struct Parser {
    entries: BTreeMap<String, Entry>,
    errors: Vec<ConfigError>,
}

impl Parser {
    fn err(&mut self, line: usize, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError { line, key: key.to_string(), message: message.into() });
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn number(&mut self, key: &str) -> Option<(usize, f64)> {
        let e = self.take(key)?;
        match parse_f64(&e.value) {
            Some(v) => Some((e.line, v)),
            None => {
                self.err(e.line, key, format!("expected a finite number, got '{}'", e.value));
                None
            }
        }
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let (line, v) = self.number(key)?;
        if v > 0.0 {
            Some(v)
        } else {
            self.err(line, key, format!("{key} must be positive"));
            None
        }
    }

    fn integer(&mut self, key: &str, min: u64) -> Option<u64> {
        let e = self.take(key)?;
        match e.value.parse::<u64>() {
            Ok(v) if v >= min => Some(v),
            _ => {
                self.err(e.line, key, format!("expected an integer >= {min}, got '{}'", e.value));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        let e = self.take(key)?;
        match e.value.as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => {
                self.err(e.line, key, format!("expected true or false, got '{}'", e.value));
                None
            }
        }
    }

    fn expr(&mut self, key: &str) -> Option<Expr> {
        let e = self.take(key)?;
        match Expr::parse(&e.value) {
            Ok(x) => Some(x),
            Err(err) => {
                self.err(e.line, key, format!("invalid expression: {err}"));
                None
            }
        }
    }

    fn list<T>(&mut self, key: &str, item: impl Fn(&str) -> Option<T>, what: &str) -> Option<Vec<T>> {
        let e = self.take(key)?;
        let items: Vec<&str> = e.value.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let mut out = Vec::with_capacity(items.len());
        for s in &items {
            match item(s) {
                Some(v) => out.push(v),
                None => {
                    self.err(e.line, key, format!("invalid {what} '{s}'"));
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.err(e.line, key, "list is empty");
            return None;
        }
        Some(out)
    }

    fn choice<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, allowed: &[&str]) -> Option<T> {
        let e = self.take(key)?;
        let v = parse(&e.value);
        if v.is_none() {
            self.err(e.line, key, format!("unknown value '{}' (expected one of: {})", e.value, allowed.join(", ")));
        }
        v
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn positive_f64(s: &str) -> Option<f64> {
    parse_f64(s).filter(|v| *v > 0.0)
}

fn pair(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(':')?;
    Some((positive_f64(a)?, positive_f64(b)?))
}

/// Parses and validates a configuration. All problems are reported together.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut p = Parser { entries: BTreeMap::new(), errors: vec![] };
    let mut first_line: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            p.err(line, content, "expected 'key = value'");
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            p.err(line, "", "missing key");
            continue;
        }
        if !is_known(key) {
            p.err(line, key, format!("unknown key (did you mean '{}'?)", suggest_key(key)));
            continue;
        }
        if value.is_empty() {
            p.err(line, key, "missing value");
            continue;
        }
        if let Some(&prev) = first_line.get(key) {
            p.err(line, key, format!("duplicate key: first set on line {prev}, again on line {line}"));
            continue;
        }
        first_line.insert(key.to_string(), line);
        p.entries.insert(key.to_string(), Entry { line, value: value.to_string() });
    }

    let mut cfg = RunConfig {
        command: p.choice("command", Command::parse, &["solve", "experiment", "check-potential"]),
        ..RunConfig::default()
    };

    let n_line = p.entries.get("mesh.n").map(|e| e.line);
    let n = p.integer("mesh.n", 1);
    let file = p.take("mesh.file");
    cfg.mesh = match (n, file) {
        (Some(_), Some(f)) => {
            p.err(f.line, "mesh.file", format!("mesh.n (line {}) and mesh.file are mutually exclusive", n_line.unwrap_or(0)));
            None
        }
        (Some(n), None) => Some(MeshSpec::UnitSquare(n as usize)),
        (None, Some(f)) => Some(MeshSpec::File(PathBuf::from(f.value))),
        (None, None) => None,
    };

    if let Some(g) = p.expr("problem.g") {
        cfg.g = g;
    }
    if let Some(q) = p.expr("problem.q") {
        cfg.q = q;
    }
    cfg.b = p.expr("problem.b");
    cfg.alpha = p.positive("problem.alpha");
    if let Some(line) = p.entries.get("problem.alphas").map(|e| e.line) {
        if let Some(list) = p.list("problem.alphas", parse_f64, "number") {
            if list.iter().all(|a| *a > 0.0) {
                cfg.alphas = Some(list);
            } else {
                p.err(line, "problem.alphas", "problem.alpha values must be positive");
            }
        }
    }

    let id = p.take("potential.id");
    let pb = p.number("potential.b").map(|(_, v)| v);
    let param_keys: Vec<String> = p.entries.keys().filter(|k| k.starts_with(PARAM_PREFIX)).cloned().collect();
    let mut params = BTreeMap::new();
    for key in &param_keys {
        if let Some((_, v)) = p.number(key) {
            params.insert(key[PARAM_PREFIX.len()..].to_string(), v);
        }
    }
    match id {
        Some(e) => cfg.potential = Some(PotentialConfig { id: e.value, b: pb, params }),
        None => {
            if let Some(k) = param_keys.first() {
                let line = first_line[k.as_str()];
                p.err(line, k, "potential parameters given without potential.id");
            } else if pb.is_some() {
                p.err(first_line["potential.b"], "potential.b", "potential.b given without potential.id");
            }
        }
    }

    if let Some(v) = p.positive("solver.tol_interior") {
        cfg.solver.tol_interior = v;
    }
    if let Some(v) = p.positive("solver.tol_inclusion") {
        cfg.solver.tol_inclusion = v;
    }
    if let Some(v) = p.integer("solver.max_iters", 1) {
        cfg.solver.max_iters = v as usize;
    }
    if let Some((line, v)) = p.number("solver.damping_init") {
        if v > 0.0 && v <= 1.0 {
            cfg.solver.damping_init = v;
        } else {
            p.err(line, "solver.damping_init", "solver.damping_init must lie in (0, 1]");
        }
    }
    cfg.solver.seed = p.integer("solver.seed", 0);

    if let Some(v) = p.choice(
        "solve.problem",
        |s| match s {
            "hvi" => Some(SolveProblem::Hvi),
            "convex_vi" => Some(SolveProblem::ConvexVi),
            "robin" => Some(SolveProblem::Robin),
            "robin_lumped" => Some(SolveProblem::RobinLumped),
            "dirichlet" => Some(SolveProblem::Dirichlet),
            _ => None,
        },
        &["hvi", "convex_vi", "robin", "robin_lumped", "dirichlet"],
    ) {
        cfg.solve_problem = v;
    }

    let kinds: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
    let ex = &mut cfg.experiment;
    ex.kind = p.choice("experiment.kind", ExperimentKind::parse, &kinds);
    if let Some(v) = p.boolean("experiment.override") {
        ex.allow_out_of_scope = v;
    }
    if let Some(v) = p.integer("experiment.workers", 1) {
        ex.workers = v as usize;
    }
    ex.pairs = p.list("experiment.pairs", pair, "alpha pair (expected a:b with positive a, b)");
    if let Some(v) = p.list("experiment.levels", |s| s.parse::<u32>().ok().filter(|v| *v <= 60), "level") {
        ex.levels = v;
    }
    if let Some(v) = p.positive("experiment.target_relative") {
        ex.target_relative = v;
    }
    let smin = p.number("experiment.slope_min");
    let smax = p.number("experiment.slope_max");
    match (smin, smax) {
        (Some((_, lo)), Some((line, hi))) => {
            if lo <= hi {
                ex.slope_range = Some((lo, hi));
            } else {
                p.err(line, "experiment.slope_max", "experiment.slope_max must not be below experiment.slope_min");
            }
        }
        (Some((line, _)), None) => p.err(line, "experiment.slope_min", "experiment.slope_max is also required"),
        (None, Some((line, _))) => p.err(line, "experiment.slope_max", "experiment.slope_min is also required"),
        (None, None) => {}
    }
    if let Some(line) = p.entries.get("experiment.n_list").map(|e| e.line) {
        if let Some(v) = p.list("experiment.n_list", |s| s.parse::<usize>().ok().filter(|n| *n >= 1), "mesh size") {
            if v.windows(2).all(|w| w[0] < w[1]) {
                ex.n_list = v;
            } else {
                p.err(line, "experiment.n_list", "experiment.n_list must be increasing");
            }
        }
    }
    ex.exact = p.expr("experiment.exact");
    if let Some(v) = p.boolean("experiment.affine") {
        ex.affine = v;
    }
    if let Some(v) = p.choice(
        "experiment.problem",
        |s| match s {
            "dirichlet" => Some(RefinementKind::Dirichlet),
            "robin" => Some(RefinementKind::Robin),
            "hvi" => Some(RefinementKind::Hvi),
            _ => None,
        },
        &["dirichlet", "robin", "hvi"],
    ) {
        ex.problem = v;
    }

    cfg.output_dir = p.take("output.dir").map(|e| PathBuf::from(e.value));

    debug_assert!(p.entries.is_empty(), "unconsumed keys: {:?}", p.entries.keys().collect::<Vec<_>>());

    if p.errors.is_empty() {
        Ok(cfg)
    } else {
        p.errors.sort_by_key(|e| e.line);
        Err(ConfigErrors(p.errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_solve_config() {
        let cfg = parse_config("command = solve\nmesh.n = 8\nproblem.b = 1\nproblem.alpha = 10\npotential.id = quadratic\n").unwrap();
        assert_eq!(cfg.command, Some(Command::Solve));
        assert_eq!(cfg.mesh, Some(MeshSpec::UnitSquare(8)));
        assert_eq!(cfg.alpha, Some(10.0));
        assert_eq!(cfg.potential.unwrap().id, "quadratic");
    }

    #[test]
    fn negative_alpha() {
        let errs = parse_config("problem.alpha = -1\n").unwrap_err();
        assert_eq!(errs.0.len(), 1);
        assert_eq!(errs.0[0].line, 1);
        assert_eq!(errs.0[0].message, "problem.alpha must be positive");
    }

    #[test]
    fn duplicate_names_both_lines() {
        let errs = parse_config("mesh.n = 8\n# c\nmesh.n = 16\n").unwrap_err();
        assert_eq!(errs.0[0].key, "mesh.n");
        assert!(errs.0[0].message.contains("line 1"));
        assert!(errs.0[0].message.contains("line 3"));
    }

    #[test]
    fn unknown_key_suggestion() {
        let errs = parse_config("problem.alpah = 1\nsolver.max_iter = 5").unwrap_err();
        assert!(errs.0[0].message.contains("'problem.alpha'"));
        assert!(errs.0[1].message.contains("'solver.max_iters'"));
        assert_eq!(errs.0[1].line, 2);
    }

    #[test]
    fn all_errors_reported() {
        let errs = parse_config("mesh.n = x\nproblem.g = sin(x)\nsolve.problem = newton\n").unwrap_err();
        assert_eq!(errs.0.iter().map(|e| e.line).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn lists_and_params() {
        let cfg = parse_config(
            "problem.alphas = 1, 10 100\nexperiment.pairs = 1:10, 10:100\npotential.id = min_quadratics\npotential.params.k2 = 4 # inline\n",
        )
        .unwrap();
        assert_eq!(cfg.alphas, Some(vec![1.0, 10.0, 100.0]));
        assert_eq!(cfg.experiment.pairs, Some(vec![(1.0, 10.0), (10.0, 100.0)]));
        assert_eq!(cfg.potential.unwrap().params.get("k2"), Some(&4.0));
    }

    #[test]
    fn edit_distance() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", "abc"), 0);
    }
}
