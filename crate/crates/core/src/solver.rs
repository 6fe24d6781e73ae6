//! Solvers for the three problem variants on a P1 mesh: the Dirichlet problem
//! on K₀, the linear Robin problem on V₀, and the boundary hemivariational
//! inequality with lumped Γ₃ weights, together with its nodal certificate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assembly::{build_dof_map, AssembledSystem, AssemblyError, ProblemData, Space};
use crate::linsolve::{LinearSolveError, SpdSolver};
use crate::mesh::{Mesh, VertexClass};
use crate::potentials::{PotentialSpec, Side};
use crate::sparse::CsrMatrix;

/// Relative residual every linear solve must reach.
pub const LINEAR_TOLERANCE: f64 = 1e-10;
/// Damping factor below which a full step is forced.
pub const MIN_DAMPING: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error("linear solve residual {residual:e} above {LINEAR_TOLERANCE:e}")]
    InaccurateSolve { residual: f64 },
    #[error("potential '{0}' is not convex")]
    NotConvex(&'static str),
    #[error("potential anchored at b = {potential}, problem data has b = {data}")]
    AnchorMismatch { potential: f64, data: f64 },
    #[error("{what} has {got} entries, expected {expected}")]
    Dimension { what: &'static str, got: usize, expected: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    Dirichlet,
    /// Consistent Γ₃ mass.
    Robin,
    /// Lumped Γ₃ mass.
    RobinLumped,
    Hvi { potential: &'static str },
    ConvexVi { potential: &'static str },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Nodal values over all mesh vertices.
    pub values: Vec<f64>,
    pub v_norm: f64,
    pub v0_seminorm: f64,
    pub kind: ProblemKind,
    pub alpha: f64,
}

impl Solution {
    fn new(sys: &AssembledSystem, values: Vec<f64>, kind: ProblemKind, alpha: f64) -> Self {
        Solution { v_norm: sys.v_norm(&values), v0_seminorm: sys.v0_seminorm(&values), values, kind, alpha }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Residuals of the discrete inclusion for a candidate field.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    /// Largest `|(Au - f)_i|` over free non-Γ₃ rows, and `|u_i|` over Γ₁ nodes.
    pub interior_residual_max: f64,
    /// Largest `dist((f - Au)_i / (α m_i), ∂j(u_i))` over free Γ₃ nodes.
    pub gamma3_inclusion_max: f64,
    /// `(vertex, distance)` for every free Γ₃ node.
    pub inclusion: Vec<(usize, f64)>,
}

impl Certificate {
    pub fn passes(&self, tol_interior: f64, tol_inclusion: f64) -> bool {
        self.interior_residual_max <= tol_interior && self.gamma3_inclusion_max <= tol_inclusion
    }

    /// Both residuals measured against their tolerances; at most 1 when certified.
    pub fn merit(&self, tol_interior: f64, tol_inclusion: f64) -> f64 {
        (self.interior_residual_max / tol_interior).max(self.gamma3_inclusion_max / tol_inclusion)
    }

    pub fn max(&self) -> f64 {
        self.interior_residual_max.max(self.gamma3_inclusion_max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub solution: Solution,
    pub iterations: usize,
    /// Relative residual of the last linear solve.
    pub linear_residual: f64,
    /// Present for the inclusion problems.
    pub certificate: Option<Certificate>,
    pub converged: bool,
    /// Accepted damping factor per iteration.
    pub damping_history: Vec<f64>,
    /// Iterations where damping fell below `MIN_DAMPING` and a full step was forced.
    pub forced_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol_interior: f64,
    pub tol_inclusion: f64,
    pub max_iters: usize,
    pub damping_init: f64,
    /// Seeds a random initial iterate around the potential's anchor.
    pub seed: Option<u64>,
    /// Explicit initial iterate over all vertices; takes precedence over `seed`.
    pub initial: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_interior: 1e-9, tol_inclusion: 1e-8, max_iters: 10_000, damping_init: 1.0, seed: None, initial: None }
    }
}

/// Solves `K u = rhs` on `free` with the other entries of `u` held fixed.
fn solve_constrained(k: &CsrMatrix, rhs: &[f64], free: &[usize], u: &mut [f64]) -> Result<f64, SolverError> {
    let mut u_fixed = u.to_vec();
    for i in free {
        u_fixed[*i] = 0.0;
    }
    let coupling = k.mul_vec(&u_fixed);
    let b: Vec<f64> = free.iter().map(|&i| rhs[i] - coupling[i]).collect();
    let solver = SpdSolver::new(k.submatrix(free, free))?;
    let (x, stats) = solver.solve(&b)?;
    for (&i, v) in free.iter().zip(x) {
        u[i] = v;
    }
    if !(stats.relative_residual <= LINEAR_TOLERANCE) {
        return Err(SolverError::InaccurateSolve { residual: stats.relative_residual });
    }
    Ok(stats.relative_residual)
}

fn linear_report(sys: &AssembledSystem, values: Vec<f64>, kind: ProblemKind, alpha: f64, residual: f64) -> SolveReport {
    SolveReport {
        solution: Solution::new(sys, values, kind, alpha),
        iterations: 1,
        linear_residual: residual,
        certificate: None,
        converged: residual <= LINEAR_TOLERANCE,
        damping_history: vec![],
        forced_steps: 0,
    }
}

/// `u_∞`: zero on Γ₁, `b` on Γ₃, `a(u, v) = L(v)` on K₀.
pub fn solve_dirichlet(mesh: &Mesh, data: &ProblemData) -> Result<SolveReport, SolverError> {
    let sys = AssembledSystem::new(mesh, data)?;
    solve_dirichlet_assembled(mesh, &sys, data)
}

pub fn solve_dirichlet_assembled(mesh: &Mesh, sys: &AssembledSystem, data: &ProblemData) -> Result<SolveReport, SolverError> {
    let dofs = build_dof_map(mesh, Space::K0);
    let mut u = vec![0.0; mesh.num_vertices()];
    for &v in &dofs.fixed {
        if dofs.classes[v] == VertexClass::Gamma3 {
            u[v] = data.b.at(v);
        }
    }
    let res = solve_constrained(&sys.stiffness, &sys.load, &dofs.free, &mut u)?;
    Ok(linear_report(sys, u, ProblemKind::Dirichlet, f64::INFINITY, res))
}

/// Linear Robin problem `(A + α M_Γ₃) u = f + α M_Γ₃ b` on V₀, consistent mass.
pub fn solve_robin(mesh: &Mesh, data: &ProblemData) -> Result<SolveReport, SolverError> {
    let sys = AssembledSystem::new(mesh, data)?;
    solve_robin_assembled(mesh, &sys, data, false)
}

/// As [`solve_robin`] with the lumped (diagonal) Γ₃ mass.
pub fn solve_robin_lumped(mesh: &Mesh, data: &ProblemData) -> Result<SolveReport, SolverError> {
    let sys = AssembledSystem::new(mesh, data)?;
    solve_robin_assembled(mesh, &sys, data, true)
}

pub fn solve_robin_assembled(mesh: &Mesh, sys: &AssembledSystem, data: &ProblemData, lumped: bool) -> Result<SolveReport, SolverError> {
    let n = mesh.num_vertices();
    let alpha = data.alpha;
    let bvec: Vec<f64> = (0..n).map(|v| data.b.at(v)).collect();
    let mass = if lumped { CsrMatrix::from_diagonal(&sys.boundary_mass.lumped) } else { sys.boundary_mass.consistent.clone() };
    let k = sys.stiffness.add_scaled(alpha, &mass);
    let mb = mass.mul_vec(&bvec);
    let rhs: Vec<f64> = sys.load.iter().zip(&mb).map(|(f, m)| f + alpha * m).collect();
    let mut u = vec![0.0; n];
    let res = solve_constrained(&k, &rhs, &sys.dofs.free, &mut u)?;
    let kind = if lumped { ProblemKind::RobinLumped } else { ProblemKind::Robin };
    Ok(linear_report(sys, u, kind, alpha, res))
}

/// Evaluates the nodal certificate against an assembled system.
pub struct Certifier<'a> {
    sys: &'a AssembledSystem,
    potential: &'a PotentialSpec,
    alpha: f64,
    /// Free Γ₃ nodes.
    gamma3: Vec<usize>,
    /// Free rows outside Γ₃.
    interior: Vec<usize>,
    gamma1: Vec<usize>,
}

impl<'a> Certifier<'a> {
    pub fn new(sys: &'a AssembledSystem, potential: &'a PotentialSpec, alpha: f64) -> Self {
        let classes = &sys.dofs.classes;
        let mut gamma3 = vec![];
        let mut interior = vec![];
        let mut gamma1 = vec![];
        for (v, c) in classes.iter().enumerate() {
            match c {
                VertexClass::Gamma3 => gamma3.push(v),
                VertexClass::Gamma1 => gamma1.push(v),
                _ => interior.push(v),
            }
        }
        Certifier { sys, potential, alpha, gamma3, interior, gamma1 }
    }

    pub fn gamma3_nodes(&self) -> &[usize] {
        &self.gamma3
    }

    /// `ρ_i = (f - Au)_i / (α m_i)` for every free Γ₃ node.
    pub fn multipliers(&self, u: &[f64]) -> Vec<f64> {
        let au = self.sys.stiffness.mul_vec(u);
        self.gamma3.iter().map(|&i| (self.sys.load[i] - au[i]) / (self.alpha * self.sys.boundary_mass.lumped[i])).collect()
    }

    pub fn certify(&self, u: &[f64]) -> Certificate {
        let au = self.sys.stiffness.mul_vec(u);
        let f = &self.sys.load;
        let mut interior_residual_max = self.interior.iter().fold(0.0_f64, |m, &i| m.max((au[i] - f[i]).abs()));
        interior_residual_max = self.gamma1.iter().fold(interior_residual_max, |m, &i| m.max(u[i].abs()));
        let mut gamma3_inclusion_max = 0.0_f64;
        let mut inclusion = Vec::with_capacity(self.gamma3.len());
        for &i in &self.gamma3 {
            let rho = (f[i] - au[i]) / (self.alpha * self.sys.boundary_mass.lumped[i]);
            let d = self.potential.subdiff(u[i]).distance(rho);
            let d = if d.is_nan() { f64::INFINITY } else { d };
            gamma3_inclusion_max = gamma3_inclusion_max.max(d);
            inclusion.push((i, d));
        }
        Certificate { interior_residual_max, gamma3_inclusion_max, inclusion }
    }

    /// `a(u, v) + α Σ m_i j⁰(u_i; v_i) - L(v)`; nonnegative for every `v`
    /// vanishing on Γ₁ exactly when `u` solves the discrete inequality.
    pub fn inequality_gap(&self, u: &[f64], v: &[f64]) -> f64 {
        let a = self.sys.stiffness.bilinear(u, v);
        let l: f64 = self.sys.load.iter().zip(v).map(|(f, v)| f * v).sum();
        let j: f64 = self.gamma3.iter().map(|&i| self.sys.boundary_mass.lumped[i] * self.potential.j0(u[i], v[i])).sum();
        a + self.alpha * j - l
    }
}

/// Certificate of an arbitrary candidate field for the inclusion problem.
pub fn check_certificate(mesh: &Mesh, data: &ProblemData, p: &PotentialSpec, u: &Solution) -> Result<Certificate, SolverError> {
    let sys = AssembledSystem::new(mesh, data)?;
    if u.values.len() != mesh.num_vertices() {
        return Err(SolverError::Dimension { what: "solution", got: u.values.len(), expected: mesh.num_vertices() });
    }
    Ok(Certifier::new(&sys, p, data.alpha).certify(&u.values))
}

fn check_anchor(data: &ProblemData, p: &PotentialSpec) -> Result<(), SolverError> {
    match data.b.constant() {
        Some(b) if b != p.b => Err(SolverError::AnchorMismatch { potential: p.b, data: b }),
        _ => Ok(()),
    }
}

fn initial_iterate(n: usize, sys: &AssembledSystem, p: &PotentialSpec, opts: &SolverOptions) -> Result<Vec<f64>, SolverError> {
    let mut u = match (&opts.initial, opts.seed) {
        (Some(u0), _) => {
            if u0.len() != n {
                return Err(SolverError::Dimension { what: "initial iterate", got: u0.len(), expected: n });
            }
            u0.clone()
        }
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| p.b + rng.gen_range(-2.0..2.0)).collect()
        }
        (None, None) => vec![0.0; n],
    };
    for &v in &sys.dofs.fixed {
        u[v] = 0.0;
    }
    Ok(u)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    Smooth(Side),
    Pinned(f64),
}

/// Open interval between consecutive kinks that contains `(u, side)`.
fn region(kinks: &[f64], u: f64, side: Side) -> (f64, f64) {
    let mut k = kinks.partition_point(|&p| p < u);
    if k < kinks.len() && kinks[k] == u && side == Side::Right {
        k += 1;
    }
    let lo = if k == 0 { f64::NEG_INFINITY } else { kinks[k - 1] };
    let hi = if k == kinks.len() { f64::INFINITY } else { kinks[k] };
    (lo, hi)
}

/// Kinks where `∂j` jumps upward keep the graph monotone locally.
fn is_upward(p: &PotentialSpec, q: f64) -> bool {
    p.branch(q, Side::Left).0 <= p.branch(q, Side::Right).0
}

/// Side onto which a pinned node at kink `q` is released when its multiplier
/// `rho` lies outside `∂j(q)`: the branch along which `∂j` moves toward `rho`
/// when it is unique, otherwise the branch whose limit is nearer.
fn release_side(p: &PotentialSpec, q: f64, rho: f64) -> Side {
    let (left, s_left) = p.branch(q, Side::Left);
    let (right, s_right) = p.branch(q, Side::Right);
    let right_ok = s_right != 0.0 && (rho - right).signum() == s_right.signum();
    let left_ok = s_left != 0.0 && (rho - left).signum() == -s_left.signum();
    match (left_ok, right_ok) {
        (true, false) => Side::Left,
        (false, true) => Side::Right,
        _ => {
            if (left - rho).abs() <= (right - rho).abs() {
                Side::Left
            } else {
                Side::Right
            }
        }
    }
}

/// Mode after a smooth node moves from `old` to `new`. The first upward kink
/// crossed pins the node; downward kinks are passed through until the node has
/// crossed the same one three times.
fn advance(p: &PotentialSpec, kinks: &[f64], old: f64, side: Side, new: f64, crossings: &mut [u32]) -> Mode {
    let (lo, hi) = region(kinks, old, side);
    if new > lo && new < hi {
        return Mode::Smooth(side);
    }
    let crossed: Vec<usize> = if new >= hi {
        (0..kinks.len()).filter(|&k| kinks[k] >= hi && kinks[k] <= new).collect()
    } else {
        (0..kinks.len()).rev().filter(|&k| kinks[k] <= lo && kinks[k] >= new).collect()
    };
    for k in crossed {
        let q = kinks[k];
        crossings[k] += 1;
        if q == new || is_upward(p, q) || crossings[k] > 2 {
            return Mode::Pinned(q);
        }
    }
    Mode::Smooth(if new > old { Side::Right } else { Side::Left })
}

/// Boundary hemivariational inequality by a damped semismooth iteration.
///
/// Each free Γ₃ node is either on a smooth branch of `∂j`, linearized with
/// the positive part of the branch slope (negative slopes enter as an explicit
/// source), or pinned at a kink of `∂j`. A branch that would cross a kink pins
/// the node there; a pinned node whose multiplier leaves the kink's interval is
/// released onto a neighbouring branch (see `release_side`).
pub fn solve_hvi(mesh: &Mesh, data: &ProblemData, p: &PotentialSpec, opts: &SolverOptions) -> Result<SolveReport, SolverError> {
    let sys = AssembledSystem::new(mesh, data)?;
    solve_hvi_assembled(mesh, &sys, data, p, opts)
}

pub fn solve_hvi_assembled(
    mesh: &Mesh,
    sys: &AssembledSystem,
    data: &ProblemData,
    p: &PotentialSpec,
    opts: &SolverOptions,
) -> Result<SolveReport, SolverError> {
    check_anchor(data, p)?;
    let n = mesh.num_vertices();
    let alpha = data.alpha;
    let certifier = Certifier::new(sys, p, alpha);
    let gamma3 = certifier.gamma3_nodes().to_vec();
    let lumped = &sys.boundary_mass.lumped;
    let kinks = p.kinks();
    let (tol_in, tol_bc) = (opts.tol_interior, opts.tol_inclusion);

    let mut u = initial_iterate(n, sys, p, opts)?;
    let mut modes: Vec<Mode> =
        gamma3.iter().map(|&i| if kinks.contains(&u[i]) { Mode::Pinned(u[i]) } else { Mode::Smooth(Side::Left) }).collect();
    let mut crossings = vec![vec![0_u32; kinks.len()]; gamma3.len()];
    let mut cert = certifier.certify(&u);
    let mut merit = cert.merit(tol_in, tol_bc);
    let mut best = (merit, u.clone(), cert.clone());
    let mut theta = opts.damping_init.clamp(MIN_DAMPING, 1.0);
    let mut history = vec![];
    let mut forced_steps = 0;
    let mut linear_residual = 0.0;
    let mut iterations = 0;

    while merit > 1.0 && iterations < opts.max_iters {
        // linearized system
        let mut diag = vec![0.0; n];
        let mut rhs = sys.load.clone();
        let mut cand = u.clone();
        let mut pinned = vec![false; n];
        for (k, &i) in gamma3.iter().enumerate() {
            match modes[k] {
                Mode::Pinned(q) => {
                    pinned[i] = true;
                    cand[i] = q;
                }
                Mode::Smooth(side) => {
                    let (zeta, slope) = p.branch(u[i], side);
                    let s = slope.max(0.0);
                    let w = alpha * lumped[i];
                    diag[i] = w * s;
                    rhs[i] -= w * (zeta - s * u[i]);
                }
            }
        }
        let free: Vec<usize> = sys.dofs.free.iter().copied().filter(|&i| !pinned[i]).collect();
        let k = sys.stiffness.add_scaled(1.0, &CsrMatrix::from_diagonal(&diag));
        match solve_constrained(&k, &rhs, &free, &mut cand) {
            Ok(res) => linear_residual = res,
            Err(SolverError::InaccurateSolve { residual }) => {
                linear_residual = residual;
                break;
            }
            Err(e) => return Err(e),
        }

        // certificate-driven damping
        let (next, next_cert, next_merit, step) = loop {
            let trial: Vec<f64> = u.iter().zip(&cand).map(|(a, c)| a + theta * (c - a)).collect();
            let tc = certifier.certify(&trial);
            let tm = tc.merit(tol_in, tol_bc);
            if tm < merit || tm <= 1.0 {
                break (trial, tc, tm, theta);
            }
            theta *= 0.5;
            if theta < MIN_DAMPING {
                forced_steps += 1;
                theta = 1.0;
                let tc = certifier.certify(&cand);
                let tm = tc.merit(tol_in, tol_bc);
                break (cand.clone(), tc, tm, 1.0);
            }
        };
        if step == theta {
            theta = (2.0 * theta).min(1.0);
        }
        history.push(step);
        iterations += 1;

        // active-set update
        let rho = certifier.multipliers(&next);
        for (k, &i) in gamma3.iter().enumerate() {
            let (old, new) = (u[i], next[i]);
            modes[k] = match modes[k] {
                Mode::Pinned(q) if new == q => {
                    if p.subdiff(q).distance(rho[k]) > 0.1 * tol_bc {
                        Mode::Smooth(release_side(p, q, rho[k]))
                    } else {
                        Mode::Pinned(q)
                    }
                }
                Mode::Pinned(q) => Mode::Pinned(q),
                Mode::Smooth(side) => advance(p, &kinks, old, side, new, &mut crossings[k]),
            };
        }
        u = next;
        cert = next_cert;
        merit = next_merit;
        if merit < best.0 {
            best = (merit, u.clone(), cert.clone());
        }
    }

    let converged = best.0 <= 1.0;
    let (_, values, certificate) = best;
    Ok(SolveReport {
        solution: Solution::new(sys, values, ProblemKind::Hvi { potential: p.id() }, alpha),
        iterations,
        linear_residual,
        certificate: Some(certificate),
        converged,
        damping_history: history,
        forced_steps,
    })
}

/// Convex case by cyclic coordinate descent with scalar proximal steps on the
/// Schur complement of the free Γ₃ values.
pub fn solve_vi_convex(mesh: &Mesh, data: &ProblemData, p: &PotentialSpec, opts: &SolverOptions) -> Result<SolveReport, SolverError> {
    let sys = AssembledSystem::new(mesh, data)?;
    solve_vi_convex_assembled(mesh, &sys, data, p, opts)
}

pub fn solve_vi_convex_assembled(
    mesh: &Mesh,
    sys: &AssembledSystem,
    data: &ProblemData,
    p: &PotentialSpec,
    opts: &SolverOptions,
) -> Result<SolveReport, SolverError> {
    if !p.convex {
        return Err(SolverError::NotConvex(p.id()));
    }
    check_anchor(data, p)?;
    let n = mesh.num_vertices();
    let alpha = data.alpha;
    let certifier = Certifier::new(sys, p, alpha);
    let g = certifier.gamma3_nodes().to_vec();
    let inner: Vec<usize> = sys.dofs.free.iter().copied().filter(|i| g.binary_search(i).is_err()).collect();
    let a = &sys.stiffness;
    let f = &sys.load;
    let a_ii = SpdSolver::new(a.submatrix(&inner, &inner))?;
    let a_ig = a.submatrix(&inner, &g);
    let a_gi = a.submatrix(&g, &inner);
    let a_gg = a.submatrix(&g, &g);
    let ng = g.len();

    // S = A_GG - A_GI A_II⁻¹ A_IG, dense
    let mut s = vec![vec![0.0; ng]; ng];
    for c in 0..ng {
        let mut e = vec![0.0; ng];
        e[c] = 1.0;
        let col = a_ig.mul_vec(&e);
        let (x, _) = a_ii.solve(&col)?;
        let corr = a_gi.mul_vec(&x);
        for r in 0..ng {
            s[r][c] = a_gg.get(r, c) - corr[r];
        }
    }
    let f_i: Vec<f64> = inner.iter().map(|&i| f[i]).collect();
    let (x0, _) = a_ii.solve(&f_i)?;
    let corr = a_gi.mul_vec(&x0);
    let f_red: Vec<f64> = (0..ng).map(|r| f[g[r]] - corr[r]).collect();

    let start = initial_iterate(n, sys, p, opts)?;
    let mut t: Vec<f64> = g.iter().map(|&i| start[i]).collect();
    let recover = |t: &[f64]| -> Result<(Vec<f64>, f64), SolverError> {
        let mut u = vec![0.0; n];
        for (k, &i) in g.iter().enumerate() {
            u[i] = t[k];
        }
        let res = solve_constrained(a, f, &inner, &mut u)?;
        Ok((u, res))
    };

    let mut sweeps = 0;
    let (mut u, mut linear_residual) = recover(&t)?;
    let mut cert = certifier.certify(&u);
    while !cert.passes(opts.tol_interior, opts.tol_inclusion) && sweeps < opts.max_iters {
        let mut change = 0.0_f64;
        for k in 0..ng {
            let off: f64 = (0..ng).filter(|&c| c != k).map(|c| s[k][c] * t[c]).sum();
            let z = (f_red[k] - off) / s[k][k];
            let tau = alpha * sys.boundary_mass.lumped[g[k]] / s[k][k];
            let next = p.prox(tau, z).ok_or(SolverError::NotConvex(p.id()))?;
            change = change.max((next - t[k]).abs());
            t[k] = next;
        }
        sweeps += 1;
        let scale = 1.0 + t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if change <= 1e-14 * scale || sweeps % 25 == 0 || sweeps == opts.max_iters {
            (u, linear_residual) = recover(&t)?;
            cert = certifier.certify(&u);
        }
    }
    let converged = cert.passes(opts.tol_interior, opts.tol_inclusion);
    Ok(SolveReport {
        solution: Solution::new(sys, u, ProblemKind::ConvexVi { potential: p.id() }, alpha),
        iterations: sweeps,
        linear_residual,
        certificate: Some(cert),
        converged,
        damping_history: vec![],
        forced_steps: 0,
    })
}
