//! P1 assembly of the forms `a(u,v) = ∫ ∇u·∇v`, the Γ₃ trace mass, the load
//! `L(v) = ∫ g v − ∫_{Γ₂} q v`, and the constrained spaces V₀ and K₀.
//!
//! All element integrals use closed-form P1 formulas; there is no quadrature error.

use thiserror::Error;

use crate::linsolve::{LinearSolveError, SpdSolver};
use crate::mesh::{BoundaryTag, Mesh, VertexClass};
use crate::sparse::{dot, CsrMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("triangle {triangle} is degenerate (signed area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("flux supplied on boundary edge {edge}, which is not a Γ₂ edge")]
    FluxOffGamma2 { edge: usize },
    #[error("{what} has {got} entries, expected {expected}")]
    Length { what: &'static str, got: usize, expected: usize },
    #[error("problem.alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),
    #[error("sign condition violated: {0}")]
    SignCondition(String),
    #[error("mesh has no Γ₃ edges")]
    EmptyGamma3,
    #[error("eigenvalue iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    EigenNoConvergence { iterations: usize, estimate: f64, last_iterate: Vec<f64> },
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
}

/// Heat flux on Γ₂.
#[derive(Clone, Debug, PartialEq)]
pub enum Flux {
    Zero,
    Constant(f64),
    /// `(boundary edge index, value)`; only Γ₂ edges may appear.
    Edgewise(Vec<(usize, f64)>),
    /// Values at every mesh vertex, integrated over Γ₂ edges only.
    Nodal(Vec<f64>),
}

/// Temperature datum on Γ₃.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryDatum {
    Constant(f64),
    /// Values at every mesh vertex; only Γ₃ vertices are read.
    Nodal(Vec<f64>),
}

impl BoundaryDatum {
    pub fn at(&self, vertex: usize) -> f64 {
        match self {
            BoundaryDatum::Constant(b) => *b,
            BoundaryDatum::Nodal(v) => v[vertex],
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            BoundaryDatum::Constant(b) => Some(*b),
            BoundaryDatum::Nodal(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemData {
    /// Internal energy, one value per vertex.
    pub g: Vec<f64>,
    pub q: Flux,
    pub b: BoundaryDatum,
    pub alpha: f64,
}

impl ProblemData {
    pub fn new(g: Vec<f64>, q: Flux, b: BoundaryDatum, alpha: f64) -> Result<Self, AssemblyError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(AssemblyError::NonPositiveAlpha(alpha));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(AssemblyError::NonFinite("g"));
        }
        let q_finite = match &q {
            Flux::Zero => true,
            Flux::Constant(c) => c.is_finite(),
            Flux::Edgewise(v) => v.iter().all(|(_, x)| x.is_finite()),
            Flux::Nodal(v) => v.iter().all(|x| x.is_finite()),
        };
        if !q_finite {
            return Err(AssemblyError::NonFinite("q"));
        }
        let b_finite = match &b {
            BoundaryDatum::Constant(c) => c.is_finite(),
            BoundaryDatum::Nodal(v) => v.iter().all(|x| x.is_finite()),
        };
        if !b_finite {
            return Err(AssemblyError::NonFinite("b"));
        }
        Ok(ProblemData { g, q, b, alpha })
    }

    /// Homogeneous data with constant `b`.
    pub fn constant(mesh: &Mesh, g: f64, q: f64, b: f64, alpha: f64) -> Result<Self, AssemblyError> {
        let q = if q == 0.0 { Flux::Zero } else { Flux::Constant(q) };
        Self::new(vec![g; mesh.num_vertices()], q, BoundaryDatum::Constant(b), alpha)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, AssemblyError> {
        Self::new(self.g.clone(), self.q.clone(), self.b.clone(), alpha)
    }

    /// The sign hypothesis used by the comparison results:
    /// g ≤ 0 in Ω, q ≥ 0 on Γ₂, b ≥ 0 on Γ₃.
    pub fn check_sign_hypothesis(&self, mesh: &Mesh) -> Result<(), AssemblyError> {
        if let Some((v, g)) = self.g.iter().enumerate().find(|(_, g)| **g > 0.0) {
            return Err(AssemblyError::SignCondition(format!("g = {g} > 0 at vertex {v}")));
        }
        let gamma2_vertices = || mesh.edges_with(BoundaryTag::Gamma2).flat_map(|(_, e)| e.vertices);
        match &self.q {
            Flux::Zero => {}
            Flux::Constant(c) => {
                if *c < 0.0 {
                    return Err(AssemblyError::SignCondition(format!("q = {c} < 0 on Γ₂")));
                }
            }
            Flux::Edgewise(vals) => {
                if let Some((e, c)) = vals.iter().find(|(_, c)| *c < 0.0) {
                    return Err(AssemblyError::SignCondition(format!("q = {c} < 0 on edge {e}")));
                }
            }
            Flux::Nodal(vals) => {
                if let Some(v) = gamma2_vertices().find(|&v| vals[v] < 0.0) {
                    return Err(AssemblyError::SignCondition(format!("q = {} < 0 at vertex {v}", vals[v])));
                }
            }
        }
        let neg_b = mesh
            .edges_with(BoundaryTag::Gamma3)
            .flat_map(|(_, e)| e.vertices)
            .find(|&v| self.b.at(v) < 0.0);
        if let Some(v) = neg_b {
            return Err(AssemblyError::SignCondition(format!("b = {} < 0 at vertex {v}", self.b.at(v))));
        }
        Ok(())
    }
}

/// Stiffness matrix of `a(u,v) = ∫ ∇u·∇v` over all vertices.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<CsrMatrix, AssemblyError> {
    let n = mesh.num_vertices();
    let p = mesh.vertices();
    let mut t = Vec::with_capacity(9 * mesh.triangles().len());
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(k);
        if !(area > 0.0) {
            return Err(AssemblyError::DegenerateTriangle { triangle: k, area });
        }
        // ∇φ_i = (y_j - y_k, x_k - x_j) / (2A), (i, j, k) cyclic
        let mut grad = [[0.0; 2]; 3];
        for i in 0..3 {
            let (pj, pk) = (p[tri[(i + 1) % 3]], p[tri[(i + 2) % 3]]);
            grad[i] = [(pj[1] - pk[1]) / (2.0 * area), (pk[0] - pj[0]) / (2.0 * area)];
        }
        for i in 0..3 {
            for j in 0..3 {
                let v = area * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
                t.push((tri[i], tri[j], v));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, t))
}

/// Consistent P1 mass matrix on Ω.
pub fn assemble_domain_mass(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.num_vertices();
    let mut t = Vec::with_capacity(9 * mesh.triangles().len());
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(k).abs();
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { 2.0 } else { 1.0 };
                t.push((tri[i], tri[j], area * w / 12.0));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}

/// Consistent 1D P1 mass over the edges carrying `tag`.
pub fn assemble_edge_mass(mesh: &Mesh, tag: BoundaryTag) -> CsrMatrix {
    let n = mesh.num_vertices();
    let mut t = Vec::new();
    for (_, e) in mesh.edges_with(tag) {
        let len = mesh.edge_length(e);
        let [a, b] = e.vertices;
        t.push((a, a, len / 3.0));
        t.push((b, b, len / 3.0));
        t.push((a, b, len / 6.0));
        t.push((b, a, len / 6.0));
    }
    CsrMatrix::from_triplets(n, n, t)
}

/// Γ₃ trace mass in both forms.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMass {
    /// Consistent edge mass, full vertex numbering.
    pub consistent: CsrMatrix,
    /// Row sums of `consistent`, one per vertex (zero away from Γ₃).
    pub lumped: Vec<f64>,
    /// Vertices incident to a Γ₃ edge, increasing.
    pub nodes: Vec<usize>,
}

pub fn assemble_boundary_mass(mesh: &Mesh) -> Result<BoundaryMass, AssemblyError> {
    if mesh.edges_with(BoundaryTag::Gamma3).next().is_none() {
        return Err(AssemblyError::EmptyGamma3);
    }
    let consistent = assemble_edge_mass(mesh, BoundaryTag::Gamma3);
    let lumped: Vec<f64> = (0..consistent.nrows()).map(|i| consistent.row(i).map(|(_, v)| v).sum()).collect();
    let nodes = (0..lumped.len()).filter(|&i| lumped[i] > 0.0).collect();
    Ok(BoundaryMass { consistent, lumped, nodes })
}

pub fn assemble_load(mesh: &Mesh, data: &ProblemData) -> Result<Vec<f64>, AssemblyError> {
    let n = mesh.num_vertices();
    if data.g.len() != n {
        return Err(AssemblyError::Length { what: "g", got: data.g.len(), expected: n });
    }
    let mut f = assemble_domain_mass(mesh).mul_vec(&data.g);
    match &data.q {
        Flux::Zero => {}
        Flux::Constant(c) => {
            for (_, e) in mesh.edges_with(BoundaryTag::Gamma2) {
                let half = 0.5 * c * mesh.edge_length(e);
                f[e.vertices[0]] -= half;
                f[e.vertices[1]] -= half;
            }
        }
        Flux::Edgewise(vals) => {
            let edges = mesh.boundary_edges();
            for &(k, c) in vals {
                let e = edges.get(k).ok_or(AssemblyError::Length { what: "q edge index", got: k, expected: edges.len() })?;
                if e.tag != BoundaryTag::Gamma2 {
                    return Err(AssemblyError::FluxOffGamma2 { edge: k });
                }
                let half = 0.5 * c * mesh.edge_length(e);
                f[e.vertices[0]] -= half;
                f[e.vertices[1]] -= half;
            }
        }
        Flux::Nodal(vals) => {
            if vals.len() != n {
                return Err(AssemblyError::Length { what: "q", got: vals.len(), expected: n });
            }
            let mq = assemble_edge_mass(mesh, BoundaryTag::Gamma2).mul_vec(vals);
            for (fi, m) in f.iter_mut().zip(mq) {
                *fi -= m;
            }
        }
    }
    Ok(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// Zero on Γ₁.
    V0,
    /// Zero on Γ₁ ∪ Γ₃.
    K0,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub space: Space,
    pub classes: Vec<VertexClass>,
    pub free: Vec<usize>,
    pub fixed: Vec<usize>,
}

impl DofMap {
    pub fn is_free(&self, v: usize) -> bool {
        self.free.binary_search(&v).is_ok()
    }
}

pub fn build_dof_map(mesh: &Mesh, space: Space) -> DofMap {
    let classes = mesh.vertex_classes();
    let fixed_class = |c: VertexClass| match space {
        Space::V0 => c == VertexClass::Gamma1,
        Space::K0 => matches!(c, VertexClass::Gamma1 | VertexClass::Gamma3),
    };
    let (fixed, free): (Vec<usize>, Vec<usize>) = (0..classes.len()).partition(|&v| fixed_class(classes[v]));
    DofMap { space, classes, free, fixed }
}

/// Everything the solvers need for one mesh and one data set.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub stiffness: CsrMatrix,
    pub domain_mass: CsrMatrix,
    pub boundary_mass: BoundaryMass,
    pub gamma2_mass: CsrMatrix,
    pub load: Vec<f64>,
    pub dofs: DofMap,
}

impl AssembledSystem {
    pub fn new(mesh: &Mesh, data: &ProblemData) -> Result<Self, AssemblyError> {
        Ok(AssembledSystem {
            stiffness: assemble_stiffness(mesh)?,
            domain_mass: assemble_domain_mass(mesh),
            boundary_mass: assemble_boundary_mass(mesh)?,
            gamma2_mass: assemble_edge_mass(mesh, BoundaryTag::Gamma2),
            load: assemble_load(mesh, data)?,
            dofs: build_dof_map(mesh, Space::V0),
        })
    }

    /// `‖v‖²_V = vᵀ(A + M_Ω)v`.
    pub fn v_norm(&self, v: &[f64]) -> f64 {
        (self.stiffness.quad_form(v) + self.domain_mass.quad_form(v)).max(0.0).sqrt()
    }

    /// `‖v‖²_{V₀} = vᵀAv`.
    pub fn v0_seminorm(&self, v: &[f64]) -> f64 {
        self.stiffness.quad_form(v).max(0.0).sqrt()
    }

    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.domain_mass.quad_form(v).max(0.0).sqrt()
    }

    pub fn gamma2_l2_norm(&self, v: &[f64]) -> f64 {
        self.gamma2_mass.quad_form(v).max(0.0).sqrt()
    }
}

/// Sharp discrete constants entering the uniqueness (smallness) condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoercivityEstimates {
    /// `a(v,v) ≥ m_a ‖v‖²_V` on V₀.
    pub m_a: f64,
    /// `‖γv‖_{L²(Γ₃)} ≤ gamma_norm · ‖v‖_{V₀}` on V₀.
    pub gamma_norm: f64,
    pub iterations: usize,
}

impl CoercivityEstimates {
    /// `m_a > α m_j ‖γ‖²`.
    pub fn smallness_holds(&self, alpha: f64, m_j: f64) -> bool {
        self.m_a > alpha * m_j * self.gamma_norm * self.gamma_norm
    }

    /// Largest α for which the smallness condition holds (infinite when `m_j = 0`).
    pub fn alpha_limit(&self, m_j: f64) -> f64 {
        if m_j <= 0.0 {
            f64::INFINITY
        } else {
            self.m_a / (m_j * self.gamma_norm * self.gamma_norm)
        }
    }
}

pub const EIGEN_TOLERANCE: f64 = 1e-8;
pub const EIGEN_MAX_ITERS: usize = 10_000;

/// Largest eigenvalue of the pencil `(B, A)` by power iteration on `A⁻¹B`,
/// returned with the iteration count.
pub fn largest_generalized_eigenvalue(
    a: &SpdSolver,
    b: &CsrMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<(f64, usize), AssemblyError> {
    let n = b.nrows();
    let mut x = vec![1.0; n];
    let mut lambda = f64::NAN;
    for it in 1..=max_iters {
        let bx = b.mul_vec(&x);
        let (y, _) = a.solve(&bx)?;
        let ay = a.matrix().mul_vec(&y);
        let yay = dot(&y, &ay);
        let next = dot(&y, &b.mul_vec(&y)) / yay;
        let scale = yay.sqrt();
        x = y.iter().map(|v| v / scale).collect();
        // successive-change test, three orders inside `tol`
        if (next - lambda).abs() <= 1e-3 * tol * next.abs() {
            return Ok((next, it));
        }
        lambda = next;
    }
    Err(AssemblyError::EigenNoConvergence { iterations: max_iters, estimate: lambda, last_iterate: x })
}

pub fn estimate_coercivity(mesh: &Mesh) -> Result<CoercivityEstimates, AssemblyError> {
    estimate_coercivity_with(mesh, EIGEN_TOLERANCE, EIGEN_MAX_ITERS)
}

pub fn estimate_coercivity_with(mesh: &Mesh, tol: f64, max_iters: usize) -> Result<CoercivityEstimates, AssemblyError> {
    let a = assemble_stiffness(mesh)?;
    let m = assemble_domain_mass(mesh);
    let bm = assemble_boundary_mass(mesh)?;
    let free = build_dof_map(mesh, Space::V0).free;
    let solver = SpdSolver::new(a.submatrix(&free, &free))?;
    // smallest λ of (A, A+M) is 1/(1+μ) with μ the largest of (M, A)
    let (mu, it1) = largest_generalized_eigenvalue(&solver, &m.submatrix(&free, &free), tol, max_iters)?;
    let (g2, it2) = largest_generalized_eigenvalue(&solver, &bm.consistent.submatrix(&free, &free), tol, max_iters)?;
    Ok(CoercivityEstimates { m_a: 1.0 / (1.0 + mu), gamma_norm: g2.sqrt(), iterations: it1 + it2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn two_triangle_stiffness_by_hand() {
        let m = Mesh::unit_square(1).unwrap();
        let a = assemble_stiffness(&m).unwrap();
        // vertices: 0=(0,0) 1=(1,0) 2=(0,1) 3=(1,1); diagonal 0-3
        let expected = [
            [1.0, -0.5, -0.5, 0.0],
            [-0.5, 1.0, 0.0, -0.5],
            [-0.5, 0.0, 1.0, -0.5],
            [0.0, -0.5, -0.5, 1.0],
        ];
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!(close(a.get(i, j), e, 1e-15), "({i},{j})");
            }
        }
    }

    #[test]
    fn constants_in_kernel_and_symmetric() {
        for n in [1, 3, 8] {
            let m = Mesh::unit_square(n).unwrap();
            let a = assemble_stiffness(&m).unwrap();
            assert!(a.symmetry_defect() <= 1e-12);
            let r = a.mul_vec(&vec![1.0; m.num_vertices()]);
            assert!(r.iter().all(|v| v.abs() <= 1e-10));
        }
    }

    #[test]
    fn energy_of_x_is_one() {
        let m = Mesh::unit_square(8).unwrap();
        let a = assemble_stiffness(&m).unwrap();
        let u: Vec<f64> = m.vertices().iter().map(|p| p[0]).collect();
        assert!(close(a.quad_form(&u), 1.0, 1e-12));
    }

    #[test]
    fn degenerate_triangle_reported() {
        let m = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]], vec![], vec![]);
        assert!(matches!(assemble_stiffness(&m), Err(AssemblyError::DegenerateTriangle { triangle: 0, .. })));
    }

    #[test]
    fn load_sums() {
        let m = Mesh::unit_square(2).unwrap();
        let d0 = ProblemData::constant(&m, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(assemble_load(&m, &d0).unwrap().iter().all(|v| *v == 0.0));
        let d1 = ProblemData::constant(&m, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(close(assemble_load(&m, &d1).unwrap().iter().sum(), 1.0, 1e-12));
        let d2 = ProblemData::constant(&m, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(close(assemble_load(&m, &d2).unwrap().iter().sum(), -2.0, 1e-12));
        let nodal = ProblemData::new(vec![0.0; 9], Flux::Nodal(vec![1.0; 9]), BoundaryDatum::Constant(1.0), 1.0).unwrap();
        assert!(close(assemble_load(&m, &nodal).unwrap().iter().sum(), -2.0, 1e-12));
    }

    #[test]
    fn flux_off_gamma2_rejected() {
        let m = Mesh::unit_square(2).unwrap();
        let g3 = m.edges_with(BoundaryTag::Gamma3).next().unwrap().0;
        let d = ProblemData::new(vec![0.0; 9], Flux::Edgewise(vec![(g3, 1.0)]), BoundaryDatum::Constant(1.0), 1.0).unwrap();
        assert_eq!(assemble_load(&m, &d), Err(AssemblyError::FluxOffGamma2 { edge: g3 }));
        let g2 = m.edges_with(BoundaryTag::Gamma2).next().unwrap().0;
        let d = ProblemData::new(vec![0.0; 9], Flux::Edgewise(vec![(g2, 2.0)]), BoundaryDatum::Constant(1.0), 1.0).unwrap();
        assert!(close(assemble_load(&m, &d).unwrap().iter().sum(), -1.0, 1e-14));
    }

    #[test]
    fn boundary_mass_single_edge() {
        let m = Mesh::unit_square(1).unwrap();
        let bm = assemble_boundary_mass(&m).unwrap();
        // Γ₃ edge joins vertices 1 and 3
        assert!(close(bm.consistent.get(1, 1), 1.0 / 3.0, 1e-15));
        assert!(close(bm.consistent.get(1, 3), 1.0 / 6.0, 1e-15));
        assert!(close(bm.consistent.get(3, 3), 1.0 / 3.0, 1e-15));
        assert_eq!(bm.nodes, vec![1, 3]);
        assert!(close(bm.lumped[1], 0.5, 1e-15) && close(bm.lumped[3], 0.5, 1e-15));
        let m4 = Mesh::unit_square(4).unwrap();
        let bm4 = assemble_boundary_mass(&m4).unwrap();
        assert!(close(bm4.lumped.iter().sum(), 1.0, 1e-12));
        assert!(bm4.nodes.iter().all(|&i| bm4.lumped[i] > 0.0));
    }

    #[test]
    fn dof_counts() {
        let m = Mesh::unit_square(2).unwrap();
        let v0 = build_dof_map(&m, Space::V0);
        let k0 = build_dof_map(&m, Space::K0);
        assert_eq!(v0.fixed, vec![0, 3, 6]);
        assert_eq!(k0.fixed.len(), 6);
        assert_eq!(v0.free.len() + v0.fixed.len(), 9);
        assert!(k0.free.iter().all(|&v| m.vertices()[v][0] == 0.5));
    }

    #[test]
    fn sign_hypothesis_gate() {
        let m = Mesh::unit_square(2).unwrap();
        assert!(ProblemData::constant(&m, -1.0, 1.0, 1.0, 1.0).unwrap().check_sign_hypothesis(&m).is_ok());
        assert!(ProblemData::constant(&m, 1.0, 1.0, 1.0, 1.0).unwrap().check_sign_hypothesis(&m).is_err());
        assert!(ProblemData::constant(&m, -1.0, -1.0, 1.0, 1.0).unwrap().check_sign_hypothesis(&m).is_err());
        assert!(ProblemData::constant(&m, -1.0, 1.0, -1.0, 1.0).unwrap().check_sign_hypothesis(&m).is_err());
        assert_eq!(ProblemData::constant(&m, 0.0, 0.0, 1.0, -1.0), Err(AssemblyError::NonPositiveAlpha(-1.0)));
    }

    #[test]
    fn coercivity_constants_in_range() {
        let e4 = estimate_coercivity(&Mesh::unit_square(4).unwrap()).unwrap();
        let e8 = estimate_coercivity(&Mesh::unit_square(8).unwrap()).unwrap();
        for e in [e4, e8] {
            assert!(e.m_a > 0.0 && e.m_a < 1.0);
            assert!(e.gamma_norm > 0.0);
        }
        assert!((e4.m_a - e8.m_a).abs() <= 0.1 * e8.m_a);
        assert!((e4.gamma_norm - e8.gamma_norm).abs() <= 0.1 * e8.gamma_norm);
        assert!(e8.smallness_holds(0.5, 1.0));
        assert!(!e8.smallness_holds(10.0, 1.0));
        assert!(e8.smallness_holds(1e9, 0.0));
    }
}
