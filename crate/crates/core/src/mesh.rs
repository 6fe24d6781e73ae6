//! Triangulated 2D domains whose boundary is split into the three portions
//! Γ₁ (Dirichlet zero), Γ₂ (prescribed flux) and Γ₃ (Robin / subdifferential law).

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Boundary portion carried by a boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Gamma1,
    Gamma2,
    Gamma3,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 3] = [BoundaryTag::Gamma1, BoundaryTag::Gamma2, BoundaryTag::Gamma3];

    /// Token used by the mesh text format.
    pub fn token(self) -> &'static str {
        match self {
            BoundaryTag::Gamma1 => "G1",
            BoundaryTag::Gamma2 => "G2",
            BoundaryTag::Gamma3 => "G3",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "G1" => Some(BoundaryTag::Gamma1),
            "G2" => Some(BoundaryTag::Gamma2),
            "G3" => Some(BoundaryTag::Gamma3),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryTag::Gamma1 => "Γ₁",
            BoundaryTag::Gamma2 => "Γ₂",
            BoundaryTag::Gamma3 => "Γ₃",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// Degree-of-freedom class of a vertex. Corners resolve Dirichlet-first:
/// any incident Γ₁ edge wins, then any incident Γ₃ edge, then Γ₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexClass {
    Interior,
    Gamma1,
    Gamma2,
    Gamma3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    interface_vertices: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("mesh size must be at least 1, got {0}")]
    InvalidSize(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("boundary tags required")]
    MissingBoundary,
    #[error("invalid mesh: {}", join_violations(.0))]
    Invalid(Vec<MeshViolation>),
}

fn join_violations(v: &[MeshViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// One violated mesh invariant, naming the offending entity.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshViolation {
    TriangleIndexOutOfRange { triangle: usize },
    NonPositiveArea { triangle: usize, area: f64 },
    EdgeIndexOutOfRange { edge: usize },
    EdgeNotOnBoundary { edge: usize },
    DuplicateBoundaryEdge { edge: usize },
    UntaggedBoundaryEdge { vertices: [usize; 2] },
    EmptyTag(BoundaryTag),
    Gamma1Gamma3Vertex { vertex: usize },
}

impl fmt::Display for MeshViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshViolation::TriangleIndexOutOfRange { triangle } => {
                write!(f, "triangle {triangle} references a vertex out of range")
            }
            MeshViolation::NonPositiveArea { triangle, area } => {
                write!(f, "triangle {triangle} has non-positive signed area {area:e}")
            }
            MeshViolation::EdgeIndexOutOfRange { edge } => {
                write!(f, "boundary edge {edge} references a vertex out of range")
            }
            MeshViolation::EdgeNotOnBoundary { edge } => {
                write!(f, "boundary edge {edge} is not a boundary edge of the triangulation")
            }
            MeshViolation::DuplicateBoundaryEdge { edge } => {
                write!(f, "boundary edge {edge} is listed more than once")
            }
            MeshViolation::UntaggedBoundaryEdge { vertices } => {
                write!(f, "boundary edge ({}, {}) carries no tag", vertices[0], vertices[1])
            }
            MeshViolation::EmptyTag(tag) => write!(f, "{tag} empty"),
            MeshViolation::Gamma1Gamma3Vertex { vertex } => {
                write!(f, "vertex {vertex} touches both Γ₁ and Γ₃ but is not a declared interface vertex")
            }
        }
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh without checking invariants; see [`Mesh::validate`].
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        interface_vertices: Vec<usize>,
    ) -> Self {
        Mesh { vertices, triangles, boundary_edges, interface_vertices }
    }

    /// Builds a mesh and rejects it unless every invariant holds.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        interface_vertices: Vec<usize>,
    ) -> Result<Self, MeshError> {
        let m = Self::from_parts(vertices, triangles, boundary_edges, interface_vertices);
        let report = m.validate();
        if report.is_empty() {
            Ok(m)
        } else {
            Err(MeshError::Invalid(report))
        }
    }

    /// Structured triangulation of [0,1]² with `n` cells per side.
    ///
    /// Vertex `(i, j)` has index `j * (n + 1) + i` and sits at `(i/n, j/n)`.
    /// Each cell is split along the diagonal from `(i, j)` to `(i+1, j+1)`.
    /// Tags: Γ₁ = {x = 0}, Γ₃ = {x = 1}, Γ₂ = {y = 0} ∪ {y = 1}.
    pub fn unit_square(n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::InvalidSize(n));
        }
        let np = n + 1;
        let idx = |i: usize, j: usize| j * np + i;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                // exact endpoints, no accumulated drift
                let x = if i == n { 1.0 } else { i as f64 * h };
                let y = if j == n { 1.0 } else { j as f64 * h };
                vertices.push([x, y]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        // counter-clockwise walk: bottom, right, top, left
        let mut edges = Vec::with_capacity(4 * n);
        for i in 0..n {
            edges.push(BoundaryEdge { vertices: [idx(i, 0), idx(i + 1, 0)], tag: BoundaryTag::Gamma2 });
        }
        for j in 0..n {
            edges.push(BoundaryEdge { vertices: [idx(n, j), idx(n, j + 1)], tag: BoundaryTag::Gamma3 });
        }
        for i in (0..n).rev() {
            edges.push(BoundaryEdge { vertices: [idx(i + 1, n), idx(i, n)], tag: BoundaryTag::Gamma2 });
        }
        for j in (0..n).rev() {
            edges.push(BoundaryEdge { vertices: [idx(0, j + 1), idx(0, j)], tag: BoundaryTag::Gamma1 });
        }
        Ok(Mesh { vertices, triangles, boundary_edges: edges, interface_vertices: Vec::new() })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn interface_vertices(&self) -> &[usize] {
        &self.interface_vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Positive for counter-clockwise vertex order.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        let [a, b] = e.vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        (pb[0] - pa[0]).hypot(pb[1] - pa[1])
    }

    /// Total length of the edges carrying `tag`.
    pub fn measure(&self, tag: BoundaryTag) -> f64 {
        self.boundary_edges.iter().filter(|e| e.tag == tag).map(|e| self.edge_length(e)).sum()
    }

    pub fn edges_with(&self, tag: BoundaryTag) -> impl Iterator<Item = (usize, &BoundaryEdge)> {
        self.boundary_edges.iter().enumerate().filter(move |(_, e)| e.tag == tag)
    }

    pub fn vertex_classes(&self) -> Vec<VertexClass> {
        let mut class = vec![VertexClass::Interior; self.vertices.len()];
        let rank = |c: VertexClass| match c {
            VertexClass::Interior => 0,
            VertexClass::Gamma2 => 1,
            VertexClass::Gamma3 => 2,
            VertexClass::Gamma1 => 3,
        };
        for e in &self.boundary_edges {
            let c = match e.tag {
                BoundaryTag::Gamma1 => VertexClass::Gamma1,
                BoundaryTag::Gamma2 => VertexClass::Gamma2,
                BoundaryTag::Gamma3 => VertexClass::Gamma3,
            };
            for &v in &e.vertices {
                if let Some(slot) = class.get_mut(v) {
                    if rank(c) > rank(*slot) {
                        *slot = c;
                    }
                }
            }
        }
        class
    }

    /// Lists every violated invariant; empty iff the mesh is valid.
    pub fn validate(&self) -> Vec<MeshViolation> {
        let nv = self.vertices.len();
        let mut out = Vec::new();

        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                out.push(MeshViolation::TriangleIndexOutOfRange { triangle: t });
                continue;
            }
            let area = self.signed_area(t);
            if !(area > 0.0) {
                out.push(MeshViolation::NonPositiveArea { triangle: t, area });
            }
            for k in 0..3 {
                *edge_count.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }

        let mut listed: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, e) in self.boundary_edges.iter().enumerate() {
            let [a, b] = e.vertices;
            if a >= nv || b >= nv {
                out.push(MeshViolation::EdgeIndexOutOfRange { edge: i });
                continue;
            }
            let key = edge_key(a, b);
            if edge_count.get(&key) != Some(&1) {
                out.push(MeshViolation::EdgeNotOnBoundary { edge: i });
            }
            if listed.insert(key, i).is_some() {
                out.push(MeshViolation::DuplicateBoundaryEdge { edge: i });
            }
        }
        let mut missing: Vec<(usize, usize)> = edge_count
            .iter()
            .filter(|(k, &c)| c == 1 && !listed.contains_key(k))
            .map(|(k, _)| *k)
            .collect();
        missing.sort_unstable();
        for (a, b) in missing {
            out.push(MeshViolation::UntaggedBoundaryEdge { vertices: [a, b] });
        }

        for tag in BoundaryTag::ALL {
            if !self.boundary_edges.iter().any(|e| e.tag == tag) {
                out.push(MeshViolation::EmptyTag(tag));
            }
        }

        let mut touches = vec![(false, false); nv];
        for e in &self.boundary_edges {
            for &v in &e.vertices {
                if v < nv {
                    match e.tag {
                        BoundaryTag::Gamma1 => touches[v].0 = true,
                        BoundaryTag::Gamma3 => touches[v].1 = true,
                        BoundaryTag::Gamma2 => {}
                    }
                }
            }
        }
        for (v, &(g1, g3)) in touches.iter().enumerate() {
            if g1 && g3 && !self.interface_vertices.contains(&v) {
                out.push(MeshViolation::Gamma1Gamma3Vertex { vertex: v });
            }
        }
        out
    }

    /// Serializes into the `meshfmt 1` text format.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(s, "meshfmt 1").unwrap();
        writeln!(s, "vertices {}", self.vertices.len()).unwrap();
        for v in &self.vertices {
            writeln!(s, "{:?} {:?}", v[0], v[1]).unwrap();
        }
        writeln!(s, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        writeln!(s, "boundary {}", self.boundary_edges.len()).unwrap();
        for e in &self.boundary_edges {
            writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.tag.token()).unwrap();
        }
        if !self.interface_vertices.is_empty() {
            writeln!(s, "interfaces {}", self.interface_vertices.len()).unwrap();
            for v in &self.interface_vertices {
                writeln!(s, "{v}").unwrap();
            }
        }
        s
    }

    /// Parses the `meshfmt 1` text format and validates the result.
    pub fn from_text(text: &str) -> Result<Self, MeshError> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let mut cur = Cursor { lines: &lines, pos: 0 };

        let (ln, header) = cur.next().ok_or_else(|| parse_err(1, "empty mesh file"))?;
        if header.split_whitespace().collect::<Vec<_>>() != ["meshfmt", "1"] {
            return Err(parse_err(ln, format!("expected header 'meshfmt 1', found '{header}'")));
        }

        let (vln, nv) = cur.section("vertices")?.ok_or_else(|| parse_err(ln + 1, "expected 'vertices N'"))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = cur.next().ok_or_else(|| parse_err(vln, "unexpected end of file in vertices"))?;
            let f: Vec<f64> = parse_fields(l).map_err(|m| parse_err(ln, m))?;
            if f.len() != 2 || f.iter().any(|x| !x.is_finite()) {
                return Err(parse_err(ln, "vertex line must hold two finite coordinates"));
            }
            vertices.push([f[0], f[1]]);
        }

        let (tln, nt) = cur.section("triangles")?.ok_or_else(|| parse_err(cur.line(), "expected 'triangles M'"))?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = cur.next().ok_or_else(|| parse_err(tln, "unexpected end of file in triangles"))?;
            let f: Vec<usize> = parse_fields(l).map_err(|m| parse_err(ln, m))?;
            if f.len() != 3 {
                return Err(parse_err(ln, "triangle line must hold three vertex indices"));
            }
            if let Some(&bad) = f.iter().find(|&&v| v >= nv) {
                return Err(parse_err(ln, format!("vertex index {bad} out of range (have {nv} vertices)")));
            }
            triangles.push([f[0], f[1], f[2]]);
        }

        let (bln, nb) = cur.section("boundary")?.ok_or(MeshError::MissingBoundary)?;
        let mut edges = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (ln, l) = cur.next().ok_or_else(|| parse_err(bln, "unexpected end of file in boundary"))?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_err(ln, "boundary line must be 'i j TAG'"));
            }
            let a: usize = parts[0].parse().map_err(|_| parse_err(ln, format!("bad index '{}'", parts[0])))?;
            let b: usize = parts[1].parse().map_err(|_| parse_err(ln, format!("bad index '{}'", parts[1])))?;
            if a >= nv || b >= nv {
                return Err(parse_err(ln, format!("vertex index {} out of range (have {nv} vertices)", a.max(b))));
            }
            let tag = BoundaryTag::from_token(parts[2])
                .ok_or_else(|| parse_err(ln, format!("unknown tag '{}', expected G1, G2 or G3", parts[2])))?;
            edges.push(BoundaryEdge { vertices: [a, b], tag });
        }
        if edges.is_empty() {
            return Err(MeshError::MissingBoundary);
        }

        let mut interfaces = Vec::new();
        if let Some((iln, ni)) = cur.section("interfaces")? {
            for _ in 0..ni {
                let (ln, l) = cur.next().ok_or_else(|| parse_err(iln, "unexpected end of file in interfaces"))?;
                let f: Vec<usize> = parse_fields(l).map_err(|m| parse_err(ln, m))?;
                match f.as_slice() {
                    [v] if *v < nv => interfaces.push(*v),
                    _ => return Err(parse_err(ln, "interface line must hold one valid vertex index")),
                }
            }
        }
        if let Some((ln, l)) = cur.next() {
            return Err(parse_err(ln, format!("unexpected content '{l}'")));
        }
        Mesh::new(vertices, triangles, edges, interfaces)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

struct Cursor<'a> {
    lines: &'a [(usize, &'a str)],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        let item = self.lines.get(self.pos).copied();
        self.pos += 1;
        item
    }

    fn line(&self) -> usize {
        self.lines.get(self.pos).map_or(0, |l| l.0)
    }

    /// Consumes a `name COUNT` header if it is next.
    fn section(&mut self, name: &str) -> Result<Option<(usize, usize)>, MeshError> {
        let Some(&(ln, l)) = self.lines.get(self.pos) else { return Ok(None) };
        let mut it = l.split_whitespace();
        if it.next() != Some(name) {
            return Ok(None);
        }
        self.pos += 1;
        let count = it
            .next()
            .and_then(|c| c.parse::<usize>().ok())
            .ok_or_else(|| parse_err(ln, format!("section '{name}' needs a count")))?;
        Ok(Some((ln, count)))
    }
}

fn parse_fields<T: std::str::FromStr>(l: &str) -> Result<Vec<T>, String> {
    l.split_whitespace()
        .map(|s| s.parse::<T>().map_err(|_| format!("cannot parse '{s}'")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag_counts(m: &Mesh) -> [usize; 3] {
        let mut c = [0; 3];
        for e in m.boundary_edges() {
            c[e.tag as usize] += 1;
        }
        c
    }

    #[test]
    fn smallest_square() {
        let m = Mesh::unit_square(1).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.triangles().len(), 2);
        assert_eq!(m.boundary_edges().len(), 4);
        assert_eq!(tag_counts(&m), [1, 2, 1]);
    }

    #[test]
    fn counts_and_area() {
        let m = Mesh::unit_square(2).unwrap();
        assert_eq!((m.num_vertices(), m.triangles().len(), m.boundary_edges().len()), (9, 8, 8));
        for n in 1..=9 {
            let m = Mesh::unit_square(n).unwrap();
            assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
            assert_eq!(m.triangles().len(), 2 * n * n);
            assert_eq!(tag_counts(&m), [n, 2 * n, n]);
            let area: f64 = (0..m.triangles().len()).map(|t| m.signed_area(t)).sum();
            assert!((area - 1.0).abs() <= 1e-12);
            assert!(m.validate().is_empty());
        }
    }

    #[test]
    fn zero_size_rejected() {
        assert_eq!(Mesh::unit_square(0), Err(MeshError::InvalidSize(0)));
    }

    #[test]
    fn negative_orientation_named() {
        let m = Mesh::unit_square(3).unwrap();
        let mut tris = m.triangles().to_vec();
        tris[5].swap(1, 2);
        let bad = Mesh::from_parts(m.vertices().to_vec(), tris, m.boundary_edges().to_vec(), vec![]);
        let report = bad.validate();
        assert_eq!(report.len(), 1);
        assert!(matches!(report[0], MeshViolation::NonPositiveArea { triangle: 5, .. }));
        assert!(report[0].to_string().contains("triangle 5"));
    }

    #[test]
    fn missing_gamma3_reported() {
        let m = Mesh::unit_square(3).unwrap();
        let edges = m
            .boundary_edges()
            .iter()
            .map(|e| BoundaryEdge {
                tag: if e.tag == BoundaryTag::Gamma3 { BoundaryTag::Gamma2 } else { e.tag },
                ..*e
            })
            .collect();
        let bad = Mesh::from_parts(m.vertices().to_vec(), m.triangles().to_vec(), edges, vec![]);
        let msgs: Vec<String> = bad.validate().iter().map(|v| v.to_string()).collect();
        assert_eq!(msgs, vec!["Γ₃ empty".to_string()]);
    }

    #[test]
    fn untagged_and_duplicate_edges() {
        let m = Mesh::unit_square(2).unwrap();
        let mut edges = m.boundary_edges().to_vec();
        let dropped = edges.remove(0);
        edges.push(edges[0]);
        let bad = Mesh::from_parts(m.vertices().to_vec(), m.triangles().to_vec(), edges, vec![]);
        let r = bad.validate();
        assert!(r.contains(&MeshViolation::DuplicateBoundaryEdge { edge: 7 }));
        let key = edge_key(dropped.vertices[0], dropped.vertices[1]);
        assert!(r.contains(&MeshViolation::UntaggedBoundaryEdge { vertices: [key.0, key.1] }));
    }

    #[test]
    fn gamma1_gamma3_corner_needs_declaration() {
        // single triangle square half: Γ₁ and Γ₃ edges share vertex 1
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let edges = vec![
            BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::Gamma1 },
            BoundaryEdge { vertices: [1, 2], tag: BoundaryTag::Gamma3 },
            BoundaryEdge { vertices: [2, 0], tag: BoundaryTag::Gamma2 },
        ];
        let m = Mesh::from_parts(vertices.clone(), vec![[0, 1, 2]], edges.clone(), vec![]);
        assert_eq!(m.validate(), vec![MeshViolation::Gamma1Gamma3Vertex { vertex: 1 }]);
        let m = Mesh::from_parts(vertices, vec![[0, 1, 2]], edges, vec![1]);
        assert!(m.validate().is_empty());
        assert_eq!(m.vertex_classes()[1], VertexClass::Gamma1);
    }

    #[test]
    fn corner_classes_follow_dirichlet_first() {
        let m = Mesh::unit_square(2).unwrap();
        let c = m.vertex_classes();
        // (0,0) Γ₁, (1,0) Γ₃, (0.5,0) Γ₂, centre interior
        assert_eq!(c[0], VertexClass::Gamma1);
        assert_eq!(c[2], VertexClass::Gamma3);
        assert_eq!(c[1], VertexClass::Gamma2);
        assert_eq!(c[4], VertexClass::Interior);
        assert_eq!(c[8], VertexClass::Gamma3);
        assert_eq!(c[6], VertexClass::Gamma1);
    }

    #[test]
    fn text_round_trip() {
        let m = Mesh::unit_square(2).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn out_of_range_triangle_names_line() {
        let text = "meshfmt 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 7\nboundary 0\n";
        match Mesh::from_text(text) {
            Err(MeshError::Parse { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.contains("out of range"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn boundary_section_required() {
        let text = "meshfmt 1\n# comment\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\n";
        let e = Mesh::from_text(text).unwrap_err();
        assert_eq!(e, MeshError::MissingBoundary);
        assert_eq!(e.to_string(), "boundary tags required");
    }

    #[test]
    fn comments_and_interfaces_parse() {
        let text = "meshfmt 1\nvertices 3 # three\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary 3\n0 1 G1\n1 2 G3\n2 0 G2\ninterfaces 1\n1\n";
        let m = Mesh::from_text(text).unwrap();
        assert_eq!(m.interface_vertices(), &[1]);
        assert_eq!(Mesh::from_text(&m.to_text()).unwrap(), m);
    }
}
