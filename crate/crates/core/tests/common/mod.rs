#![allow(dead_code)]

use hvi_core::assembly::{BoundaryDatum, Flux, ProblemData};
use hvi_core::mesh::Mesh;
use hvi_core::potentials::{Interval, Potential, PotentialSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Data with `g ≤ 0`, `q ≥ 0` and constant `b > 0`, drawn from `seed`.
pub fn random_sign_data(mesh: &Mesh, seed: u64) -> ProblemData {
    let mut r = rng(seed);
    let g: Vec<f64> = (0..mesh.num_vertices()).map(|_| -r.gen_range(0.0..2.0)).collect();
    let q: Vec<f64> = (0..mesh.num_vertices()).map(|_| r.gen_range(0.0..1.0)).collect();
    let b = r.gen_range(0.5..2.0);
    let alpha = r.gen_range(0.5..20.0);
    ProblemData::new(g, Flux::Nodal(q), BoundaryDatum::Constant(b), alpha).unwrap()
}

pub fn b_of(data: &ProblemData) -> f64 {
    data.b.constant().unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Random vector vanishing at the `fixed` indices.
pub fn random_direction(r: &mut ChaCha8Rng, len: usize, fixed: &[usize]) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
    for &i in fixed {
        v[i] = 0.0;
    }
    v
}

/// Closed-form `∂j(r)` and `j⁰(r; b - r)` written out case by case,
/// independently of the library's evaluation.
pub fn closed_form(p: &PotentialSpec, r: f64) -> (Interval, f64) {
    let b = p.b;
    match p.potential {
        Potential::ExpQuadratic => {
            if r < b {
                (Interval::point(2.0 * (r - b)), -2.0 * (b - r).powi(2))
            } else if r == b {
                (Interval::new(0.0, 1.0), 0.0)
            } else {
                (Interval::point((-(r - b)).exp()), (-(r - b)).exp() * (b - r))
            }
        }
        Potential::MinQuadratics { k1, e1, k2, e2 } => {
            let (d1, d2) = (k1 * (r - b), k2 * (r - b));
            let (v1, v2) = (0.5 * k1 * (r - b).powi(2) + e1, 0.5 * k2 * (r - b).powi(2) + e2);
            if p.breakpoints().contains(&r) {
                (Interval::new(d1.min(d2), d1.max(d2)), (d1 * (b - r)).max(d2 * (b - r)))
            } else {
                let d = if v1 < v2 || (v1 == v2 && r == b) { d1 } else { d2 };
                (Interval::point(d), d * (b - r))
            }
        }
        Potential::Quadratic => (Interval::point(r - b), (r - b) * (b - r)),
        Potential::TruncatedQuadratic { m1, m2, r0 } => {
            if r < b - r0 {
                (Interval::point(m1), m1 * (b - r))
            } else if r == b - r0 {
                (Interval::new(m1, -r0), -r0 * r0)
            } else if r < b + r0 {
                (Interval::point(r - b), -(b - r).powi(2))
            } else if r == b + r0 {
                (Interval::new(r0, m2), r0 * (b - r))
            } else {
                (Interval::point(m2), m2 * (b - r))
            }
        }
        Potential::Abs => {
            if r < b {
                (Interval::point(-1.0), r - b)
            } else if r == b {
                (Interval::new(-1.0, 1.0), 0.0)
            } else {
                (Interval::point(1.0), b - r)
            }
        }
        _ => panic!("no closed form for {}", p.id()),
    }
}
