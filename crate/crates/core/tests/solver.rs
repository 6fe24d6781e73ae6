mod common;

use common::{b_of, max_abs_diff, random_direction, random_sign_data, rng};
use hvi_core::assembly::{build_dof_map, estimate_coercivity, AssembledSystem, ProblemData, Space};
use hvi_core::mesh::Mesh;
use hvi_core::potentials::PotentialSpec;
use hvi_core::solver::{
    check_certificate, solve_dirichlet, solve_hvi, solve_robin_lumped, solve_vi_convex, Certifier, SolverOptions,
};
use rand::Rng;

fn potentials(b: f64) -> Vec<PotentialSpec> {
    vec![
        PotentialSpec::exp_quadratic(b),
        PotentialSpec::min_quadratics(b, 1.0, 0.0, 3.0, -1.0).unwrap(),
        PotentialSpec::quadratic(b),
        PotentialSpec::truncated_quadratic(b, -2.0, 2.0, 1.0).unwrap(),
        PotentialSpec::abs(b),
    ]
}

#[test]
fn quadratic_potential_reproduces_lumped_robin() {
    let mesh = Mesh::unit_square(8).unwrap();
    for seed in 0..5 {
        let data = random_sign_data(&mesh, seed);
        let p = PotentialSpec::quadratic(b_of(&data));
        let hvi = solve_hvi(&mesh, &data, &p, &SolverOptions::default()).unwrap();
        assert!(hvi.converged);
        let robin = solve_robin_lumped(&mesh, &data).unwrap();
        assert!(max_abs_diff(&hvi.solution.values, &robin.solution.values) <= 1e-8);
    }
}

#[test]
fn every_builtin_certifies_on_sign_data() {
    let mesh = Mesh::unit_square(8).unwrap();
    for seed in 10..13 {
        let data = random_sign_data(&mesh, seed);
        for p in potentials(b_of(&data)) {
            let r = solve_hvi(&mesh, &data, &p, &SolverOptions::default()).unwrap();
            assert!(r.converged, "{} seed {seed}", p.id());
            let c = r.certificate.as_ref().unwrap();
            assert!(c.passes(1e-9, 1e-8));
            // the independent check reproduces the solver's certificate
            let again = check_certificate(&mesh, &data, &p, &r.solution).unwrap();
            assert_eq!(&again, c);
            // comparison with the anchor
            assert!(r.solution.max() <= b_of(&data) + 1e-9, "{}", p.id());
        }
    }
}

#[test]
fn certificate_implies_discrete_inequality() {
    let mesh = Mesh::unit_square(8).unwrap();
    let fixed = build_dof_map(&mesh, Space::V0).fixed;
    let mut r = rng(99);
    for seed in 20..22 {
        let data = random_sign_data(&mesh, seed);
        let sys = AssembledSystem::new(&mesh, &data).unwrap();
        for p in potentials(b_of(&data)) {
            let rep = solve_hvi(&mesh, &data, &p, &SolverOptions::default()).unwrap();
            assert!(rep.converged);
            let cert = Certifier::new(&sys, &p, data.alpha);
            for _ in 0..1000 {
                let v = random_direction(&mut r, mesh.num_vertices(), &fixed);
                let gap = cert.inequality_gap(&rep.solution.values, &v);
                assert!(gap >= -1e-7, "{}: gap {gap}", p.id());
            }
        }
    }
}

#[test]
fn perturbed_solution_fails_certificate() {
    let mesh = Mesh::unit_square(8).unwrap();
    let data = random_sign_data(&mesh, 3);
    let p = PotentialSpec::exp_quadratic(b_of(&data));
    let mut rep = solve_hvi(&mesh, &data, &p, &SolverOptions::default()).unwrap();
    let interior = mesh.vertices().iter().position(|q| q[0] == 0.5 && q[1] == 0.5).unwrap();
    rep.solution.values[interior] += 1e-3;
    let c = check_certificate(&mesh, &data, &p, &rep.solution).unwrap();
    assert!(!c.passes(1e-9, 1e-8));
}

#[test]
fn convex_solver_agrees_with_semismooth_solver() {
    let mesh = Mesh::unit_square(8).unwrap();
    for seed in 30..33 {
        let data = random_sign_data(&mesh, seed);
        let b = b_of(&data);
        for p in [PotentialSpec::quadratic(b), PotentialSpec::abs(b), PotentialSpec::truncated_quadratic(b, -2.0, 2.0, 1.0).unwrap()] {
            let a = solve_hvi(&mesh, &data, &p, &SolverOptions::default()).unwrap();
            let c = solve_vi_convex(&mesh, &data, &p, &SolverOptions::default()).unwrap();
            assert!(a.converged && c.converged, "{}", p.id());
            assert!(max_abs_diff(&a.solution.values, &c.solution.values) <= 1e-7, "{}", p.id());
        }
    }
    let data = random_sign_data(&mesh, 1);
    assert!(solve_vi_convex(&mesh, &data, &PotentialSpec::exp_quadratic(b_of(&data)), &SolverOptions::default()).is_err());
}

#[test]
fn multistart_agrees_under_smallness() {
    let mesh = Mesh::unit_square(8).unwrap();
    let est = estimate_coercivity(&mesh).unwrap();
    let base = ProblemData::constant(&mesh, -1.0, 0.5, 1.0, 0.5).unwrap();
    let p = PotentialSpec::exp_quadratic(1.0);
    assert!(est.smallness_holds(0.5, p.m_j.unwrap()));
    let reference = solve_hvi(&mesh, &base, &p, &SolverOptions::default()).unwrap();
    assert!(reference.converged);
    for seed in 0..10 {
        let opts = SolverOptions { seed: Some(seed), ..SolverOptions::default() };
        let r = solve_hvi(&mesh, &base, &p, &opts).unwrap();
        assert!(r.converged, "seed {seed}");
        assert!(max_abs_diff(&r.solution.values, &reference.solution.values) <= 1e-6, "seed {seed}");
    }
}

#[test]
fn solves_are_bitwise_deterministic() {
    let mesh = Mesh::unit_square(8).unwrap();
    let data = random_sign_data(&mesh, 5);
    let p = PotentialSpec::min_quadratics(b_of(&data), 1.0, 0.0, 3.0, -1.0).unwrap();
    let opts = SolverOptions { seed: Some(11), ..SolverOptions::default() };
    let a = solve_hvi(&mesh, &data, &p, &opts).unwrap();
    let b = solve_hvi(&mesh, &data, &p, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn iteration_cap_reports_failure_with_last_iterate() {
    let mesh = Mesh::unit_square(8).unwrap();
    let data = ProblemData::constant(&mesh, -1.0, 0.5, 1.0, 10.0).unwrap();
    let p = PotentialSpec::exp_quadratic(1.0);
    let opts = SolverOptions { max_iters: 1, seed: Some(3), ..SolverOptions::default() };
    let r = solve_hvi(&mesh, &data, &p, &opts).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 1);
    assert_eq!(r.solution.values.len(), mesh.num_vertices());
    assert!(r.certificate.unwrap().max() > 0.0);
}

#[test]
fn dirichlet_field_bounds_hvi_fields() {
    let mesh = Mesh::unit_square(8).unwrap();
    let mut r = rng(4);
    for _ in 0..3 {
        let alpha = r.gen_range(0.5..50.0);
        let data = ProblemData::constant(&mesh, -1.0, 0.5, 1.0, alpha).unwrap();
        let limit = solve_dirichlet(&mesh, &data).unwrap().solution.values;
        for p in potentials(1.0) {
            let u = solve_hvi(&mesh, &data, &p, &SolverOptions::default()).unwrap();
            assert!(u.converged);
            for (a, b) in u.solution.values.iter().zip(&limit) {
                assert!(*a <= b + 1e-9, "{} alpha {alpha}", p.id());
            }
        }
    }
}

mod properties {
    use super::*;
    use hvi_core::mesh::VertexClass;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solution_invariants(seed in any::<u64>(), n in 2usize..=6, which in 0usize..5) {
            let mesh = Mesh::unit_square(n).unwrap();
            let data = random_sign_data(&mesh, seed);
            let sys = AssembledSystem::new(&mesh, &data).unwrap();
            let p = potentials(b_of(&data)).swap_remove(which);
            let opts = SolverOptions::default();
            let r = solve_hvi(&mesh, &data, &p, &opts).unwrap();
            let u = &r.solution.values;
            for (v, c) in mesh.vertex_classes().iter().enumerate() {
                if *c == VertexClass::Gamma1 {
                    prop_assert_eq!(u[v], 0.0);
                }
            }
            let v0 = sys.stiffness.quad_form(u);
            prop_assert!((r.solution.v0_seminorm.powi(2) - v0).abs() <= 1e-10 * (1.0 + v0));
            let v = v0 + sys.domain_mass.quad_form(u);
            prop_assert!((r.solution.v_norm.powi(2) - v).abs() <= 1e-10 * (1.0 + v));
            prop_assert!(r.converged, "{} did not converge", p.id());
            prop_assert!(r.certificate.unwrap().passes(opts.tol_interior, opts.tol_inclusion));
        }
    }
}
