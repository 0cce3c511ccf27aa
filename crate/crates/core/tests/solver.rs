mod common;

use std::sync::Arc;

use common::fixture;
use sol3graph_core::solver::{solve_from, BoundaryValue};
use sol3graph_core::{
    residual, solve_dirichlet, triangulate, DirichletData, Error, HalfPlanePoint, Mesh, NodeTag, ScherkDomain, Solution,
    SolverConfig,
};

fn mesh(d: &ScherkDomain, h: f64) -> Arc<Mesh> {
    Arc::new(triangulate(d, h, h).unwrap())
}

fn max_error(sol: &Solution, f: impl Fn(HalfPlanePoint) -> f64) -> f64 {
    sol.mesh.nodes.iter().zip(&sol.u).map(|(p, u)| (u - f(*p)).abs()).fold(0.0, f64::max)
}

fn solve_exact(h: f64, f: fn(HalfPlanePoint) -> f64) -> f64 {
    let d = fixture("triangle_c");
    let m = mesh(&d, h);
    let sol = solve_dirichlet(&m, &DirichletData::from_fn(&d, f), &SolverConfig::with_h(h)).unwrap();
    max_error(&sol, f)
}

/// RMS of the expanded operator over 40 points within 0.2 of the incenter of
/// the triangle fixture, so every point is more than 2h from the boundary for
/// h ≤ 0.1.
fn residual_rms(sol: &Solution) -> f64 {
    let pts: Vec<HalfPlanePoint> = (0..40)
        .map(|k| {
            let r = 0.2 * ((k as f64 + 0.5) / 40.0).sqrt();
            let t = 2.399963 * k as f64;
            HalfPlanePoint::new(1.0 + r * t.cos(), 2f64.sqrt() + r * t.sin())
        })
        .collect();
    let sum: f64 = pts.iter().map(|&p| residual(sol, p).unwrap().powi(2)).sum();
    (sum / pts.len() as f64).sqrt()
}

#[test]
fn constant_data_is_reproduced_in_one_iteration() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.1);
    let data = DirichletData::from_fn(&d, |_| 2.5);
    let sol = solve_dirichlet(&m, &data, &SolverConfig::with_h(0.1)).unwrap();
    assert_eq!(sol.iterations, 1);
    assert!(sol.u.iter().all(|v| (v - 2.5).abs() < 1e-12));
    assert!(sol.is_discrete_subsolution() && sol.is_discrete_supersolution());
}

#[test]
fn linear_solution_is_recovered() {
    let e1 = solve_exact(0.05, |p| 2.0 * p.x - 1.0);
    let e2 = solve_exact(0.025, |p| 2.0 * p.x - 1.0);
    assert!(e1 <= 1e-3, "{e1}");
    assert!(e2 <= 0.25 * e1, "{e1} -> {e2}");
}

#[test]
fn reciprocal_solution_is_recovered() {
    let e = solve_exact(0.05, |p| 3.0 - 1.0 / p.y);
    assert!(e <= 1e-3, "{e}");
}

#[test]
fn boundary_values_are_exact() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.1);
    let f = |p: HalfPlanePoint| p.x * p.x - p.y;
    let sol = solve_dirichlet(&m, &DirichletData::from_fn(&d, f), &SolverConfig::with_h(0.1)).unwrap();
    for i in 0..m.node_count() {
        if m.is_boundary(i) {
            assert_eq!(sol.u[i], f(m.nodes[i]));
        }
    }
    assert!(sol.update_norm <= sol.config.picard_tol);
}

#[test]
fn residual_examples() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.05);
    let c = Solution::interpolate(&m, |_| 1.0);
    assert!(residual(&c, HalfPlanePoint::new(1.0, 1.4)).unwrap().abs() < 1e-9);
    let sq = Solution::interpolate(&m, |p| p.y * p.y);
    for p in [(1.0, 1.3), (0.9, 1.4), (1.1, 1.25)] {
        let r = residual(&sq, HalfPlanePoint::new(p.0, p.1)).unwrap();
        assert!((r - 6.0).abs() <= 0.6, "{p:?}: {r}");
    }
    assert!(matches!(residual(&sq, HalfPlanePoint::new(5.0, 5.0)), Err(Error::OutsideMesh(..))));
}

/// Uniform right-triangle mesh of [0, 1] × [1, 2] with n cells per side.
fn lattice(n: usize) -> Arc<Mesh> {
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize| i * (n + 1) + j;
    let mut nodes = Vec::new();
    let mut tags = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            nodes.push(HalfPlanePoint::new(j as f64 * h, 1.0 + i as f64 * h));
            let edge = i == 0 || j == 0 || i == n || j == n;
            tags.push(if edge { NodeTag::Arc(0) } else { NodeTag::Interior });
        }
    }
    let mut tris = Vec::new();
    for i in 0..n {
        for j in 0..n {
            tris.push([id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
        }
    }
    let params = vec![0.0; nodes.len()];
    Arc::new(Mesh::from_parts(nodes, tris, tags, params, h * 2f64.sqrt(), vec![], vec![]).unwrap())
}

#[test]
fn interpolant_of_y_squared_is_a_strict_subsolution() {
    for n in [10, 20, 40] {
        let sq = Solution::interpolate(&lattice(n), |p| p.y * p.y);
        assert!(sq.is_discrete_subsolution(), "n = {n}");
        assert!(!sq.is_discrete_supersolution(), "n = {n}");
        let c = Solution::interpolate(&lattice(n), |_| 3.0);
        assert!(c.is_discrete_subsolution() && c.is_discrete_supersolution());
    }
}

#[test]
fn residual_decreases_under_refinement() {
    let d = fixture("triangle_c");
    let f = |p: HalfPlanePoint| p.x * p.x + 0.5 * p.y;
    let rms: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let sol = solve_dirichlet(&mesh(&d, h), &DirichletData::from_fn(&d, f), &SolverConfig::with_h(h)).unwrap();
            assert!(sol.is_discrete_subsolution() && sol.is_discrete_supersolution());
            residual_rms(&sol)
        })
        .collect();
    for w in rms.windows(2) {
        assert!(w[0] / w[1] >= 2.0, "{rms:?}");
    }
}

#[test]
fn shift_invariance() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.05);
    let cfg = SolverConfig {
        newton: true,
        ..SolverConfig::with_h(0.05)
    };
    let f = |p: HalfPlanePoint| (3.0 * p.x).sin() + p.y;
    let u = solve_dirichlet(&m, &DirichletData::from_fn(&d, f), &cfg).unwrap();
    let v = solve_dirichlet(&m, &DirichletData::from_fn(&d, move |p| f(p) + 1.0), &cfg).unwrap();
    let worst = u.u.iter().zip(&v.u).map(|(a, b)| (b - a - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn update_norms_settle() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.05);
    let f = |p: HalfPlanePoint| 4.0 * (p.x - 1.0).powi(2) + p.y;
    let sol = solve_dirichlet(&m, &DirichletData::from_fn(&d, f), &SolverConfig::with_h(0.05)).unwrap();
    let tail = &sol.history[sol.history.len().saturating_sub(10)..];
    assert!(tail.windows(2).all(|w| w[1] <= w[0]), "{tail:?}");
    assert_eq!(sol.iterations, sol.history.len());
}

#[test]
fn newton_tail_matches_picard() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.05);
    let f = |p: HalfPlanePoint| 4.0 * (p.x - 1.0).powi(2) + p.y;
    let data = DirichletData::from_fn(&d, f);
    let picard = solve_dirichlet(&m, &data, &SolverConfig::with_h(0.05)).unwrap();
    let cfg = SolverConfig {
        newton: true,
        ..SolverConfig::with_h(0.05)
    };
    let newton = solve_dirichlet(&m, &data, &cfg).unwrap();
    let worst = picard.u.iter().zip(&newton.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
    assert!(newton.iterations <= picard.iterations);
}

#[test]
fn non_convergence_carries_last_iterate() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.05);
    let cfg = SolverConfig {
        picard_max_iters: 2,
        ..SolverConfig::with_h(0.05)
    };
    let data = DirichletData::from_fn(&d, |p| 10.0 * p.x);
    match solve_dirichlet(&m, &data, &cfg) {
        Err(Error::NoConvergence {
            iterations,
            update_norm,
            last,
        }) => {
            assert_eq!(iterations, 2);
            assert!(update_norm > cfg.picard_tol);
            assert_eq!(last.u.len(), m.node_count());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_configuration_and_data() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.1);
    let data = DirichletData::from_domain(&d).unwrap();
    for cfg in [
        SolverConfig {
            damping: 0.0,
            ..SolverConfig::with_h(0.1)
        },
        SolverConfig {
            picard_tol: -1.0,
            ..SolverConfig::with_h(0.1)
        },
    ] {
        assert!(matches!(solve_dirichlet(&m, &data, &cfg), Err(Error::Config(_))));
    }
    assert!(DirichletData::from_domain(&fixture("scherk_triangle")).is_err());
    assert!(DirichletData::new(&d, vec![BoundaryValue::Constant(0.0)]).is_err());
    let nan = DirichletData::from_fn(&d, |_| f64::NAN);
    assert!(matches!(solve_dirichlet(&m, &nan, &SolverConfig::with_h(0.1)), Err(Error::Data(_))));
    assert!(matches!(
        solve_from(&m, &data, &SolverConfig::with_h(0.1), Some(&[0.0; 3])),
        Err(Error::MeshMismatch)
    ));
}

#[test]
fn damped_picard_converges_to_the_same_solution() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.1);
    let data = DirichletData::from_fn(&d, |p| 3.0 * p.x - p.y);
    let full = solve_dirichlet(&m, &data, &SolverConfig::with_h(0.1)).unwrap();
    let cfg = SolverConfig {
        damping: 0.7,
        ..SolverConfig::with_h(0.1)
    };
    let damped = solve_dirichlet(&m, &data, &cfg).unwrap();
    let worst = full.u.iter().zip(&damped.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn thread_count_does_not_change_the_solution() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.05);
    let data = DirichletData::from_fn(&d, |p| (2.0 * p.x).cos() * p.y);
    let cfg = SolverConfig::with_h(0.05);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| solve_dirichlet(&m, &data, &cfg).unwrap())
    };
    let (a, a2, b) = (run(1), run(1), run(4));
    assert_eq!(a.u, a2.u);
    assert_eq!(a.u, b.u);
}

#[test]
fn solution_file_round_trip() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.1);
    let sol = solve_dirichlet(&m, &DirichletData::from_fn(&d, |p| p.x / p.y), &SolverConfig::with_h(0.1)).unwrap();
    let dir = std::env::temp_dir().join(format!("sol3graph-solver-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("u.json");
    sol.write(&path).unwrap();
    let back = Solution::read(&path).unwrap();
    assert_eq!(back.u, sol.u);
    assert_eq!(back.mesh.nodes, sol.mesh.nodes);
    assert_eq!(back.mesh.triangles, sol.mesh.triangles);
    assert_eq!(back.mesh.tags, sol.mesh.tags);
    assert_eq!(back.to_json(), sol.to_json());
    std::fs::write(&path, "{\"nodes\":[]}").unwrap();
    assert!(matches!(Solution::read(&path), Err(Error::Malformed { .. })));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn obj_export_lists_vertices_and_faces() {
    let d = fixture("triangle_c");
    let m = mesh(&d, 0.2);
    let sol = Solution::interpolate(&m, |p| p.x);
    let obj = sol.to_obj();
    let v = obj.lines().filter(|l| l.starts_with("v ")).count();
    let f = obj.lines().filter(|l| l.starts_with("f ")).count();
    assert_eq!((v, f), (m.node_count(), m.triangles.len()));
}
