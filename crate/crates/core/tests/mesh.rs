mod common;

use std::collections::HashMap;

use common::fixture;
use sol3graph_core::domain::{ArcData, ArcGeometry, Vertex};
use sol3graph_core::mesh::MIN_ANGLE_DEG;
use sol3graph_core::{triangulate, ArcKind, BoundaryArc, Error, HalfPlanePoint, Mesh, NodeTag, ScherkDomain};

fn unit_square() -> ScherkDomain {
    let pts = [(0.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)];
    ScherkDomain {
        vertices: pts.iter().map(|&(x, y)| Vertex { x, y, ideal: false }).collect(),
        arcs: (0..4)
            .map(|k| BoundaryArc {
                kind: ArcKind::C,
                from: k,
                to: (k + 1) % 4,
                geometry: ArcGeometry::Segment,
                data: Some(ArcData::Constant { value: 0.0 }),
            })
            .collect(),
    }
}

fn seg_dist(p: HalfPlanePoint, a: HalfPlanePoint, b: HalfPlanePoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((a.x + t * dx - p.x).powi(2) + (a.y + t * dy - p.y).powi(2)).sqrt()
}

fn check_topology(mesh: &Mesh) {
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        assert!(mesh.area2(t) > 0.0, "triangle {t} is not counterclockwise");
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    assert!(edges.values().all(|&c| c == 1 || c == 2));
    for (&(a, b), &c) in &edges {
        if c == 1 {
            assert!(mesh.is_boundary(a) && mesh.is_boundary(b), "edge {a}-{b}");
        }
    }
    // Euler characteristic of a disk
    let (v, e, f) = (mesh.node_count() as i64, edges.len() as i64, mesh.triangles.len() as i64);
    assert_eq!(v - e + f, 1);
}

#[test]
fn unit_square_quality() {
    let mesh = triangulate(&unit_square(), 0.25, 0.25).unwrap();
    assert!(mesh.min_angle_deg() >= MIN_ANGLE_DEG);
    assert!(mesh.max_edge() <= 0.25);
    let area: f64 = (0..mesh.triangles.len()).map(|t| 0.5 * mesh.area2(t)).sum();
    assert!((area - 1.0).abs() < 1e-12, "area {area}");
    check_topology(&mesh);
}

#[test]
fn boundary_tags_lie_on_their_arcs() {
    for name in ["scherk_triangle", "l_hexagon", "triangle_convex_c", "engineered_hexagon"] {
        let d = fixture(name);
        let mesh = triangulate(&d, 0.1, 0.1).unwrap();
        check_topology(&mesh);
        for (i, tag) in mesh.tags.iter().enumerate() {
            let p = mesh.nodes[i];
            match *tag {
                NodeTag::Vertex(v) => assert_eq!(p, d.vertex_point(v)),
                NodeTag::Arc(k) => {
                    let pts = d.arc_points(k);
                    let dist = pts.windows(2).map(|w| seg_dist(p, w[0], w[1])).fold(f64::INFINITY, f64::min);
                    assert!(dist < 1e-12, "{name}: node {i} off arc {k}");
                    assert!((0.0..=1.0).contains(&mesh.params[i]));
                }
                NodeTag::Interior => assert!(d.contains_closed(p, 0.0)),
                NodeTag::Cut(_) => panic!("{name} has no ideal vertex"),
            }
        }
    }
}

#[test]
fn refinement_quadruples_node_count() {
    let d = fixture("scherk_triangle");
    let coarse = triangulate(&d, 0.05, 0.05).unwrap();
    let fine = triangulate(&d, 0.025, 0.025).unwrap();
    let ratio = fine.node_count() as f64 / coarse.node_count() as f64;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    assert!(fine.min_angle_deg() >= MIN_ANGLE_DEG && fine.max_edge() <= 0.025);
}

#[test]
fn invalid_inputs() {
    let mut flat = unit_square();
    flat.vertices[2].y = 1.0;
    flat.vertices[3].y = 1.0;
    flat.vertices[2].x = 2.0;
    flat.vertices[3].x = 3.0;
    assert!(triangulate(&flat, 0.1, 0.1).is_err());
    assert!(matches!(triangulate(&unit_square(), 0.0, 0.1), Err(Error::Config(_))));
    assert!(matches!(triangulate(&unit_square(), f64::NAN, 0.1), Err(Error::Config(_))));
}

#[test]
fn ideal_vertex_is_cut_off() {
    let d = fixture("ideal_triangle");
    let delta = 0.05;
    let mesh = triangulate(&d, 0.05, delta).unwrap();
    check_topology(&mesh);
    assert_eq!(mesh.cuts.len(), 1);
    let cut = mesh.cuts[0];
    assert_eq!(cut.vertex, 0);
    let v = d.vertex_point(0);
    assert!((cut.start.point.dist(v) - delta).abs() < 1e-9 || (cut.end.point.dist(v) - delta).abs() < 1e-9);
    assert!(mesh.nodes.iter().all(|p| p.y > 0.0));
    assert!(mesh.tags.contains(&NodeTag::Cut(0)));
    assert!(!mesh.tags.contains(&NodeTag::Vertex(0)));
}

#[test]
fn locate_and_barycentric() {
    let mesh = triangulate(&fixture("scherk_triangle"), 0.1, 0.1).unwrap();
    for t in 0..mesh.triangles.len() {
        let c = mesh.centroid(t);
        assert_eq!(mesh.locate(c), Some(t));
        let b = mesh.barycentric(t, c);
        assert!(b.iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-9));
        // hat gradients sum to zero and reproduce linear functions
        let g = mesh.hat_gradients(t);
        let pts = mesh.triangle_points(t);
        let sx: f64 = (0..3).map(|k| g[k][0] * pts[k].x).sum();
        let sy: f64 = (0..3).map(|k| g[k][1] * pts[k].x).sum();
        assert!((sx - 1.0).abs() < 1e-9 && sy.abs() < 1e-9);
        assert!((g[0][0] + g[1][0] + g[2][0]).abs() < 1e-9);
    }
    assert_eq!(mesh.locate(HalfPlanePoint::new(5.0, 5.0)), None);
    assert!(mesh.boundary_distance(HalfPlanePoint::new(1.0, 1.4)) > 0.3);
}
