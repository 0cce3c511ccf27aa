#![allow(dead_code)]

use std::path::PathBuf;

use sol3graph_core::domain::read_domain;
use sol3graph_core::{ArcKind, HalfPlanePoint, ScherkDomain};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"))
}

/// Validated fixture.
pub fn fixture(name: &str) -> ScherkDomain {
    read_domain(&fixture_path(name)).unwrap()
}

/// Fixture parsed without validation.
pub fn raw_fixture(name: &str) -> ScherkDomain {
    serde_json::from_str(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

fn cross(o: HalfPlanePoint, a: HalfPlanePoint, b: HalfPlanePoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn seg_dist(p: HalfPlanePoint, a: HalfPlanePoint, b: HalfPlanePoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((a.x + t * dx - p.x).powi(2) + (a.y + t * dy - p.y).powi(2)).sqrt()
}

/// Even-odd ray test, with points within 1e-9 of the boundary counted inside.
pub fn in_closure(ring: &[HalfPlanePoint], p: HalfPlanePoint) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if seg_dist(p, a, b) < 1e-9 {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x) {
            inside = !inside;
        }
    }
    inside
}

fn segments_touch(a: HalfPlanePoint, b: HalfPlanePoint, c: HalfPlanePoint, d: HalfPlanePoint) -> bool {
    let (d1, d2) = (cross(a, b, c), cross(a, b, d));
    let (d3, d4) = (cross(c, d, a), cross(c, d, b));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    seg_dist(c, a, b) < 1e-12 || seg_dist(d, a, b) < 1e-12 || seg_dist(a, c, d) < 1e-12 || seg_dist(b, c, d) < 1e-12
}

/// Polygon is simple: nonadjacent edges are disjoint and adjacent edges
/// share only their common vertex.
fn is_simple(p: &[HalfPlanePoint]) -> bool {
    let n = p.len();
    for i in 0..n {
        let (a, b, c) = (p[i], p[(i + 1) % n], p[(i + 2) % n]);
        // folding back onto the previous edge
        if cross(a, b, c).abs() < 1e-14 && (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y) < 0.0 {
            return false;
        }
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_touch(a, b, p[j], p[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn area2(p: &[HalfPlanePoint]) -> f64 {
    (0..p.len()).map(|i| cross(HalfPlanePoint::new(0.0, 0.0), p[i], p[(i + 1) % p.len()])).sum()
}

/// Brute-force inscribed polygons: every vertex subset, every cyclic order
/// starting at its smallest member, kept when counterclockwise, simple, and
/// with every edge inside the closed domain by dense sampling.
pub fn oracle_polygons(domain: &ScherkDomain) -> Vec<(Vec<usize>, f64, f64, f64)> {
    let n = domain.vertices.len();
    let pts: Vec<HalfPlanePoint> = domain.vertices.iter().map(|v| HalfPlanePoint::new(v.x, v.y)).collect();
    let ring = domain.boundary_points();
    let mut edge = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j || pts[i] == pts[j] {
                continue;
            }
            edge[i][j] = (1..2000).all(|k| {
                let t = k as f64 / 2000.0;
                in_closure(&ring, HalfPlanePoint::new(pts[i].x + t * (pts[j].x - pts[i].x), pts[i].y + t * (pts[j].y - pts[i].y)))
            });
        }
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        if members.len() < 3 {
            continue;
        }
        let first = members[0];
        let mut rest = members[1..].to_vec();
        permutations(&mut rest, 0, &mut |perm| {
            let mut cyc = vec![first];
            cyc.extend_from_slice(perm);
            let k = cyc.len();
            if !(0..k).all(|e| edge[cyc[e]][cyc[(e + 1) % k]]) {
                return;
            }
            let poly: Vec<HalfPlanePoint> = cyc.iter().map(|&v| pts[v]).collect();
            if area2(&poly) > 0.0 && is_simple(&poly) {
                let (l, a, b) = oracle_lengths(domain, &cyc);
                out.push((cyc, l, a, b));
            }
        });
    }
    out.sort_by(|x, y| x.0.cmp(&y.0));
    out
}

fn permutations(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Perimeter and total lengths of polygon edges that are A or B segments.
pub fn oracle_lengths(domain: &ScherkDomain, cyc: &[usize]) -> (f64, f64, f64) {
    let (mut l, mut a, mut b) = (0.0, 0.0, 0.0);
    for e in 0..cyc.len() {
        let (i, j) = (cyc[e], cyc[(e + 1) % cyc.len()]);
        let (p, q) = (&domain.vertices[i], &domain.vertices[j]);
        let len = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
        l += len;
        for arc in &domain.arcs {
            let same = (arc.from == i && arc.to == j) || (arc.from == j && arc.to == i);
            let straight = matches!(arc.geometry, sol3graph_core::domain::ArcGeometry::Segment);
            if same && straight {
                match arc.kind {
                    ArcKind::A => a += len,
                    ArcKind::B => b += len,
                    ArcKind::C => {}
                }
            }
        }
    }
    (l, a, b)
}
