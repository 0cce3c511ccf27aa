//! Flux F_u(γ) = ∫_γ (y²∇u/W)·ν ds of a solution across polylines.

use serde::{Deserialize, Serialize};

use crate::domain::{ArcKind, ScherkDomain};
use crate::geometry::{cross, dot, norm, HalfPlanePoint};
use crate::solver::Solution;
use crate::{Error, Result};

/// Side of the direction of travel carrying the normal ν.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

fn unit_normal(d: [f64; 2], side: Side) -> [f64; 2] {
    let l = norm(d);
    match side {
        Side::Left => [-d[1] / l, d[0] / l],
        Side::Right => [d[1] / l, -d[0] / l],
    }
}

/// Parameters in (0, 1) where the segment [a, b] crosses mesh edges.
fn crossings(sol: &Solution, a: HalfPlanePoint, b: HalfPlanePoint) -> Vec<f64> {
    let mesh = &sol.mesh;
    let d = b.sub(a);
    let (x0, x1) = (a.x.min(b.x), a.x.max(b.x));
    let (y0, y1) = (a.y.min(b.y), a.y.max(b.y));
    let mut ts = Vec::new();
    for tri in &mesh.triangles {
        let p = tri.map(|i| mesh.nodes[i]);
        if p.iter().all(|q| q.x < x0) || p.iter().all(|q| q.x > x1) || p.iter().all(|q| q.y < y0) || p.iter().all(|q| q.y > y1) {
            continue;
        }
        for k in 0..3 {
            let (c, e) = (p[k], p[(k + 1) % 3]);
            let f = e.sub(c);
            let den = cross(d, f);
            if den == 0.0 {
                continue;
            }
            let w = c.sub(a);
            let t = cross(w, f) / den;
            let s = cross(w, d) / den;
            if t > 0.0 && t < 1.0 && (0.0..=1.0).contains(&s) {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    ts
}

/// Triangles on both sides of a piece with midpoint `m`; they coincide unless
/// the piece runs along a mesh edge.
fn piece_triangles(sol: &Solution, m: HalfPlanePoint, a: HalfPlanePoint, b: HalfPlanePoint) -> Result<[usize; 2]> {
    let n = unit_normal(b.sub(a), Side::Left);
    let eps = 1e-9 * (1.0 + m.x.abs().max(m.y.abs()));
    let mesh = &sol.mesh;
    match (mesh.locate(m.offset(n, eps)), mesh.locate(m.offset(n, -eps))) {
        (Some(l), Some(r)) => Ok([l, r]),
        (Some(t), None) | (None, Some(t)) => Ok([t, t]),
        (None, None) => mesh.locate(m).map(|t| [t, t]).ok_or(Error::OutsideMesh(m.x, m.y)),
    }
}

fn segment_flux(sol: &Solution, a: HalfPlanePoint, b: HalfPlanePoint, side: Side) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let nu = unit_normal(b.sub(a), side);
    let len = a.dist(b);
    let mut ts = vec![0.0];
    ts.extend(crossings(sol, a, b));
    ts.push(1.0);
    let mut total = 0.0;
    for w in ts.windows(2) {
        let (p, q) = (a.lerp(b, w[0]), a.lerp(b, w[1]));
        let m = p.lerp(q, 0.5);
        let y2 = m.y * m.y;
        let mut density = 0.0;
        for t in piece_triangles(sol, m, a, b)? {
            let g = sol.gradient(t);
            density += 0.5 * y2 * dot(g, nu) / (1.0 + y2 * y2 * dot(g, g)).sqrt();
        }
        total += (w[1] - w[0]) * len * density;
    }
    Ok(total)
}

/// Midpoint-rule flux of `sol` across γ with the normal on `side`.
pub fn flux(sol: &Solution, gamma: &[HalfPlanePoint], side: Side) -> Result<f64> {
    gamma
        .windows(2)
        .map(|w| segment_flux(sol, w[0], w[1], side))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcFlux {
    pub arc_index: usize,
    pub kind: ArcKind,
    pub length: f64,
    pub flux: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub arcs: Vec<ArcFlux>,
    /// Flux through the cut chords at ideal vertices.
    pub cut_flux: f64,
    /// Sum of all signed fluxes with outer normals.
    pub closed_loop_residual: f64,
    pub boundary_length: f64,
}

impl FluxReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("arc_index,kind,length,flux,ratio\n");
        for a in &self.arcs {
            s.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e}\n",
                a.arc_index, a.kind, a.length, a.flux, a.ratio
            ));
        }
        s
    }

    pub fn arc(&self, k: usize) -> Option<&ArcFlux> {
        self.arcs.iter().find(|a| a.arc_index == k)
    }
}

/// Boundary piece of the meshed region: a (possibly truncated) arc or a cut.
struct Piece {
    arc: Option<usize>,
    points: Vec<HalfPlanePoint>,
}

fn pieces(sol: &Solution, domain: &ScherkDomain) -> Result<Vec<Piece>> {
    let order = domain
        .cycle_order()
        .ok_or_else(|| Error::Data("arcs do not form a closed cycle".into()))?;
    let cuts = &sol.mesh.cuts;
    let mut out = Vec::new();
    for k in order {
        let arc = &domain.arcs[k];
        if let Some(c) = cuts.iter().find(|c| c.vertex == arc.from) {
            out.push(Piece {
                arc: None,
                points: vec![c.start.point, c.end.point],
            });
        }
        let pts = domain.arc_points(k);
        let fr = domain.arc_fractions(k);
        let (f0, p0) = match cuts.iter().find(|c| c.vertex == arc.from) {
            Some(c) => (c.end.fraction, c.end.point),
            None => (0.0, pts[0]),
        };
        let (f1, p1) = match cuts.iter().find(|c| c.vertex == arc.to) {
            Some(c) => (c.start.fraction, c.start.point),
            None => (1.0, pts[pts.len() - 1]),
        };
        let mut points = vec![p0];
        for (p, &f) in pts.iter().zip(&fr) {
            if f > f0 && f < f1 {
                points.push(*p);
            }
        }
        points.push(p1);
        out.push(Piece {
            arc: Some(k),
            points,
        });
    }
    Ok(out)
}

/// Point at distance `h` from both lines through a corner, on the inner side.
fn corner_point(v: HalfPlanePoint, d_in: [f64; 2], d_out: [f64; 2], h: f64) -> HalfPlanePoint {
    let n_in = unit_normal(d_in, Side::Left);
    let n_out = unit_normal(d_out, Side::Left);
    let s = [n_in[0] + n_out[0], n_in[1] + n_out[1]];
    let c = 1.0 + dot(n_in, n_out);
    if c < 1e-6 {
        return v.offset(n_in, h);
    }
    v.offset(s, h / c)
}

/// Per-arc fluxes with outer normals, integrated along offset polylines at
/// distance h inside the domain. Consecutive offset paths are joined
/// through the corner points, so their sum is the flux of a closed loop.
pub fn flux_report(sol: &Solution, domain: &ScherkDomain) -> Result<FluxReport> {
    let h = sol.mesh.h;
    let pieces = pieces(sol, domain)?;
    let m = pieces.len();
    let corners: Vec<HalfPlanePoint> = (0..m)
        .map(|i| {
            let prev = &pieces[(i + m - 1) % m].points;
            let cur = &pieces[i].points;
            let d_in = prev[prev.len() - 1].sub(prev[prev.len() - 2]);
            let d_out = cur[1].sub(cur[0]);
            corner_point(cur[0], d_in, d_out, h)
        })
        .collect();
    let mut arcs = Vec::new();
    let mut cut_flux = 0.0;
    let mut residual = 0.0;
    for (i, piece) in pieces.iter().enumerate() {
        let pts = &piece.points;
        let mut path = vec![pts[0], corners[i]];
        path.extend(offset_samples(sol, pts, h));
        path.push(corners[(i + 1) % m]);
        path.push(pts[pts.len() - 1]);
        path.dedup();
        let f = flux(sol, &path, Side::Right)?;
        residual += f;
        match piece.arc {
            Some(k) => {
                let length = domain.arc_length(k);
                arcs.push(ArcFlux {
                    arc_index: k,
                    kind: domain.arcs[k].kind,
                    length,
                    flux: f,
                    ratio: f / length,
                });
            }
            None => cut_flux += f,
        }
    }
    arcs.sort_by_key(|a| a.arc_index);
    Ok(FluxReport {
        arcs,
        cut_flux,
        closed_loop_residual: residual,
        boundary_length: sol.mesh.ring.iter().enumerate().map(|(i, p)| p.dist(sol.mesh.ring[(i + 1) % sol.mesh.ring.len()])).sum(),
    })
}

/// Inward offsets at distance h of points resampled along `pts`, keeping
/// only those at distance ≥ h from the whole boundary.
fn offset_samples(sol: &Solution, pts: &[HalfPlanePoint], h: f64) -> Vec<HalfPlanePoint> {
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = unit_normal(b.sub(a), Side::Left);
        let parts = (a.dist(b) / h).ceil().max(1.0) as usize;
        for q in 0..=parts {
            let p = a.lerp(b, q as f64 / parts as f64).offset(n, h);
            if sol.mesh.boundary_distance(p) >= h * (1.0 - 1e-9) {
                out.push(p);
            }
        }
    }
    out.dedup();
    out
}
