//! Constrained Delaunay meshes of Scherk domains with boundary tags.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::domain::{arclength_fractions, point_in_ring, polygon_area2, ScherkDomain};
use crate::geometry::{dot, point_segment_distance, HalfPlanePoint};
use crate::{Error, Result};

pub const MIN_ANGLE_DEG: f64 = 20.0;
const REFINE_ANGLE_DEG: f64 = 25.0;
const MAX_ROUNDS: usize = 10;
const SHRINK: f64 = 0.85;

/// Where a node sits: in the interior, on an arc, at a domain vertex, or on
/// the cut chord replacing an ideal vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeTag {
    Interior,
    Arc(usize),
    Vertex(usize),
    Cut(usize),
}

impl NodeTag {
    pub fn is_boundary(self) -> bool {
        self != NodeTag::Interior
    }
}

impl fmt::Display for NodeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeTag::Interior => f.write_str("interior"),
            NodeTag::Arc(k) => write!(f, "arc:{k}"),
            NodeTag::Vertex(v) => write!(f, "vertex:{v}"),
            NodeTag::Cut(v) => write!(f, "cut:{v}"),
        }
    }
}

impl FromStr for NodeTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "interior" {
            return Ok(NodeTag::Interior);
        }
        let (kind, idx) = s.split_once(':').ok_or_else(|| format!("bad tag {s:?}"))?;
        let idx: usize = idx.parse().map_err(|_| format!("bad tag index in {s:?}"))?;
        match kind {
            "arc" => Ok(NodeTag::Arc(idx)),
            "vertex" => Ok(NodeTag::Vertex(idx)),
            "cut" => Ok(NodeTag::Cut(idx)),
            _ => Err(format!("bad tag kind in {s:?}")),
        }
    }
}

impl Serialize for NodeTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A point on an arc given by arc index, position and arclength fraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcPoint {
    pub arc: usize,
    pub point: HalfPlanePoint,
    pub fraction: f64,
}

/// Chord replacing an ideal vertex; data is interpolated between its ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cut {
    pub vertex: usize,
    pub start: ArcPoint,
    pub end: ArcPoint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PieceSource {
    Arc(usize),
    Cut(usize),
}

#[derive(Clone, Debug)]
struct Piece {
    source: PieceSource,
    points: Vec<HalfPlanePoint>,
    /// Arc fraction (or chord fraction for cuts) at each point.
    fractions: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Grid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub nodes: Vec<HalfPlanePoint>,
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<NodeTag>,
    /// Arclength fraction along the owning arc (or cut) for boundary nodes.
    pub params: Vec<f64>,
    /// Requested maximum edge length.
    pub h: f64,
    pub cuts: Vec<Cut>,
    /// Closed outer boundary ring of the meshed region.
    pub ring: Vec<HalfPlanePoint>,
    neighbors: Vec<Vec<usize>>,
    grid: Grid,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.triangles == other.triangles && self.tags == other.tags
    }
}

impl Mesh {
    pub fn from_parts(
        nodes: Vec<HalfPlanePoint>,
        triangles: Vec<[usize; 3]>,
        tags: Vec<NodeTag>,
        params: Vec<f64>,
        h: f64,
        cuts: Vec<Cut>,
        ring: Vec<HalfPlanePoint>,
    ) -> Result<Self> {
        if tags.len() != nodes.len() || params.len() != nodes.len() {
            return Err(Error::Mesh("node, tag and parameter counts differ".into()));
        }
        if triangles.iter().flatten().any(|&i| i >= nodes.len()) {
            return Err(Error::Mesh("triangle references a missing node".into()));
        }
        let mut neighbors = vec![Vec::new(); nodes.len()];
        for t in &triangles {
            for a in 0..3 {
                let (i, j) = (t[a], t[(a + 1) % 3]);
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        let grid = Grid::build(&nodes, &triangles, h);
        Ok(Self {
            nodes,
            triangles,
            tags,
            params,
            h,
            cuts,
            ring,
            neighbors,
            grid,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.tags[i].is_boundary()
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| !self.is_boundary(i))
    }

    pub fn triangle_points(&self, t: usize) -> [HalfPlanePoint; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Twice the signed area of triangle `t`.
    pub fn area2(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        crate::geometry::orient(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> HalfPlanePoint {
        let [a, b, c] = self.triangle_points(t);
        HalfPlanePoint::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    /// Gradients of the three hat functions on triangle `t`.
    pub fn hat_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangle_points(t);
        let d = crate::geometry::orient(a, b, c);
        [
            [(b.y - c.y) / d, (c.x - b.x) / d],
            [(c.y - a.y) / d, (a.x - c.x) / d],
            [(a.y - b.y) / d, (b.x - a.x) / d],
        ]
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| triangle_min_angle(self.triangle_points(t)))
            .fold(180.0, f64::min)
    }

    pub fn max_edge(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                a.dist(b).max(b.dist(c)).max(c.dist(a))
            })
            .fold(0.0, f64::max)
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: HalfPlanePoint) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let d = crate::geometry::orient(a, b, c);
        let l0 = crate::geometry::orient(p, b, c) / d;
        let l1 = crate::geometry::orient(a, p, c) / d;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Triangle containing `p`: the candidate with the largest minimum
    /// barycentric coordinate, lowest index on ties.
    pub fn locate(&self, p: HalfPlanePoint) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &t in self.grid.candidates(p) {
            let l = self.barycentric(t, p);
            let m = l[0].min(l[1]).min(l[2]);
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((t, m));
            }
        }
        best.filter(|&(_, m)| m >= -1e-10).map(|(t, _)| t)
    }

    /// Nodes within graph distance `rings` of triangle `t`.
    pub fn patch(&self, t: usize, rings: usize) -> Vec<usize> {
        let mut set: Vec<usize> = self.triangles[t].to_vec();
        let mut frontier = set.clone();
        for _ in 0..rings {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in &self.neighbors[v] {
                    if !set.contains(&w) && !next.contains(&w) {
                        next.push(w);
                    }
                }
            }
            set.extend_from_slice(&next);
            frontier = next;
        }
        set.sort_unstable();
        set
    }

    /// Distance from `p` to the meshed region's boundary.
    pub fn boundary_distance(&self, p: HalfPlanePoint) -> f64 {
        let n = self.ring.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.ring[i], self.ring[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn triangle_min_angle(p: [HalfPlanePoint; 3]) -> f64 {
    let mut m = 180.0f64;
    for k in 0..3 {
        let a = p[k];
        let u = p[(k + 1) % 3].sub(a);
        let v = p[(k + 2) % 3].sub(a);
        let ang = crate::geometry::cross(u, v).abs().atan2(dot(u, v)).to_degrees();
        m = m.min(ang);
    }
    m
}

impl Grid {
    fn build(nodes: &[HalfPlanePoint], triangles: &[[usize; 3]], h: f64) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in nodes {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        if nodes.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let extent = (x1 - x0).max(y1 - y0).max(1e-12);
        let cell = if h > 0.0 { h.max(extent / 512.0) } else { extent / 64.0 };
        let nx = ((x1 - x0) / cell).floor() as usize + 1;
        let ny = ((y1 - y0) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in triangles.iter().enumerate() {
            let xs = tri.map(|i| nodes[i].x);
            let ys = tri.map(|i| nodes[i].y);
            let fx = |x: f64| (((x - x0) / cell).floor().max(0.0) as usize).min(nx - 1);
            let fy = |y: f64| (((y - y0) / cell).floor().max(0.0) as usize).min(ny - 1);
            let (i0, i1) = (fx(xs.iter().copied().fold(f64::INFINITY, f64::min)), fx(xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
            let (j0, j1) = (fy(ys.iter().copied().fold(f64::INFINITY, f64::min)), fy(ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self {
            x0,
            y0,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn candidates(&self, p: HalfPlanePoint) -> &[usize] {
        let fx = ((p.x - self.x0) / self.cell).floor();
        let fy = ((p.y - self.y0) / self.cell).floor();
        let margin = 1e-9;
        let gx = (p.x - self.x0) / self.cell;
        let gy = (p.y - self.y0) / self.cell;
        if gx < -margin || gy < -margin || gx > self.nx as f64 + margin || gy > self.ny as f64 + margin {
            return &[];
        }
        let i = (fx.max(0.0) as usize).min(self.nx - 1);
        let j = (fy.max(0.0) as usize).min(self.ny - 1);
        &self.buckets[j * self.nx + i]
    }
}

/// Point at Euclidean distance `delta` from the start of `pts`, with the
/// index of the segment containing it.
fn point_at_distance(pts: &[HalfPlanePoint], delta: f64) -> Option<(usize, HalfPlanePoint)> {
    let o = pts[0];
    for (s, w) in pts.windows(2).enumerate() {
        if w[1].dist(o) >= delta {
            // solve |w0 + t (w1 - w0) - o| = delta for the first t in [0, 1]
            let d = w[1].sub(w[0]);
            let f = w[0].sub(o);
            let a = dot(d, d);
            let b = 2.0 * dot(f, d);
            let c = dot(f, f) - delta * delta;
            let disc = (b * b - 4.0 * a * c).max(0.0);
            let t = ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
            return Some((s, w[0].lerp(w[1], t)));
        }
    }
    None
}

/// Boundary pieces in traversal order, with ideal vertices cut off.
fn boundary_pieces(domain: &ScherkDomain, delta: f64) -> Result<(Vec<Piece>, Vec<Cut>)> {
    let order = domain
        .cycle_order()
        .ok_or_else(|| Error::Mesh("arcs do not form a closed cycle".into()))?;
    let mut pieces: Vec<Piece> = order
        .iter()
        .map(|&k| {
            let points = domain.arc_points(k);
            let fractions = arclength_fractions(&points);
            Piece {
                source: PieceSource::Arc(k),
                points,
                fractions,
            }
        })
        .collect();
    let mut cuts = Vec::new();
    let m = pieces.len();
    let mut out = Vec::new();
    for pos in 0..m {
        let k = order[pos];
        let v = domain.arcs[k].from;
        if domain.vertices[v].ideal {
            let prev = (pos + m - 1) % m;
            // truncate the end of the previous piece and the start of this one
            let rev: Vec<HalfPlanePoint> = pieces[prev].points.iter().rev().copied().collect();
            let (s_in, p_in) = point_at_distance(&rev, delta)
                .ok_or_else(|| Error::Mesh(format!("arc too short to truncate ideal vertex {v}")))?;
            let (s_out, p_out) = point_at_distance(&pieces[pos].points, delta)
                .ok_or_else(|| Error::Mesh(format!("arc too short to truncate ideal vertex {v}")))?;
            let cut_in = truncate_end(&mut pieces[prev], s_in, p_in);
            let cut_out = truncate_start(&mut pieces[pos], s_out, p_out);
            cuts.push(Cut {
                vertex: v,
                start: cut_in,
                end: cut_out,
            });
        }
    }
    for pos in 0..m {
        let k = order[pos];
        let v = domain.arcs[k].from;
        if domain.vertices[v].ideal {
            let c = cuts.iter().find(|c| c.vertex == v).unwrap();
            out.push(Piece {
                source: PieceSource::Cut(v),
                points: vec![c.start.point, c.end.point],
                fractions: vec![0.0, 1.0],
            });
        }
        out.push(pieces[pos].clone());
    }
    Ok((out, cuts))
}

fn truncate_end(piece: &mut Piece, s_rev: usize, p: HalfPlanePoint) -> ArcPoint {
    let n = piece.points.len();
    // segment s_rev of the reversed list is segment n - 2 - s_rev forwards
    let seg = n - 2 - s_rev;
    let (a, b) = (piece.points[seg], piece.points[seg + 1]);
    let (fa, fb) = (piece.fractions[seg], piece.fractions[seg + 1]);
    let t = if a.dist(b) > 0.0 { a.dist(p) / a.dist(b) } else { 0.0 };
    let f = fa + t * (fb - fa);
    piece.points.truncate(seg + 1);
    piece.fractions.truncate(seg + 1);
    if p != a {
        piece.points.push(p);
        piece.fractions.push(f);
    }
    let PieceSource::Arc(arc) = piece.source else { unreachable!() };
    ArcPoint { arc, point: p, fraction: f }
}

fn truncate_start(piece: &mut Piece, seg: usize, p: HalfPlanePoint) -> ArcPoint {
    let (a, b) = (piece.points[seg], piece.points[seg + 1]);
    let (fa, fb) = (piece.fractions[seg], piece.fractions[seg + 1]);
    let t = if a.dist(b) > 0.0 { a.dist(p) / a.dist(b) } else { 0.0 };
    let f = fa + t * (fb - fa);
    let mut points = vec![p];
    let mut fractions = vec![f];
    let skip = if p == b { seg + 2 } else { seg + 1 };
    points.extend_from_slice(&piece.points[skip..]);
    fractions.extend_from_slice(&piece.fractions[skip..]);
    piece.points = points;
    piece.fractions = fractions;
    let PieceSource::Arc(arc) = piece.source else { unreachable!() };
    ArcPoint { arc, point: p, fraction: f }
}

struct BoundaryNode {
    point: HalfPlanePoint,
    tag: NodeTag,
    param: f64,
    /// Owner and parameter range of the boundary segment starting here.
    seg_owner: NodeTag,
    seg_params: (f64, f64),
}

fn resample(domain: &ScherkDomain, pieces: &[Piece], cuts: &[Cut], spacing: f64) -> Vec<BoundaryNode> {
    let mut out = Vec::new();
    for piece in pieces {
        let (first_tag, first_param, owner) = match piece.source {
            PieceSource::Arc(k) => {
                let from = domain.arcs[k].from;
                if piece.points[0] == domain.vertex_point(from) {
                    (NodeTag::Vertex(from), 0.0, NodeTag::Arc(k))
                } else {
                    (NodeTag::Arc(k), piece.fractions[0], NodeTag::Arc(k))
                }
            }
            PieceSource::Cut(v) => {
                let c = cuts.iter().find(|c| c.vertex == v).expect("cut exists");
                (NodeTag::Arc(c.start.arc), c.start.fraction, NodeTag::Cut(v))
            }
        };
        let n = piece.points.len();
        for s in 0..n - 1 {
            let (a, b) = (piece.points[s], piece.points[s + 1]);
            let (fa, fb) = (piece.fractions[s], piece.fractions[s + 1]);
            let parts = (a.dist(b) / spacing).ceil().max(1.0) as usize;
            for q in 0..parts {
                let t0 = q as f64 / parts as f64;
                let t1 = (q + 1) as f64 / parts as f64;
                let seg_params = (fa + t0 * (fb - fa), fa + t1 * (fb - fa));
                let (tag, param) = if s == 0 && q == 0 {
                    (first_tag, first_param)
                } else {
                    (owner, seg_params.0)
                };
                out.push(BoundaryNode {
                    point: if q == 0 { a } else { a.lerp(b, t0) },
                    tag,
                    param,
                    seg_owner: owner,
                    seg_params,
                });
            }
        }
    }
    out
}

/// Apexes of equilateral triangles erected inward on every boundary
/// segment, so all arcs see the same first row of elements. Apexes too close
/// to another segment or to an earlier apex (near corners) are dropped.
fn boundary_layer(ring: &[HalfPlanePoint]) -> Vec<HalfPlanePoint> {
    let n = ring.len();
    let mut out: Vec<HalfPlanePoint> = Vec::new();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let s = a.dist(b);
        let d = b.sub(a);
        let normal = [-d[1] / s, d[0] / s];
        let depth = 3f64.sqrt() / 2.0 * s;
        let p = a.lerp(b, 0.5).offset(normal, depth);
        if !point_in_ring(ring, p, 0.0) {
            continue;
        }
        let clear = (0..n)
            .filter(|&j| j != i)
            .map(|j| point_segment_distance(p, ring[j], ring[(j + 1) % n]))
            .fold(f64::INFINITY, f64::min);
        if clear >= 0.75 * depth && out.iter().all(|q| q.dist(p) >= 0.6 * s) {
            out.push(p);
        }
    }
    out
}

fn triangle_lattice(ring: &[HalfPlanePoint], spacing: f64, clearance: f64) -> Vec<HalfPlanePoint> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in ring {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let dy = spacing * 3f64.sqrt() / 2.0;
    let rows = ((y1 - y0) / dy).ceil() as usize + 1;
    let cols = ((x1 - x0) / spacing).ceil() as usize + 2;
    let n = ring.len();
    let mut out = Vec::new();
    for r in 0..rows {
        let y = y0 + r as f64 * dy;
        let shift = if r % 2 == 1 { 0.5 * spacing } else { 0.0 };
        for c in 0..cols {
            let p = HalfPlanePoint::new(x0 + shift + c as f64 * spacing, y);
            if !point_in_ring(ring, p, 0.0) {
                continue;
            }
            let d = (0..n)
                .map(|i| point_segment_distance(p, ring[i], ring[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min);
            if d >= clearance {
                out.push(p);
            }
        }
    }
    out
}

/// Constrained Delaunay mesh of the domain with boundary spacing ≤ h,
/// minimum angle ≥ 20° and maximum edge ≤ h. Ideal vertices are cut off by a
/// chord at Euclidean distance `delta`.
pub fn triangulate(domain: &ScherkDomain, h: f64, delta: f64) -> Result<Mesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("mesh size must be positive, got {h}")));
    }
    let diagnostics = crate::domain::validate(domain);
    if !diagnostics.is_empty() {
        return Err(Error::InvalidDomain(diagnostics));
    }
    let (pieces, cuts) = boundary_pieces(domain, delta)?;
    let mut spacing = 0.8 * h;
    let mut last_quality = (0.0, f64::INFINITY);
    for _ in 0..MAX_ROUNDS {
        let mesh = build(domain, &pieces, &cuts, spacing, h)?;
        let (angle, edge) = (mesh.min_angle_deg(), mesh.max_edge());
        if angle >= MIN_ANGLE_DEG && edge <= h {
            return Ok(mesh);
        }
        last_quality = (angle, edge);
        spacing *= SHRINK;
    }
    Err(Error::Mesh(format!(
        "quality target unreachable: min angle {:.2} deg, max edge {:.4} (h = {h})",
        last_quality.0, last_quality.1
    )))
}

fn build(domain: &ScherkDomain, pieces: &[Piece], cuts: &[Cut], spacing: f64, h: f64) -> Result<Mesh> {
    let bnodes = resample(domain, pieces, cuts, spacing);
    let ring: Vec<HalfPlanePoint> = bnodes.iter().map(|b| b.point).collect();
    let nb = ring.len();
    let area2 = polygon_area2(&ring);
    if !(area2 > 0.0) {
        return Err(Error::Mesh("degenerate domain with zero area".into()));
    }
    if ring.iter().any(|p| !(p.y > 0.0)) {
        return Err(Error::Mesh("boundary touches the ideal boundary".into()));
    }
    let layer = boundary_layer(&ring);
    let mut interior = layer.clone();
    let depth = 3f64.sqrt() / 2.0 * spacing;
    interior.extend(
        triangle_lattice(&ring, spacing, depth + 0.6 * spacing)
            .into_iter()
            .filter(|p| layer.iter().all(|q| q.dist(*p) >= 0.6 * spacing)),
    );
    let mut vertices: Vec<Point2<f64>> = ring.iter().map(|p| Point2::new(p.x, p.y)).collect();
    vertices.extend(interior.iter().map(|p| Point2::new(p.x, p.y)));
    let edges: Vec<[usize; 2]> = (0..nb).map(|i| [i, (i + 1) % nb]).collect();
    let mut conflict = false;
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::try_bulk_load_cdt(
        vertices.clone(),
        edges,
        |_| conflict = true,
    )
    .map_err(|e| Error::Mesh(format!("triangulation failed: {e:?}")))?;
    if conflict || cdt.num_vertices() != vertices.len() {
        return Err(Error::Mesh("self-intersecting boundary".into()));
    }
    let max_area = 3f64.sqrt() / 4.0 * h * h;
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(REFINE_ANGLE_DEG))
        .with_max_allowed_area(max_area)
        .exclude_outer_faces(true)
        .with_max_additional_vertices(40 * vertices.len() + 1000);
    let mut result = cdt.refine(params.clone());
    // split edges longer than h, which refinement alone does not bound
    for _ in 0..30 {
        let excluded: std::collections::HashSet<usize> =
            result.excluded_faces.iter().map(|f| f.index()).collect();
        let mut mids = Vec::new();
        for face in cdt.inner_faces() {
            if excluded.contains(&face.fix().index()) {
                continue;
            }
            let p = face.positions();
            let (mut best, mut len) = (0, 0.0);
            for a in 0..3 {
                let (u, v) = (p[a], p[(a + 1) % 3]);
                let l = (u.x - v.x).hypot(u.y - v.y);
                if l > len {
                    (best, len) = (a, l);
                }
            }
            if len > 0.95 * h {
                let (u, v) = (p[best], p[(best + 1) % 3]);
                mids.push(Point2::new(0.5 * (u.x + v.x), 0.5 * (u.y + v.y)));
            }
        }
        if mids.is_empty() {
            break;
        }
        mids.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        mids.dedup();
        for m in mids {
            cdt.insert(m)
                .map_err(|e| Error::Mesh(format!("insertion failed: {e:?}")))?;
        }
        result = cdt.refine(params.clone());
    }
    let excluded: std::collections::HashSet<usize> =
        result.excluded_faces.iter().map(|f| f.index()).collect();

    let all: Vec<HalfPlanePoint> = cdt
        .vertices()
        .map(|v| HalfPlanePoint::new(v.position().x, v.position().y))
        .collect();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix().index()) {
            continue;
        }
        let [a, b, c] = face.vertices().map(|v| v.fix().index());
        let centroid = HalfPlanePoint::new(
            (all[a].x + all[b].x + all[c].x) / 3.0,
            (all[a].y + all[b].y + all[c].y) / 3.0,
        );
        if !point_in_ring(&ring, centroid, 0.0) {
            continue;
        }
        let tri = if crate::geometry::orient(all[a], all[b], all[c]) > 0.0 {
            [a, b, c]
        } else {
            [a, c, b]
        };
        triangles.push(tri);
    }
    // compact node numbering in vertex-handle order
    let mut used = vec![false; all.len()];
    for t in &triangles {
        for &i in t {
            used[i] = true;
        }
    }
    let mut remap = vec![usize::MAX; all.len()];
    let mut nodes = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            remap[i] = nodes.len();
            nodes.push(all[i]);
        }
    }
    for t in &mut triangles {
        for i in t.iter_mut() {
            *i = remap[*i];
        }
    }
    let mut tags = vec![NodeTag::Interior; nodes.len()];
    let mut params = vec![0.0; nodes.len()];
    let scale = domain.scale();
    for (old, &new) in remap.iter().enumerate() {
        if new == usize::MAX {
            continue;
        }
        if old < nb {
            tags[new] = bnodes[old].tag;
            params[new] = bnodes[old].param;
            continue;
        }
        // Steiner points inserted by refinement on boundary segments
        let p = all[old];
        let mut best = (f64::INFINITY, 0);
        for i in 0..nb {
            let d = point_segment_distance(p, ring[i], ring[(i + 1) % nb]);
            if d < best.0 {
                best = (d, i);
            }
        }
        if best.0 <= 1e-10 * scale {
            let i = best.1;
            let (a, b) = (&bnodes[i], &bnodes[(i + 1) % nb]);
            let t = a.point.dist(p) / a.point.dist(b.point);
            let (pa, pb) = a.seg_params;
            tags[new] = a.seg_owner;
            params[new] = pa + t * (pb - pa);
        }
    }
    Mesh::from_parts(nodes, triangles, tags, params, h, cuts.to_vec(), ring)
}
