//! Scherk domains: boundary cycles of arcs tagged A (+∞ data), B (−∞ data) or
//! C (finite data), their validation, and inscribed Euclidean polygons.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    cross, dot, is_euclidean_geodesic, orient, point_segment_distance, segments_cross_properly,
    segments_intersect, HalfPlanePoint,
};
use crate::{Error, Result};

/// Largest vertex count accepted by polygon enumeration.
pub const ENUMERATION_LIMIT: usize = 16;

/// Interior angles at or above π − `CORNER_TOL` are not convex corners.
pub const CORNER_TOL: f64 = 1e-9;

/// Number of sample points per edge in the edge-in-closure test.
const EDGE_SAMPLES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArcKind {
    A,
    B,
    C,
}

impl fmt::Display for ArcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArcKind::A => "A",
            ArcKind::B => "B",
            ArcKind::C => "C",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub ideal: bool,
}

impl Vertex {
    pub fn point(&self) -> HalfPlanePoint {
        HalfPlanePoint::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ArcGeometry {
    Segment,
    Polyline { points: Vec<HalfPlanePoint> },
}

/// Finite boundary values on a C arc. Samples are aligned with the arc's
/// points for polylines, and uniformly spaced for segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ArcData {
    Constant { value: f64 },
    Samples { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryArc {
    pub kind: ArcKind,
    pub from: usize,
    pub to: usize,
    pub geometry: ArcGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<ArcData>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScherkDomain {
    pub vertices: Vec<Vertex>,
    pub arcs: Vec<BoundaryArc>,
}

/// One violated invariant, with the offending arc or vertex.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
}

impl Diagnostic {
    fn arc(k: usize, what: &str) -> Self {
        Self {
            message: format!("{what}, arc {k}"),
            arc: Some(k),
            vertex: None,
        }
    }

    fn vertex(v: usize, what: &str) -> Self {
        Self {
            message: format!("{what}, vertex {v}"),
            arc: None,
            vertex: Some(v),
        }
    }

    fn global(what: &str) -> Self {
        Self {
            message: what.to_string(),
            arc: None,
            vertex: None,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl ArcData {
    /// Value at arclength fraction `s` ∈ [0, 1] along an arc whose cumulative
    /// arclength fractions at its points are `fractions`.
    pub fn eval(&self, fractions: &[f64], s: f64) -> f64 {
        match self {
            ArcData::Constant { value } => *value,
            ArcData::Samples { values } => {
                let uniform;
                let knots: &[f64] = if values.len() == fractions.len() {
                    fractions
                } else {
                    let m = values.len().max(2) - 1;
                    uniform = (0..values.len()).map(|k| k as f64 / m as f64).collect::<Vec<_>>();
                    &uniform
                };
                interpolate(knots, values, s)
            }
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        match self {
            ArcData::Constant { value } => (*value, *value),
            ArcData::Samples { values } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }
}

fn interpolate(knots: &[f64], values: &[f64], s: f64) -> f64 {
    if values.len() == 1 {
        return values[0];
    }
    let s = s.clamp(0.0, 1.0);
    let k = knots.partition_point(|&t| t <= s).clamp(1, knots.len() - 1);
    let (t0, t1) = (knots[k - 1], knots[k]);
    if t1 <= t0 {
        return values[k];
    }
    let w = (s - t0) / (t1 - t0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

impl ScherkDomain {
    pub fn vertex_point(&self, v: usize) -> HalfPlanePoint {
        self.vertices[v].point()
    }

    /// The arc's points from its start vertex to its end vertex.
    pub fn arc_points(&self, k: usize) -> Vec<HalfPlanePoint> {
        let arc = &self.arcs[k];
        match &arc.geometry {
            ArcGeometry::Segment => vec![self.vertex_point(arc.from), self.vertex_point(arc.to)],
            ArcGeometry::Polyline { points } => points.clone(),
        }
    }

    /// Cumulative arclength fractions at the arc's points.
    pub fn arc_fractions(&self, k: usize) -> Vec<f64> {
        arclength_fractions(&self.arc_points(k))
    }

    pub fn arc_length(&self, k: usize) -> f64 {
        self.arc_points(k).windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    pub fn has_c_arcs(&self) -> bool {
        self.arcs.iter().any(|a| a.kind == ArcKind::C)
    }

    pub fn is_polygonal(&self) -> bool {
        self.arcs
            .iter()
            .all(|a| matches!(a.geometry, ArcGeometry::Segment))
    }

    /// Arc indices in boundary traversal order, starting from arc 0, or
    /// `None` when the arcs do not chain into one closed cycle.
    pub fn cycle_order(&self) -> Option<Vec<usize>> {
        let n = self.arcs.len();
        if n < 2 {
            return None;
        }
        let mut order = Vec::with_capacity(n);
        let mut used = vec![false; n];
        let mut k = 0;
        for _ in 0..n {
            if used[k] {
                return None;
            }
            used[k] = true;
            order.push(k);
            let next_from = self.arcs[k].to;
            let mut candidates = (0..n).filter(|&j| self.arcs[j].from == next_from);
            let next = candidates.next()?;
            if candidates.next().is_some() {
                return None;
            }
            k = next;
        }
        (k == order[0]).then_some(order)
    }

    /// Closed boundary ring (first point not repeated) with the arc owning
    /// each segment starting at that point.
    pub fn boundary_ring(&self) -> Vec<(HalfPlanePoint, usize)> {
        let order = self
            .cycle_order()
            .unwrap_or_else(|| (0..self.arcs.len()).collect());
        let mut ring = Vec::new();
        for k in order {
            let pts = self.arc_points(k);
            for p in &pts[..pts.len() - 1] {
                ring.push((*p, k));
            }
        }
        ring
    }

    pub fn boundary_points(&self) -> Vec<HalfPlanePoint> {
        self.boundary_ring().into_iter().map(|(p, _)| p).collect()
    }

    /// Twice the signed area enclosed by the boundary ring.
    pub fn signed_area2(&self) -> f64 {
        polygon_area2(&self.boundary_points())
    }

    /// Diameter of the bounding box of the boundary.
    pub fn scale(&self) -> f64 {
        let pts = self.boundary_points();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        (x1 - x0).hypot(y1 - y0)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.arcs.len()).map(|k| self.arc_length(k)).sum()
    }

    /// Closed-set membership: inside the boundary ring or within `tol` of it.
    pub fn contains_closed(&self, p: HalfPlanePoint, tol: f64) -> bool {
        point_in_ring(&self.boundary_points(), p, tol)
    }

    /// Canonical serialization: the same document for equal domains.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("domain serializes")
    }

    pub fn translated(&self, dx: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            v.x += dx;
        }
        for arc in &mut out.arcs {
            if let ArcGeometry::Polyline { points } = &mut arc.geometry {
                for p in points {
                    p.x += dx;
                }
            }
        }
        out
    }
}

pub(crate) fn arclength_fractions(pts: &[HalfPlanePoint]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in pts.windows(2) {
        let last = *acc.last().unwrap();
        acc.push(last + w[0].dist(w[1]));
    }
    let total = *acc.last().unwrap();
    if total > 0.0 {
        for a in &mut acc {
            *a /= total;
        }
        *acc.last_mut().unwrap() = 1.0;
    }
    acc
}

pub(crate) fn polygon_area2(pts: &[HalfPlanePoint]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum()
}

/// Even-odd point-in-polygon test that also accepts points within `tol` of
/// the ring.
pub(crate) fn point_in_ring(ring: &[HalfPlanePoint], p: HalfPlanePoint, tol: f64) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if point_segment_distance(p, a, b) <= tol {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

#[derive(Deserialize)]
struct RawDomain {
    vertices: Vec<RawVertex>,
    arcs: Vec<RawArc>,
}

#[derive(Deserialize)]
struct RawVertex {
    x: f64,
    y: f64,
    #[serde(default)]
    ideal: bool,
}

#[derive(Deserialize)]
struct RawArc {
    kind: String,
    from: usize,
    to: usize,
    geometry: serde_json::Value,
    #[serde(default)]
    data: Option<serde_json::Value>,
}

fn parse_err(path: impl Into<String>, message: impl fmt::Display) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Parses and validates a domain document.
pub fn parse_domain(document: &str) -> Result<ScherkDomain> {
    let raw: RawDomain = serde_json::from_str(document).map_err(|e| {
        parse_err(format!("line {} column {}", e.line(), e.column()), e)
    })?;
    let vertices = raw
        .vertices
        .iter()
        .map(|v| Vertex {
            x: v.x,
            y: v.y,
            ideal: v.ideal,
        })
        .collect::<Vec<_>>();
    let mut arcs = Vec::with_capacity(raw.arcs.len());
    for (k, a) in raw.arcs.into_iter().enumerate() {
        let kind = match a.kind.as_str() {
            "A" => ArcKind::A,
            "B" => ArcKind::B,
            "C" => ArcKind::C,
            other => {
                return Err(parse_err(
                    format!("arcs[{k}].kind"),
                    format!("unknown arc kind \"{other}\""),
                ))
            }
        };
        let geometry: ArcGeometry = serde_json::from_value(a.geometry)
            .map_err(|e| parse_err(format!("arcs[{k}].geometry"), e))?;
        let data: Option<ArcData> = a
            .data
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| parse_err(format!("arcs[{k}].data"), e))?;
        match (kind, &data) {
            (ArcKind::C, None) => {
                return Err(parse_err(format!("arcs[{k}].data"), "required for C arcs"))
            }
            (ArcKind::A | ArcKind::B, Some(_)) => {
                return Err(parse_err(
                    format!("arcs[{k}].data"),
                    "only C arcs carry data",
                ))
            }
            _ => {}
        }
        if a.from >= vertices.len() || a.to >= vertices.len() {
            return Err(parse_err(
                format!("arcs[{k}]"),
                "vertex index out of range",
            ));
        }
        arcs.push(BoundaryArc {
            kind,
            from: a.from,
            to: a.to,
            geometry,
            data,
        });
    }
    let domain = ScherkDomain { vertices, arcs };
    let diagnostics = validate(&domain);
    if diagnostics.is_empty() {
        Ok(domain)
    } else {
        Err(Error::InvalidDomain(diagnostics))
    }
}

pub fn read_domain(path: &Path) -> Result<ScherkDomain> {
    let text = std::fs::read_to_string(path)?;
    parse_domain(&text)
}

/// Reports every violated invariant; an empty list means the domain is valid.
pub fn validate(domain: &ScherkDomain) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let nv = domain.vertices.len();

    for (i, v) in domain.vertices.iter().enumerate() {
        if !v.x.is_finite() || !v.y.is_finite() {
            out.push(Diagnostic::vertex(i, "non-finite vertex coordinate"));
        } else if v.y < 0.0 {
            out.push(Diagnostic::vertex(i, "vertex below ideal boundary"));
        } else if v.ideal && v.y != 0.0 {
            out.push(Diagnostic::vertex(i, "ideal vertex off the ideal boundary"));
        } else if !v.ideal && v.y == 0.0 {
            out.push(Diagnostic::vertex(i, "vertex on ideal boundary not flagged ideal"));
        }
    }
    if nv < 3 {
        out.push(Diagnostic::global("domain needs at least 3 vertices"));
    }

    let mut arcs_ok = true;
    for (k, arc) in domain.arcs.iter().enumerate() {
        if arc.from >= nv || arc.to >= nv {
            out.push(Diagnostic::arc(k, "vertex index out of range"));
            arcs_ok = false;
            continue;
        }
        if arc.from == arc.to {
            out.push(Diagnostic::arc(k, "arc starts and ends at the same vertex"));
        }
        if let ArcGeometry::Polyline { points } = &arc.geometry {
            if points.len() < 2 {
                out.push(Diagnostic::arc(k, "polyline needs at least 2 points"));
                arcs_ok = false;
                continue;
            }
            if points[0] != domain.vertex_point(arc.from)
                || points[points.len() - 1] != domain.vertex_point(arc.to)
            {
                out.push(Diagnostic::arc(k, "arc endpoints do not match its vertices"));
            }
            if points.iter().any(|p| !p.is_finite()) {
                out.push(Diagnostic::arc(k, "non-finite arc point"));
                arcs_ok = false;
                continue;
            }
            if points[1..points.len() - 1].iter().any(|p| p.y <= 0.0) {
                out.push(Diagnostic::arc(k, "arc point on or below ideal boundary"));
            }
            if points.windows(2).any(|w| w[0] == w[1]) {
                out.push(Diagnostic::arc(k, "repeated consecutive arc point"));
            }
        }
        let from_ideal = domain.vertices[arc.from].ideal;
        let to_ideal = domain.vertices[arc.to].ideal;
        if from_ideal && to_ideal && matches!(arc.geometry, ArcGeometry::Segment) {
            out.push(Diagnostic::arc(k, "arc runs along the ideal boundary"));
        }
        let pts = domain.arc_points(k);
        match arc.kind {
            ArcKind::A | ArcKind::B => {
                let tol = 1e-12 * domain_scale_hint(domain);
                let polyline = crate::geometry::Polyline::from_points_unchecked(pts.clone());
                if !is_euclidean_geodesic(&polyline, tol) {
                    out.push(Diagnostic::arc(
                        k,
                        &format!("{} arc is not a Euclidean segment", arc.kind),
                    ));
                }
                if arc.data.is_some() {
                    out.push(Diagnostic::arc(k, &format!("{} arc carries data", arc.kind)));
                }
            }
            ArcKind::C => {
                match &arc.data {
                    None => out.push(Diagnostic::arc(k, "C arc without data")),
                    Some(ArcData::Constant { value }) if !value.is_finite() => {
                        out.push(Diagnostic::arc(k, "non-finite boundary data"))
                    }
                    Some(ArcData::Samples { values }) => {
                        if values.iter().any(|v| !v.is_finite()) {
                            out.push(Diagnostic::arc(k, "non-finite boundary data"));
                        }
                        let aligned = match arc.geometry {
                            ArcGeometry::Segment => values.len() >= 2,
                            ArcGeometry::Polyline { .. } => values.len() == pts.len(),
                        };
                        if !aligned {
                            out.push(Diagnostic::arc(k, "sample count does not match arc points"));
                        }
                    }
                    _ => {}
                }
                let s2 = domain_scale_hint(domain).powi(2);
                if pts
                    .windows(3)
                    .any(|w| cross(w[1].sub(w[0]), w[2].sub(w[1])) < -1e-12 * s2)
                {
                    out.push(Diagnostic::arc(k, "C arc concave toward domain"));
                }
            }
        }
    }

    let order = if arcs_ok { domain.cycle_order() } else { None };
    let covers_all = order.as_ref().is_some_and(|o| {
        let used: BTreeSet<usize> = o.iter().map(|&k| domain.arcs[k].from).collect();
        used.len() == nv
    });
    match order {
        None if arcs_ok => out.push(Diagnostic::global("arcs do not form a single closed cycle")),
        None => {}
        Some(_) if !covers_all => {
            out.push(Diagnostic::global("boundary cycle does not visit every vertex"))
        }
        Some(order) => {
            check_ring(domain, &order, &mut out);
        }
    }
    out.sort();
    out.dedup();
    out
}

fn domain_scale_hint(domain: &ScherkDomain) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for v in &domain.vertices {
        x0 = x0.min(v.x);
        x1 = x1.max(v.x);
        y0 = y0.min(v.y);
        y1 = y1.max(v.y);
    }
    let s = (x1 - x0).hypot(y1 - y0);
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

fn check_ring(domain: &ScherkDomain, order: &[usize], out: &mut Vec<Diagnostic>) {
    let mut ring = Vec::new();
    for &k in order {
        let pts = domain.arc_points(k);
        ring.extend_from_slice(&pts[..pts.len() - 1]);
    }
    let n = ring.len();
    let mut simple = true;
    'outer: for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if adjacent {
                // adjacent segments may only share their common endpoint
                let (p, q, r) = if j == i + 1 { (a, b, d) } else { (c, a, b) };
                if orient(p, q, r) == 0.0 && dot(q.sub(p), r.sub(q)) < 0.0 {
                    simple = false;
                    break 'outer;
                }
            } else if segments_intersect(a, b, c, d) {
                simple = false;
                break 'outer;
            }
        }
    }
    if !simple {
        out.push(Diagnostic::global("boundary is not simple"));
        return;
    }
    let area2 = polygon_area2(&ring);
    let scale = domain_scale_hint(domain);
    if area2.abs() <= 1e-14 * scale * scale {
        out.push(Diagnostic::global("degenerate domain with zero area"));
        return;
    }
    if area2 < 0.0 {
        out.push(Diagnostic::global("boundary is not counterclockwise"));
        return;
    }

    // corner rule at each vertex, between the incoming and outgoing arcs
    for (pos, &k_out) in order.iter().enumerate() {
        let k_in = order[(pos + order.len() - 1) % order.len()];
        let (a_in, a_out) = (&domain.arcs[k_in], &domain.arcs[k_out]);
        if a_in.kind != a_out.kind || a_in.kind == ArcKind::C {
            continue;
        }
        let p_in = domain.arc_points(k_in);
        let p_out = domain.arc_points(k_out);
        let d_in = p_in[p_in.len() - 1].sub(p_in[p_in.len() - 2]);
        let d_out = p_out[1].sub(p_out[0]);
        let turn = cross(d_in, d_out).atan2(dot(d_in, d_out));
        // interior angle = π − turn for a counterclockwise boundary
        if turn > CORNER_TOL {
            out.push(Diagnostic::vertex(
                a_out.from,
                &format!("adjacent {} arcs at convex corner", a_in.kind),
            ));
        }
    }
}

/// A simple polygon with vertices among the domain's vertices, listed
/// counterclockwise starting from its smallest vertex index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InscribedPolygon {
    pub vertices: Vec<usize>,
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonStats {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

/// Edge (i, j) lies in the closure of the domain: it crosses no boundary
/// segment properly and its sample points are inside or on the boundary.
pub(crate) fn edge_in_closure(domain: &ScherkDomain, ring: &[HalfPlanePoint], i: usize, j: usize) -> bool {
    let p = domain.vertex_point(i);
    let q = domain.vertex_point(j);
    let scale = domain_scale_hint(domain);
    let n = ring.len();
    for s in 0..n {
        let (a, b) = (ring[s], ring[(s + 1) % n]);
        if segments_cross_properly(p, q, a, b, 1e-14 * scale * scale) {
            return false;
        }
    }
    let tol = 1e-12 * scale;
    let lo = if domain.vertices[i].ideal { 1e-6 } else { 0.0 };
    let hi = if domain.vertices[j].ideal { 1.0 - 1e-6 } else { 1.0 };
    (0..EDGE_SAMPLES).all(|k| {
        let t = (k as f64 + 0.5) / EDGE_SAMPLES as f64;
        point_in_ring(ring, p.lerp(q, t.clamp(lo, hi)), tol)
    })
}

fn polygon_is_simple(pts: &[HalfPlanePoint]) -> bool {
    let n = pts.len();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let c = pts[(i + 2) % n];
        if orient(a, b, c) == 0.0 && dot(b.sub(a), c.sub(b)) < 0.0 {
            return false;
        }
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(a, b, pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Every inscribed polygon of the domain in lexicographic order of vertex
/// index sequences.
pub fn enumerate_inscribed_polygons(domain: &ScherkDomain) -> Result<Vec<InscribedPolygon>> {
    let n = domain.vertices.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard(n));
    }
    let ring = domain.boundary_points();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let ok = domain.vertex_point(i) != domain.vertex_point(j)
                && edge_in_closure(domain, &ring, i, j);
            adj[i][j] = ok;
            adj[j][i] = ok;
        }
    }
    let pts: Vec<HalfPlanePoint> = (0..n).map(|i| domain.vertex_point(i)).collect();
    let mut cycles = Vec::new();
    for start in 0..n {
        let mut path = vec![start];
        let mut used = vec![false; n];
        used[start] = true;
        extend_cycles(&adj, &pts, start, &mut path, &mut used, &mut cycles);
    }
    cycles.sort();
    cycles
        .into_iter()
        .map(|vertices| {
            let s = stats_unchecked(domain, &vertices);
            Ok(InscribedPolygon {
                vertices,
                l: s.l,
                a: s.a,
                b: s.b,
            })
        })
        .collect()
}

fn extend_cycles(
    adj: &[Vec<bool>],
    pts: &[HalfPlanePoint],
    start: usize,
    path: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    let last = *path.last().unwrap();
    if path.len() >= 3 && adj[last][start] {
        let poly: Vec<HalfPlanePoint> = path.iter().map(|&v| pts[v]).collect();
        if polygon_area2(&poly) > 0.0 && polygon_is_simple(&poly) {
            out.push(path.clone());
        }
    }
    for next in start + 1..pts.len() {
        if used[next] || !adj[last][next] {
            continue;
        }
        // the new edge must not meet earlier non-adjacent edges
        let (a, b) = (pts[last], pts[next]);
        let clash = path.windows(2).take(path.len().saturating_sub(2)).any(|w| {
            segments_intersect(a, b, pts[w[0]], pts[w[1]])
        });
        if clash {
            continue;
        }
        used[next] = true;
        path.push(next);
        extend_cycles(adj, pts, start, path, used, out);
        path.pop();
        used[next] = false;
    }
}

fn stats_unchecked(domain: &ScherkDomain, poly: &[usize]) -> PolygonStats {
    let mut s = PolygonStats {
        l: 0.0,
        a: 0.0,
        b: 0.0,
    };
    let n = poly.len();
    for e in 0..n {
        let (i, j) = (poly[e], poly[(e + 1) % n]);
        let len = domain.vertex_point(i).dist(domain.vertex_point(j));
        s.l += len;
        let on_arc = domain.arcs.iter().find(|arc| {
            matches!(arc.geometry, ArcGeometry::Segment)
                && ((arc.from == i && arc.to == j) || (arc.from == j && arc.to == i))
        });
        match on_arc.map(|arc| arc.kind) {
            Some(ArcKind::A) => s.a += len,
            Some(ArcKind::B) => s.b += len,
            _ => {}
        }
    }
    s
}

/// Perimeter and A/B edge lengths of an inscribed polygon.
pub fn polygon_stats(poly: &[usize], domain: &ScherkDomain) -> Result<PolygonStats> {
    let n = domain.vertices.len();
    let bad = || Error::NotInscribed(poly.to_vec());
    if poly.len() < 3 || poly.iter().any(|&v| v >= n) {
        return Err(bad());
    }
    let distinct: BTreeSet<usize> = poly.iter().copied().collect();
    if distinct.len() != poly.len() {
        return Err(bad());
    }
    let ring = domain.boundary_points();
    let pts: Vec<HalfPlanePoint> = poly.iter().map(|&v| domain.vertex_point(v)).collect();
    if polygon_area2(&pts) == 0.0 || !polygon_is_simple(&pts) {
        return Err(bad());
    }
    for e in 0..poly.len() {
        if !edge_in_closure(domain, &ring, poly[e], poly[(e + 1) % poly.len()]) {
            return Err(bad());
        }
    }
    Ok(stats_unchecked(domain, poly))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(kinds: [ArcKind; 4]) -> ScherkDomain {
        let v = [(0.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)];
        ScherkDomain {
            vertices: v
                .iter()
                .map(|&(x, y)| Vertex { x, y, ideal: false })
                .collect(),
            arcs: (0..4)
                .map(|k| BoundaryArc {
                    kind: kinds[k],
                    from: k,
                    to: (k + 1) % 4,
                    geometry: ArcGeometry::Segment,
                    data: (kinds[k] == ArcKind::C).then_some(ArcData::Constant { value: 0.0 }),
                })
                .collect(),
        }
    }

    #[test]
    fn adjacent_a_arcs_flagged() {
        use ArcKind::*;
        let d = validate(&square([A, A, B, B]));
        let msgs: Vec<_> = d.iter().map(|d| d.message.as_str()).collect();
        assert!(msgs.contains(&"adjacent A arcs at convex corner, vertex 1"), "{msgs:?}");
        assert!(msgs.contains(&"adjacent B arcs at convex corner, vertex 3"), "{msgs:?}");
        assert!(validate(&square([A, B, A, B])).is_empty());
    }

    #[test]
    fn straight_angle_is_not_convex() {
        use ArcKind::*;
        // two A arcs meeting at a straight angle along the bottom
        let dom = ScherkDomain {
            vertices: [(0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (1.0, 2.0)]
                .iter()
                .map(|&(x, y)| Vertex { x, y, ideal: false })
                .collect(),
            arcs: vec![
                BoundaryArc { kind: A, from: 0, to: 1, geometry: ArcGeometry::Segment, data: None },
                BoundaryArc { kind: A, from: 1, to: 2, geometry: ArcGeometry::Segment, data: None },
                BoundaryArc { kind: C, from: 2, to: 3, geometry: ArcGeometry::Segment, data: Some(ArcData::Constant { value: 0.0 }) },
                BoundaryArc { kind: C, from: 3, to: 0, geometry: ArcGeometry::Segment, data: Some(ArcData::Constant { value: 0.0 }) },
            ],
        };
        assert!(validate(&dom).is_empty(), "{:?}", validate(&dom));
    }

    #[test]
    fn interpolation_of_samples() {
        let d = ArcData::Samples {
            values: vec![0.0, 1.0, 4.0],
        };
        assert_eq!(d.eval(&[0.0, 0.5, 1.0], 0.25), 0.5);
        assert_eq!(d.eval(&[0.0, 0.5, 1.0], 1.0), 4.0);
        assert_eq!(d.eval(&[0.0, 1.0], 0.75), 2.5);
    }

    #[test]
    fn validate_is_idempotent_and_rotation_invariant() {
        use ArcKind::*;
        let dom = square([A, A, B, B]);
        let d1 = validate(&dom);
        assert_eq!(d1, validate(&dom));
        let mut rotated = dom.clone();
        rotated.arcs.rotate_left(2);
        let msgs = |d: &[Diagnostic]| {
            let mut m: Vec<_> = d.iter().map(|d| d.message.clone()).collect();
            m.sort();
            m
        };
        assert_eq!(msgs(&d1), msgs(&validate(&rotated)));
    }

    #[test]
    fn square_polygons() {
        use ArcKind::*;
        let dom = square([A, B, A, B]);
        let polys = enumerate_inscribed_polygons(&dom).unwrap();
        let seqs: Vec<_> = polys.iter().map(|p| p.vertices.clone()).collect();
        assert_eq!(
            seqs,
            vec![vec![0, 1, 2], vec![0, 1, 2, 3], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]
        );
        let s = polygon_stats(&[0, 1, 2, 3], &dom).unwrap();
        assert_eq!((s.l, s.a, s.b), (4.0, 2.0, 2.0));
        let t = polygon_stats(&[0, 1, 2], &dom).unwrap();
        assert!((t.l - (2.0 + 2f64.sqrt())).abs() < 1e-15);
        assert_eq!((t.a, t.b), (1.0, 1.0));
        assert!(polygon_stats(&[0, 2, 1, 3], &dom).is_err());
    }
}
