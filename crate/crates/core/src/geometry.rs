//! Metric primitives of the half-plane H² = {y > 0} with metric (dx² + dy²)/y²
//! and of the warped product Sol₃ = H² ×_y R with metric (dx² + dy²)/y² + y² dt².
//!
//! Curves are polylines in (x, y) coordinates. Quantities that depend on the
//! metric reject points with y ≤ 0; such points may only appear as markers for
//! removable ideal vertices.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point of the closed upper half-plane in coordinates (x, y).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint {
    pub x: f64,
    pub y: f64,
}

impl HalfPlanePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Self, t: f64) -> Self {
        Self::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }

    pub fn sub(self, other: Self) -> [f64; 2] {
        [self.x - other.x, self.y - other.y]
    }

    pub fn offset(self, d: [f64; 2], s: f64) -> Self {
        Self::new(self.x + s * d[0], self.y + s * d[1])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for HalfPlanePoint {
    fn from(p: [f64; 2]) -> Self {
        Self::new(p[0], p[1])
    }
}

pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// Twice the signed area of the triangle (a, b, c); positive for a left turn.
pub(crate) fn orient(a: HalfPlanePoint, b: HalfPlanePoint, c: HalfPlanePoint) -> f64 {
    cross(b.sub(a), c.sub(a))
}

/// Distance from `p` to the closed segment [a, b].
pub(crate) fn point_segment_distance(p: HalfPlanePoint, a: HalfPlanePoint, b: HalfPlanePoint) -> f64 {
    let ab = b.sub(a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (dot(p.sub(a), ab) / len2).clamp(0.0, 1.0);
    p.dist(a.lerp(b, t))
}

/// Proper or improper intersection test for closed segments [a, b] and [c, d].
pub(crate) fn segments_intersect(
    a: HalfPlanePoint,
    b: HalfPlanePoint,
    c: HalfPlanePoint,
    d: HalfPlanePoint,
) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: HalfPlanePoint, q: HalfPlanePoint, r: HalfPlanePoint, o: f64| {
        o == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

/// Strict crossing: the open segments meet in exactly one interior point of both.
pub(crate) fn segments_cross_properly(
    a: HalfPlanePoint,
    b: HalfPlanePoint,
    c: HalfPlanePoint,
    d: HalfPlanePoint,
    eps: f64,
) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
        && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

/// An ordered sequence of at least two points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    points: Vec<HalfPlanePoint>,
}

impl Polyline {
    /// Builds a polyline, checking that consecutive points are distinct and
    /// that non-adjacent segments do not meet.
    pub fn new(points: Vec<HalfPlanePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidPolyline("empty point list".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPolyline("non-finite coordinate".into()));
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(Error::InvalidPolyline(format!(
                    "repeated consecutive point at index {}",
                    i + 1
                )));
            }
        }
        let line = Self { points };
        if let Some((i, j)) = line.first_self_intersection() {
            return Err(Error::InvalidPolyline(format!(
                "segments {i} and {j} intersect"
            )));
        }
        Ok(line)
    }

    pub(crate) fn from_points_unchecked(points: Vec<HalfPlanePoint>) -> Self {
        Self { points }
    }

    pub fn segment(a: HalfPlanePoint, b: HalfPlanePoint) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn points(&self) -> &[HalfPlanePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }

    pub fn segments(&self) -> impl Iterator<Item = (HalfPlanePoint, HalfPlanePoint)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// Concatenates two polylines sharing an endpoint.
    pub fn concat(&self, other: &Polyline) -> Result<Self> {
        let last = *self.points.last().expect("non-empty");
        if other.points[0] != last {
            return Err(Error::InvalidPolyline(
                "concatenated polylines must share an endpoint".into(),
            ));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points[1..]);
        Ok(Self { points })
    }

    fn first_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.points.len();
        if n < 4 {
            // Two segments can only overlap if they fold back onto each other.
            if n == 3 {
                let (a, b, c) = (self.points[0], self.points[1], self.points[2]);
                if orient(a, b, c) == 0.0 && dot(b.sub(a), c.sub(b)) < 0.0 {
                    return Some((0, 1));
                }
            }
            return None;
        }
        let closed = self.points[0] == self.points[n - 1];
        for i in 0..n - 1 {
            for j in i + 2..n - 1 {
                if closed && i == 0 && j == n - 2 {
                    continue;
                }
                let (a, b) = (self.points[i], self.points[i + 1]);
                let (c, d) = (self.points[j], self.points[j + 1]);
                if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn min_y(&self) -> f64 {
        self.points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min)
    }

    pub fn max_y(&self) -> f64 {
        self.points.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Tangent vector of Sol₃ at a base point, in coordinate components
/// along (∂ₓ, ∂_y, ∂_t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolVector {
    pub vx: f64,
    pub vy: f64,
    pub vt: f64,
}

impl SolVector {
    pub const fn new(vx: f64, vy: f64, vt: f64) -> Self {
        Self { vx, vy, vt }
    }

    pub fn components(self) -> [f64; 3] {
        [self.vx, self.vy, self.vt]
    }

    /// Sol₃ inner product at height `y`.
    pub fn inner(self, other: Self, y: f64) -> f64 {
        (self.vx * other.vx + self.vy * other.vy) / (y * y) + y * y * self.vt * other.vt
    }

    /// Sol₃ norm at height `y`.
    pub fn norm(self, y: f64) -> f64 {
        self.inner(self, y).sqrt()
    }

    pub fn sub(self, other: Self) -> Self {
        Self::new(self.vx - other.vx, self.vy - other.vy, self.vt - other.vt)
    }
}

// 4-point Gauss-Legendre rule on [0, 1].
const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

fn require_interior(gamma: &Polyline) -> Result<()> {
    if gamma.points.iter().any(|p| !(p.y > 0.0)) {
        return Err(Error::IdealPointOnMetricCurve);
    }
    Ok(())
}

/// Plain Euclidean length of the polyline.
pub fn euc_length(gamma: &Polyline) -> f64 {
    gamma.segments().map(|(a, b)| a.dist(b)).sum()
}

/// Hyperbolic length ∫ ds_euc / y, by composite 4-point Gauss quadrature.
pub fn hyp_length(gamma: &Polyline) -> Result<f64> {
    require_interior(gamma)?;
    Ok(gamma
        .segments()
        .map(|(a, b)| {
            // composite rule on a geometric split in y: each piece spans a
            // ratio of at most 1.05
            let pieces = ((b.y / a.y).ln().abs() / 1.05f64.ln()).ceil().max(1.0) as usize;
            let dy = b.y - a.y;
            let param = |k: usize| {
                if pieces == 1 || dy == 0.0 {
                    k as f64 / pieces as f64
                } else {
                    (a.y * (b.y / a.y).powf(k as f64 / pieces as f64) - a.y) / dy
                }
            };
            let total = a.dist(b);
            (0..pieces)
                .map(|k| {
                    let (t0, t1) = (param(k), param(k + 1));
                    let (p, q) = (a.lerp(b, t0), a.lerp(b, t1));
                    let len = total * (t1 - t0);
                    GAUSS4
                        .iter()
                        .map(|&(t, w)| w * len / p.lerp(q, t).y)
                        .sum::<f64>()
                })
                .sum::<f64>()
        })
        .sum())
}

/// True iff every interior vertex lies within `tol` of the chord joining its
/// neighbours.
pub fn is_euclidean_geodesic(gamma: &Polyline, tol: f64) -> bool {
    gamma.points.windows(3).all(|w| {
        let (a, p, b) = (w[0], w[1], w[2]);
        let ab = b.sub(a);
        let len = norm(ab);
        let dist = if len == 0.0 {
            p.dist(a)
        } else {
            cross(ab, p.sub(a)).abs() / len
        };
        dist <= tol
    })
}

/// Signed Menger curvature of the triple (a, p, b): the reciprocal radius of
/// the circumscribed circle, positive for a left turn. Exactly zero when the
/// three points are collinear.
pub fn menger_curvature(a: HalfPlanePoint, p: HalfPlanePoint, b: HalfPlanePoint) -> f64 {
    let turn = cross(p.sub(a), b.sub(p));
    if turn == 0.0 {
        return 0.0;
    }
    2.0 * turn / (a.dist(p) * p.dist(b) * a.dist(b))
}

/// Mean curvature of the vertical cylinder γ × R at an interior vertex:
/// y(p)² times the signed discrete Euclidean curvature.
pub fn cylinder_mean_curvature(gamma: &Polyline, index: usize) -> Result<f64> {
    let pts = gamma.points();
    if index == 0 || index + 1 >= pts.len() {
        return Err(Error::NotInteriorVertex(index));
    }
    let p = pts[index];
    Ok(p.y * p.y * menger_curvature(pts[index - 1], p, pts[index + 1]))
}

/// Sol₃ area of γ × [0, h], integrating the area element |γ'|_Sol · |h ∂_t|_Sol
/// of the parametrised strip with Gauss quadrature along every segment.
pub fn cylinder_area(gamma: &Polyline, h: f64) -> Result<f64> {
    require_interior(gamma)?;
    if h < 0.0 {
        return Err(Error::NegativeHeight(h));
    }
    let mut area = 0.0;
    for (a, b) in gamma.segments() {
        let tangent = SolVector::new(b.x - a.x, b.y - a.y, 0.0);
        let vertical = SolVector::new(0.0, 0.0, h);
        for &(t, w) in &GAUSS4 {
            let y = a.lerp(b, t).y;
            // Gram determinant of the two coordinate tangents.
            let e = tangent.inner(tangent, y);
            let g = vertical.inner(vertical, y);
            let f = tangent.inner(vertical, y);
            area += w * (e * g - f * f).max(0.0).sqrt();
        }
    }
    Ok(area)
}

/// Coordinate vector fields ∂ₓ, ∂_y, ∂_t.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateField {
    X,
    Y,
    T,
}

impl CoordinateField {
    pub const ALL: [CoordinateField; 3] = [CoordinateField::X, CoordinateField::Y, CoordinateField::T];

    fn index(self) -> usize {
        match self {
            CoordinateField::X => 0,
            CoordinateField::Y => 1,
            CoordinateField::T => 2,
        }
    }
}

/// Closed form of the Levi-Civita connection ∇̄_X Y of Sol₃ on coordinate fields.
pub fn connection_closed_form(x: CoordinateField, y_field: CoordinateField, y: f64) -> SolVector {
    use CoordinateField::*;
    match (x, y_field) {
        (X, X) => SolVector::new(0.0, 1.0 / y, 0.0),
        (X, Y) | (Y, X) => SolVector::new(-1.0 / y, 0.0, 0.0),
        (Y, Y) => SolVector::new(0.0, -1.0 / y, 0.0),
        (T, T) => SolVector::new(0.0, -y * y * y, 0.0),
        (Y, T) | (T, Y) => SolVector::new(0.0, 0.0, 1.0 / y),
        (X, T) | (T, X) => SolVector::new(0.0, 0.0, 0.0),
    }
}

/// One entry of the connection table: the finite-difference value of
/// ∇̄_X Y, the closed form, and their difference.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConnectionResidual {
    pub x: CoordinateField,
    pub y: CoordinateField,
    pub numeric: SolVector,
    pub closed_form: SolVector,
    pub residual: SolVector,
    /// Sol₃ norm of the residual at the base point.
    pub norm: f64,
}

fn metric_diag(p: [f64; 3]) -> [f64; 3] {
    let y = p[1];
    [1.0 / (y * y), 1.0 / (y * y), y * y]
}

/// Evaluates ∇̄_X Y for all coordinate fields via the Koszul formula, with
/// centred finite differences of the metric, and compares with the closed forms.
pub fn connection_table(p: [f64; 3], step: f64) -> Result<Vec<ConnectionResidual>> {
    if !(step > 0.0) {
        return Err(Error::NonPositiveStep(step));
    }
    if !(p[1] > 0.0) {
        return Err(Error::IdealPointOnMetricCurve);
    }
    // dg[l][k] = ∂_l g_kk (the metric is diagonal in these coordinates)
    let mut dg = [[0.0; 3]; 3];
    for (l, row) in dg.iter_mut().enumerate() {
        let mut plus = p;
        let mut minus = p;
        plus[l] += step;
        minus[l] -= step;
        let (gp, gm) = (metric_diag(plus), metric_diag(minus));
        for k in 0..3 {
            row[k] = (gp[k] - gm[k]) / (2.0 * step);
        }
    }
    let g = metric_diag(p);
    let dmetric = |l: usize, i: usize, j: usize| if i == j { dg[l][i] } else { 0.0 };
    let mut out = Vec::with_capacity(9);
    for xf in CoordinateField::ALL {
        for yf in CoordinateField::ALL {
            let (i, j) = (xf.index(), yf.index());
            let mut comps = [0.0; 3];
            for (l, c) in comps.iter_mut().enumerate() {
                // Coordinate fields commute, so Koszul reduces to
                // 2<∇_i ∂_j, ∂_l> = ∂_i g_jl + ∂_j g_il - ∂_l g_ij.
                let lowered = 0.5 * (dmetric(i, j, l) + dmetric(j, i, l) - dmetric(l, i, j));
                *c = lowered / g[l];
            }
            let numeric = SolVector::new(comps[0], comps[1], comps[2]);
            let closed_form = connection_closed_form(xf, yf, p[1]);
            let residual = numeric.sub(closed_form);
            out.push(ConnectionResidual {
                x: xf,
                y: yf,
                numeric,
                closed_form,
                residual,
                norm: residual.norm(p[1]),
            });
        }
    }
    Ok(out)
}

/// Upward unit normal of the Killing graph t = u(x, y) at `p`, given the
/// Euclidean gradient (uₓ, u_y).
pub fn graph_normal(grad: [f64; 2], p: HalfPlanePoint) -> Result<SolVector> {
    if !(p.y > 0.0) {
        return Err(Error::IdealPointOnMetricCurve);
    }
    let y = p.y;
    let y2 = y * y;
    let w = (1.0 + y2 * y2 * dot(grad, grad)).sqrt();
    // hyperbolic gradient has coordinate components y² (uₓ, u_y)
    let y3 = y2 * y;
    Ok(SolVector::new(-y3 * grad[0] / w, -y3 * grad[1] / w, 1.0 / (y * w)))
}

/// Area factor W = √(1 + y⁴ |∇_euc u|²).
pub fn area_factor(grad: [f64; 2], y: f64) -> f64 {
    let y2 = y * y;
    (1.0 + y2 * y2 * dot(grad, grad)).sqrt()
}

/// Both sides of the monotonicity identity for X(v) = v/W(v), W = √(1+|v|²):
/// (v₁−v₂)·(X₁−X₂) = ((W₁+W₂)/2)(|X₁−X₂|² + (1/W₁−1/W₂)²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotonicityTerms {
    pub lhs: f64,
    pub rhs: f64,
    /// |X₁ − X₂|², the lower bound for `lhs`.
    pub field_gap: f64,
}

pub fn monotonicity_terms(v1: [f64; 2], v2: [f64; 2]) -> MonotonicityTerms {
    let w1 = (1.0 + dot(v1, v1)).sqrt();
    let w2 = (1.0 + dot(v2, v2)).sqrt();
    let dx = [v1[0] / w1 - v2[0] / w2, v1[1] / w1 - v2[1] / w2];
    let dv = [v1[0] - v2[0], v1[1] - v2[1]];
    let field_gap = dot(dx, dx);
    let dw = 1.0 / w1 - 1.0 / w2;
    MonotonicityTerms {
        lhs: dot(dv, dx),
        rhs: 0.5 * (w1 + w2) * (field_gap + dw * dw),
        field_gap,
    }
}
