//! Capped boundary schedules realising infinite data, the μₙ normalisation
//! for domains without C arcs, and convergence/divergence classification.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conditions::Case;
use crate::domain::{edge_in_closure, ArcKind, ScherkDomain};
use crate::geometry::{point_segment_distance, HalfPlanePoint};
use crate::mesh::{triangulate, Mesh, NodeTag};
use crate::solver::{solve_from, DirichletData, Solution, SolverConfig};
use crate::{Error, Result};

/// Relative threshold: convergent iff the last two increments differ by
/// less than this times the last cap gap.
pub const CONVERGENCE_FACTOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    #[serde(rename = "boundary")]
    Boundary,
    #[serde(rename = "convergent")]
    Convergent,
    #[serde(rename = "divergent+")]
    DivergentPlus,
    #[serde(rename = "divergent-")]
    DivergentMinus,
}

#[derive(Clone, Debug)]
pub struct CappedSequence {
    pub case: Case,
    pub caps: Vec<f64>,
    /// One solution per cap; normalised by μₙ in the C-empty case.
    pub solutions: Vec<Solution>,
    /// μₙ per cap (zero when C arcs exist).
    pub shifts: Vec<f64>,
    /// Per-node classification; empty with fewer than 3 caps.
    pub classes: Vec<NodeClass>,
}

impl CappedSequence {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.solutions[0].mesh
    }

    /// Increments u_{k} − u_{k−1} at node `i`.
    pub fn increments(&self, i: usize) -> Vec<f64> {
        self.solutions
            .windows(2)
            .map(|w| w[1].u[i] - w[0].u[i])
            .collect()
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    /// Normalised boundary values (n − μₙ on A, −μₙ on B) per cap. For a
    /// Scherk limit both must grow without bound; a stalled entry means the
    /// limit misses the infinite data on that side.
    pub fn boundary_levels(&self) -> Vec<(f64, f64)> {
        self.caps.iter().zip(&self.shifts).map(|(&n, &mu)| (n - mu, -mu)).collect()
    }
}

/// Boundary data for cap `n`.
pub fn cap_data(domain: &ScherkDomain, n: f64) -> Result<DirichletData> {
    let has_b = domain.arcs.iter().any(|a| a.kind == ArcKind::B);
    if !domain.has_c_arcs() {
        DirichletData::capped(domain, n, 0.0, None)
    } else if has_b {
        DirichletData::capped(domain, n, -n, Some((-n, n)))
    } else {
        DirichletData::capped(domain, n, -n, Some((f64::NEG_INFINITY, n)))
    }
}

/// Solves the capped problems for every cap on one mesh.
pub fn capped_sequence(domain: &ScherkDomain, caps: &[f64], cfg: &SolverConfig) -> Result<CappedSequence> {
    cfg.check()?;
    if caps.is_empty() || caps.iter().any(|&c| !(c > 0.0) || !c.is_finite()) || caps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("caps must be positive and strictly increasing".into()));
    }
    let mesh = Arc::new(triangulate(domain, cfg.h, cfg.truncation())?);
    capped_sequence_on(domain, &mesh, caps, cfg)
}

pub fn capped_sequence_on(domain: &ScherkDomain, mesh: &Arc<Mesh>, caps: &[f64], cfg: &SolverConfig) -> Result<CappedSequence> {
    let case = if domain.has_c_arcs() { Case::CNonempty } else { Case::CEmpty };
    let mut solutions = Vec::with_capacity(caps.len());
    let mut shifts = Vec::with_capacity(caps.len());
    let mut prev: Option<Vec<f64>> = None;
    for (index, &n) in caps.iter().enumerate() {
        let wrap = |e: Error| Error::CapFailed {
            index,
            cap: n,
            source: Box::new(e),
        };
        let data = cap_data(domain, n).map_err(wrap)?;
        let sol = solve_from(mesh, &data, cfg, prev.as_deref()).map_err(wrap)?;
        prev = Some(sol.u.clone());
        match case {
            Case::CNonempty => {
                shifts.push(0.0);
                solutions.push(sol);
            }
            Case::CEmpty => {
                let mu = sublevel_connection_value(domain, mesh, &sol.u);
                shifts.push(mu);
                solutions.push(sol.shifted(mu));
            }
        }
    }
    let classes = if solutions.len() >= 3 { classify(mesh, caps, &solutions) } else { Vec::new() };
    Ok(CappedSequence {
        case,
        caps: caps.to_vec(),
        solutions,
        shifts,
        classes,
    })
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// μ = inf{c ≥ 0 : all B-arc nodes lie in one component of B ∪ {v ≤ c}}.
/// Components that do not touch B are ignored. Exact sweep over nodal values
/// in increasing order with union-find on the mesh graph.
pub fn sublevel_connection_value(domain: &ScherkDomain, mesh: &Mesh, v: &[f64]) -> f64 {
    let n = mesh.node_count();
    let on_b = |i: usize| match mesh.tags[i] {
        NodeTag::Arc(k) => domain.arcs[k].kind == ArcKind::B,
        _ => false,
    };
    let mut parent: Vec<usize> = (0..n).collect();
    let mut included = vec![false; n];
    // roots carrying a B node, and how many distinct such roots exist
    let mut has_b: Vec<bool> = (0..n).map(on_b).collect();
    let mut b_components = has_b.iter().filter(|&&b| b).count();
    let mut add = |i: usize, parent: &mut Vec<usize>, b_components: &mut usize| {
        included[i] = true;
        for &j in mesh.neighbors(i) {
            if included[j] {
                let (a, b) = (find(parent, i), find(parent, j));
                if a != b {
                    let (root, child) = (a.min(b), a.max(b));
                    if has_b[root] && has_b[child] {
                        *b_components -= 1;
                    }
                    has_b[root] |= has_b[child];
                    parent[child] = root;
                }
            }
        }
    };
    for i in 0..n {
        if on_b(i) {
            add(i, &mut parent, &mut b_components);
        }
    }
    if b_components <= 1 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| !on_b(i)).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    for i in order {
        add(i, &mut parent, &mut b_components);
        if b_components == 1 {
            return v[i].max(0.0);
        }
    }
    0.0
}

fn classify(mesh: &Mesh, caps: &[f64], sols: &[Solution]) -> Vec<NodeClass> {
    let k = sols.len();
    let gap = caps[k - 1] - caps[k - 2];
    let eps = CONVERGENCE_FACTOR * gap;
    (0..mesh.node_count())
        .map(|i| {
            if mesh.is_boundary(i) {
                return NodeClass::Boundary;
            }
            let last = sols[k - 1].u[i] - sols[k - 2].u[i];
            let prev = sols[k - 2].u[i] - sols[k - 3].u[i];
            if (last - prev).abs() < eps {
                NodeClass::Convergent
            } else if last > 0.0 {
                NodeClass::DivergentPlus
            } else {
                NodeClass::DivergentMinus
            }
        })
        .collect()
}

/// Straight chord between two domain vertices fitted to part of a
/// component's frontier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordFit {
    pub vertices: [usize; 2],
    pub frontier_nodes: usize,
    /// RMS distance of the frontier nodes to their least-squares line.
    pub residual: f64,
    /// Max distance of the frontier nodes to the snapped chord.
    pub offset: f64,
    pub line_point: HalfPlanePoint,
    pub line_direction: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceComponent {
    pub class: NodeClass,
    pub nodes: Vec<usize>,
    /// Share of interior nodes in this component.
    pub fraction: f64,
    pub chords: Vec<ChordFit>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub components: Vec<DivergenceComponent>,
}

impl DivergenceReport {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Connected components of divergent nodes, with the interior part of each
/// component's boundary fitted by chords between domain vertices.
pub fn divergence_set(seq: &CappedSequence, domain: &ScherkDomain) -> DivergenceReport {
    if seq.classes.is_empty() {
        return DivergenceReport::default();
    }
    let mesh = seq.mesh();
    let classes = &seq.classes;
    let interior = classes.iter().filter(|&&c| c != NodeClass::Boundary).count().max(1);
    let chords = interior_chords(domain);
    let mut seen = vec![false; mesh.node_count()];
    let mut components = Vec::new();
    for start in 0..mesh.node_count() {
        let class = classes[start];
        if seen[start] || !matches!(class, NodeClass::DivergentPlus | NodeClass::DivergentMinus) {
            continue;
        }
        let nodes = flood(mesh, start, &mut seen, |j| classes[j] == class);
        // frontier away from the domain boundary
        let mut is_frontier = vec![false; mesh.node_count()];
        for &i in &nodes {
            is_frontier[i] = mesh.neighbors(i).iter().any(|&j| classes[j] == NodeClass::Convergent)
                && mesh.boundary_distance(mesh.nodes[i]) >= 2.0 * mesh.h;
        }
        let total = is_frontier.iter().filter(|&&f| f).count();
        let min_nodes = 3usize.max(total / 20);
        let mut fits = Vec::new();
        let mut taken = vec![false; mesh.node_count()];
        for &i in &nodes {
            if is_frontier[i] && !taken[i] {
                let chain = flood(mesh, i, &mut taken, |j| is_frontier[j]);
                fit_chain(mesh, domain, &chords, &chain, min_nodes, &mut fits);
            }
        }
        components.push(DivergenceComponent {
            class,
            fraction: nodes.len() as f64 / interior as f64,
            nodes,
            chords: fits,
        });
    }
    components.sort_by(|a, b| b.nodes.len().cmp(&a.nodes.len()).then(a.nodes[0].cmp(&b.nodes[0])));
    DivergenceReport { components }
}

/// Breadth-first component of `start` among nodes accepted by `keep`.
fn flood(mesh: &Mesh, start: usize, seen: &mut [bool], keep: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut nodes = vec![start];
    seen[start] = true;
    let mut head = 0;
    while head < nodes.len() {
        let i = nodes[head];
        head += 1;
        for &j in mesh.neighbors(i) {
            if !seen[j] && keep(j) {
                seen[j] = true;
                nodes.push(j);
            }
        }
    }
    nodes.sort_unstable();
    nodes
}

/// Vertex pairs whose segment lies in the closed domain and is not itself a
/// boundary arc.
fn interior_chords(domain: &ScherkDomain) -> Vec<[usize; 2]> {
    let ring = domain.boundary_points();
    let n = domain.vertices.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let is_arc = domain.arcs.iter().any(|a| (a.from == i && a.to == j) || (a.from == j && a.to == i));
            if !is_arc && edge_in_closure(domain, &ring, i, j) {
                out.push([i, j]);
            }
        }
    }
    out
}

/// Fits a line to a frontier chain, splitting it at the farthest node while
/// the RMS residual exceeds h, and snaps each piece to a chord.
fn fit_chain(mesh: &Mesh, domain: &ScherkDomain, chords: &[[usize; 2]], chain: &[usize], min_nodes: usize, out: &mut Vec<ChordFit>) {
    if chain.len() < min_nodes || chords.is_empty() {
        return;
    }
    let pts: Vec<HalfPlanePoint> = chain.iter().map(|&i| mesh.nodes[i]).collect();
    let (c, d) = total_least_squares(&pts);
    let dist = |p: &HalfPlanePoint| (p.x - c.x) * d[1] - (p.y - c.y) * d[0];
    let rms = (pts.iter().map(|p| dist(p).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    if rms > mesh.h && chain.len() >= 2 * min_nodes {
        let far = (0..pts.len()).max_by(|&a, &b| dist(&pts[a]).abs().total_cmp(&dist(&pts[b]).abs())).unwrap();
        let t = |p: &HalfPlanePoint| (p.x - c.x) * d[0] + (p.y - c.y) * d[1];
        let split = t(&pts[far]);
        let (lo, hi): (Vec<usize>, Vec<usize>) = chain.iter().partition(|&&i| t(&mesh.nodes[i]) < split);
        if !lo.is_empty() && !hi.is_empty() {
            fit_chain(mesh, domain, chords, &lo, min_nodes, out);
            fit_chain(mesh, domain, chords, &hi, min_nodes, out);
            return;
        }
    }
    let line_dist = |v: usize| {
        let p = domain.vertex_point(v);
        ((p.x - c.x) * d[1] - (p.y - c.y) * d[0]).abs()
    };
    let best = chords
        .iter()
        .min_by(|a, b| line_dist(a[0]).max(line_dist(a[1])).total_cmp(&line_dist(b[0]).max(line_dist(b[1]))))
        .copied()
        .unwrap();
    let (a, b) = (domain.vertex_point(best[0]), domain.vertex_point(best[1]));
    out.push(ChordFit {
        vertices: best,
        frontier_nodes: chain.len(),
        residual: rms,
        offset: pts.iter().map(|&p| point_segment_distance(p, a, b)).fold(0.0, f64::max),
        line_point: c,
        line_direction: d,
    });
}

fn total_least_squares(pts: &[HalfPlanePoint]) -> (HalfPlanePoint, [f64; 2]) {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.x - cx, p.y - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // principal axis of the 2x2 scatter matrix
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    (HalfPlanePoint::new(cx, cy), [theta.cos(), theta.sin()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tls_recovers_line() {
        let pts: Vec<_> = (0..10).map(|k| HalfPlanePoint::new(k as f64, 1.0 + 0.5 * k as f64)).collect();
        let (_, d) = total_least_squares(&pts);
        assert!((d[1] / d[0] - 0.5).abs() < 1e-12);
    }
}
