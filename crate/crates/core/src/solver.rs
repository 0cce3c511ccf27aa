//! P1 Galerkin solver for the minimal surface equation
//! ∂ₓ(y²uₓ/W) + ∂_y(y²u_y/W) = 0, W = √(1 + y⁴|∇u|²), with Dirichlet data.
//!
//! The discrete problem is the minimisation of the convex area functional
//! Σ_T |T| W_T / y_T² over nodal values with the boundary values fixed.
//! Coefficients are evaluated at triangle centroids.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ArcData, ArcKind, ScherkDomain};
use crate::geometry::{dot, HalfPlanePoint};
use crate::linalg::{rcm_ordering, ProfileCholesky, SymMatrix};
use crate::mesh::{Mesh, NodeTag};
use crate::{Error, Result};

/// Picard updates below this switch on the Newton tail.
pub const NEWTON_SWITCH: f64 = 1e-4;
/// Picard iterations after which the Newton tail starts regardless.
const NEWTON_AFTER: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub h: f64,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub newton: bool,
    pub damping: f64,
    /// Truncation distance at ideal vertices; `None` means `h`.
    pub ideal_truncation: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 0.05,
            picard_tol: 1e-10,
            picard_max_iters: 500,
            newton: false,
            damping: 1.0,
            ideal_truncation: None,
        }
    }
}

impl SolverConfig {
    pub fn with_h(h: f64) -> Self {
        Self {
            h,
            ..Self::default()
        }
    }

    pub fn truncation(&self) -> f64 {
        self.ideal_truncation.unwrap_or(self.h)
    }

    pub fn check(&self) -> Result<()> {
        let positive = self.h > 0.0
            && self.picard_tol > 0.0
            && self.picard_max_iters > 0
            && self.truncation() > 0.0;
        if !positive {
            return Err(Error::Config("h, tolerance, iteration limit and truncation must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

type BoundaryFn = Arc<dyn Fn(HalfPlanePoint) -> f64 + Send + Sync>;

/// Finite boundary values on one arc.
#[derive(Clone)]
pub enum BoundaryValue {
    Constant(f64),
    Data { data: ArcData, fractions: Vec<f64> },
    Function(BoundaryFn),
    Clamped { inner: Box<BoundaryValue>, lo: f64, hi: f64 },
}

impl std::fmt::Debug for BoundaryValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryValue::Constant(c) => write!(f, "Constant({c})"),
            BoundaryValue::Data { data, .. } => write!(f, "Data({data:?})"),
            BoundaryValue::Function(_) => f.write_str("Function"),
            BoundaryValue::Clamped { inner, lo, hi } => write!(f, "Clamped({inner:?}, {lo}, {hi})"),
        }
    }
}

impl BoundaryValue {
    pub fn eval(&self, p: HalfPlanePoint, fraction: f64) -> f64 {
        match self {
            BoundaryValue::Constant(c) => *c,
            BoundaryValue::Data { data, fractions } => data.eval(fractions, fraction),
            BoundaryValue::Function(f) => f(p),
            BoundaryValue::Clamped { inner, lo, hi } => inner.eval(p, fraction).clamp(*lo, *hi),
        }
    }
}

/// Per-arc finite Dirichlet data for a domain.
#[derive(Clone, Debug)]
pub struct DirichletData {
    pub values: Vec<BoundaryValue>,
    ends: Vec<(usize, usize)>,
}

impl DirichletData {
    pub fn new(domain: &ScherkDomain, values: Vec<BoundaryValue>) -> Result<Self> {
        if values.len() != domain.arcs.len() {
            return Err(Error::Data(format!(
                "{} arc values for {} arcs",
                values.len(),
                domain.arcs.len()
            )));
        }
        Ok(Self {
            values,
            ends: domain.arcs.iter().map(|a| (a.from, a.to)).collect(),
        })
    }

    /// The domain's own data; fails if any arc carries infinite data.
    pub fn from_domain(domain: &ScherkDomain) -> Result<Self> {
        let values = (0..domain.arcs.len())
            .map(|k| c_value(domain, k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, values)
    }

    /// Data sampled from a function of position on every arc.
    pub fn from_fn(domain: &ScherkDomain, f: impl Fn(HalfPlanePoint) -> f64 + Send + Sync + 'static) -> Self {
        let f: BoundaryFn = Arc::new(f);
        Self {
            values: vec![BoundaryValue::Function(f); domain.arcs.len()],
            ends: domain.arcs.iter().map(|a| (a.from, a.to)).collect(),
        }
    }

    /// Capped data: `a` on A arcs, `b` on B arcs and the C data clamped to
    /// `clamp` when given.
    pub fn capped(domain: &ScherkDomain, a: f64, b: f64, clamp: Option<(f64, f64)>) -> Result<Self> {
        let values = domain
            .arcs
            .iter()
            .enumerate()
            .map(|(k, arc)| match arc.kind {
                ArcKind::A => Ok(BoundaryValue::Constant(a)),
                ArcKind::B => Ok(BoundaryValue::Constant(b)),
                ArcKind::C => {
                    let v = c_value(domain, k)?;
                    Ok(match clamp {
                        Some((lo, hi)) => BoundaryValue::Clamped {
                            inner: Box::new(v),
                            lo,
                            hi,
                        },
                        None => v,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, values)
    }

    /// Value at a boundary node.
    pub fn node_value(&self, mesh: &Mesh, i: usize) -> Result<f64> {
        let p = mesh.nodes[i];
        match mesh.tags[i] {
            NodeTag::Interior => Err(Error::Data(format!("node {i} is interior"))),
            NodeTag::Arc(k) => self.arc_value(k, p, mesh.params[i]),
            NodeTag::Vertex(v) => {
                let k_in = self.ends.iter().position(|&(_, to)| to == v);
                let k_out = self.ends.iter().position(|&(from, _)| from == v);
                match (k_in, k_out) {
                    (Some(a), Some(b)) => Ok(0.5 * (self.arc_value(a, p, 1.0)? + self.arc_value(b, p, 0.0)?)),
                    _ => Err(Error::Data(format!("vertex {v} has no incident arcs"))),
                }
            }
            NodeTag::Cut(v) => {
                let cut = mesh
                    .cuts
                    .iter()
                    .find(|c| c.vertex == v)
                    .ok_or_else(|| Error::Data(format!("no cut at vertex {v}")))?;
                let s = mesh.params[i];
                let a = self.arc_value(cut.start.arc, cut.start.point, cut.start.fraction)?;
                let b = self.arc_value(cut.end.arc, cut.end.point, cut.end.fraction)?;
                Ok((1.0 - s) * a + s * b)
            }
        }
    }

    fn arc_value(&self, k: usize, p: HalfPlanePoint, fraction: f64) -> Result<f64> {
        let v = self
            .values
            .get(k)
            .ok_or_else(|| Error::Data(format!("no data for arc {k}")))?
            .eval(p, fraction);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Data(format!("non-finite value on arc {k}")))
        }
    }
}

fn c_value(domain: &ScherkDomain, k: usize) -> Result<BoundaryValue> {
    let arc = &domain.arcs[k];
    match (&arc.kind, &arc.data) {
        (ArcKind::C, Some(ArcData::Constant { value })) => Ok(BoundaryValue::Constant(*value)),
        (ArcKind::C, Some(data)) => Ok(BoundaryValue::Data {
            data: data.clone(),
            fractions: domain.arc_fractions(k),
        }),
        _ => Err(Error::Data(format!("arc {k} carries infinite data ({})", arc.kind))),
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub mesh: Arc<Mesh>,
    pub u: Vec<f64>,
    /// Nonlinear iterations after the initial linear solve.
    pub iterations: usize,
    pub update_norm: f64,
    /// Max nodal update of every iteration.
    pub history: Vec<f64>,
    pub config: SolverConfig,
}

/// Geometry of one triangle needed by assembly.
#[derive(Clone, Copy)]
struct Element {
    nodes: [usize; 3],
    area: f64,
    grads: [[f64; 2]; 3],
    /// centroid height
    y: f64,
}

fn elements(mesh: &Mesh) -> Vec<Element> {
    (0..mesh.triangles.len())
        .map(|t| Element {
            nodes: mesh.triangles[t],
            area: 0.5 * mesh.area2(t),
            grads: mesh.hat_gradients(t),
            y: mesh.centroid(t).y,
        })
        .collect()
}

impl Element {
    fn gradient(&self, u: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for a in 0..3 {
            let v = u[self.nodes[a]];
            g[0] += v * self.grads[a][0];
            g[1] += v * self.grads[a][1];
        }
        g
    }

    fn w(&self, g: [f64; 2]) -> f64 {
        let y2 = self.y * self.y;
        (1.0 + y2 * y2 * dot(g, g)).sqrt()
    }

    /// κ = y²/W at the centroid.
    fn kappa(&self, u: &[f64]) -> f64 {
        self.y * self.y / self.w(self.gradient(u))
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.area * self.w(self.gradient(u)) / (self.y * self.y)
    }

    /// Frozen-coefficient stiffness κ|T| ∇φ_a·∇φ_b.
    fn picard_matrix(&self, kappa: f64) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = kappa * self.area * dot(self.grads[a], self.grads[b]);
            }
        }
        m
    }

    /// Hessian of the element energy: |T| κ ∇φ_a·(I − y⁴ g gᵀ/W²) ∇φ_b.
    fn newton_matrix(&self, u: &[f64]) -> [[f64; 3]; 3] {
        let g = self.gradient(u);
        let w = self.w(g);
        let y2 = self.y * self.y;
        let kappa = y2 / w;
        let c = y2 * y2 / (w * w);
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let ga = self.grads[a];
                let gb = self.grads[b];
                m[a][b] = self.area * kappa * (dot(ga, gb) - c * dot(ga, g) * dot(gb, g));
            }
        }
        m
    }
}

struct System {
    free: Vec<usize>,
    index: Vec<Option<usize>>,
    matrix: SymMatrix,
    perm: Vec<usize>,
}

impl System {
    fn new(mesh: &Mesh) -> Self {
        let free: Vec<usize> = mesh.interior_nodes().collect();
        let mut index = vec![None; mesh.node_count()];
        for (k, &i) in free.iter().enumerate() {
            index[i] = Some(k);
        }
        let pattern: Vec<Vec<usize>> = free
            .iter()
            .map(|&i| {
                let mut row: Vec<usize> = mesh.neighbors(i).iter().filter_map(|&j| index[j]).collect();
                row.sort_unstable();
                row
            })
            .collect();
        let perm = rcm_ordering(&pattern);
        Self {
            free,
            index,
            matrix: SymMatrix::with_pattern(pattern),
            perm,
        }
    }

    /// Assembles Σ_T local matrices in triangle order and solves
    /// A x = rhs − A_fb u_b for the free values.
    fn assemble(&mut self, elements: &[Element], locals: &[[[f64; 3]; 3]], u: &[f64], load: Option<&[f64]>) -> Vec<f64> {
        self.matrix.clear();
        let mut rhs = match load {
            Some(l) => l.to_vec(),
            None => vec![0.0; self.free.len()],
        };
        for (e, m) in elements.iter().zip(locals) {
            for a in 0..3 {
                let Some(ia) = self.index[e.nodes[a]] else { continue };
                for b in 0..3 {
                    match self.index[e.nodes[b]] {
                        Some(ib) if ib >= ia => self.matrix.add(ia, ib, m[a][b]),
                        Some(_) => {}
                        None if load.is_none() => rhs[ia] -= m[a][b] * u[e.nodes[b]],
                        None => {}
                    }
                }
            }
        }
        rhs
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let chol = ProfileCholesky::factor(&self.matrix, &self.perm)?;
        let x = chol.solve(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        Ok(x)
    }
}

fn picard_locals(elements: &[Element], u: &[f64], linear: bool) -> Vec<[[f64; 3]; 3]> {
    elements
        .par_iter()
        .map(|e| {
            let kappa = if linear { e.y * e.y } else { e.kappa(u) };
            e.picard_matrix(kappa)
        })
        .collect()
}

fn total_energy(elements: &[Element], u: &[f64]) -> f64 {
    let parts: Vec<f64> = elements.par_iter().map(|e| e.energy(u)).collect();
    parts.iter().sum()
}

/// Energy gradient restricted to free nodes: Σ_T κ|T| g·∇φ_i.
fn energy_gradient(elements: &[Element], index: &[Option<usize>], n_free: usize, u: &[f64]) -> Vec<f64> {
    let locals: Vec<[f64; 3]> = elements
        .par_iter()
        .map(|e| {
            let g = e.gradient(u);
            let k = e.y * e.y / e.w(g) * e.area;
            [0, 1, 2].map(|a| k * dot(g, e.grads[a]))
        })
        .collect();
    let mut out = vec![0.0; n_free];
    for (e, r) in elements.iter().zip(&locals) {
        for a in 0..3 {
            if let Some(i) = index[e.nodes[a]] {
                out[i] += r[a];
            }
        }
    }
    out
}

fn boundary_values(mesh: &Mesh, data: &DirichletData) -> Result<Vec<f64>> {
    let mut u = vec![0.0; mesh.node_count()];
    for i in 0..mesh.node_count() {
        if mesh.is_boundary(i) {
            u[i] = data.node_value(mesh, i)?;
        }
    }
    Ok(u)
}

/// Solves the Dirichlet problem from the frozen-coefficient initial guess.
pub fn solve_dirichlet(mesh: &Arc<Mesh>, data: &DirichletData, cfg: &SolverConfig) -> Result<Solution> {
    solve_from(mesh, data, cfg, None)
}

/// Solves the Dirichlet problem starting from `guess` at the interior nodes
/// (the linear initial solve is used when `guess` is `None`).
pub fn solve_from(mesh: &Arc<Mesh>, data: &DirichletData, cfg: &SolverConfig, guess: Option<&[f64]>) -> Result<Solution> {
    cfg.check()?;
    let elements = elements(mesh);
    let mut system = System::new(mesh);
    let mut u = boundary_values(mesh, data)?;
    let nf = system.free.len();

    match guess {
        Some(g) if g.len() == u.len() => {
            for &i in &system.free {
                u[i] = g[i];
            }
        }
        Some(_) => return Err(Error::MeshMismatch),
        None => {
            let locals = picard_locals(&elements, &u, true);
            let rhs = system.assemble(&elements, &locals, &u, None);
            let x = system.solve(&rhs)?;
            for (k, &i) in system.free.iter().enumerate() {
                u[i] = x[k];
            }
        }
    }

    let mut history = Vec::new();
    let mut newton = false;
    let scale_u = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for it in 1..=cfg.picard_max_iters {
        if nf == 0 {
            history.push(0.0);
            break;
        }
        let update = if newton {
            newton_step(&elements, &mut system, &mut u, scale_u)?
        } else {
            let locals = picard_locals(&elements, &u, false);
            let rhs = system.assemble(&elements, &locals, &u, None);
            let x = system.solve(&rhs)?;
            let mut update = 0.0f64;
            for (k, &i) in system.free.iter().enumerate() {
                let new = cfg.damping * x[k] + (1.0 - cfg.damping) * u[i];
                update = update.max((new - u[i]).abs());
                u[i] = new;
            }
            update
        };
        history.push(update);
        if update <= cfg.picard_tol {
            break;
        }
        if cfg.newton && !newton && (update < NEWTON_SWITCH || it >= NEWTON_AFTER) {
            newton = true;
        }
    }
    let update_norm = history.last().copied().unwrap_or(0.0);
    let sol = Solution {
        mesh: Arc::clone(mesh),
        u,
        iterations: history.len(),
        update_norm,
        history,
        config: cfg.clone(),
    };
    if update_norm > cfg.picard_tol {
        return Err(Error::NoConvergence {
            iterations: sol.iterations,
            update_norm,
            last: Box::new(sol),
        });
    }
    Ok(sol)
}

/// One damped Newton step on the area energy; returns the max nodal update.
fn newton_step(elements: &[Element], system: &mut System, u: &mut [f64], scale_u: f64) -> Result<f64> {
    let grad = energy_gradient(elements, &system.index, system.free.len(), u);
    let locals: Vec<[[f64; 3]; 3]> = elements.par_iter().map(|e| e.newton_matrix(u)).collect();
    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
    system.assemble(elements, &locals, u, Some(&neg));
    let step = system.solve(&neg)?;
    let slope = dot_vec(&grad, &step);
    let e0 = total_energy(elements, u);
    let base: Vec<f64> = system.free.iter().map(|&i| u[i]).collect();
    let max_step = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut t = 1.0;
    // near the minimum the energy decrease is below rounding; take the full step
    if -slope > 1e-13 * e0.abs() && max_step > 1e-12 * scale_u {
        for _ in 0..40 {
            for (k, &i) in system.free.iter().enumerate() {
                u[i] = base[k] + t * step[k];
            }
            if total_energy(elements, u) <= e0 + 1e-4 * t * slope {
                break;
            }
            t *= 0.5;
        }
    }
    for (k, &i) in system.free.iter().enumerate() {
        u[i] = base[k] + t * step[k];
    }
    Ok(t * max_step)
}

fn dot_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Solution {
    /// Solution with prescribed nodal values (no solve).
    pub fn from_values(mesh: &Arc<Mesh>, u: Vec<f64>) -> Result<Self> {
        if u.len() != mesh.node_count() {
            return Err(Error::MeshMismatch);
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            u,
            iterations: 0,
            update_norm: 0.0,
            history: Vec::new(),
            config: SolverConfig::with_h(mesh.h),
        })
    }

    pub fn interpolate(mesh: &Arc<Mesh>, f: impl Fn(HalfPlanePoint) -> f64) -> Self {
        let u = mesh.nodes.iter().map(|&p| f(p)).collect();
        Self::from_values(mesh, u).expect("sizes match")
    }

    /// Euclidean gradient on triangle `t`.
    pub fn gradient(&self, t: usize) -> [f64; 2] {
        let grads = self.mesh.hat_gradients(t);
        let nodes = self.mesh.triangles[t];
        let mut g = [0.0; 2];
        for a in 0..3 {
            g[0] += self.u[nodes[a]] * grads[a][0];
            g[1] += self.u[nodes[a]] * grads[a][1];
        }
        g
    }

    /// Piecewise-linear value at `p`.
    pub fn value_at(&self, p: HalfPlanePoint) -> Result<f64> {
        let t = self.mesh.locate(p).ok_or(Error::OutsideMesh(p.x, p.y))?;
        let l = self.mesh.barycentric(t, p);
        let n = self.mesh.triangles[t];
        Ok(l[0] * self.u[n[0]] + l[1] * self.u[n[1]] + l[2] * self.u[n[2]])
    }

    pub fn shifted(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.u.iter_mut().for_each(|v| *v -= c);
        s
    }

    /// Discrete weak residual r_i = Σ_T κ_T |T| ∇u·∇φ_i at every interior
    /// node, with the magnitude scale used for sign tests.
    pub fn weak_residual(&self) -> (Vec<(usize, f64)>, f64) {
        let mesh = &self.mesh;
        let elements = elements(mesh);
        let mut r = vec![0.0; mesh.node_count()];
        let mut mag = vec![0.0; mesh.node_count()];
        for e in &elements {
            let g = e.gradient(&self.u);
            let k = e.y * e.y / e.w(g) * e.area;
            for a in 0..3 {
                let c = k * dot(g, e.grads[a]);
                r[e.nodes[a]] += c;
                mag[e.nodes[a]] += c.abs();
            }
        }
        let interior: Vec<usize> = mesh.interior_nodes().collect();
        let scale = interior.iter().map(|&i| mag[i]).fold(1.0f64, f64::max);
        (interior.into_iter().map(|i| (i, r[i])).collect(), scale)
    }

    /// M u ≥ 0 in the weak sense: every weak residual ≤ 1e−9·scale.
    pub fn is_discrete_subsolution(&self) -> bool {
        let (r, scale) = self.weak_residual();
        r.iter().all(|&(_, v)| v <= 1e-9 * scale)
    }

    /// M u ≤ 0 in the weak sense: every weak residual ≥ −1e−9·scale.
    pub fn is_discrete_supersolution(&self) -> bool {
        let (r, scale) = self.weak_residual();
        r.iter().all(|&(_, v)| v >= -1e-9 * scale)
    }

    /// Area energy Σ_T |T| W_T / y_T².
    pub fn energy(&self) -> f64 {
        total_energy(&elements(&self.mesh), &self.u)
    }
}

pub fn is_discrete_subsolution(sol: &Solution) -> bool {
    sol.is_discrete_subsolution()
}

pub fn is_discrete_supersolution(sol: &Solution) -> bool {
    sol.is_discrete_supersolution()
}

/// Expanded operator (1+y⁴u_y²)u_xx − 2y⁴uₓu_yu_xy + (1+y⁴uₓ²)u_yy + 2u_y/y
/// evaluated from a least-squares cubic fit on the two-ring around the
/// triangle containing `p`.
pub fn residual(sol: &Solution, p: HalfPlanePoint) -> Result<f64> {
    let mesh = &sol.mesh;
    let t = mesh.locate(p).ok_or(Error::OutsideMesh(p.x, p.y))?;
    let patch = mesh.patch(t, 2);
    let s = mesh.h;
    // normal equations of the fit in scaled local coordinates
    let mut ata = [[0.0; FIT]; FIT];
    let mut atb = [0.0; FIT];
    for &i in &patch {
        let q = mesh.nodes[i];
        let (dx, dy) = ((q.x - p.x) / s, (q.y - p.y) / s);
        let row = [
            1.0,
            dx,
            dy,
            dx * dx,
            dx * dy,
            dy * dy,
            dx * dx * dx,
            dx * dx * dy,
            dx * dy * dy,
            dy * dy * dy,
        ];
        for a in 0..FIT {
            for b in 0..FIT {
                ata[a][b] += row[a] * row[b];
            }
            atb[a] += row[a] * sol.u[i];
        }
    }
    let c = solve_dense(ata, atb).ok_or(Error::SingularSystem)?;
    let ux = c[1] / s;
    let uy = c[2] / s;
    let uxx = 2.0 * c[3] / (s * s);
    let uxy = c[4] / (s * s);
    let uyy = 2.0 * c[5] / (s * s);
    let y = p.y;
    let y4 = y.powi(4);
    Ok((1.0 + y4 * uy * uy) * uxx - 2.0 * y4 * ux * uy * uxy + (1.0 + y4 * ux * ux) * uyy + 2.0 * uy / y)
}

/// Number of cubic monomials in the derivative recovery.
const FIT: usize = 10;

fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    let norm = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 * norm {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..N {
            let f = a[r][col] / a[col][col];
            for k in col..N {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for r in (0..N).rev() {
        let mut s = b[r];
        for k in r + 1..N {
            s -= a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

/// Nodal ordering of two solutions on the same mesh.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    /// sol₁ ≤ sol₂ + 1e−10 at every node.
    pub ordered: bool,
    /// max(u₁ − u₂), positive when the order is violated somewhere.
    pub max_violation: f64,
    pub location: Option<(usize, HalfPlanePoint)>,
    /// min(u₂ − u₁).
    pub min_gap: f64,
}

pub const COMPARE_TOL: f64 = 1e-10;

pub fn compare(s1: &Solution, s2: &Solution) -> Result<CompareReport> {
    if !Arc::ptr_eq(&s1.mesh, &s2.mesh) && *s1.mesh != *s2.mesh {
        return Err(Error::MeshMismatch);
    }
    let mut worst = (f64::NEG_INFINITY, 0usize);
    for (i, (a, b)) in s1.u.iter().zip(&s2.u).enumerate() {
        let d = a - b;
        if d > worst.0 {
            worst = (d, i);
        }
    }
    let max_violation = worst.0;
    let ordered = max_violation <= COMPARE_TOL;
    Ok(CompareReport {
        ordered,
        max_violation,
        location: (!ordered).then(|| (worst.1, s1.mesh.nodes[worst.1])),
        min_gap: -max_violation,
    })
}

#[derive(Deserialize)]
struct SolutionFile {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    u: Vec<f64>,
    tags: Vec<NodeTag>,
}

/// 17 significant digits.
fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

impl Solution {
    /// Solution file: {"nodes","triangles","u","tags"}.
    pub fn to_json(&self) -> String {
        let m = &self.mesh;
        let mut s = String::with_capacity(64 * m.node_count());
        s.push_str("{\n\"nodes\":[");
        for (i, p) in m.nodes.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push('[');
            num(&mut s, p.x);
            s.push(',');
            num(&mut s, p.y);
            s.push(']');
        }
        s.push_str("],\n\"triangles\":[");
        for (i, t) in m.triangles.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "[{},{},{}]", t[0], t[1], t[2]).unwrap();
        }
        s.push_str("],\n\"u\":[");
        for (i, v) in self.u.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            num(&mut s, *v);
        }
        s.push_str("],\n\"tags\":[");
        for (i, t) in m.tags.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "\"{t}\"").unwrap();
        }
        s.push_str("]\n}\n");
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            message,
        };
        let f: SolutionFile = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        if f.u.len() != f.nodes.len() || f.tags.len() != f.nodes.len() {
            return Err(malformed("nodes, u and tags differ in length".into()));
        }
        if f.triangles.iter().flatten().any(|&i| i >= f.nodes.len()) {
            return Err(malformed("triangle references a missing node".into()));
        }
        let nodes: Vec<HalfPlanePoint> = f.nodes.iter().map(|&[x, y]| HalfPlanePoint::new(x, y)).collect();
        let ring = boundary_ring(&nodes, &f.triangles);
        let n = nodes.len();
        let mut mesh = Mesh::from_parts(nodes, f.triangles, f.tags, vec![0.0; n], 0.0, Vec::new(), ring)?;
        mesh.h = mesh.max_edge();
        let mesh = Mesh::from_parts(mesh.nodes, mesh.triangles, mesh.tags, mesh.params, mesh.h, Vec::new(), mesh.ring)?;
        Solution::from_values(&Arc::new(mesh), f.u)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path)
    }

    /// Wavefront OBJ of the graph embedded as (x, y, u).
    pub fn to_obj(&self) -> String {
        let m = &self.mesh;
        let mut s = String::new();
        s.push_str("# graph t = u(x, y) embedded in coordinates (x, y, u)\n");
        for (p, v) in m.nodes.iter().zip(&self.u) {
            writeln!(s, "v {:.7} {:.7} {:.7}", p.x, p.y, v).unwrap();
        }
        for t in &m.triangles {
            writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
        }
        s
    }
}

/// Boundary ring recovered from edges used by exactly one triangle.
fn boundary_ring(nodes: &[HalfPlanePoint], triangles: &[[usize; 3]]) -> Vec<HalfPlanePoint> {
    use std::collections::BTreeMap;
    let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for t in triangles {
        for a in 0..3 {
            let (i, j) = (t[a], t[(a + 1) % 3]);
            *count.entry((i.min(j), i.max(j))).or_default() += 1;
        }
    }
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for t in triangles {
        for a in 0..3 {
            let (i, j) = (t[a], t[(a + 1) % 3]);
            if count[&(i.min(j), i.max(j))] == 1 {
                next.insert(i, j);
            }
        }
    }
    let Some((&start, _)) = next.iter().next() else {
        return Vec::new();
    };
    let mut ring = vec![nodes[start]];
    let mut cur = next[&start];
    while cur != start && ring.len() <= next.len() {
        ring.push(nodes[cur]);
        match next.get(&cur) {
            Some(&n) => cur = n,
            None => break,
        }
    }
    ring
}
