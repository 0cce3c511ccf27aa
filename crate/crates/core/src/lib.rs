//! Minimal Killing graphs in Sol₃ over domains of the hyperbolic half-plane.
//!
//! The crate covers four layers:
//! - [`geometry`]: metric primitives of H² and Sol₃;
//! - [`domain`] and [`conditions`]: Scherk domains, inscribed polygons and the
//!   Jenkins-Serrin solvability check;
//! - [`mesh`], [`solver`] and [`capped`]: a P1 Galerkin solver for the minimal
//!   surface equation ∂ᵢ(y²∂ᵢu/W) = 0 and capped schedules for infinite data;
//! - [`flux`]: the flux functional and its diagnostics.

pub mod capped;
pub mod conditions;
pub mod domain;
pub mod flux;
pub mod geometry;
mod linalg;
pub mod mesh;
pub mod solver;

use std::path::PathBuf;

pub use capped::{capped_sequence, divergence_set, CappedSequence, DivergenceReport, NodeClass};
pub use conditions::{check_conditions, Case, Uniqueness, Verdict};
pub use domain::{
    enumerate_inscribed_polygons, parse_domain, polygon_stats, validate, ArcKind, BoundaryArc,
    Diagnostic, InscribedPolygon, ScherkDomain,
};
pub use flux::{flux, flux_report, FluxReport, Side};
pub use geometry::{monotonicity_terms, HalfPlanePoint, Polyline, SolVector};
pub use mesh::{triangulate, Mesh, NodeTag};
pub use solver::{compare, residual, solve_dirichlet, DirichletData, Solution, SolverConfig};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("ideal point on metric curve")]
    IdealPointOnMetricCurve,
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("vertex {0} is not an interior vertex")]
    NotInteriorVertex(usize),
    #[error("negative height {0}")]
    NegativeHeight(f64),
    #[error("finite-difference step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid domain: {}", format_diagnostics(.0))]
    InvalidDomain(Vec<Diagnostic>),
    #[error("enumeration guard exceeded: {0} vertices (limit 16)")]
    EnumerationGuard(usize),
    #[error("polygon {0:?} is not inscribed in the domain")]
    NotInscribed(Vec<usize>),
    #[error("mesh generation failed: {0}")]
    Mesh(String),
    #[error("invalid boundary data: {0}")]
    Data(String),
    #[error("no convergence after {iterations} iterations (last update {update_norm:e})")]
    NoConvergence {
        iterations: usize,
        update_norm: f64,
        last: Box<Solution>,
    },
    #[error("singular linear system")]
    SingularSystem,
    #[error("point ({0}, {1}) lies outside the mesh")]
    OutsideMesh(f64, f64),
    #[error("solutions live on different meshes")]
    MeshMismatch,
    #[error("solve failed at cap index {index} (cap {cap}): {source}")]
    CapFailed {
        index: usize,
        cap: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.message.as_str()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
