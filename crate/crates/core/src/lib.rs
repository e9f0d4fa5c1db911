//! Nonconforming primal hybrid finite elements for the two-dimensional
//! vector Laplacian
//!
//! ```text
//! -grad div u + curl curl u + alpha u = f   in Omega
//!                               u x n = g   on dOmega
//!                               div u = 0   on dOmega
//! ```
//!
//! The discrete problem couples three fields: a broken vector field
//! `u_h` of degree `2k-1` per triangle, edge multipliers `p_h` of degree
//! `k-1` on each element boundary, and a single-valued trace `û_h` of
//! degree `2k-1` on the mesh skeleton. Consistency comes from an
//! HDG-style penalty whose weight is reduced near reentrant corners.
//! The element unknowns are eliminated locally (static condensation),
//! leaving a symmetric positive-definite system in the trace only.
//!
//! The natural boundary condition `div u = 0` is never imposed
//! explicitly; it is enforced weakly by the trace equation, which forces
//! the normal part of the numerical flux to vanish on boundary edges.
//!
//! Module map:
//!
//! - [`mesh`]: uniform triangulations of the square and the L-shape with
//!   edge topology and corner metadata
//! - [`polybasis`]: orthonormal bases and quadrature rules
//! - [`penalty`]: corner-weighted penalty parameter per edge
//! - [`bsm`]: the enriched nonconforming element and its projection,
//!   used only as a verification oracle
//! - [`local`]: element matrices, local solvers, condensed blocks
//! - [`global`]: trace numbering, condensed assembly, solvers, recovery,
//!   and a monolithic three-field reference solver
//! - [`exact`]: manufactured solutions
//! - [`postproc`]: error norms, single-valuedness diagnostics, rates
//! - [`driver`]: experiment configuration, convergence tables, property
//!   suites

pub mod bsm;
pub mod driver;
pub mod exact;
pub mod global;
pub mod local;
pub mod mesh;
pub mod penalty;
pub mod poly;
pub mod polybasis;
pub mod postproc;
pub mod sparse;

mod error;

pub use error::{Error, Result};

/// Data of a boundary value problem: the load `f` and the tangential
/// boundary trace `g = u x n`.
pub trait ProblemData: Sync {
    fn load(&self, x: Point) -> Point;
    /// `g(x)` for a boundary point with outward unit normal `n`.
    fn tangential(&self, x: Point, n: Point) -> f64;
}

/// Homogeneous data `f = 0`, `g = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroData;

impl ProblemData for ZeroData {
    fn load(&self, _: Point) -> Point {
        [0.0, 0.0]
    }

    fn tangential(&self, _: Point, _: Point) -> f64 {
        0.0
    }
}

/// A point or vector in the plane.
pub type Point = [f64; 2];

/// Planar cross product `a x b = a1 b2 - a2 b1`. With `b` a unit
/// normal this is the tangential trace `v x n`.
#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}
