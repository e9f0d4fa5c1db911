//! Trace numbering, condensed assembly and solve, field recovery, and a
//! monolithic three-field solver used as a reference.
//!
//! Trace slots are numbered `e * 4k + c * 2k + j` for edge `e`, frame
//! component `c` and edge basis function `j`. On boundary edges the
//! component `c = 1` is the tangential one; it is fixed by the boundary
//! data and eliminated from the system.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::local::{assemble_local, element_pipeline, trace_frame, LocalResponse, LocalSpace};
use crate::mesh::Mesh;
use crate::penalty::PenaltyField;
use crate::polybasis::{edge_quadrature, EdgeBasis};
use crate::sparse::{pcg, relative_residual, solve_lu, Cholesky, CsrMatrix};
use crate::{cross, Error, Point, ProblemData, Result};

/// Quadrature degree used to project boundary data.
pub const BOUNDARY_QUAD_DEGREE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dof {
    Free(usize),
    /// Index into the prescribed-value vector.
    Fixed(usize),
}

#[derive(Debug, Clone)]
pub struct TraceDofMap {
    /// Slots per edge, `4k`.
    pub per_edge: usize,
    pub slots: Vec<Dof>,
    pub n_free: usize,
    pub n_fixed: usize,
    /// First free index and free count of each edge.
    pub free_range: Vec<(usize, usize)>,
}

impl TraceDofMap {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let per_edge = 4 * k;
        let mut slots = Vec::with_capacity(mesh.edges.len() * per_edge);
        let mut free_range = Vec::with_capacity(mesh.edges.len());
        let (mut n_free, mut n_fixed) = (0, 0);
        for e in &mesh.edges {
            let start = n_free;
            for c in 0..2 {
                for _ in 0..2 * k {
                    if e.is_boundary() && c == 1 {
                        slots.push(Dof::Fixed(n_fixed));
                        n_fixed += 1;
                    } else {
                        slots.push(Dof::Free(n_free));
                        n_free += 1;
                    }
                }
            }
            free_range.push((start, n_free - start));
        }
        Self { per_edge, slots, n_free, n_fixed, free_range }
    }

    pub fn slot(&self, edge: usize, c: usize, j: usize) -> usize {
        edge * self.per_edge + c * self.per_edge / 2 + j
    }
}

/// Global condensed system over the free trace unknowns.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Prescribed tangential coefficients.
    pub fixed: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Cg,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub method: SolverKind,
    pub iterations: usize,
    pub relative_residual: f64,
    /// Set when CG failed and the direct solver took over.
    pub fell_back: bool,
}

/// The three discrete fields.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSolution {
    pub k: usize,
    /// Interior coefficients per element, layout `c * n_scalar + i`.
    pub u: Vec<DVector<f64>>,
    /// Multiplier coefficients per element, layout `l * 2k + c * k + j`.
    pub p: Vec<DVector<f64>>,
    /// Trace coefficients per slot, in the edge frame.
    pub trace: Vec<f64>,
}

impl HybridSolution {
    /// Largest relative coefficient difference in each field
    /// `(u, p, trace)`.
    pub fn relative_difference(&self, other: &Self) -> [f64; 3] {
        fn rel<'a>(a: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>) -> f64 {
            let (mut d, mut s) = (0.0f64, 0.0f64);
            for (x, y) in a.zip(b) {
                d = d.max((x - y).abs());
                s = s.max(x.abs()).max(y.abs());
            }
            if s > 0.0 {
                d / s
            } else {
                d
            }
        }
        [
            rel(self.u.iter().flat_map(|v| v.iter()), other.u.iter().flat_map(|v| v.iter())),
            rel(self.p.iter().flat_map(|v| v.iter()), other.p.iter().flat_map(|v| v.iter())),
            rel(self.trace.iter(), other.trace.iter()),
        ]
    }

    /// Trace value on `edge` given the edge basis values `psi` (`2k` of
    /// them) at one point.
    pub fn trace_value(&self, mesh: &Mesh, edge: usize, psi: &[f64]) -> Point {
        let frame = trace_frame(mesh, edge);
        let nb = 2 * self.k;
        let base = edge * 4 * self.k;
        let mut v = [0.0; 2];
        for (c, d) in frame.iter().enumerate() {
            let s: f64 = (0..nb).map(|j| self.trace[base + c * nb + j] * psi[j]).sum();
            v[0] += s * d[0];
            v[1] += s * d[1];
        }
        v
    }

    /// Multiplier value on local edge `l` of element `t` given the
    /// multiplier basis values `chi` (`k` of them).
    pub fn multiplier_value(&self, t: usize, l: usize, chi: &[f64]) -> Point {
        let k = self.k;
        let p = &self.p[t];
        [0, 1].map(|c| (0..k).map(|j| p[l * 2 * k + c * k + j] * chi[j]).sum())
    }

    /// Interior field of element `t` given scalar basis values `phi`.
    pub fn u_value(&self, t: usize, phi: &[f64]) -> Point {
        let np = phi.len();
        let u = &self.u[t];
        [0, 1].map(|c| (0..np).map(|i| u[c * np + i] * phi[i]).sum())
    }
}

/// Mesh, order and penalty bundled with reference data and numbering.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub k: usize,
    pub alpha: f64,
    pub penalty: PenaltyField,
    pub space: LocalSpace,
    pub dofs: TraceDofMap,
}

impl Discretization {
    pub fn new(mesh: Mesh, k: usize, alpha: f64, quad_degree: Option<usize>) -> Self {
        let penalty = PenaltyField::new(&mesh);
        let space = LocalSpace::new(k, quad_degree);
        let dofs = TraceDofMap::new(&mesh, k);
        Self { mesh, k, alpha, penalty, space, dofs }
    }

    /// Global slot of every local trace function of element `t`.
    pub fn local_slots(&self, t: usize) -> Vec<usize> {
        let tri = &self.mesh.triangles[t];
        let pe = self.dofs.per_edge;
        (0..3).flat_map(|l| (0..pe).map(move |a| tri.edges[l] * pe + a)).collect()
    }

    /// Prescribed tangential coefficients: per-edge L2 projection of
    /// `g = u x n` onto `P_{2k-1}(e)`.
    pub fn boundary_values(&self, data: &dyn ProblemData) -> Vec<f64> {
        let k = self.k;
        let rule = edge_quadrature(BOUNDARY_QUAD_DEGREE);
        let basis = EdgeBasis::new(2 * k - 1);
        let mut fixed = vec![0.0; self.dofs.n_fixed];
        for (ei, e) in self.mesh.edges.iter().enumerate() {
            if !e.is_boundary() {
                continue;
            }
            let n = e.outward_normal();
            // the tangential frame component b satisfies u x n = b (t x n)
            let sign = cross(e.tangent, n);
            let mut psi = vec![0.0; 2 * k];
            let mut coef = vec![0.0; 2 * k];
            for (pt, w) in rule.points.iter().zip(&rule.weights) {
                let g = data.tangential(e.point_at(&self.mesh, pt[0]), n);
                basis.eval_into(pt[0], &mut psi);
                for j in 0..2 * k {
                    coef[j] += w * g * psi[j];
                }
            }
            for j in 0..2 * k {
                if let Dof::Fixed(i) = self.dofs.slots[self.dofs.slot(ei, 1, j)] {
                    fixed[i] = sign * coef[j];
                }
            }
        }
        fixed
    }

    /// Local solves on every element, in parallel; results are in element
    /// order.
    pub fn local_responses(&self, data: &dyn ProblemData) -> Result<Vec<LocalResponse>> {
        (0..self.mesh.triangles.len())
            .into_par_iter()
            .map(|t| element_pipeline(&self.space, &self.mesh, t, self.alpha, &self.penalty, data))
            .collect()
    }

    fn condensed_pattern(&self) -> (Vec<usize>, Vec<usize>) {
        let mesh = &self.mesh;
        let n = self.dofs.n_free;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        for (ei, e) in mesh.edges.iter().enumerate() {
            let mut nbrs: Vec<usize> =
                e.triangles.iter().flatten().flat_map(|&t| mesh.triangles[t].edges).collect();
            nbrs.sort_unstable();
            nbrs.dedup();
            let (start, count) = self.dofs.free_range[ei];
            for r in start..start + count {
                for &f in &nbrs {
                    let (s, c) = self.dofs.free_range[f];
                    col_idx.extend(s..s + c);
                }
                row_ptr[r + 1] = col_idx.len();
            }
        }
        (row_ptr, col_idx)
    }

    /// Sums the element blocks over the free unknowns and moves the
    /// prescribed columns to the right-hand side.
    pub fn assemble_condensed(&self, responses: &[LocalResponse], fixed: &[f64]) -> CondensedSystem {
        let (row_ptr, col_idx) = self.condensed_pattern();
        let n = self.dofs.n_free;
        let mut values = vec![0.0; col_idx.len()];
        let mut rhs = vec![0.0; n];
        for (t, resp) in responses.iter().enumerate() {
            let dofs: Vec<Dof> = self.local_slots(t).iter().map(|&s| self.dofs.slots[s]).collect();
            for (a, da) in dofs.iter().enumerate() {
                let Dof::Free(r) = *da else { continue };
                rhs[r] += resp.condensed_load[a];
                let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
                for (b, db) in dofs.iter().enumerate() {
                    let v = resp.condensed[(a, b)];
                    match *db {
                        Dof::Free(c) => {
                            let pos = cols.binary_search(&c).expect("column in pattern");
                            values[row_ptr[r] + pos] += v;
                        }
                        Dof::Fixed(i) => rhs[r] -= v * fixed[i],
                    }
                }
            }
        }
        let matrix = CsrMatrix { nrows: n, ncols: n, row_ptr, col_idx, values };
        CondensedSystem { matrix, rhs, fixed: fixed.to_vec() }
    }

    /// Rebuilds all three fields from the free trace unknowns.
    pub fn recover_fields(&self, responses: &[LocalResponse], free: &[f64], fixed: &[f64]) -> HybridSolution {
        let trace: Vec<f64> = self
            .dofs
            .slots
            .iter()
            .map(|d| match *d {
                Dof::Free(i) => free[i],
                Dof::Fixed(i) => fixed[i],
            })
            .collect();
        let (u, p) = responses
            .par_iter()
            .enumerate()
            .map(|(t, resp)| {
                let x = DVector::from_iterator(
                    resp.u_map.ncols(),
                    self.local_slots(t).iter().map(|&s| trace[s]),
                );
                (&resp.u_map * &x + &resp.u_load, &resp.p_map * &x + &resp.p_load)
            })
            .unzip();
        HybridSolution { k: self.k, u, p, trace }
    }

    /// Condensed pipeline: local solves, assembly, global solve, recovery.
    pub fn solve(&self, data: &dyn ProblemData, method: SolverKind, tol: f64) -> Result<(HybridSolution, SolveReport)> {
        let responses = self.local_responses(data)?;
        let fixed = self.boundary_values(data);
        let system = self.assemble_condensed(&responses, &fixed);
        let (x, report) = solve_condensed(&system, method, tol)?;
        Ok((self.recover_fields(&responses, &x, &fixed), report))
    }

    /// Index of the first unknown of element `t` in the monolithic system.
    fn mono_offset(&self, t: usize) -> usize {
        t * (self.space.n_interior() + self.space.n_mult())
    }

    /// The uncondensed system in `(u_h, p_h, û_h)`, with the flux
    /// `p̂ = p + gamma (u - û)` expanded:
    ///
    /// ```text
    /// [  A    B^T  -G ] [u]   [F]
    /// [  B    0    -M ] [p] = [0]
    /// [ -G^T -M^T   T ] [û]   [0]
    /// ```
    ///
    /// Unknowns are ordered element by element, `u` then `p`, followed by
    /// the free traces.
    pub fn assemble_monolithic(&self, data: &dyn ProblemData) -> (CsrMatrix, Vec<f64>) {
        let nv = self.space.n_interior();
        let nq = self.space.n_mult();
        let n_el = self.mesh.triangles.len();
        let t0 = self.mono_offset(n_el);
        let n = t0 + self.dofs.n_free;
        let fixed = self.boundary_values(data);
        let locals: Vec<_> = (0..n_el)
            .into_par_iter()
            .map(|t| assemble_local(&self.space, &self.mesh, t, self.alpha, &self.penalty, data))
            .collect();
        let mut trip = Vec::new();
        let mut rhs = vec![0.0; n];
        for (t, (m, load)) in locals.iter().enumerate() {
            let o = self.mono_offset(t);
            let dofs: Vec<Dof> = self.local_slots(t).iter().map(|&s| self.dofs.slots[s]).collect();
            for i in 0..nv {
                rhs[o + i] += load[i];
                for j in 0..nv {
                    trip.push((o + i, o + j, m.a[(i, j)]));
                }
                for q in 0..nq {
                    trip.push((o + i, o + nv + q, m.b[(q, i)]));
                    trip.push((o + nv + q, o + i, m.b[(q, i)]));
                }
            }
            for (a, da) in dofs.iter().enumerate() {
                match *da {
                    Dof::Free(g) => {
                        let col = t0 + g;
                        for i in 0..nv {
                            trip.push((o + i, col, -m.g[(i, a)]));
                            trip.push((col, o + i, -m.g[(i, a)]));
                        }
                        for q in 0..nq {
                            trip.push((o + nv + q, col, -m.m[(q, a)]));
                            trip.push((col, o + nv + q, -m.m[(q, a)]));
                        }
                        for (b, db) in dofs.iter().enumerate() {
                            match *db {
                                Dof::Free(h) => trip.push((col, t0 + h, m.t[(a, b)])),
                                Dof::Fixed(i) => rhs[col] -= m.t[(a, b)] * fixed[i],
                            }
                        }
                    }
                    Dof::Fixed(i) => {
                        let v = fixed[i];
                        for r in 0..nv {
                            rhs[o + r] += m.g[(r, a)] * v;
                        }
                        for q in 0..nq {
                            rhs[o + nv + q] += m.m[(q, a)] * v;
                        }
                    }
                }
            }
        }
        (CsrMatrix::from_triplets(n, n, &trip), rhs)
    }

    /// Direct solve of the monolithic system.
    pub fn solve_monolithic(&self, data: &dyn ProblemData) -> Result<HybridSolution> {
        let (a, b) = self.assemble_monolithic(data);
        let x = solve_lu(&a, &b)?;
        let res = relative_residual(&a, &x, &b);
        if !(res < 1e-8) {
            return Err(Error::SingularGlobal(format!("monolithic residual {res:e}")));
        }
        let nv = self.space.n_interior();
        let nq = self.space.n_mult();
        let n_el = self.mesh.triangles.len();
        let t0 = self.mono_offset(n_el);
        let u = (0..n_el).map(|t| DVector::from_column_slice(&x[self.mono_offset(t)..][..nv])).collect();
        let p = (0..n_el).map(|t| DVector::from_column_slice(&x[self.mono_offset(t) + nv..][..nq])).collect();
        let fixed = self.boundary_values(data);
        let trace = self
            .dofs
            .slots
            .iter()
            .map(|d| match *d {
                Dof::Free(i) => x[t0 + i],
                Dof::Fixed(i) => fixed[i],
            })
            .collect();
        Ok(HybridSolution { k: self.k, u, p, trace })
    }
}

/// Solves the condensed system. CG uses Jacobi preconditioning and falls
/// back to sparse Cholesky if it stalls; the direct path is sparse
/// Cholesky and fails on a matrix that is not positive definite.
pub fn solve_condensed(system: &CondensedSystem, method: SolverKind, tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    let a = &system.matrix;
    let b = &system.rhs;
    if method == SolverKind::Cg {
        let max_iter = (10 * a.nrows).max(1000);
        let (x, stats) = pcg(a, b, tol, max_iter);
        if stats.converged {
            let report = SolveReport {
                method,
                iterations: stats.iterations,
                relative_residual: stats.relative_residual,
                fell_back: false,
            };
            return Ok((x, report));
        }
        log::warn!(
            "CG stopped after {} iterations at relative residual {:e}; switching to Cholesky",
            stats.iterations,
            stats.relative_residual
        );
    }
    let x = Cholesky::new(a)?.solve(b);
    let res = relative_residual(a, &x, b);
    let report =
        SolveReport { method: SolverKind::Direct, iterations: 0, relative_residual: res, fell_back: method == SolverKind::Cg };
    Ok((x, report))
}
