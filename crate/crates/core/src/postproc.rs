//! Error norms, single-valuedness diagnostics and convergence rates.
//!
//! The mesh-dependent energy norm is
//!
//! ```text
//! |v|_h^2 = |v|^2 + |div v|^2 + |curl v|^2
//!         + 1/2 sum_{interior e} gamma_e |[v]|_e^2 + sum_{boundary e} gamma_e |v x n|_e^2
//! ```
//!
//! with the tensor jump `[v] = v+ (x) n+ + v- (x) n-`, whose Frobenius
//! norm is `|v+ - v-|`.

use rayon::prelude::*;

use crate::exact::ManufacturedCase;
use crate::global::{Discretization, HybridSolution};
use crate::local::{ElementGeometry, RuleTable, CORNER_LEVELS};
use crate::polybasis::{edge_quadrature, tri_quadrature, tri_quadrature_corner_refined, EdgeBasis};
use crate::{cross, Error, Point, Result};

/// Quadrature degree for error integrals.
pub const ERROR_QUAD_DEGREE: usize = 20;

/// A vector field with known divergence and curl, compared against the
/// discrete solution.
pub trait ExactField: Sync {
    fn value(&self, x: Point) -> Point;
    fn div(&self, x: Point) -> f64;
    fn curl(&self, x: Point) -> f64;
}

impl ExactField for ManufacturedCase {
    fn value(&self, x: Point) -> Point {
        self.u(x)
    }

    fn div(&self, x: Point) -> f64 {
        self.div_u(x)
    }

    fn curl(&self, x: Point) -> f64 {
        self.curl_u(x)
    }
}

/// A constant vector field.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub Point);

impl ExactField for ConstantField {
    fn value(&self, _: Point) -> Point {
        self.0
    }

    fn div(&self, _: Point) -> f64 {
        0.0
    }

    fn curl(&self, _: Point) -> f64 {
        0.0
    }
}

/// Tensor jump `w+ (x) n+ + w- (x) n-`, row-major.
pub fn jump(wp: Point, np: Point, wm: Point, nm: Point) -> [[f64; 2]; 2] {
    [[wp[0] * np[0] + wm[0] * nm[0], wp[0] * np[1] + wm[0] * nm[1]], [
        wp[1] * np[0] + wm[1] * nm[0],
        wp[1] * np[1] + wm[1] * nm[1],
    ]]
}

pub fn frobenius(m: [[f64; 2]; 2]) -> f64 {
    (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]).sqrt()
}

/// Squared contributions of the energy norm of `u - u_h`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorReport {
    pub n: usize,
    pub k: usize,
    pub l2_sq: f64,
    pub div_sq: f64,
    pub curl_sq: f64,
    pub jump_sq: f64,
    pub boundary_sq: f64,
}

impl ErrorReport {
    pub fn energy_sq(&self) -> f64 {
        self.l2_sq + self.div_sq + self.curl_sq + self.jump_sq + self.boundary_sq
    }

    pub fn energy(&self) -> f64 {
        self.energy_sq().sqrt()
    }

    pub fn l2(&self) -> f64 {
        self.l2_sq.sqrt()
    }
}

/// The all-zero discrete solution; norms against it are norms of the
/// exact field.
pub fn zero_solution(disc: &Discretization) -> HybridSolution {
    let nv = disc.space.n_interior();
    let nq = disc.space.n_mult();
    let ne = disc.mesh.triangles.len();
    HybridSolution {
        k: disc.k,
        u: vec![nalgebra::DVector::zeros(nv); ne],
        p: vec![nalgebra::DVector::zeros(nq); ne],
        trace: vec![0.0; disc.dofs.slots.len()],
    }
}

/// Energy-norm breakdown of `exact - u_h`. Elements with a vertex on a
/// singular corner use a dyadically refined rule.
pub fn energy_error(disc: &Discretization, sol: &HybridSolution, exact: &dyn ExactField) -> ErrorReport {
    let mesh = &disc.mesh;
    let basis = disc.space.basis;
    let np = basis.len();
    let base = tri_quadrature(ERROR_QUAD_DEGREE);
    let corner: Vec<RuleTable> =
        (0..3).map(|c| RuleTable::new(basis, tri_quadrature_corner_refined(&base, c, CORNER_LEVELS))).collect();
    let plain = RuleTable::new(basis, base);

    let volume: Vec<[f64; 3]> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let geo = ElementGeometry::of(mesh, t);
            let table = match mesh.singular_corner_vertex(t) {
                Some(c) => &corner[c],
                None => &plain,
            };
            let u = &sol.u[t];
            let mut acc = [0.0; 3];
            for q in 0..table.rule.len() {
                let x = geo.to_physical(table.rule.points[q]);
                let w = table.rule.weights[q] * geo.det;
                let (v, dx, dy) = table.row(q);
                let mut uh = [0.0; 2];
                let mut grad = [[0.0; 2]; 2];
                for i in 0..np {
                    let g = geo.grad([dx[i], dy[i]]);
                    for c in 0..2 {
                        let coef = u[c * np + i];
                        uh[c] += coef * v[i];
                        grad[c][0] += coef * g[0];
                        grad[c][1] += coef * g[1];
                    }
                }
                let ue = exact.value(x);
                let e0 = ue[0] - uh[0];
                let e1 = ue[1] - uh[1];
                let ed = exact.div(x) - (grad[0][0] + grad[1][1]);
                let ec = exact.curl(x) - (grad[1][0] - grad[0][1]);
                acc[0] += w * (e0 * e0 + e1 * e1);
                acc[1] += w * ed * ed;
                acc[2] += w * ec * ec;
            }
            acc
        })
        .collect();

    let erule = edge_quadrature(ERROR_QUAD_DEGREE);
    let params: Vec<f64> = erule.points.iter().map(|p| p[0]).collect();
    let edge_terms: Vec<(f64, f64)> = (0..mesh.edges.len())
        .into_par_iter()
        .map(|ei| {
            let e = &mesh.edges[ei];
            let gamma = disc.penalty.gamma(ei);
            let mut acc = 0.0;
            for (qi, &s) in params.iter().enumerate() {
                let x = e.point_at(mesh, s);
                let w = erule.weights[qi] * e.length;
                if e.is_boundary() {
                    let t = e.triangles[0].unwrap();
                    let uh = eval_u(disc, sol, t, x);
                    let ue = exact.value(x);
                    let d = cross([ue[0] - uh[0], ue[1] - uh[1]], e.outward_normal());
                    acc += w * gamma * d * d;
                } else {
                    let (tp, tm, np_, nm) = mesh.edge_sides(ei).expect("interior edge");
                    let ue = exact.value(x);
                    let up = eval_u(disc, sol, tp, x);
                    let um = eval_u(disc, sol, tm, x);
                    let vp = [ue[0] - up[0], ue[1] - up[1]];
                    let vm = [ue[0] - um[0], ue[1] - um[1]];
                    let j = frobenius(jump(vp, np_, vm, nm));
                    acc += 0.5 * w * gamma * j * j;
                }
            }
            if e.is_boundary() {
                (0.0, acc)
            } else {
                (acc, 0.0)
            }
        })
        .collect();

    let mut report = ErrorReport { n: mesh.n, k: disc.k, ..Default::default() };
    for v in &volume {
        report.l2_sq += v[0];
        report.div_sq += v[1];
        report.curl_sq += v[2];
    }
    for (j, b) in &edge_terms {
        report.jump_sq += j;
        report.boundary_sq += b;
    }
    report
}

/// Broken L2 norm of `exact - u_h`.
pub fn l2_error(disc: &Discretization, sol: &HybridSolution, exact: &dyn ExactField) -> f64 {
    energy_error(disc, sol, exact).l2()
}

/// `u_h` on element `t` at a physical point.
pub fn eval_u(disc: &Discretization, sol: &HybridSolution, t: usize, x: Point) -> Point {
    let geo = ElementGeometry::of(&disc.mesh, t);
    let phi = disc.space.basis.eval(&[geo.to_reference(x)]);
    sol.u_value(t, &phi)
}

/// Largest pointwise violations of the single-valuedness identities
/// `{u_h} = û_h`, `{p_h} = 0` on interior edges and `u_h . n = û_h . n`,
/// `p_h . n = 0` on boundary edges, together with the field magnitude
/// used to make them relative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AvgDefects {
    pub avg_u: f64,
    pub avg_p: f64,
    pub normal_u: f64,
    pub normal_p: f64,
    /// Largest `|u_h|`, `|û_h|` or `|p_h|` seen at the sample points.
    pub scale: f64,
}

impl AvgDefects {
    pub fn max_defect(&self) -> f64 {
        self.avg_u.max(self.avg_p).max(self.normal_u).max(self.normal_p)
    }

    /// Largest defect divided by the field scale (0 for a zero field).
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_defect() / self.scale
        } else {
            self.max_defect()
        }
    }
}

pub fn avg_diagnostics(disc: &Discretization, sol: &HybridSolution) -> AvgDefects {
    let mesh = &disc.mesh;
    let k = disc.k;
    let space = &disc.space;
    let np = space.n_scalar;
    let rule = &space.edge_rule;
    let tr_basis = EdgeBasis::new(2 * k - 1);
    let mu_basis = EdgeBasis::new(k - 1);
    let mut psi = vec![0.0; 2 * k];
    let mut chi = vec![0.0; k];
    let mut out = AvgDefects::default();
    let side_value = |t: usize, ei: usize, qi: usize, chi: &[f64]| -> (Point, Point) {
        let tri = &mesh.triangles[t];
        let l = tri.edges.iter().position(|&e| e == ei).expect("edge of triangle");
        let o = if tri.edge_signs[l] > 0 { 0 } else { 1 };
        let phi = &space.edge_tabs[l][o][qi * np..(qi + 1) * np];
        (sol.u_value(t, phi), sol.multiplier_value(t, l, chi))
    };
    let norm = |v: Point| v[0].hypot(v[1]);
    for (ei, e) in mesh.edges.iter().enumerate() {
        for (qi, pt) in rule.points.iter().enumerate() {
            tr_basis.eval_into(pt[0], &mut psi);
            mu_basis.eval_into(pt[0], &mut chi);
            let uhat = sol.trace_value(mesh, ei, &psi);
            out.scale = out.scale.max(norm(uhat));
            if e.is_boundary() {
                let n = e.outward_normal();
                let (u, p) = side_value(e.triangles[0].unwrap(), ei, qi, &chi);
                out.scale = out.scale.max(norm(u)).max(norm(p));
                out.normal_u = out.normal_u.max(crate::dot([u[0] - uhat[0], u[1] - uhat[1]], n).abs());
                out.normal_p = out.normal_p.max(crate::dot(p, n).abs());
            } else {
                let (tp, tm, _, _) = mesh.edge_sides(ei).expect("interior edge");
                let (up, pp) = side_value(tp, ei, qi, &chi);
                let (um, pm) = side_value(tm, ei, qi, &chi);
                out.scale = out.scale.max(norm(up)).max(norm(um)).max(norm(pp)).max(norm(pm));
                let du = [0.5 * (up[0] + um[0]) - uhat[0], 0.5 * (up[1] + um[1]) - uhat[1]];
                out.avg_u = out.avg_u.max(norm(du));
                out.avg_p = out.avg_p.max(norm([0.5 * (pp[0] + pm[0]), 0.5 * (pp[1] + pm[1])]));
            }
        }
    }
    out
}

/// `log2(e_N / e_2N)` between consecutive rows; the first entry is
/// `None`. Rejects sequences where `N` does not double.
pub fn rate_table(ns: &[usize], errors: &[f64]) -> Result<Vec<Option<f64>>> {
    if ns.len() != errors.len() {
        return Err(Error::Config("N list and error list differ in length".into()));
    }
    if ns.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::NonDoubling(ns.to_vec()));
    }
    Ok((0..errors.len()).map(|i| (i > 0).then(|| (errors[i - 1] / errors[i]).log2())).collect())
}
