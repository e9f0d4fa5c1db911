//! Element matrices, local saddle-point solvers and condensed blocks.
//!
//! On a triangle `K` the interior field lives in `[P_{2k-1}(K)]^2`, the
//! multiplier in `[P_{k-1}(e)]^2` on each of the three edges, and the
//! trace in `[P_{2k-1}(e)]^2` on each edge. Local index layouts:
//!
//! - interior field: `c * n_scalar + i` (component `c`, scalar basis `i`)
//! - multiplier: `l * 2k + c * k + j` (local edge `l`, component `c`)
//! - trace: `l * 4k + c * 2k + j`, component `c` taken in the edge frame
//!   from [`trace_frame`]
//!
//! Curl conventions: `curl v = d1 v2 - d2 v1`, `v x n = v1 n2 - v2 n1`.

use nalgebra::{DMatrix, DVector};

use crate::mesh::Mesh;
use crate::penalty::PenaltyField;
use crate::polybasis::{edge_quadrature, tri_quadrature, tri_quadrature_corner_refined, EdgeBasis, QuadRule, TriBasis};
use crate::{Error, Point, ProblemData, Result};

/// Default number of dyadic refinement levels toward singular corners.
pub const CORNER_LEVELS: usize = 4;

const REF_VERTS: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Affine map from the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vertices: [Point; 3],
    jac: [[f64; 2]; 2],
    inv_t: [[f64; 2]; 2],
    /// Jacobian determinant, twice the area.
    pub det: f64,
}

impl ElementGeometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        Self { vertices, jac, inv_t, det }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        Self::new(mesh.triangle_points(t))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    pub fn to_physical(&self, r: Point) -> Point {
        let p0 = self.vertices[0];
        [
            p0[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            p0[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let d = crate::sub(x, self.vertices[0]);
        // J^{-1} = (J^{-T})^T
        [self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1], self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1]]
    }

    /// Physical gradient from a reference gradient.
    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1], self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1]]
    }
}

/// Basis tables at the points of a reference rule.
#[derive(Debug, Clone)]
pub struct RuleTable {
    pub rule: QuadRule,
    pub nb: usize,
    pub val: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl RuleTable {
    pub fn new(basis: TriBasis, rule: QuadRule) -> Self {
        let (val, dx, dy) = basis.tabulate(&rule.points);
        Self { nb: basis.len(), rule, val, dx, dy }
    }

    #[inline]
    pub fn row(&self, q: usize) -> (&[f64], &[f64], &[f64]) {
        let r = q * self.nb..(q + 1) * self.nb;
        (&self.val[r.clone()], &self.dx[r.clone()], &self.dy[r])
    }
}

/// The two frame vectors in which trace components are expressed:
/// Cartesian on interior edges, `(outward normal, tangent)` on boundary
/// edges so that the tangential component can be constrained directly.
pub fn trace_frame(mesh: &Mesh, edge: usize) -> [Point; 2] {
    let e = &mesh.edges[edge];
    if e.is_boundary() {
        [e.outward_normal(), e.tangent]
    } else {
        [[1.0, 0.0], [0.0, 1.0]]
    }
}

/// Reference data shared by all elements for a given order `k`.
#[derive(Debug, Clone)]
pub struct LocalSpace {
    pub k: usize,
    pub basis: TriBasis,
    /// `dim P_{2k-1}`.
    pub n_scalar: usize,
    pub volume: RuleTable,
    /// Volume rules refined toward each local vertex.
    pub volume_corner: [RuleTable; 3],
    pub edge_rule: QuadRule,
    /// Trace basis (degree `2k-1`) at edge points, `points x 2k`.
    pub trace_tab: Vec<f64>,
    /// Multiplier basis (degree `k-1`) at edge points, `points x k`.
    pub mult_tab: Vec<f64>,
    /// Interior basis values at edge points for each local edge and
    /// orientation (`0`: canonical parameter runs from local vertex `l`).
    pub edge_tabs: [[Vec<f64>; 2]; 3],
}

impl LocalSpace {
    /// Uses an assembly rule of degree `quad_degree` (default `4k + 2`).
    pub fn new(k: usize, quad_degree: Option<usize>) -> Self {
        assert!(k >= 1);
        let deg = quad_degree.unwrap_or(4 * k + 2);
        let basis = TriBasis::new(2 * k - 1);
        let base = tri_quadrature(deg);
        let volume_corner = [0, 1, 2].map(|c| {
            RuleTable::new(basis, tri_quadrature_corner_refined(&base, c, CORNER_LEVELS))
        });
        let volume = RuleTable::new(basis, base);
        let edge_rule = edge_quadrature(deg);
        let params: Vec<f64> = edge_rule.points.iter().map(|p| p[0]).collect();
        let trace_tab = EdgeBasis::new(2 * k - 1).eval(&params);
        let mult_tab = EdgeBasis::new(k - 1).eval(&params);
        let edge_tabs = [0, 1, 2].map(|l| {
            [0, 1].map(|o| {
                let (a, b) = (REF_VERTS[l], REF_VERTS[(l + 1) % 3]);
                let (a, b) = if o == 0 { (a, b) } else { (b, a) };
                let pts: Vec<Point> =
                    params.iter().map(|&s| [(1.0 - s) * a[0] + s * b[0], (1.0 - s) * a[1] + s * b[1]]).collect();
                basis.eval(&pts)
            })
        });
        Self { k, basis, n_scalar: basis.len(), volume, volume_corner, edge_rule, trace_tab, mult_tab, edge_tabs }
    }

    pub fn n_interior(&self) -> usize {
        2 * self.n_scalar
    }

    pub fn n_mult(&self) -> usize {
        6 * self.k
    }

    pub fn n_trace(&self) -> usize {
        12 * self.k
    }

    /// Trace coefficients per edge.
    pub fn trace_per_edge(&self) -> usize {
        4 * self.k
    }

    fn orientation(mesh: &Mesh, t: usize, l: usize) -> usize {
        if mesh.triangles[t].edge_signs[l] > 0 {
            0
        } else {
            1
        }
    }
}

/// Element matrices of the local forms.
#[derive(Debug, Clone)]
pub struct LocalMatrices {
    /// `a_K`: div-div + curl-curl + alpha mass + boundary penalty.
    pub a: DMatrix<f64>,
    /// Penalty-free part of `a`.
    pub a_vol: DMatrix<f64>,
    /// `b_K(v, q) = <q, v>_dK`, rows are multipliers.
    pub b: DMatrix<f64>,
    /// `<gamma tau, v>_dK`, interior rows, trace columns.
    pub g: DMatrix<f64>,
    /// `<tau, q>_dK`, multiplier rows, trace columns.
    pub m: DMatrix<f64>,
    /// `<gamma tau, tau'>_dK`.
    pub t: DMatrix<f64>,
}

/// Builds the local matrices and the load vector `(f, v)_K` of triangle `t`.
pub fn assemble_local(
    space: &LocalSpace,
    mesh: &Mesh,
    t: usize,
    alpha: f64,
    penalty: &PenaltyField,
    data: &dyn ProblemData,
) -> (LocalMatrices, DVector<f64>) {
    let k = space.k;
    let np = space.n_scalar;
    let nv = space.n_interior();
    let nq = space.n_mult();
    let nt = space.n_trace();
    let geo = ElementGeometry::of(mesh, t);

    let mut a_vol = DMatrix::zeros(nv, nv);
    let mut gx = vec![0.0; np];
    let mut gy = vec![0.0; np];
    for q in 0..space.volume.rule.len() {
        let w = space.volume.rule.weights[q] * geo.det;
        let (v, dx, dy) = space.volume.row(q);
        for i in 0..np {
            let g = geo.grad([dx[i], dy[i]]);
            gx[i] = g[0];
            gy[i] = g[1];
        }
        for j in 0..np {
            for i in 0..np {
                let lap = w * (gx[i] * gx[j] + gy[i] * gy[j]);
                let mass = w * alpha * v[i] * v[j];
                let mix = w * (gx[i] * gy[j] - gy[i] * gx[j]);
                a_vol[(i, j)] += lap + mass;
                a_vol[(np + i, np + j)] += lap + mass;
                a_vol[(i, np + j)] += mix;
                a_vol[(np + i, j)] -= mix;
            }
        }
    }

    let mut a = a_vol.clone();
    let mut b = DMatrix::zeros(nq, nv);
    let mut g = DMatrix::zeros(nv, nt);
    let mut m = DMatrix::zeros(nq, nt);
    let mut tt = DMatrix::zeros(nt, nt);
    let tri = &mesh.triangles[t];
    let ns = space.edge_rule.len();
    let (nb_tr, nb_mu) = (2 * k, k);
    for l in 0..3 {
        let e = tri.edges[l];
        let len = mesh.edges[e].length;
        let gamma = penalty.gamma(e);
        let frame = trace_frame(mesh, e);
        let tab = &space.edge_tabs[l][LocalSpace::orientation(mesh, t, l)];
        for s in 0..ns {
            let w = space.edge_rule.weights[s] * len;
            let phi = &tab[s * np..(s + 1) * np];
            let tr = &space.trace_tab[s * nb_tr..(s + 1) * nb_tr];
            let mu = &space.mult_tab[s * nb_mu..(s + 1) * nb_mu];
            for j in 0..np {
                for i in 0..np {
                    let v = gamma * w * phi[i] * phi[j];
                    a[(i, j)] += v;
                    a[(np + i, np + j)] += v;
                }
            }
            for c in 0..2 {
                for jm in 0..k {
                    let row = l * 2 * k + c * k + jm;
                    for i in 0..np {
                        b[(row, c * np + i)] += w * mu[jm] * phi[i];
                    }
                }
            }
            for ct in 0..2 {
                let d = frame[ct];
                for jt in 0..nb_tr {
                    let col = l * 4 * k + ct * 2 * k + jt;
                    for c in 0..2 {
                        for i in 0..np {
                            g[(c * np + i, col)] += gamma * w * d[c] * phi[i] * tr[jt];
                        }
                        for jm in 0..k {
                            m[(l * 2 * k + c * k + jm, col)] += w * d[c] * mu[jm] * tr[jt];
                        }
                    }
                    for ct2 in 0..2 {
                        let dd = crate::dot(d, frame[ct2]);
                        for jt2 in 0..nb_tr {
                            tt[(l * 4 * k + ct2 * 2 * k + jt2, col)] += gamma * w * dd * tr[jt] * tr[jt2];
                        }
                    }
                }
            }
        }
    }

    let load = element_load(space, mesh, t, &geo, data);
    (LocalMatrices { a, a_vol, b, g, m, t: tt }, load)
}

/// `(f, v)_K` for every interior basis function, with corner-refined
/// quadrature on elements touching a singular corner.
fn element_load(
    space: &LocalSpace,
    mesh: &Mesh,
    t: usize,
    geo: &ElementGeometry,
    data: &dyn ProblemData,
) -> DVector<f64> {
    let np = space.n_scalar;
    let table = match mesh.singular_corner_vertex(t) {
        Some(c) => &space.volume_corner[c],
        None => &space.volume,
    };
    let mut load = DVector::zeros(2 * np);
    for q in 0..table.rule.len() {
        let x = geo.to_physical(table.rule.points[q]);
        let f = data.load(x);
        if f == [0.0, 0.0] {
            continue;
        }
        let w = table.rule.weights[q] * geo.det;
        let (v, _, _) = table.row(q);
        for i in 0..np {
            load[i] += w * f[0] * v[i];
            load[np + i] += w * f[1] * v[i];
        }
    }
    load
}

/// Solutions of the local problems for one element.
#[derive(Debug, Clone)]
pub struct LocalResponse {
    /// Columns: interior field `U tau` for each local trace function.
    pub u_map: DMatrix<f64>,
    /// Columns: multiplier `P tau` for each local trace function.
    pub p_map: DMatrix<f64>,
    /// `U f`.
    pub u_load: DVector<f64>,
    /// `P f`.
    pub p_load: DVector<f64>,
    /// Condensed block over the element's trace functions.
    pub condensed: DMatrix<f64>,
    /// `<P̂ f, tau>_dK`, which equals `(f, U tau)_K`.
    pub condensed_load: DVector<f64>,
}

/// Solves the local saddle systems
///
/// ```text
/// [ A  B^T ] [U  Uf]   [G  F]
/// [ B  0   ] [P  Pf] = [M  0]
/// ```
///
/// by dense LU with partial pivoting.
pub fn solve_local(element: usize, mats: &LocalMatrices, load: &DVector<f64>) -> Result<LocalResponse> {
    let nv = mats.a.nrows();
    let nq = mats.b.nrows();
    let nt = mats.g.ncols();
    let n = nv + nq;
    let mut kmat = DMatrix::zeros(n, n);
    kmat.view_mut((0, 0), (nv, nv)).copy_from(&mats.a);
    kmat.view_mut((nv, 0), (nq, nv)).copy_from(&mats.b);
    kmat.view_mut((0, nv), (nv, nq)).copy_from(&mats.b.transpose());
    let mut rhs = DMatrix::zeros(n, nt + 1);
    rhs.view_mut((0, 0), (nv, nt)).copy_from(&mats.g);
    rhs.view_mut((nv, 0), (nq, nt)).copy_from(&mats.m);
    rhs.view_mut((0, nt), (nv, 1)).copy_from(load);

    let lu = kmat.lu();
    let diag = lu.u().diagonal();
    let dmax = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dmin = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(dmin > 1e-13 * dmax) {
        return Err(Error::SingularLocal { element });
    }
    let sol = lu.solve(&rhs).ok_or(Error::SingularLocal { element })?;

    let u_map = sol.view((0, 0), (nv, nt)).into_owned();
    let p_map = sol.view((nv, 0), (nq, nt)).into_owned();
    let u_load = sol.view((0, nt), (nv, 1)).column(0).into_owned();
    let p_load = sol.view((nv, nt), (nq, 1)).column(0).into_owned();
    let (condensed, condensed_load) = condense_element(mats, &u_map, &u_load, &p_load);
    Ok(LocalResponse { u_map, p_map, u_load, p_load, condensed, condensed_load })
}

/// Condensed block from the symmetric expression
/// `(div-div + curl-curl + alpha mass)(U tau, U tau') + <gamma (U tau - tau), U tau' - tau'>_dK`,
/// which expands to `U^T A U - U^T G - G^T U + T`. The result is
/// symmetrized so it is symmetric bit for bit. The load is `<P̂ f, tau>`
/// with `P̂ f = P f + gamma U f`.
pub fn condense_element(
    mats: &LocalMatrices,
    u_map: &DMatrix<f64>,
    u_load: &DVector<f64>,
    p_load: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let ut_g = u_map.transpose() * &mats.g;
    let mut s = u_map.transpose() * (&mats.a * u_map) - &ut_g - ut_g.transpose() + &mats.t;
    let n = s.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let load = mats.m.transpose() * p_load + mats.g.transpose() * u_load;
    (s, load)
}

/// Condensed block from the defining expression `-<P̂ tau, tau'>_dK`,
/// i.e. `T - M^T P - G^T U` (rows are test functions).
pub fn condensed_unsymmetric(mats: &LocalMatrices, resp: &LocalResponse) -> DMatrix<f64> {
    &mats.t - mats.m.transpose() * &resp.p_map - mats.g.transpose() * &resp.u_map
}

/// Largest relative residual of the local equations over all trace
/// columns and the load column.
pub fn local_residual(mats: &LocalMatrices, load: &DVector<f64>, resp: &LocalResponse) -> f64 {
    let r1 = &mats.a * &resp.u_map + mats.b.transpose() * &resp.p_map - &mats.g;
    let r2 = &mats.b * &resp.u_map - &mats.m;
    let r3 = &mats.a * &resp.u_load + mats.b.transpose() * &resp.p_load - load;
    let r4 = &mats.b * &resp.u_load;
    let scale = mats.g.amax().max(mats.m.amax()).max(load.amax()).max(1e-300);
    [r1.amax(), r2.amax(), r3.amax(), r4.amax()].into_iter().fold(0.0, f64::max) / scale
}

/// Runs assembly, local solve and condensation for one element.
pub fn element_pipeline(
    space: &LocalSpace,
    mesh: &Mesh,
    t: usize,
    alpha: f64,
    penalty: &PenaltyField,
    data: &dyn ProblemData,
) -> Result<LocalResponse> {
    let (mats, load) = assemble_local(space, mesh, t, alpha, penalty, data);
    solve_local(t, &mats, &load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_square_mesh;
    use crate::ZeroData;

    struct ConstLoad(Point);
    impl ProblemData for ConstLoad {
        fn load(&self, _: Point) -> Point {
            self.0
        }
        fn tangential(&self, _: Point, _: Point) -> f64 {
            0.0
        }
    }

    fn setup(k: usize) -> (Mesh, PenaltyField, LocalSpace) {
        let mesh = make_square_mesh(2).unwrap();
        let pen = PenaltyField::new(&mesh);
        (mesh, pen, LocalSpace::new(k, None))
    }

    #[test]
    fn geometry_roundtrip() {
        let g = ElementGeometry::new([[0.1, 0.2], [0.9, 0.3], [0.4, 1.1]]);
        let x = g.to_physical([0.2, 0.3]);
        let r = g.to_reference(x);
        assert!((r[0] - 0.2).abs() < 1e-14 && (r[1] - 0.3).abs() < 1e-14);
        assert!((g.det - 2.0 * g.area()).abs() < 1e-15);
    }

    #[test]
    fn k1_matrix_shapes_and_definiteness() {
        let (mesh, pen, space) = setup(1);
        let (mats, load) = assemble_local(&space, &mesh, 0, 1.0, &pen, &ZeroData);
        assert_eq!(mats.a.shape(), (6, 6));
        assert_eq!(mats.b.shape(), (6, 6));
        assert!((&mats.a - mats.a.transpose()).amax() < 1e-14);
        assert!(mats.a.clone().cholesky().is_some());
        let sv = mats.b.clone().svd(false, false).singular_values;
        assert!(sv.min() > 1e-8 * sv.max());
        assert_eq!(load.amax(), 0.0);
    }

    #[test]
    fn higher_order_definiteness() {
        for k in 1..=3 {
            for alpha in [0.0, 1.0] {
                let (mesh, pen, space) = setup(k);
                for t in 0..mesh.triangles.len() {
                    let (mats, load) = assemble_local(&space, &mesh, t, alpha, &pen, &ZeroData);
                    assert!((&mats.a - mats.a.transpose()).amax() < 1e-13 * mats.a.amax());
                    assert!(mats.a.clone().cholesky().is_some(), "k={k} alpha={alpha}");
                    let sv = mats.b.clone().svd(false, false).singular_values;
                    assert_eq!(sv.len(), 6 * k);
                    assert!(sv.min() > 1e-10 * sv.max());
                    let resp = solve_local(t, &mats, &load).unwrap();
                    assert!(local_residual(&mats, &load, &resp) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn constant_trace_reproduced() {
        for k in 1..=3 {
            let alpha = 1.0;
            let c = [0.7, -1.3];
            let (mesh, pen, space) = setup(k);
            let t = 3;
            let (mats, load) =
                assemble_local(&space, &mesh, t, alpha, &pen, &ConstLoad([alpha * c[0], alpha * c[1]]));
            let resp = solve_local(t, &mats, &load).unwrap();
            // constant trace in each edge frame: only the j = 0 coefficient
            let mut tr = DVector::zeros(space.n_trace());
            for l in 0..3 {
                let frame = trace_frame(&mesh, mesh.triangles[t].edges[l]);
                for ct in 0..2 {
                    tr[l * 4 * k + ct * 2 * k] = crate::dot(c, frame[ct]);
                }
            }
            let u = &resp.u_map * &tr + &resp.u_load;
            let p = &resp.p_map * &tr + &resp.p_load;
            // the constant basis function is sqrt(2) on the reference triangle
            let np = space.n_scalar;
            for comp in 0..2 {
                assert!((u[comp * np] - c[comp] / 2f64.sqrt()).abs() < 1e-12);
                for i in 1..np {
                    assert!(u[comp * np + i].abs() < 1e-12);
                }
            }
            assert!(p.amax() < 1e-10);
        }
    }

    #[test]
    fn zero_data_zero_response() {
        let (mesh, pen, space) = setup(2);
        let resp = element_pipeline(&space, &mesh, 1, 1.0, &pen, &ZeroData).unwrap();
        assert_eq!(resp.u_load.amax(), 0.0);
        assert_eq!(resp.p_load.amax(), 0.0);
        assert_eq!(resp.condensed_load.amax(), 0.0);
    }

    #[test]
    fn condensed_forms_agree() {
        for k in 1..=3 {
            for alpha in [0.0, 1.0] {
                let (mesh, pen, space) = setup(k);
                for t in 0..mesh.triangles.len() {
                    let (mats, load) = assemble_local(&space, &mesh, t, alpha, &pen, &ConstLoad([1.0, 2.0]));
                    let resp = solve_local(t, &mats, &load).unwrap();
                    let s = &resp.condensed;
                    let scale = s.amax();
                    assert_eq!((s - s.transpose()).amax(), 0.0);
                    let u = condensed_unsymmetric(&mats, &resp);
                    assert!((s - &u).amax() < 1e-10 * scale, "k={k} diff={}", (s - &u).amax() / scale);
                    let via_u = resp.u_map.transpose() * &load;
                    assert!((&resp.condensed_load - via_u).amax() < 1e-10 * load.amax());
                    let eig = s.clone().symmetric_eigenvalues();
                    assert!(eig.min() > -1e-12 * scale);
                }
            }
        }
    }
}
