//! The Brenner-Sung-Mirebeau element
//!
//! ```text
//! BSM_k(K) = [P_k(K)]^2 + grad H_{k+2}(K) + ... + grad H_{2k}(K)
//! ```
//!
//! where `H_j` is spanned by the real and imaginary parts of
//! `((x - x0) + i (y - y0))^j`. Its degrees of freedom are the moments
//! against `[P_{k-1}(e)]^2` on each edge and against `[P_{k-2}(K)]^2` in
//! the interior. The solver never uses this space; it backs the test
//! suite through the commuting projection property
//! `div Pi v = P (div v)`, `curl Pi v = P (curl v)`.
//!
//! Polynomials are stored in the scaled coordinates
//! `xi = (x - x0) / h`, with `h` the element diameter.

use nalgebra::{DMatrix, DVector};

use crate::local::ElementGeometry;
use crate::poly::{complex_power, Poly};
use crate::polybasis::{edge_quadrature, tri_quadrature, EdgeBasis, QuadRule, TriBasis};
use crate::{Error, Point, Result};

/// Quadrature degree for moments; exact for all polynomial data used by
/// the oracle with `k <= 3`.
const MOMENT_DEGREE: usize = 20;

/// The two harmonic polynomials of degree `j` (in scaled coordinates).
#[derive(Debug, Clone)]
pub struct HarmonicPair {
    pub degree: usize,
    pub re: Poly,
    pub im: Poly,
}

impl HarmonicPair {
    pub fn new(degree: usize) -> Self {
        let (re, im) = complex_power(degree);
        Self { degree, re, im }
    }
}

/// A vector polynomial `(p1, p2)` in scaled coordinates.
#[derive(Debug, Clone)]
pub struct VecPoly(pub Poly, pub Poly);

#[derive(Debug, Clone)]
pub struct BsmSpace {
    pub k: usize,
    pub geo: ElementGeometry,
    pub center: Point,
    pub scale: f64,
    pub basis: Vec<VecPoly>,
    /// `dofs[(r, b)]`: moment `r` of basis function `b`.
    pub dofs: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

fn diameter(v: &[Point; 3]) -> f64 {
    (0..3).map(|i| crate::norm(crate::sub(v[i], v[(i + 1) % 3]))).fold(0.0, f64::max)
}

impl BsmSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn local(&self, x: Point) -> (f64, f64) {
        ((x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale)
    }

    /// Value, divergence and curl of `sum_b coefs[b] basis[b]` at `x`.
    pub fn eval(&self, coefs: &DVector<f64>, x: Point) -> (Point, f64, f64) {
        let (xi, eta) = self.local(x);
        let (mut v, mut div, mut curl) = ([0.0; 2], 0.0, 0.0);
        for (c, VecPoly(p, q)) in coefs.iter().zip(&self.basis) {
            v[0] += c * p.eval(xi, eta);
            v[1] += c * q.eval(xi, eta);
            div += c * (p.dx().eval(xi, eta) + q.dy().eval(xi, eta));
            curl += c * (q.dx().eval(xi, eta) - p.dy().eval(xi, eta));
        }
        (v, div / self.scale, curl / self.scale)
    }

    /// The `k(k+5)` moments of a vector field.
    pub fn moments(&self, v: &dyn Fn(Point) -> Point) -> DVector<f64> {
        moments(self.k, &self.geo, v)
    }
}

/// Edge moments against `[P_{k-1}(e)]^2` (local edge `l` from vertex `l`
/// to `l + 1`, component-major within each edge), then interior moments
/// against `[P_{k-2}(K)]^2`.
fn moments(k: usize, geo: &ElementGeometry, v: &dyn Fn(Point) -> Point) -> DVector<f64> {
    let erule = edge_quadrature(MOMENT_DEGREE);
    let ebasis = EdgeBasis::new(k - 1);
    let mut out = Vec::with_capacity(k * (k + 5));
    let mut chi = vec![0.0; k];
    for l in 0..3 {
        let (a, b) = (geo.vertices[l], geo.vertices[(l + 1) % 3]);
        let len = crate::norm(crate::sub(b, a));
        let mut acc = vec![0.0; 2 * k];
        for (p, w) in erule.points.iter().zip(&erule.weights) {
            let s = p[0];
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let val = v(x);
            ebasis.eval_into(s, &mut chi);
            for c in 0..2 {
                for j in 0..k {
                    acc[c * k + j] += w * len * val[c] * chi[j];
                }
            }
        }
        out.extend(acc);
    }
    if k >= 2 {
        let rule = tri_quadrature(MOMENT_DEGREE);
        let tb = TriBasis::new(k - 2);
        let phi = tb.eval(&rule.points);
        let n = tb.len();
        let mut acc = vec![0.0; 2 * n];
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let val = v(geo.to_physical(*p));
            for c in 0..2 {
                for i in 0..n {
                    acc[c * n + i] += w * geo.det * val[c] * phi[q * n + i];
                }
            }
        }
        out.extend(acc);
    }
    DVector::from_vec(out)
}

/// Builds the space on a triangle and factors its DOF matrix.
pub fn build_bsm(k: usize, vertices: [Point; 3]) -> Result<BsmSpace> {
    if !(1..=3).contains(&k) {
        return Err(Error::Config(format!("BSM order must be 1, 2 or 3, got {k}")));
    }
    let geo = ElementGeometry::new(vertices);
    let center = [
        (vertices[0][0] + vertices[1][0] + vertices[2][0]) / 3.0,
        (vertices[0][1] + vertices[1][1] + vertices[2][1]) / 3.0,
    ];
    let scale = diameter(&vertices);
    let mut basis = Vec::new();
    for c in 0..2 {
        for n in 0..=k {
            for b in 0..=n {
                let m = Poly::monomial(n - b, b, 1.0);
                let z = Poly::zero(0);
                basis.push(if c == 0 { VecPoly(m, z) } else { VecPoly(z, m) });
            }
        }
    }
    for j in k + 2..=2 * k {
        let h = HarmonicPair::new(j);
        basis.push(VecPoly(h.re.dx(), h.re.dy()));
        basis.push(VecPoly(h.im.dx(), h.im.dy()));
    }
    let dim = basis.len();
    let mut dofs = DMatrix::zeros(dim, dim);
    for (b, VecPoly(p, q)) in basis.iter().enumerate() {
        let f = |x: Point| {
            let (xi, eta) = ((x[0] - center[0]) / scale, (x[1] - center[1]) / scale);
            [p.eval(xi, eta), q.eval(xi, eta)]
        };
        dofs.set_column(b, &moments(k, &geo, &f));
    }
    let sigma_min = scaled_sigma_min(&dofs);
    if !(sigma_min > 1e-12) {
        return Err(Error::SingularBsm { k, sigma_min });
    }
    let lu = dofs.clone().lu();
    Ok(BsmSpace { k, geo, center, scale, basis, dofs, lu })
}

/// Smallest singular value after scaling every row and then every column
/// to unit Euclidean norm.
pub fn scaled_sigma_min(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    for mut r in s.row_iter_mut() {
        let n = r.norm();
        if n > 0.0 {
            r /= n;
        }
    }
    for mut c in s.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    s.svd(false, false).singular_values.min()
}

/// Coefficients of the projection `Pi v`, defined by matching all degrees
/// of freedom.
pub fn bsm_project(space: &BsmSpace, v: &dyn Fn(Point) -> Point) -> DVector<f64> {
    space.lu.solve(&space.moments(v)).expect("DOF matrix factored at construction")
}

/// Coefficients of the L2 projection of `eta` onto `P_m(K)` in the
/// orthonormal basis of degree `m`.
pub fn scalar_l2_project(geo: &ElementGeometry, eta: &dyn Fn(Point) -> f64, m: usize) -> DVector<f64> {
    let rule = tri_quadrature(MOMENT_DEGREE.max(2 * m));
    let tb = TriBasis::new(m);
    let phi = tb.eval(&rule.points);
    let n = tb.len();
    let mut c = DVector::zeros(n);
    for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let e = eta(geo.to_physical(*p));
        for i in 0..n {
            c[i] += w * e * phi[q * n + i];
        }
    }
    c
}

fn eval_scalar(coefs: &DVector<f64>, basis: &TriBasis, r: Point) -> f64 {
    basis.eval(&[r]).iter().zip(coefs.iter()).map(|(a, b)| a * b).sum()
}

/// `(|div Pi v - P div v|_K, |curl Pi v - P curl v|_K)` where `P` is the
/// L2 projection onto `P_{k-1}(K)`.
pub fn check_commuting(
    space: &BsmSpace,
    v: &dyn Fn(Point) -> Point,
    div_v: &dyn Fn(Point) -> f64,
    curl_v: &dyn Fn(Point) -> f64,
) -> (f64, f64) {
    let k = space.k;
    let pi = bsm_project(space, v);
    let pd = scalar_l2_project(&space.geo, div_v, k - 1);
    let pc = scalar_l2_project(&space.geo, curl_v, k - 1);
    let tb = TriBasis::new(k - 1);
    let rule: QuadRule = tri_quadrature(MOMENT_DEGREE);
    let (mut ed, mut ec) = (0.0, 0.0);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let x = space.geo.to_physical(*p);
        let (_, d, c) = space.eval(&pi, x);
        let dd = d - eval_scalar(&pd, &tb, *p);
        let dc = c - eval_scalar(&pc, &tb, *p);
        ed += w * space.geo.det * dd * dd;
        ec += w * space.geo.det * dc * dc;
    }
    (ed.sqrt(), ec.sqrt())
}

/// Random triangle with all angles above `min_angle` (radians), inside
/// the unit box.
pub fn random_triangle(rng: &mut impl rand::Rng, min_angle: f64) -> [Point; 3] {
    loop {
        let v: [Point; 3] = std::array::from_fn(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let ang = |a: Point, b: Point, c: Point| {
            let u = crate::sub(b, a);
            let w = crate::sub(c, a);
            crate::cross(u, w).abs().atan2(crate::dot(u, w))
        };
        let ok = ang(v[0], v[1], v[2]).min(ang(v[1], v[2], v[0])).min(ang(v[2], v[0], v[1])) > min_angle;
        if ok {
            // counterclockwise
            return if crate::cross(crate::sub(v[1], v[0]), crate::sub(v[2], v[0])) > 0.0 { v } else { [v[0], v[2], v[1]] };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const REF: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn dimensions() {
        for (k, d) in [(1, 6), (2, 14), (3, 24)] {
            let s = build_bsm(k, REF).unwrap();
            assert_eq!(s.dim(), d);
            assert_eq!(s.dofs.shape(), (d, d));
            assert!(s.dofs.clone().svd(false, false).singular_values.min() > 0.0);
        }
        assert!(build_bsm(4, REF).is_err());
    }

    #[test]
    fn harmonic_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for j in 2..=6 {
            let h = HarmonicPair::new(j);
            for p in [&h.re, &h.im] {
                let lap = p.laplacian();
                for _ in 0..20 {
                    let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    assert!(lap.eval(x, y).abs() < 1e-10 * p.max_abs_coef());
                }
            }
        }
    }

    #[test]
    fn unisolvent_on_random_triangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let tri = random_triangle(&mut rng, 0.2);
            for k in 1..=3 {
                let s = build_bsm(k, tri).unwrap();
                assert!(scaled_sigma_min(&s.dofs) > 1e-8);
            }
        }
    }

    #[test]
    fn projection_reproduces_members() {
        let tri = [[0.1, 0.2], [0.8, 0.35], [0.3, 0.9]];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 1..=3 {
            let s = build_bsm(k, tri).unwrap();
            let c = DVector::from_fn(s.dim(), |_, _| rng.random_range(-1.0..1.0));
            let f = |x: Point| s.eval(&c, x).0;
            let back = bsm_project(&s, &f);
            assert!((back - &c).amax() < 1e-10);
            let one = bsm_project(&s, &|_| [1.0, 0.0]);
            for p in [[0.3, 0.4], [0.5, 0.5]] {
                let v = s.eval(&one, p).0;
                assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_projection() {
        let geo = ElementGeometry::new([[0.1, 0.2], [0.8, 0.35], [0.3, 0.9]]);
        let tb = TriBasis::new(1);
        let c = scalar_l2_project(&geo, &|x| 2.0 * x[0] - x[1] + 0.5, 1);
        let r = geo.to_reference([0.4, 0.5]);
        assert!((eval_scalar(&c, &tb, r) - (0.8 - 0.5 + 0.5)).abs() < 1e-12);
        assert_eq!(scalar_l2_project(&geo, &|_| 0.0, 2).amax(), 0.0);
        // residual of x^3 orthogonal to P_2
        let k = 3;
        let c = scalar_l2_project(&geo, &|x| x[0].powi(k), k as usize - 1);
        let tb = TriBasis::new(k as usize - 1);
        let rule = tri_quadrature(12);
        for i in 0..tb.len() {
            let m: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| {
                    let x = geo.to_physical(*p);
                    w * (x[0].powi(k) - eval_scalar(&c, &tb, *p)) * tb.eval(&[*p])[i]
                })
                .sum();
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn commuting_for_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for k in 1..=3usize {
            for _ in 0..5 {
                let tri = random_triangle(&mut rng, 0.3);
                let s = build_bsm(k, tri).unwrap();
                let deg = 2 * k;
                let mk = |rng: &mut ChaCha8Rng| {
                    let mut p = Poly::zero(deg);
                    for a in 0..=deg {
                        for b in 0..=deg - a {
                            p.set(a, b, rng.random_range(-1.0..1.0));
                        }
                    }
                    p
                };
                let (p, q) = (mk(&mut rng), mk(&mut rng));
                let (px, py, qx, qy) = (p.dx(), p.dy(), q.dx(), q.dy());
                let (dv, cv) = check_commuting(
                    &s,
                    &|x| [p.eval(x[0], x[1]), q.eval(x[0], x[1])],
                    &|x| px.eval(x[0], x[1]) + qy.eval(x[0], x[1]),
                    &|x| qx.eval(x[0], x[1]) - py.eval(x[0], x[1]),
                );
                assert!(dv < 1e-10 && cv < 1e-10, "k={k}: {dv:e} {cv:e}");
            }
        }
    }

    #[test]
    fn commuting_for_smooth_field() {
        let s = build_bsm(3, [[0.0, 0.0], [0.25, 0.0], [0.25, 0.25]]).unwrap();
        let (dv, cv) = check_commuting(
            &s,
            &|x| [(3.0 * x[1]).sin() * x[0].exp(), (2.0 * x[0]).cos() * x[1]],
            &|x| (3.0 * x[1]).sin() * x[0].exp() + (2.0 * x[0]).cos(),
            &|x| -2.0 * (2.0 * x[0]).sin() * x[1] - 3.0 * (3.0 * x[1]).cos() * x[0].exp(),
        );
        assert!(dv < 1e-8 && cv < 1e-8, "{dv:e} {cv:e}");
    }
}
