//! Orthonormal polynomial bases on the reference triangle and interval,
//! and Gauss-type quadrature rules of declared exactness.
//!
//! The reference triangle has vertices `(0,0)`, `(1,0)`, `(0,1)`; the
//! reference interval is `[0, 1]`. Triangle basis functions are ordered
//! by total degree, so the first `dim P_m` functions of a degree-`n`
//! basis span `P_m` for every `m <= n`.

use crate::Point;

/// Number of bivariate polynomials of degree at most `m`.
pub fn tri_dim(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// Quadrature rule on a reference element.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Polynomials of total degree up to this are integrated exactly.
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Rule on `[0, 1]` exact for polynomials of degree `d`. The points are
/// stored in the first coordinate; the second is zero.
pub fn edge_quadrature(d: usize) -> QuadRule {
    let n = d / 2 + 1;
    let (x, w) = gauss_legendre(n);
    QuadRule {
        points: x.iter().map(|&t| [0.5 * (t + 1.0), 0.0]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        degree: 2 * n - 1,
    }
}

/// Collapsed (Duffy) tensor Gauss rule on the reference triangle, exact
/// for polynomials of degree `d`.
pub fn tri_quadrature(d: usize) -> QuadRule {
    // the collapse adds one degree in the second direction
    let n = (d + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (b, wb) in x.iter().zip(&w) {
        for (a, wa) in x.iter().zip(&w) {
            let y = 0.5 * (1.0 + b);
            let xx = 0.25 * (1.0 + a) * (1.0 - b);
            points.push([xx, y]);
            weights.push(wa * wb * (1.0 - b) / 8.0);
        }
    }
    QuadRule { points, weights, degree: (2 * n - 2).max(d) }
}

/// Reference-triangle rule refined by `levels` dyadic subdivisions
/// toward local vertex `corner`. Each level splits the triangle touching
/// the corner into the half-size corner triangle and a trapezoid (two
/// triangles) covered by the base rule.
pub fn tri_quadrature_corner_refined(base: &QuadRule, corner: usize, levels: usize) -> QuadRule {
    let refv: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let a = refv[corner];
    let b = refv[(corner + 1) % 3];
    let c = refv[(corner + 2) % 3];
    let mut pieces = Vec::new();
    let (mut pb, mut pc) = (b, c);
    for _ in 0..levels {
        let mb = mid(a, pb);
        let mc = mid(a, pc);
        pieces.push([mb, pb, pc]);
        pieces.push([mb, pc, mc]);
        pb = mb;
        pc = mc;
    }
    pieces.push([a, pb, pc]);

    let mut points = Vec::new();
    let mut weights = Vec::new();
    for [p0, p1, p2] in pieces {
        let e1 = crate::sub(p1, p0);
        let e2 = crate::sub(p2, p0);
        let det = crate::cross(e1, e2).abs();
        for (q, w) in base.points.iter().zip(&base.weights) {
            points.push([p0[0] + e1[0] * q[0] + e2[0] * q[1], p0[1] + e1[1] * q[0] + e2[1] * q[1]]);
            weights.push(w * det);
        }
    }
    QuadRule { points, weights, degree: base.degree }
}

fn mid(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Orthonormal basis of `P_m` on the reference triangle (Dubiner).
#[derive(Debug, Clone, Copy)]
pub struct TriBasis {
    pub degree: usize,
}

impl TriBasis {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn len(&self) -> usize {
        tri_dim(self.degree)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values and reference gradients at `p`, written into `val`, `dx`,
    /// `dy` (each of length `self.len()`).
    pub fn eval_into(&self, p: Point, val: &mut [f64], dx: &mut [f64], dy: &mut [f64]) {
        let m = self.degree;
        let (x, y) = (p[0], p[1]);
        // Homogenized Legendre: psi_p = t^p P_p(s / t), s = 2x + y - 1, t = 1 - y.
        let s = 2.0 * x + y - 1.0;
        let t = 1.0 - y;
        let mut psi = vec![[0.0; 3]; m + 1];
        psi[0] = [1.0, 0.0, 0.0];
        if m >= 1 {
            psi[1] = [s, 2.0, 1.0];
        }
        for p in 1..m {
            let pf = p as f64;
            let a = (2.0 * pf + 1.0) / (pf + 1.0);
            let c = pf / (pf + 1.0);
            let t2 = t * t;
            let [v1, x1, y1] = psi[p];
            let [v0, x0, y0] = psi[p - 1];
            psi[p + 1] = [
                a * s * v1 - c * t2 * v0,
                a * (2.0 * v1 + s * x1) - c * t2 * x0,
                a * (v1 + s * y1) - c * (t2 * y0 - 2.0 * t * v0),
            ];
        }
        let z = 2.0 * y - 1.0;
        let mut idx = 0;
        for n in 0..=m {
            for p in (0..=n).rev() {
                let q = n - p;
                let (jv, jd) = jacobi(q, 2.0 * p as f64 + 1.0, z);
                let norm = (2.0 * (2.0 * p as f64 + 1.0) * (p as f64 + q as f64 + 1.0)).sqrt();
                let [pv, px, py] = psi[p];
                val[idx] = norm * pv * jv;
                dx[idx] = norm * px * jv;
                dy[idx] = norm * (py * jv + pv * 2.0 * jd);
                idx += 1;
            }
        }
    }

    /// Value table, row-major `points x functions`.
    pub fn eval(&self, points: &[Point]) -> Vec<f64> {
        self.tabulate(points).0
    }

    /// Reference gradient tables `(d/dx, d/dy)`, row-major `points x functions`.
    pub fn eval_grad(&self, points: &[Point]) -> (Vec<f64>, Vec<f64>) {
        let (_, dx, dy) = self.tabulate(points);
        (dx, dy)
    }

    pub fn tabulate(&self, points: &[Point]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let nb = self.len();
        let mut v = vec![0.0; points.len() * nb];
        let mut dx = vec![0.0; points.len() * nb];
        let mut dy = vec![0.0; points.len() * nb];
        for (i, p) in points.iter().enumerate() {
            let r = i * nb..(i + 1) * nb;
            self.eval_into(*p, &mut v[r.clone()], &mut dx[r.clone()], &mut dy[r]);
        }
        (v, dx, dy)
    }
}

/// Jacobi polynomial `P_n^{(a, 0)}(z)` and its derivative.
fn jacobi(n: usize, a: f64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut d0 = 0.0;
    let mut p1 = 0.5 * ((a + 2.0) * z + a);
    let mut d1 = 0.5 * (a + 2.0);
    for k in 2..=n {
        let kf = k as f64;
        let c = 2.0 * kf + a;
        let lhs = 2.0 * kf * (kf + a) * (c - 2.0);
        let b1 = (c - 1.0) * (c * (c - 2.0) * z + a * a);
        let b1d = (c - 1.0) * c * (c - 2.0);
        let b0 = 2.0 * (kf + a - 1.0) * (kf - 1.0) * c;
        let p2 = (b1 * p1 - b0 * p0) / lhs;
        let d2 = (b1d * p1 + b1 * d1 - b0 * d0) / lhs;
        p0 = p1;
        d0 = d1;
        p1 = p2;
        d1 = d2;
    }
    (p1, d1)
}

/// Orthonormal Legendre basis of `P_m` on `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeBasis {
    pub degree: usize,
}

impl EdgeBasis {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        let z = 2.0 * s - 1.0;
        let (mut p0, mut p1) = (1.0, z);
        out[0] = 1.0;
        for j in 1..=self.degree {
            if j >= 2 {
                let jf = (j - 1) as f64;
                let p2 = ((2.0 * jf + 1.0) * z * p1 - jf * p0) / (jf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            out[j] = (2.0 * j as f64 + 1.0).sqrt() * p1;
        }
    }

    /// Value table, row-major `points x functions`.
    pub fn eval(&self, params: &[f64]) -> Vec<f64> {
        let nb = self.len();
        let mut out = vec![0.0; params.len() * nb];
        for (i, s) in params.iter().enumerate() {
            self.eval_into(*s, &mut out[i * nb..(i + 1) * nb]);
        }
        out
    }
}
