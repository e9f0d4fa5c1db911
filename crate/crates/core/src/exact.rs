//! Manufactured solutions with closed-form loads and boundary data.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::mesh::Domain;
use crate::{cross, Point, ProblemData};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseKind {
    /// Polynomial-times-trigonometric field on the square, `g = 0`.
    SmoothSquare,
    /// `u = curl(r^q cos(q (theta - pi/2)))` on the L-shape.
    HarmonicCurl { q: f64 },
    /// `u = curl(r^q)` on the L-shape.
    CurlPower { q: f64 },
}

/// An exact solution bundle for `-grad div u + curl curl u + alpha u = f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub kind: CaseKind,
    pub alpha: f64,
}

pub fn smooth_square_case(alpha: f64) -> ManufacturedCase {
    ManufacturedCase { kind: CaseKind::SmoothSquare, alpha }
}

pub fn harmonic_curl_case(q: f64, alpha: f64) -> ManufacturedCase {
    ManufacturedCase { kind: CaseKind::HarmonicCurl { q }, alpha }
}

pub fn curl_power_case(q: f64, alpha: f64) -> ManufacturedCase {
    ManufacturedCase { kind: CaseKind::CurlPower { q }, alpha }
}

/// Polar angle with the branch cut along `theta = pi/4`, so that the
/// L-shape sees a continuous angle in `(pi/2, 2 pi)`.
pub fn lshape_angle(x: Point) -> f64 {
    let th = x[1].atan2(x[0]);
    if th < FRAC_PI_4 {
        th + 2.0 * PI
    } else {
        th
    }
}

// factors of the smooth field, u1 = x1(x) y1(y), u2 = y2(y) x2(x)
fn x1(x: f64) -> [f64; 3] {
    [x * x * x / 3.0 - x * x / 4.0, x * x - x / 2.0, 2.0 * x - 0.5]
}

fn y1(y: f64) -> [f64; 3] {
    let (s, c) = y.sin_cos();
    let a = y * y - y / 2.0;
    let da = 2.0 * y - 0.5;
    [a * s, da * s + a * c, 2.0 * s + 2.0 * da * c - a * s]
}

fn y2(y: f64) -> [f64; 3] {
    x1(y)
}

fn x2(x: f64) -> [f64; 3] {
    let (s, c) = x.sin_cos();
    let a = x * x - x / 2.0;
    let da = 2.0 * x - 0.5;
    [a * c, da * c - a * s, 2.0 * c - 2.0 * da * s - a * c]
}

impl ManufacturedCase {
    pub fn domain(&self) -> Domain {
        match self.kind {
            CaseKind::SmoothSquare => Domain::Square,
            _ => Domain::LShape,
        }
    }

    /// Whether derivatives blow up at the reentrant corner.
    pub fn is_singular(&self) -> bool {
        !matches!(self.kind, CaseKind::SmoothSquare)
    }

    /// Sobolev regularity index `s`: `u` lies in `H^t` for every `t < s`.
    pub fn regularity(&self) -> f64 {
        match self.kind {
            CaseKind::SmoothSquare => f64::INFINITY,
            CaseKind::HarmonicCurl { q } | CaseKind::CurlPower { q } => q,
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            CaseKind::SmoothSquare => "smooth".into(),
            CaseKind::HarmonicCurl { q } => format!("harmonic:{q}"),
            CaseKind::CurlPower { q } => format!("curlpow:{q}"),
        }
    }

    pub fn u(&self, x: Point) -> Point {
        match self.kind {
            CaseKind::SmoothSquare => [x1(x[0])[0] * y1(x[1])[0], y2(x[1])[0] * x2(x[0])[0]],
            CaseKind::HarmonicCurl { q } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return [0.0; 2];
                }
                let th = lshape_angle(x);
                let arg = q * (th - FRAC_PI_2) - th;
                let a = -q * r.powf(q - 1.0);
                [a * arg.sin(), a * arg.cos()]
            }
            CaseKind::CurlPower { q } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return [0.0; 2];
                }
                let a = q * r.powf(q - 2.0);
                [a * x[1], -a * x[0]]
            }
        }
    }

    pub fn div_u(&self, x: Point) -> f64 {
        match self.kind {
            CaseKind::SmoothSquare => x1(x[0])[1] * y1(x[1])[0] + y2(x[1])[1] * x2(x[0])[0],
            _ => 0.0,
        }
    }

    pub fn curl_u(&self, x: Point) -> f64 {
        match self.kind {
            CaseKind::SmoothSquare => y2(x[1])[0] * x2(x[0])[1] - x1(x[0])[0] * y1(x[1])[1],
            CaseKind::HarmonicCurl { .. } => 0.0,
            CaseKind::CurlPower { q } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return 0.0;
                }
                -q * q * r.powf(q - 2.0)
            }
        }
    }

    /// `f = -grad div u + curl curl u + alpha u`.
    pub fn f(&self, x: Point) -> Point {
        let u = self.u(x);
        match self.kind {
            CaseKind::SmoothSquare => {
                let (a, b) = (x1(x[0]), y1(x[1]));
                let (c, d) = (y2(x[1]), x2(x[0]));
                let lap1 = a[2] * b[0] + a[0] * b[2];
                let lap2 = c[2] * d[0] + c[0] * d[2];
                [-lap1 + self.alpha * u[0], -lap2 + self.alpha * u[1]]
            }
            CaseKind::HarmonicCurl { .. } => [self.alpha * u[0], self.alpha * u[1]],
            CaseKind::CurlPower { q } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return [0.0; 2];
                }
                let a = self.alpha * q * r.powf(q - 2.0) - q * q * (q - 2.0) * r.powf(q - 4.0);
                [a * x[1], -a * x[0]]
            }
        }
    }

    /// Tangential trace `u x n`.
    pub fn g(&self, x: Point, n: Point) -> f64 {
        cross(self.u(x), n)
    }
}

impl ProblemData for ManufacturedCase {
    fn load(&self, x: Point) -> Point {
        self.f(x)
    }

    fn tangential(&self, x: Point, n: Point) -> f64 {
        self.g(x, n)
    }
}
