//! Dense bivariate polynomials in monomial form, used where exact symbolic
//! derivatives are needed (harmonic polynomials, oracle test fields).

use std::ops::{Add, Mul};

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    deg: usize,
    /// `c[a * (deg + 1) + b]` multiplies `x^a y^b`.
    c: Vec<f64>,
}

impl Poly {
    pub fn zero(deg: usize) -> Self {
        Self { deg, c: vec![0.0; (deg + 1) * (deg + 1)] }
    }

    pub fn monomial(a: usize, b: usize, coef: f64) -> Self {
        let mut p = Self::zero(a + b);
        p.set(a, b, coef);
        p
    }

    pub fn degree_bound(&self) -> usize {
        self.deg
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        if a > self.deg || b > self.deg {
            0.0
        } else {
            self.c[a * (self.deg + 1) + b]
        }
    }

    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        let d = self.deg + 1;
        self.c[a * d + b] = v;
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let d = self.deg + 1;
        self.c.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(i, v)| (i / d, i % d, *v))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        // Horner in y inside Horner in x
        let d = self.deg + 1;
        let mut acc = 0.0;
        for a in (0..d).rev() {
            let mut inner = 0.0;
            for b in (0..d).rev() {
                inner = inner * y + self.c[a * d + b];
            }
            acc = acc * x + inner;
        }
        acc
    }

    pub fn dx(&self) -> Self {
        let mut out = Self::zero(self.deg);
        for (a, b, v) in self.terms() {
            if a > 0 {
                out.set(a - 1, b, v * a as f64);
            }
        }
        out
    }

    pub fn dy(&self) -> Self {
        let mut out = Self::zero(self.deg);
        for (a, b, v) in self.terms() {
            if b > 0 {
                out.set(a, b - 1, v * b as f64);
            }
        }
        out
    }

    pub fn laplacian(&self) -> Self {
        &self.dx().dx() + &self.dy().dy()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { deg: self.deg, c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for &Poly {
    type Output = Poly;

    fn add(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero(self.deg.max(rhs.deg));
        for (a, b, v) in self.terms().chain(rhs.terms()) {
            let cur = out.get(a, b);
            out.set(a, b, cur + v);
        }
        out
    }
}

impl Mul for &Poly {
    type Output = Poly;

    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero(self.deg + rhs.deg);
        for (a, b, v) in self.terms() {
            for (c, d, w) in rhs.terms() {
                let cur = out.get(a + c, b + d);
                out.set(a + c, b + d, cur + v * w);
            }
        }
        out
    }
}

/// Real and imaginary parts of `(x + i y)^j`.
pub fn complex_power(j: usize) -> (Poly, Poly) {
    let mut re = Poly::zero(j);
    let mut im = Poly::zero(j);
    let mut binom = 1.0;
    for m in 0..=j {
        // i^m cycles through 1, i, -1, -i
        match m % 4 {
            0 => re.set(j - m, m, binom),
            1 => im.set(j - m, m, binom),
            2 => re.set(j - m, m, -binom),
            _ => im.set(j - m, m, -binom),
        }
        binom = binom * (j - m) as f64 / (m + 1) as f64;
    }
    (re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivatives() {
        // p = 3 x^2 y - 2 y^3 + 1
        let p = &(&Poly::monomial(2, 1, 3.0) + &Poly::monomial(0, 3, -2.0)) + &Poly::monomial(0, 0, 1.0);
        let (x, y) = (0.7, -0.4);
        assert!((p.eval(x, y) - (3.0 * x * x * y - 2.0 * y * y * y + 1.0)).abs() < 1e-15);
        assert!((p.dx().eval(x, y) - 6.0 * x * y).abs() < 1e-15);
        assert!((p.dy().eval(x, y) - (3.0 * x * x - 6.0 * y * y)).abs() < 1e-15);
        let q = &p * &Poly::monomial(1, 0, 2.0);
        assert!((q.eval(x, y) - 2.0 * x * p.eval(x, y)).abs() < 1e-14);
    }

    #[test]
    fn complex_powers_harmonic() {
        for j in 0..9 {
            let (re, im) = complex_power(j);
            assert_eq!(re.laplacian().max_abs_coef(), 0.0);
            assert_eq!(im.laplacian().max_abs_coef(), 0.0);
            let (x, y) = (0.3f64, 0.8f64);
            let r = x.hypot(y);
            let th = y.atan2(x);
            assert!((re.eval(x, y) - r.powi(j as i32) * (j as f64 * th).cos()).abs() < 1e-13);
            assert!((im.eval(x, y) - r.powi(j as i32) * (j as f64 * th).sin()).abs() < 1e-13);
        }
    }
}
