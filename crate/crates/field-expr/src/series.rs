//! Truncated Taylor series in a single parameter.
//!
//! A `Series` of length `n + 1` stores the coefficients `c_0 .. c_n` of
//! `c_0 + c_1 s + ... + c_n s^n`. Arithmetic is exact up to the truncation
//! order, so evaluating an expression on series arguments gives its
//! derivatives along a line without any symbolic work.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    c: Vec<f64>,
}

impl Series {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Series { c }
    }

    /// `v + s`, the independent variable expanded around `v`.
    pub fn variable(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        if order >= 1 {
            c[1] = 1.0;
        }
        Series { c }
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        assert!(!c.is_empty(), "series needs at least one coefficient");
        Series { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative with respect to the parameter, `k! c_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut f = 1.0;
        for i in 2..=k {
            f *= i as f64;
        }
        self.c[k] * f
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.c.len()).map(|k| self.derivative(k)).collect()
    }

    pub fn scale(&self, a: f64) -> Self {
        Series { c: self.c.iter().map(|v| v * a).collect() }
    }

    pub fn add_scalar(&self, a: f64) -> Self {
        let mut c = self.c.clone();
        c[0] += a;
        Series { c }
    }

    /// Quotient; `None` when the constant term of the divisor is zero.
    pub fn div(&self, b: &Series) -> Option<Series> {
        let n = self.c.len().min(b.c.len());
        let b0 = b.c[0];
        if b0 == 0.0 {
            return None;
        }
        let mut q = vec![0.0; n];
        for k in 0..n {
            let mut acc = self.c[k];
            for i in 1..=k {
                acc -= b.c[i] * q[k - i];
            }
            q[k] = acc / b0;
        }
        Some(Series { c: q })
    }

    pub fn recip(&self) -> Option<Series> {
        Series::constant(1.0, self.order()).div(self)
    }

    pub fn exp(&self) -> Series {
        let n = self.c.len();
        let mut e = vec![0.0; n];
        e[0] = self.c[0].exp();
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Series { c: e }
    }

    /// Natural logarithm; `None` unless the constant term is positive.
    pub fn ln(&self) -> Option<Series> {
        let a0 = self.c[0];
        if !(a0 > 0.0) {
            return None;
        }
        let n = self.c.len();
        let mut l = vec![0.0; n];
        l[0] = a0.ln();
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * l[j] * self.c[k - j];
            }
            l[k] = (self.c[k] - acc / k as f64) / a0;
        }
        Some(Series { c: l })
    }

    /// Sine and cosine together (their recurrences are coupled).
    pub fn sin_cos(&self) -> (Series, Series) {
        let n = self.c.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..n {
            let mut as_ = 0.0;
            let mut ac = 0.0;
            for j in 1..=k {
                let ja = j as f64 * self.c[j];
                as_ += ja * c[k - j];
                ac += ja * s[k - j];
            }
            s[k] = as_ / k as f64;
            c[k] = -ac / k as f64;
        }
        (Series { c: s }, Series { c })
    }

    /// Integer power. Negative exponents fail on a zero constant term.
    pub fn powi(&self, p: i32) -> Option<Series> {
        let mut base = self.clone();
        let mut acc = Series::constant(1.0, self.order());
        let mut e = p.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        if p < 0 {
            acc.recip()
        } else {
            Some(acc)
        }
    }
}

impl<'a> Add for &'a Series {
    type Output = Series;
    fn add(self, b: &Series) -> Series {
        let n = self.c.len().min(b.c.len());
        Series { c: (0..n).map(|k| self.c[k] + b.c[k]).collect() }
    }
}

impl<'a> Sub for &'a Series {
    type Output = Series;
    fn sub(self, b: &Series) -> Series {
        let n = self.c.len().min(b.c.len());
        Series { c: (0..n).map(|k| self.c[k] - b.c[k]).collect() }
    }
}

impl<'a> Mul for &'a Series {
    type Output = Series;
    fn mul(self, b: &Series) -> Series {
        let n = self.c.len().min(b.c.len());
        let mut c = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += self.c[i] * b.c[k - i];
            }
            c[k] = acc;
        }
        Series { c }
    }
}

impl<'a> Neg for &'a Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn exp_of_variable_gives_all_ones() {
        let s = Series::variable(0.0, 6).exp();
        for k in 0..=6 {
            assert!(close(s.derivative(k), 1.0));
        }
    }

    #[test]
    fn sin_derivatives_cycle() {
        let (s, c) = Series::variable(0.3, 5).sin_cos();
        let x: f64 = 0.3;
        let want = [x.sin(), x.cos(), -x.sin(), -x.cos(), x.sin(), x.cos()];
        for k in 0..=5 {
            assert!(close(s.derivative(k), want[k]));
        }
        assert!(close(c.derivative(1), -x.sin()));
    }

    #[test]
    fn log_then_exp_roundtrip() {
        let a = Series::from_coeffs(vec![2.0, 0.5, -0.25, 0.125]);
        let back = a.ln().unwrap().exp();
        for (u, v) in back.coeffs().iter().zip(a.coeffs()) {
            assert!(close(*u, *v));
        }
    }

    #[test]
    fn powi_matches_repeated_product() {
        let a = Series::variable(1.5, 4);
        let p5 = a.powi(5).unwrap();
        // d^k/dx^k x^5 at 1.5
        let x: f64 = 1.5;
        let want = [x.powi(5), 5.0 * x.powi(4), 20.0 * x.powi(3), 60.0 * x * x, 120.0 * x];
        for k in 0..=4 {
            assert!(close(p5.derivative(k), want[k]));
        }
        let inv = a.powi(-2).unwrap();
        assert!(close(inv.derivative(1), -2.0 / x.powi(3)));
    }

    #[test]
    fn division_by_zero_constant_is_rejected() {
        let a = Series::variable(1.0, 2);
        let z = Series::variable(0.0, 2);
        assert!(a.div(&z).is_none());
        assert!(z.ln().is_none());
    }
}
