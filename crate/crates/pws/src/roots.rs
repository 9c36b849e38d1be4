//! Scalar root isolation helpers shared by the Σ scans and the loop searches.

use crate::error::{PwsError, Result};

/// Bisection on a sign change. `fa` and `fb` are the values at the ends.
/// Stops when the bracket is below `tol` or cannot be split further.
pub fn bisect<F>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, fb: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(PwsError::RootNotBracketed(format!("[{a}, {b}] values {fa:e}, {fb:e}")));
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Sample `f` on `n` equal subintervals of `[a, b]` and refine every sign
/// change. Exact zeros at sample points are reported once.
pub fn scan_roots<F>(mut f: F, a: f64, b: f64, n: usize, tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut out = Vec::new();
    if !(b > a) || n == 0 {
        return Ok(out);
    }
    let h = (b - a) / n as f64;
    let mut x0 = a;
    let mut f0 = f(a)?;
    if f0 == 0.0 {
        out.push(a);
    }
    for i in 1..=n {
        let x1 = if i == n { b } else { a + h * i as f64 };
        let f1 = f(x1)?;
        if f1 == 0.0 {
            out.push(x1);
        } else if f0 != 0.0 && f0.signum() != f1.signum() {
            out.push(bisect(&mut f, x0, x1, f0, f1, tol)?);
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_roots_of_cubic() {
        let r = scan_roots(|x| Ok((x + 0.5) * x * (x - 0.7)), -1.0, 1.0, 37, 1e-14).unwrap();
        assert_eq!(r.len(), 3);
        assert!((r[0] + 0.5).abs() < 1e-13);
        assert!(r[1].abs() < 1e-13);
        assert!((r[2] - 0.7).abs() < 1e-13);
    }

    #[test]
    fn unbracketed_is_an_error() {
        assert!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, 2.0, 2.0, 1e-12).is_err());
    }
}
