//! Adaptive explicit Runge-Kutta 8(5,3) stepper with 7th-order dense output.
//!
//! Step-size control and the initial step heuristic follow the usual
//! Hairer-Norsett-Wanner recipe. The stepper only integrates forward in
//! time; callers reverse direction by negating the field.

use super::tableau::{A, B, C, D, E3, E5, INTERPOLATOR_POWER, N_STAGES, N_STAGES_EXTENDED};
use crate::error::{PwsError, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;
const ORDER: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub first_step: Option<f64>,
}

impl Default for StepperOptions {
    fn default() -> Self {
        StepperOptions { rtol: 1e-10, atol: 1e-12, h_max: f64::INFINITY, first_step: None }
    }
}

/// Interpolant over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment<const N: usize> {
    pub t_old: f64,
    pub h: f64,
    pub y_old: [f64; N],
    f: [[f64; N]; INTERPOLATOR_POWER],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t_new(&self) -> f64 {
        self.t_old + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let x = (t - self.t_old) / self.h;
        let mut y = [0.0; N];
        for (i, row) in self.f.iter().rev().enumerate() {
            for j in 0..N {
                y[j] += row[j];
                y[j] *= if i % 2 == 0 { x } else { 1.0 - x };
            }
        }
        for j in 0..N {
            y[j] += self.y_old[j];
        }
        y
    }
}

pub struct Dop853<const N: usize, F>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    fun: F,
    pub t: f64,
    pub y: [f64; N],
    pub f: [f64; N],
    pub t_old: f64,
    pub y_old: [f64; N],
    t_bound: f64,
    h_abs: f64,
    h_previous: f64,
    opts: StepperOptions,
    k: [[f64; N]; N_STAGES_EXTENDED],
    pub n_steps: usize,
}

fn rms<const N: usize>(v: &[f64; N]) -> f64 {
    (v.iter().map(|a| a * a).sum::<f64>() / N as f64).sqrt()
}

fn underflow<const N: usize>(t: f64, y: &[f64; N]) -> PwsError {
    PwsError::StepUnderflow { t, x: y.first().copied().unwrap_or(0.0), y: y.get(1).copied().unwrap_or(0.0) }
}

impl<const N: usize, F> Dop853<N, F>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    pub fn new(mut fun: F, t0: f64, y0: [f64; N], t_bound: f64, opts: StepperOptions) -> Result<Self> {
        let f0 = fun(t0, &y0)?;
        let mut s = Dop853 {
            fun,
            t: t0,
            y: y0,
            f: f0,
            t_old: t0,
            y_old: y0,
            t_bound,
            h_abs: 0.0,
            h_previous: 0.0,
            opts,
            k: [[0.0; N]; N_STAGES_EXTENDED],
            n_steps: 0,
        };
        s.h_abs = match opts.first_step {
            Some(h) => h,
            None => s.initial_step()?,
        };
        Ok(s)
    }

    pub fn finished(&self) -> bool {
        self.t >= self.t_bound
    }

    fn initial_step(&mut self) -> Result<f64> {
        let interval = self.t_bound - self.t;
        if interval <= 0.0 {
            return Ok(0.0);
        }
        let (rtol, atol) = (self.opts.rtol, self.opts.atol);
        let mut a = [0.0; N];
        let mut b = [0.0; N];
        for j in 0..N {
            let sc = atol + self.y[j].abs() * rtol;
            a[j] = self.y[j] / sc;
            b[j] = self.f[j] / sc;
        }
        let (d0, d1) = (rms(&a), rms(&b));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(interval);
        let mut y1 = [0.0; N];
        for j in 0..N {
            y1[j] = self.y[j] + h0 * self.f[j];
        }
        let f1 = (self.fun)(self.t + h0, &y1)?;
        let mut c = [0.0; N];
        for j in 0..N {
            c[j] = (f1[j] - self.f[j]) / (atol + self.y[j].abs() * rtol);
        }
        let d2 = rms(&c) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / (ORDER + 1.0))
        };
        Ok((100.0 * h0).min(h1).min(interval).min(self.opts.h_max))
    }

    /// Stages of one step of length `h` from `(t, y)` with slope `f`; fills
    /// `k[0..=N_STAGES]` and returns the new state and slope.
    fn rk_step(&mut self, t: f64, y: &[f64; N], f: &[f64; N], h: f64) -> Result<([f64; N], [f64; N])> {
        self.k[0] = *f;
        for s in 1..N_STAGES {
            let mut yi = *y;
            for j in 0..N {
                let mut dy = 0.0;
                for (i, a) in A[s][..s].iter().enumerate() {
                    dy += self.k[i][j] * a;
                }
                yi[j] += dy * h;
            }
            self.k[s] = (self.fun)(t + C[s] * h, &yi)?;
        }
        let mut y_new = *y;
        for j in 0..N {
            let mut acc = 0.0;
            for (i, b) in B.iter().enumerate() {
                acc += self.k[i][j] * b;
            }
            y_new[j] += h * acc;
        }
        let f_new = (self.fun)(t + h, &y_new)?;
        self.k[N_STAGES] = f_new;
        Ok((y_new, f_new))
    }

    fn error_norm(&self, h: f64, y_new: &[f64; N]) -> f64 {
        let (mut e5, mut e3) = (0.0, 0.0);
        for j in 0..N {
            let sc = self.opts.atol + self.y[j].abs().max(y_new[j].abs()) * self.opts.rtol;
            let (mut a5, mut a3) = (0.0, 0.0);
            for i in 0..=N_STAGES {
                a5 += self.k[i][j] * E5[i];
                a3 += self.k[i][j] * E3[i];
            }
            e5 += (a5 / sc).powi(2);
            e3 += (a3 / sc).powi(2);
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        h.abs() * e5 / ((e5 + 0.01 * e3) * N as f64).sqrt()
    }

    /// Take one accepted step. Returns false once `t_bound` was reached.
    pub fn step(&mut self) -> Result<bool> {
        if self.finished() {
            return Ok(false);
        }
        let min_step = 10.0 * (next_up(self.t) - self.t);
        let mut h_abs = self.h_abs.min(self.opts.h_max).max(min_step);
        let mut rejected = false;
        loop {
            if h_abs < min_step || !h_abs.is_finite() {
                return Err(underflow(self.t, &self.y));
            }
            let mut t_new = self.t + h_abs;
            if t_new > self.t_bound {
                t_new = self.t_bound;
            }
            let h = t_new - self.t;
            let (t, y, f) = (self.t, self.y, self.f);
            let (y_new, f_new) = match self.rk_step(t, &y, &f, h) {
                Ok(v) => v,
                Err(PwsError::Eval(_)) => {
                    // trial point left the domain of the field; shrink
                    h_abs *= MIN_FACTOR;
                    rejected = true;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let err = self.error_norm(h, &y_new);
            if err < 1.0 && y_new.iter().all(|v| v.is_finite()) {
                let mut factor =
                    if err == 0.0 { MAX_FACTOR } else { MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT)) };
                if rejected {
                    factor = factor.min(1.0);
                }
                self.h_abs = h.abs() * factor;
                self.h_previous = h;
                self.t_old = self.t;
                self.y_old = self.y;
                self.t = t_new;
                self.y = y_new;
                self.f = f_new;
                self.n_steps += 1;
                return Ok(true);
            }
            let factor = if err.is_finite() { MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT)) } else { MIN_FACTOR };
            h_abs = h.abs() * factor;
            rejected = true;
        }
    }

    /// Interpolant for the last accepted step.
    pub fn dense(&mut self) -> Result<DenseSegment<N>> {
        let h = self.h_previous;
        let (t_old, y_old) = (self.t_old, self.y_old);
        for s in N_STAGES + 1..N_STAGES_EXTENDED {
            let mut yi = y_old;
            for j in 0..N {
                let mut dy = 0.0;
                for (i, a) in A[s][..s].iter().enumerate() {
                    dy += self.k[i][j] * a;
                }
                yi[j] += dy * h;
            }
            self.k[s] = (self.fun)(t_old + C[s] * h, &yi)?;
        }
        let f_old = self.k[0];
        let mut f = [[0.0; N]; INTERPOLATOR_POWER];
        for j in 0..N {
            let dy = self.y[j] - y_old[j];
            f[0][j] = dy;
            f[1][j] = h * f_old[j] - dy;
            f[2][j] = 2.0 * dy - h * (self.f[j] + f_old[j]);
            for (r, drow) in D.iter().enumerate() {
                let mut acc = 0.0;
                for (i, dv) in drow.iter().enumerate() {
                    acc += dv * self.k[i][j];
                }
                f[3 + r][j] = h * acc;
            }
        }
        Ok(DenseSegment { t_old, h, y_old, f })
    }

    /// Single unchecked step of length `h` from an arbitrary state; used to
    /// polish event locations.
    pub fn probe(&mut self, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]> {
        if h == 0.0 {
            return Ok(*y);
        }
        let saved = self.k;
        let f = (self.fun)(t, y)?;
        let r = self.rk_step(t, y, &f, h).map(|(y, _)| y);
        self.k = saved;
        r
    }

    pub fn eval_field(&mut self, t: f64, y: &[f64; N]) -> Result<[f64; N]> {
        (self.fun)(t, y)
    }
}

fn next_up(t: f64) -> f64 {
    if t.is_nan() || t == f64::INFINITY {
        return t;
    }
    if t == 0.0 {
        return f64::from_bits(1);
    }
    let bits = t.to_bits();
    if t > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut s = Dop853::new(|_, y: &[f64; 1]| Ok([-y[0]]), 0.0, [1.0], 5.0, StepperOptions::default()).unwrap();
        while s.step().unwrap() {}
        assert!((s.y[0] - (-5.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn dense_output_matches_solution() {
        let mut s =
            Dop853::new(|_, y: &[f64; 2]| Ok([y[1], -y[0]]), 0.0, [0.0, 1.0], 3.0, StepperOptions::default()).unwrap();
        let mut worst = 0.0f64;
        while s.step().unwrap() {
            let seg = s.dense().unwrap();
            for i in 0..=10 {
                let t = seg.t_old + seg.h * i as f64 / 10.0;
                let y = seg.eval(t);
                worst = worst.max((y[0] - t.sin()).abs()).max((y[1] - t.cos()).abs());
            }
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn polynomial_quadrature_is_exact() {
        // y' = 3t^2 - 1, degree within the method order
        let mut s = Dop853::new(|t, _: &[f64; 1]| Ok([3.0 * t * t - 1.0]), 0.0, [0.0], 2.0, StepperOptions::default())
            .unwrap();
        while s.step().unwrap() {}
        assert!((s.y[0] - 6.0).abs() < 1e-13);
    }
}
