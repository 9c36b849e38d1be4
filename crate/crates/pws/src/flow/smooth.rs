//! Arcs of one smooth subsystem with Σ, section, window and time stops.

use super::dop853::{DenseSegment, Dop853, StepperOptions};
use crate::error::{PwsError, Result};
use crate::roots::bisect;
use crate::system::{Side, Subsystem, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Stop when `normal · (p − anchor)` changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineStop {
    pub anchor: (f64, f64),
    pub normal: (f64, f64),
}

impl LineStop {
    pub fn vertical(x: f64) -> Self {
        LineStop { anchor: (x, 0.0), normal: (1.0, 0.0) }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.normal.0 * (x - self.anchor.0) + self.normal.1 * (y - self.anchor.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothOptions {
    pub stepper: StepperOptions,
    pub t_max: f64,
    pub max_steps: usize,
    /// Stop at the first real contact with Σ.
    pub sigma_stop: bool,
    /// Dips of the monitored height within this band count as grazing
    /// touches rather than Σ contacts.
    pub touch_tol: f64,
    pub polish_tol: f64,
    pub line: Option<LineStop>,
    pub window: Option<Window>,
    pub track_divergence: bool,
}

impl Default for SmoothOptions {
    fn default() -> Self {
        SmoothOptions {
            stepper: StepperOptions::default(),
            t_max: 1e3,
            max_steps: 1_000_000,
            sigma_stop: true,
            touch_tol: 1e-9,
            polish_tol: 1e-12,
            line: None,
            window: None,
            track_divergence: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothTerminal {
    Sigma,
    Line,
    WindowExit,
    TimeLimit,
}

/// A local minimum of the monitored height that stayed within the touch band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Touch {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct SmoothArc {
    pub side: Side,
    pub direction: Direction,
    /// `(elapsed time, x, y)` at accepted steps, ending at the terminal point.
    pub samples: Vec<(f64, f64, f64)>,
    pub touches: Vec<Touch>,
    pub terminal: SmoothTerminal,
    pub end: (f64, f64, f64),
    pub divergence_integral: f64,
    pub dense: Vec<DenseSegment<3>>,
}

impl SmoothArc {
    pub fn duration(&self) -> f64 {
        self.end.0
    }

    /// Position at elapsed time `t`, from the dense output.
    pub fn position(&self, t: f64) -> (f64, f64) {
        if t <= 0.0 || self.dense.is_empty() {
            let s = self.samples[0];
            return (s.1, s.2);
        }
        if t >= self.end.0 {
            return (self.end.1, self.end.2);
        }
        let i = self.dense.partition_point(|s| s.t_new() < t).min(self.dense.len() - 1);
        let y = self.dense[i].eval(t);
        (y[0], y[1])
    }

    /// `n + 1` evenly spaced points in time, end points included.
    pub fn resample(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let t = self.end.0 * i as f64 / n as f64;
                let (x, y) = self.position(t);
                (t, x, y)
            })
            .collect()
    }
}

struct Pending {
    t_root: f64,
    t_start: f64,
    y_start: [f64; 3],
}

pub fn integrate_smooth(
    sub: &Subsystem,
    side: Side,
    start: (f64, f64),
    direction: Direction,
    opts: &SmoothOptions,
) -> Result<SmoothArc> {
    let d = direction.sign();
    let s = side.sign();
    let track = opts.track_divergence;
    let rhs = |_t: f64, u: &[f64; 3]| -> Result<[f64; 3]> {
        let (f, g) = sub.eval(u[0], u[1])?;
        let div = if track { sub.divergence(u[0], u[1])? } else { 0.0 };
        let out = [d * f, d * g, d * div];
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(PwsError::Eval(field_expr::EvalError::NonFinite { x: u[0], y: u[1] }))
        }
    };
    let y0 = [start.0, start.1, 0.0];
    let mut st = Dop853::new(rhs, 0.0, y0, opts.t_max, opts.stepper)?;
    let mut arc = SmoothArc {
        side,
        direction,
        samples: vec![(0.0, start.0, start.1)],
        touches: Vec::new(),
        terminal: SmoothTerminal::TimeLimit,
        end: (0.0, start.0, start.1),
        divergence_integral: 0.0,
        dense: Vec::new(),
    };
    if opts.t_max <= 0.0 {
        return Ok(arc);
    }
    if let Some(w) = opts.window {
        if !w.contains(start.0, start.1) {
            arc.terminal = SmoothTerminal::WindowExit;
            return Ok(arc);
        }
    }

    let on_sigma = start.1.abs() <= 1e-10;
    let line_sign = opts.line.map(|l| {
        let w = l.value(start.0, start.1);
        if w != 0.0 {
            w.signum()
        } else {
            let v = (d * sub.f.eval(start.0, start.1).unwrap_or(0.0), d * sub.g.eval(start.0, start.1).unwrap_or(0.0));
            (l.normal.0 * v.0 + l.normal.1 * v.1).signum()
        }
    });

    if opts.sigma_stop && on_sigma {
        let zd = s * st.f[1];
        let scale = 1.0 + st.f[0].abs();
        if zd < -1e-12 * scale {
            arc.terminal = SmoothTerminal::Sigma;
            return Ok(arc);
        }
    }

    let mut pending: Option<Pending> = if opts.sigma_stop && on_sigma {
        Some(Pending { t_root: 0.0, t_start: 0.0, y_start: y0 })
    } else {
        None
    };

    loop {
        if st.n_steps >= opts.max_steps {
            return Err(PwsError::TooManySteps { t: st.t, x: st.y[0], y: st.y[1] });
        }
        let (t_start, y_start, f_start) = (st.t, st.y, st.f);
        if !st.step()? {
            break;
        }
        let seg = st.dense()?;
        let (t1, y1, f1) = (st.t, st.y, st.f);

        // earliest terminal event inside this step
        let mut event: Option<(f64, SmoothTerminal)> = None;
        let mut touch: Option<Touch> = None;
        let mut new_pending = None;

        if opts.sigma_stop {
            let z = |t: f64| s * seg.eval(t)[1];
            let z0 = s * y_start[1];
            let z1 = s * y1[1];
            let zd0 = s * f_start[1];
            let zd1 = s * f1[1];
            let mut tm = None;
            if zd0 <= 0.0 && zd1 > 0.0 {
                let t_min = if zd0 == 0.0 {
                    t_start
                } else {
                    let zd = |t: f64| -> Result<f64> {
                        let u = seg.eval(t);
                        Ok(s * d * sub.g.eval(u[0], u[1])?)
                    };
                    bisect(zd, t_start, t1, zd0, zd1, 1e-15 * (1.0 + t1.abs()))?
                };
                tm = Some(t_min);
            }
            let (t_low, z_low) = match tm {
                Some(t) => (t, z(t)),
                None => {
                    if z1 <= z0 {
                        (t1, z1)
                    } else {
                        (t_start, z0)
                    }
                }
            };
            if z_low < -opts.touch_tol {
                let t_root = if z0 > 0.0 {
                    let zr = |t: f64| -> Result<f64> { Ok(z(t)) };
                    let tr = bisect(zr, t_start, t_low, z0, z_low, 1e-15 * (1.0 + t1.abs()))?;
                    Pending { t_root: tr, t_start, y_start }
                } else {
                    match pending.take() {
                        Some(p) => p,
                        None => Pending { t_root: t_start, t_start, y_start },
                    }
                };
                event = Some((t_root.t_root, SmoothTerminal::Sigma));
                new_pending = Some(t_root);
            } else {
                if let Some(t) = tm {
                    if z(t) <= opts.touch_tol && t > 0.0 {
                        let u = seg.eval(t);
                        touch = Some(Touch { t, x: u[0], y: u[1] });
                    }
                }
                if z0 > 0.0 && z1 <= 0.0 {
                    let zr = |t: f64| -> Result<f64> { Ok(z(t)) };
                    let tr = bisect(zr, t_start, t1, z0, z1, 1e-15 * (1.0 + t1.abs()))?;
                    pending = Some(Pending { t_root: tr, t_start, y_start });
                } else if z1 > 0.0 {
                    pending = None;
                }
            }
        }

        if let (Some(line), Some(sgn)) = (opts.line, line_sign) {
            let w1 = line.value(y1[0], y1[1]);
            if w1 * sgn <= 0.0 {
                let w0 = line.value(y_start[0], y_start[1]);
                let wf = |t: f64| -> Result<f64> {
                    let u = seg.eval(t);
                    Ok(line.value(u[0], u[1]))
                };
                let tr = if w0 * sgn <= 0.0 { t_start } else { bisect(wf, t_start, t1, w0, w1, 1e-15 * (1.0 + t1.abs()))? };
                if event.map_or(true, |(te, _)| tr < te) {
                    event = Some((tr, SmoothTerminal::Line));
                }
            }
        }

        if let Some(w) = opts.window {
            let out = |u: &[f64; 3]| (w.x_lo - u[0]).max(u[0] - w.x_hi).max(w.y_lo - u[1]).max(u[1] - w.y_hi);
            let o1 = out(&y1);
            if o1 > 0.0 {
                let o0 = out(&y_start).min(0.0);
                let of = |t: f64| -> Result<f64> { Ok(out(&seg.eval(t))) };
                let tr = if o0 == 0.0 { t_start } else { bisect(of, t_start, t1, o0, o1, 1e-15 * (1.0 + t1.abs()))? };
                if event.map_or(true, |(te, _)| tr < te) {
                    event = Some((tr, SmoothTerminal::WindowExit));
                }
            }
        }

        if let Some(tc) = touch {
            if event.map_or(true, |(te, _)| tc.t < te) {
                arc.touches.push(tc);
            }
        }

        arc.dense.push(seg.clone());
        match event {
            None => {
                arc.samples.push((t1, y1[0], y1[1]));
                arc.divergence_integral = y1[2];
                arc.end = (t1, y1[0], y1[1]);
            }
            Some((te, kind)) => {
                let u = match kind {
                    SmoothTerminal::Sigma => {
                        let p = new_pending.expect("sigma event carries its root");
                        polish(&mut st, p.t_start, &p.y_start, p.t_root, |u, f| (u[1], f[1]), opts.polish_tol)?
                    }
                    SmoothTerminal::Line => {
                        let l = opts.line.unwrap();
                        polish(
                            &mut st,
                            t_start,
                            &y_start,
                            te,
                            |u, f| (l.value(u[0], u[1]), l.normal.0 * f[0] + l.normal.1 * f[1]),
                            opts.polish_tol,
                        )?
                    }
                    _ => (te, seg.eval(te)),
                };
                let (te, u) = u;
                while arc.samples.last().map_or(false, |p| p.0 > te) {
                    arc.samples.pop();
                }
                arc.samples.push((te, u[0], u[1]));
                arc.divergence_integral = u[2];
                arc.end = (te, u[0], u[1]);
                arc.terminal = kind;
                arc.touches.retain(|tc| tc.t < te);
                return Ok(arc);
            }
        }
    }
    arc.terminal = SmoothTerminal::TimeLimit;
    Ok(arc)
}

/// Newton refinement of an event time by re-stepping from the step start.
/// `m` maps (state, slope) to (monitored value, its time derivative).
fn polish<F, M>(st: &mut Dop853<3, F>, t_start: f64, y_start: &[f64; 3], t_guess: f64, m: M, tol: f64) -> Result<(f64, [f64; 3])>
where
    F: FnMut(f64, &[f64; 3]) -> Result<[f64; 3]>,
    M: Fn(&[f64; 3], &[f64; 3]) -> (f64, f64),
{
    let mut t = t_guess;
    let mut u = st.probe(t_start, y_start, t - t_start)?;
    for _ in 0..30 {
        let f = st.eval_field(t, &u)?;
        let (v, vd) = m(&u, &f);
        if v.abs() <= tol || vd == 0.0 {
            break;
        }
        let tn = (t - v / vd).max(t_start);
        if tn == t {
            break;
        }
        t = tn;
        u = st.probe(t_start, y_start, t - t_start)?;
    }
    Ok((t, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::expr_field;

    fn sub(f: &str, g: &str) -> Subsystem {
        Subsystem::new(expr_field(f).unwrap(), expr_field(g).unwrap())
    }

    #[test]
    fn constant_flow_runs_out_of_time() {
        let opts = SmoothOptions { t_max: 1.0, ..Default::default() };
        let a = integrate_smooth(&sub("1", "0"), Side::Upper, (0.0, 1.0), Direction::Forward, &opts).unwrap();
        assert_eq!(a.terminal, SmoothTerminal::TimeLimit);
        assert!((a.end.1 - 1.0).abs() < 1e-14 && (a.end.2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn parabola_meets_sigma_at_sqrt2() {
        let a = integrate_smooth(&sub("1", "-x"), Side::Upper, (-1.0, 0.5), Direction::Forward, &SmoothOptions::default())
            .unwrap();
        assert_eq!(a.terminal, SmoothTerminal::Sigma);
        assert!((a.end.1 - 2f64.sqrt()).abs() < 1e-11);
        assert!(a.end.2.abs() <= 1e-12);
    }

    #[test]
    fn vertical_drop() {
        let a = integrate_smooth(&sub("0", "-1"), Side::Upper, (0.0, 0.3), Direction::Forward, &SmoothOptions::default())
            .unwrap();
        assert_eq!(a.terminal, SmoothTerminal::Sigma);
        assert!((a.end.0 - 0.3).abs() < 1e-12);
        assert!(a.end.1.abs() < 1e-15);
    }

    #[test]
    fn graze_is_a_touch() {
        // y = x^2 / 2 + c touches Σ only when c = 0
        let a = integrate_smooth(&sub("1", "x"), Side::Upper, (-1.0, 0.5), Direction::Forward, &SmoothOptions {
            line: Some(LineStop::vertical(1.0)),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a.terminal, SmoothTerminal::Line);
        assert_eq!(a.touches.len(), 1);
        assert!(a.touches[0].x.abs() < 1e-8);
        assert!((a.end.2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn backward_and_divergence() {
        let opts = SmoothOptions { t_max: 1.0, track_divergence: true, sigma_stop: false, ..Default::default() };
        let a = integrate_smooth(&sub("1", "y"), Side::Upper, (0.0, 1.0), Direction::Forward, &opts).unwrap();
        assert!((a.end.2 - 1f64.exp()).abs() < 1e-9);
        assert!((a.divergence_integral - 1.0).abs() < 1e-12);
        let b = integrate_smooth(&sub("1", "y"), Side::Upper, (a.end.1, a.end.2), Direction::Backward, &opts).unwrap();
        assert!(b.end.1.abs() < 1e-12 && (b.end.2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn window_exit() {
        let w = Window::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let opts = SmoothOptions { window: Some(w), ..Default::default() };
        let a = integrate_smooth(&sub("1", "0"), Side::Upper, (0.0, 0.5), Direction::Forward, &opts).unwrap();
        assert_eq!(a.terminal, SmoothTerminal::WindowExit);
        assert!((a.end.1 - 1.0).abs() < 1e-12);
    }
}
