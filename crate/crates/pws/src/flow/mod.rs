//! Filippov trajectories: smooth arcs, Σ decisions, sliding motion.

pub mod dop853;
pub mod smooth;
mod tableau;

use std::fmt;
use std::io::{BufRead, Write};

pub use dop853::{DenseSegment, Dop853, StepperOptions};
pub use smooth::{integrate_smooth, Direction, LineStop, SmoothArc, SmoothOptions, SmoothTerminal, Touch};

use crate::error::{PwsError, Result};
use crate::roots::bisect;
use crate::system::{PwsSystem, Side, Window};
use crate::tangency::{multiplicity_at, visibility, Visibility, DEFAULT_MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcKind {
    Upper,
    Lower,
    Sliding,
}

impl ArcKind {
    pub fn name(self) -> &'static str {
        match self {
            ArcKind::Upper => "upper",
            ArcKind::Lower => "lower",
            ArcKind::Sliding => "sliding",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "upper" => Some(ArcKind::Upper),
            "lower" => Some(ArcKind::Lower),
            "sliding" => Some(ArcKind::Sliding),
            _ => None,
        }
    }

    pub fn of_side(side: Side) -> Self {
        match side {
            Side::Upper => ArcKind::Upper,
            Side::Lower => ArcKind::Lower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Crossing,
    TangencyTouch,
    SlidingEntry,
    SlidingExit,
    WindowExit,
    PseudoEquilibriumStop,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Crossing => "crossing",
            EventKind::TangencyTouch => "tangency-touch",
            EventKind::SlidingEntry => "sliding-entry",
            EventKind::SlidingExit => "sliding-exit",
            EventKind::WindowExit => "window-exit",
            EventKind::PseudoEquilibriumStop => "pseudo-equilibrium-stop",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            EventKind::Crossing,
            EventKind::TangencyTouch,
            EventKind::SlidingEntry,
            EventKind::SlidingExit,
            EventKind::WindowExit,
            EventKind::PseudoEquilibriumStop,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub kind: ArcKind,
    pub samples: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub arcs: Vec<Arc>,
    pub events: Vec<Event>,
}

pub const TRAJECTORY_SCHEMA: &str = "# schema: trajectory v1";

impl Trajectory {
    pub fn start(&self) -> Option<(f64, f64)> {
        self.arcs.first().and_then(|a| a.samples.first()).map(|s| (s.1, s.2))
    }

    pub fn end(&self) -> Option<(f64, f64)> {
        self.arcs.last().and_then(|a| a.samples.last()).map(|s| (s.1, s.2))
    }

    pub fn duration(&self) -> f64 {
        match (self.arcs.first(), self.arcs.last()) {
            (Some(a), Some(b)) => b.samples.last().unwrap().0 - a.samples[0].0,
            _ => 0.0,
        }
    }

    pub fn closure_residual(&self) -> f64 {
        match (self.start(), self.end()) {
            (Some(a), Some(b)) => (a.0 - b.0).hypot(a.1 - b.1),
            _ => f64::INFINITY,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = &(f64, f64, f64)> {
        self.arcs.iter().flat_map(|a| a.samples.iter())
    }

    pub fn has_sliding(&self) -> bool {
        self.arcs.iter().any(|a| a.kind == ArcKind::Sliding)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Largest gap between consecutive arc end and start points.
    pub fn max_joint_gap(&self) -> f64 {
        self.arcs
            .windows(2)
            .map(|w| {
                let a = w[0].samples.last().unwrap();
                let b = w[1].samples[0];
                (a.1 - b.1).hypot(a.2 - b.2)
            })
            .fold(0.0, f64::max)
    }

    /// Append an arc, shifting its times to continue from the current end.
    pub fn push_arc(&mut self, kind: ArcKind, samples: Vec<(f64, f64, f64)>) {
        let t0 = self.arcs.last().and_then(|a| a.samples.last()).map(|s| s.0).unwrap_or(0.0);
        let base = samples.first().map(|s| s.0).unwrap_or(0.0);
        let samples = samples.into_iter().map(|(t, x, y)| (t0 + t - base, x, y)).collect();
        self.arcs.push(Arc { kind, samples });
    }

    pub fn push_event(&mut self, kind: EventKind, x: f64, y: f64) {
        let t = self.arcs.last().and_then(|a| a.samples.last()).map(|s| s.0).unwrap_or(0.0);
        self.events.push(Event { t, x, y, kind });
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_SCHEMA}")?;
        writeln!(w, "t,x,y,arc_kind,event,arc")?;
        let mut ev = self.events.iter().peekable();
        for (i, a) in self.arcs.iter().enumerate() {
            for &(t, x, y) in &a.samples {
                writeln!(w, "{t:e},{x:e},{y:e},{},,{i}", a.kind.name())?;
            }
            let t_end = a.samples.last().map(|s| s.0).unwrap_or(0.0);
            let last = i + 1 == self.arcs.len();
            while let Some(e) = ev.peek() {
                if e.t <= t_end || last {
                    writeln!(w, "{:e},{:e},{:e},{},{},{i}", e.t, e.x, e.y, a.kind.name(), e.kind.name())?;
                    ev.next();
                } else {
                    break;
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> std::result::Result<Trajectory, String> {
        let mut tr = Trajectory::default();
        let mut current: Option<usize> = None;
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(format!("line {}: expected 6 columns", n + 1));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| format!("line {}: bad number `{s}`", n + 1));
            let (t, x, y) = (num(cols[0])?, num(cols[1])?, num(cols[2])?);
            let kind = ArcKind::from_name(cols[3]).ok_or_else(|| format!("line {}: bad arc kind", n + 1))?;
            let idx: usize = cols[5].parse().map_err(|_| format!("line {}: bad arc index", n + 1))?;
            if cols[4].is_empty() {
                if current != Some(idx) {
                    tr.arcs.push(Arc { kind, samples: Vec::new() });
                    current = Some(idx);
                }
                tr.arcs.last_mut().unwrap().samples.push((t, x, y));
            } else {
                let ek = EventKind::from_name(cols[4]).ok_or_else(|| format!("line {}: bad event", n + 1))?;
                tr.events.push(Event { t, x, y, kind: ek });
            }
        }
        Ok(tr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilippovOptions {
    /// `|g(x,0)| ≤ tangency_tol · max(1, |f|)` marks a tangency.
    pub tangency_tol: f64,
}

impl Default for FilippovOptions {
    fn default() -> Self {
        FilippovOptions { tangency_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Next {
    Continue(Side),
    Slide,
}

/// Decide how a Filippov solution continues from `(x, 0)`.
pub fn step_filippov(sys: &PwsSystem, x: f64, incoming: Option<ArcKind>, opts: &FilippovOptions) -> Result<Next> {
    let (fp, gp) = sys.upper.eval(x, 0.0)?;
    let (fm, gm) = sys.lower.eval(x, 0.0)?;
    let tp = gp.abs() <= opts.tangency_tol * fp.abs().max(1.0);
    let tm = gm.abs() <= opts.tangency_tol * fm.abs().max(1.0);
    let leaves = |side: Side| -> bool {
        match side {
            Side::Upper => gp > 0.0 && !tp,
            Side::Lower => gm < 0.0 && !tm,
        }
    };
    let pushes_in = |side: Side| -> bool {
        match side {
            Side::Upper => gp < 0.0 && !tp,
            Side::Lower => gm > 0.0 && !tm,
        }
    };
    let visible = |side: Side| -> Result<Option<bool>> {
        let sub = sys.side(side);
        let f = sub.f.eval(x, 0.0)?;
        if f == 0.0 {
            return Ok(None);
        }
        match multiplicity_at(sub.g.as_ref(), f, x, DEFAULT_MAX_ORDER) {
            Ok(0) => Ok(Some(sub.g.eval(x, 0.0)? * side.sign() > 0.0)),
            Ok(m) => Ok(Some(departs_forward(f, visibility(sub.f.as_ref(), sub.g.as_ref(), side, x, m)?))),
            Err(PwsError::Indeterminate { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    match incoming {
        Some(ArcKind::Upper) | Some(ArcKind::Lower) => {
            let from = if incoming == Some(ArcKind::Upper) { Side::Upper } else { Side::Lower };
            let other = from.opposite();
            if leaves(other) {
                return Ok(Next::Continue(other));
            }
            if pushes_in(other) {
                return Ok(Next::Slide);
            }
            match visible(other)? {
                Some(true) => Ok(Next::Continue(other)),
                Some(false) => Ok(Next::Slide),
                None => Err(PwsError::AmbiguousTangency { x }),
            }
        }
        Some(ArcKind::Sliding) => {
            let sp = gp.abs() / fp.abs().max(1.0);
            let sm = gm.abs() / fm.abs().max(1.0);
            Ok(Next::Continue(if sp <= sm { Side::Upper } else { Side::Lower }))
        }
        None => {
            let up = leaves(Side::Upper);
            let down = leaves(Side::Lower);
            match (up, down) {
                (true, false) if !pushes_in(Side::Lower) || gm > 0.0 && gp > 0.0 => Ok(Next::Continue(Side::Upper)),
                (false, true) if !pushes_in(Side::Upper) || gm < 0.0 && gp < 0.0 => Ok(Next::Continue(Side::Lower)),
                (true, true) => Ok(Next::Slide),
                _ => {
                    if pushes_in(Side::Upper) && pushes_in(Side::Lower) {
                        return Ok(Next::Slide);
                    }
                    if gp > 0.0 && gm > 0.0 {
                        return Ok(Next::Continue(Side::Upper));
                    }
                    if gp < 0.0 && gm < 0.0 {
                        return Ok(Next::Continue(Side::Lower));
                    }
                    if tp && visible(Side::Upper)? == Some(true) {
                        return Ok(Next::Continue(Side::Upper));
                    }
                    if tm && visible(Side::Lower)? == Some(true) {
                        return Ok(Next::Continue(Side::Lower));
                    }
                    Err(PwsError::AmbiguousTangency { x })
                }
            }
        }
    }
}

/// Whether the forward orbit leaving a one-sided or visible tangency
/// enters the own half-plane. The branch on the side the flow moves
/// towards (sign of f) decides.
fn departs_forward(f: f64, vis: Visibility) -> bool {
    match vis {
        Visibility::V => true,
        Visibility::I => false,
        Visibility::R => f > 0.0,
        Visibility::L => f < 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidingOptions {
    pub stepper: StepperOptions,
    pub t_max: f64,
    pub max_steps: usize,
    /// `|X_s| ≤ pe_tol` stops at a pseudo-equilibrium.
    pub pe_tol: f64,
    pub window: Option<Window>,
    /// Stop on reaching this abscissa.
    pub stop_at: Option<f64>,
}

impl Default for SlidingOptions {
    fn default() -> Self {
        SlidingOptions {
            stepper: StepperOptions::default(),
            t_max: 1e3,
            max_steps: 1_000_000,
            pe_tol: 1e-10,
            window: None,
            stop_at: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlidingTerminal {
    /// `h` reached zero; the orbit leaves into `side`.
    Exit(Side),
    PseudoEquilibrium,
    WindowExit,
    TimeLimit,
    /// Reached `SlidingOptions::stop_at`.
    Target,
}

#[derive(Debug, Clone)]
pub struct SlidingArc {
    pub samples: Vec<(f64, f64)>,
    pub terminal: SlidingTerminal,
    pub end: (f64, f64),
}

fn sliding_raw(sys: &PwsSystem, x: f64) -> Result<f64> {
    let (fp, gp) = sys.upper.eval(x, 0.0)?;
    let (fm, gm) = sys.lower.eval(x, 0.0)?;
    let den = gm - gp;
    if den == 0.0 {
        return Err(PwsError::DegenerateDenominator { x });
    }
    Ok((fp * gm - fm * gp) / den)
}

/// Integrate `dx/dt = X_s(x)` along Σ.
pub fn integrate_sliding(sys: &PwsSystem, x0: f64, direction: Direction, opts: &SlidingOptions) -> Result<SlidingArc> {
    let d = direction.sign();
    let rhs = |_t: f64, u: &[f64; 1]| -> Result<[f64; 1]> { Ok([d * sliding_raw(sys, u[0])?]) };
    let mut arc = SlidingArc { samples: vec![(0.0, x0)], terminal: SlidingTerminal::TimeLimit, end: (0.0, x0) };
    let exit_side = |x: f64| -> Result<Side> {
        let (fp, gp) = sys.upper.eval(x, 0.0)?;
        let (fm, gm) = sys.lower.eval(x, 0.0)?;
        Ok(if gp.abs() / fp.abs().max(1.0) <= gm.abs() / fm.abs().max(1.0) { Side::Upper } else { Side::Lower })
    };
    if sliding_raw(sys, x0)?.abs() <= opts.pe_tol {
        arc.terminal = SlidingTerminal::PseudoEquilibrium;
        return Ok(arc);
    }
    let mut st = Dop853::new(rhs, 0.0, [x0], opts.t_max, opts.stepper)?;
    let h0 = sys.h_value(x0)?;
    loop {
        if st.n_steps >= opts.max_steps {
            return Err(PwsError::TooManySteps { t: st.t, x: st.y[0], y: 0.0 });
        }
        let (t0, u0) = (st.t, st.y);
        if !st.step()? {
            arc.terminal = SlidingTerminal::TimeLimit;
            return Ok(arc);
        }
        let seg = st.dense()?;
        let (t1, x1) = (st.t, st.y[0]);
        let mut event: Option<(f64, SlidingTerminal)> = None;

        let h1 = sys.h_value(x1)?;
        if h1 >= 0.0 {
            let ha = if t0 == 0.0 { h0 } else { sys.h_value(u0[0])? };
            let te = if ha >= 0.0 {
                t0
            } else {
                let hf = |t: f64| -> Result<f64> { sys.h_value(seg.eval(t)[0]) };
                bisect(hf, t0, t1, ha, h1, 1e-15 * (1.0 + t1))?
            };
            let xe = seg.eval(te)[0];
            event = Some((te, SlidingTerminal::Exit(exit_side(xe)?)));
        }
        if let Some(w) = opts.window {
            if x1 < w.x_lo || x1 > w.x_hi {
                let edge = if x1 < w.x_lo { w.x_lo } else { w.x_hi };
                let g = |t: f64| -> Result<f64> { Ok(seg.eval(t)[0] - edge) };
                let te = bisect(g, t0, t1, u0[0] - edge, x1 - edge, 1e-15 * (1.0 + t1))?;
                if event.map_or(true, |(t, _)| te < t) {
                    event = Some((te, SlidingTerminal::WindowExit));
                }
            }
        }
        if let Some(xs) = opts.stop_at {
            if (u0[0] - xs) * (x1 - xs) <= 0.0 && u0[0] != xs {
                let g = |t: f64| -> Result<f64> { Ok(seg.eval(t)[0] - xs) };
                let te = if x1 == xs { t1 } else { bisect(g, t0, t1, u0[0] - xs, x1 - xs, 1e-15 * (1.0 + t1))? };
                if event.map_or(true, |(t, _)| te < t) {
                    event = Some((te, SlidingTerminal::Target));
                }
            }
        }
        if event.is_none() {
            let v1 = sliding_raw(sys, x1)?;
            let v0 = st.eval_field(t0, &u0)?[0] * d;
            if v1.abs() <= opts.pe_tol || v0 * v1 < 0.0 {
                event = Some((t1, SlidingTerminal::PseudoEquilibrium));
            }
        }
        match event {
            None => {
                arc.samples.push((t1, x1));
                arc.end = (t1, x1);
            }
            Some((te, kind)) => {
                let xe = seg.eval(te)[0];
                arc.samples.push((te, xe));
                arc.end = (te, xe);
                arc.terminal = kind;
                return Ok(arc);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwsOptions {
    pub smooth: SmoothOptions,
    pub sliding: SlidingOptions,
    pub filippov: FilippovOptions,
    pub max_arcs: usize,
}

impl Default for PwsOptions {
    fn default() -> Self {
        PwsOptions {
            smooth: SmoothOptions::default(),
            sliding: SlidingOptions::default(),
            filippov: FilippovOptions::default(),
            max_arcs: 10_000,
        }
    }
}

/// Filippov solution from `start` for at most `t_span` time units.
pub fn integrate_pws(
    sys: &PwsSystem,
    start: (f64, f64),
    t_span: f64,
    direction: Direction,
    opts: &PwsOptions,
) -> Result<Trajectory> {
    if direction == Direction::Backward {
        let mut tr = integrate_pws(&sys.reversed(), start, t_span, Direction::Forward, opts)?;
        for a in &mut tr.arcs {
            for s in &mut a.samples {
                s.0 = -s.0;
            }
        }
        for e in &mut tr.events {
            e.t = -e.t;
        }
        return Ok(tr);
    }
    let mut tr = Trajectory::default();
    let mut t = 0.0;
    let (mut x, mut y) = start;
    if t_span <= 0.0 {
        let kind = if y > 0.0 { ArcKind::Upper } else if y < 0.0 { ArcKind::Lower } else { ArcKind::Sliding };
        tr.push_arc(kind, vec![(0.0, x, y)]);
        return Ok(tr);
    }
    let mut smooth = opts.smooth;
    smooth.window = Some(sys.window);
    let mut sliding = opts.sliding;
    sliding.window = Some(sys.window);

    let mut incoming: Option<ArcKind> = None;
    let mut stalls = 0usize;
    for _ in 0..opts.max_arcs {
        if t >= t_span {
            break;
        }
        let next = if y > 1e-12 {
            Next::Continue(Side::Upper)
        } else if y < -1e-12 {
            Next::Continue(Side::Lower)
        } else {
            step_filippov(sys, x, incoming, &opts.filippov)?
        };
        let before = (t, x, y);
        match next {
            Next::Continue(side) => {
                smooth.t_max = t_span - t;
                let arc = integrate_smooth(sys.side(side), side, (x, y), Direction::Forward, &smooth)?;
                let kind = ArcKind::of_side(side);
                let samples: Vec<_> = arc.samples.iter().map(|&(s, a, b)| (t + s, a, b)).collect();
                tr.push_arc(kind, samples);
                for tc in &arc.touches {
                    tr.events.push(Event { t: t + tc.t, x: tc.x, y: tc.y, kind: EventKind::TangencyTouch });
                }
                t += arc.duration();
                x = arc.end.1;
                y = arc.end.2;
                match arc.terminal {
                    SmoothTerminal::Sigma => {
                        y = 0.0;
                        let n = step_filippov(sys, x, Some(kind), &opts.filippov)?;
                        let ek = match n {
                            Next::Slide => EventKind::SlidingEntry,
                            Next::Continue(_) => {
                                if sys.h_value(x)? > 0.0 {
                                    EventKind::Crossing
                                } else {
                                    EventKind::TangencyTouch
                                }
                            }
                        };
                        tr.push_event(ek, x, 0.0);
                        incoming = Some(kind);
                    }
                    SmoothTerminal::WindowExit => {
                        tr.push_event(EventKind::WindowExit, x, y);
                        break;
                    }
                    SmoothTerminal::TimeLimit | SmoothTerminal::Line => break,
                }
            }
            Next::Slide => {
                sliding.t_max = t_span - t;
                let arc = integrate_sliding(sys, x, Direction::Forward, &sliding)?;
                let samples: Vec<_> = arc.samples.iter().map(|&(s, a)| (t + s, a, 0.0)).collect();
                tr.push_arc(ArcKind::Sliding, samples);
                t += arc.end.0;
                x = arc.end.1;
                y = 0.0;
                incoming = Some(ArcKind::Sliding);
                match arc.terminal {
                    SlidingTerminal::Exit(_) => tr.push_event(EventKind::SlidingExit, x, 0.0),
                    SlidingTerminal::PseudoEquilibrium => {
                        tr.push_event(EventKind::PseudoEquilibriumStop, x, 0.0);
                        break;
                    }
                    SlidingTerminal::WindowExit => {
                        tr.push_event(EventKind::WindowExit, x, 0.0);
                        break;
                    }
                    SlidingTerminal::TimeLimit | SlidingTerminal::Target => break,
                }
            }
        }
        if (t, x, y) == before {
            stalls += 1;
            if stalls > 4 {
                return Err(PwsError::AmbiguousTangency { x });
            }
        } else {
            stalls = 0;
        }
    }
    Ok(tr)
}
