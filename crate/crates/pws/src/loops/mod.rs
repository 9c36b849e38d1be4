//! Closed orbits through Σ: witnesses, classification, censuses.

mod canonical;
mod cluster;
mod scenarios;

pub use canonical::{canonical_critical_loop, CanonicalLoop};
pub use cluster::{Cluster, ClusterOptions};
pub use scenarios::{
    count_tangent_orbits, scenario_thm2, scenario_thm3, scenario_thm4, scenario_thm5, thm1_base, thm1_check,
    sliding_arc_at_visible, thm1_construction, unstable_critical, LoopScenario, Thm1Report, Thm2Result, Thm3Kind, Thm3Result,
    TangentOrbit,
};

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{PwsError, Result};
use crate::flow::{
    integrate_smooth, ArcKind, Direction, Event, EventKind, LineStop, SmoothArc, SmoothOptions, SmoothTerminal, Trajectory,
};
use crate::flow::StepperOptions;
use crate::maps::Displacement;
use crate::system::{PwsSystem, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LoopKind {
    CrossingPeriodic,
    CrossingLimitCycle,
    SlidingLoop,
    Grazing,
    CrossingNonsliding,
    Critical,
}

impl LoopKind {
    pub fn name(self) -> &'static str {
        match self {
            LoopKind::CrossingPeriodic => "crossing-periodic",
            LoopKind::CrossingLimitCycle => "crossing-limit-cycle",
            LoopKind::SlidingLoop => "sliding-loop",
            LoopKind::Grazing => "grazing",
            LoopKind::CrossingNonsliding => "crossing-nonsliding",
            LoopKind::Critical => "critical",
        }
    }
}

impl fmt::Display for LoopKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchKind {
    Crossing,
    Tangent,
    /// Entry to or exit from a sliding arc at a regular sliding point.
    Sliding,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchingPoint {
    pub x: f64,
    pub kind: SwitchKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct LoopRecord {
    pub trajectory: Trajectory,
    pub kind: LoopKind,
    pub switching_points: Vec<SwitchingPoint>,
    /// ℓ: grazing touches plus tangent switching points.
    pub touches: usize,
    pub touch_points: Vec<f64>,
    pub stability: Stability,
    /// One-sided return slopes at the seed; `None` when the neighbour escapes.
    pub return_slopes: (Option<f64>, Option<f64>),
}

impl LoopRecord {
    pub fn seed(&self) -> (f64, f64) {
        self.trajectory.start().unwrap_or((f64::NAN, f64::NAN))
    }

    /// Abscissas where the loop meets Σ transversally.
    pub fn crossing_points(&self) -> Vec<f64> {
        self.switching_points.iter().filter(|s| s.kind == SwitchKind::Crossing).map(|s| s.x).collect()
    }

    pub fn tangent_switches(&self) -> Vec<f64> {
        self.switching_points.iter().filter(|s| s.kind == SwitchKind::Tangent).map(|s| s.x).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopOptions {
    pub smooth: SmoothOptions,
    pub closure_tol: f64,
    /// `|g±|/max(1,|f±|)` at or below this marks a tangent switching point.
    pub tangent_tol: f64,
    pub stability_eps: f64,
    /// Slopes within this of 1 on both sides read as a continuum.
    pub isolation_tol: f64,
    pub samples_per_arc: usize,
}

impl Default for LoopOptions {
    fn default() -> Self {
        let smooth = SmoothOptions {
            stepper: StepperOptions { rtol: 1e-13, atol: 1e-15, ..StepperOptions::default() },
            touch_tol: 1e-12,
            ..SmoothOptions::default()
        };
        LoopOptions {
            smooth,
            closure_tol: 1e-8,
            tangent_tol: 1e-9,
            stability_eps: 1e-6,
            isolation_tol: 1e-6,
            samples_per_arc: 200,
        }
    }
}

impl LoopOptions {
    pub fn smooth_in(&self, sys: &PwsSystem) -> SmoothOptions {
        let mut o = self.smooth;
        o.window = Some(sys.window);
        o
    }
}

/// Append a smooth arc (resampled) and its grazing touches.
pub(crate) fn push_smooth(tr: &mut Trajectory, arc: &SmoothArc, n: usize) {
    let t0 = tr.arcs.last().and_then(|a| a.samples.last()).map(|s| s.0).unwrap_or(0.0);
    let mut samples = arc.resample(n);
    if let Some(last) = samples.last_mut() {
        *last = arc.end;
    }
    tr.push_arc(ArcKind::of_side(arc.side), samples);
    for tc in &arc.touches {
        tr.events.push(Event { t: t0 + tc.t, x: tc.x, y: tc.y, kind: EventKind::TangencyTouch });
    }
}

/// Forward arc of `side` from `(x, 0)` to its first Σ contact.
pub(crate) fn leg_to_sigma(sys: &PwsSystem, side: Side, x: f64, line: Option<LineStop>, opts: &LoopOptions) -> Result<SmoothArc> {
    let mut o = opts.smooth_in(sys);
    o.sigma_stop = true;
    o.line = line;
    integrate_smooth(sys.side(side), side, (x, 0.0), Direction::Forward, &o)
}

fn contact_event(sys: &PwsSystem, x: f64) -> Result<EventKind> {
    Ok(if sys.h_value(x)? > 0.0 { EventKind::Crossing } else { EventKind::TangencyTouch })
}

/// Two-leg candidate loop from `(x0, 0)`: into `first` until Σ, then the
/// other side until Σ or the vertical line through `x0`.
pub fn loop_from_seed(sys: &PwsSystem, x0: f64, first: Side, opts: &LoopOptions) -> Result<Trajectory> {
    let a = leg_to_sigma(sys, first, x0, None, opts)?;
    if a.terminal != SmoothTerminal::Sigma || a.duration() == 0.0 {
        return Err(PwsError::NoArrival(format!("first leg from x={x0} ended with {:?}", a.terminal)));
    }
    let p = a.end.1;
    let b = leg_to_sigma(sys, first.opposite(), p, Some(LineStop::vertical(x0)), opts)?;
    if !matches!(b.terminal, SmoothTerminal::Sigma | SmoothTerminal::Line) {
        return Err(PwsError::NoArrival(format!("second leg from x={p} ended with {:?}", b.terminal)));
    }
    let mut tr = Trajectory::default();
    push_smooth(&mut tr, &a, opts.samples_per_arc);
    tr.push_event(contact_event(sys, p)?, p, 0.0);
    push_smooth(&mut tr, &b, opts.samples_per_arc);
    Ok(tr)
}

/// Σ-to-Σ return following the given side sequence from `(x, 0)`.
/// `None` if some leg fails to come back to Σ.
pub fn sigma_return(sys: &PwsSystem, sides: &[Side], x: f64, opts: &LoopOptions) -> Option<f64> {
    let mut cur = x;
    for &s in sides {
        let a = leg_to_sigma(sys, s, cur, None, opts).ok()?;
        if a.terminal != SmoothTerminal::Sigma || a.duration() == 0.0 {
            return None;
        }
        cur = a.end.1;
    }
    Some(cur)
}

fn switch_kind(sys: &PwsSystem, x: f64, opts: &LoopOptions) -> Result<SwitchKind> {
    let (fp, gp) = sys.upper.eval(x, 0.0)?;
    let (fm, gm) = sys.lower.eval(x, 0.0)?;
    let tp = gp.abs() / fp.abs().max(1.0);
    let tm = gm.abs() / fm.abs().max(1.0);
    Ok(if tp.min(tm) <= opts.tangent_tol {
        SwitchKind::Tangent
    } else if gp * gm > 0.0 {
        SwitchKind::Crossing
    } else {
        SwitchKind::Sliding
    })
}

fn dedupe(mut xs: Vec<f64>, tol: f64) -> Vec<f64> {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() <= tol);
    xs
}

pub fn classify_loop(sys: &PwsSystem, t: &Trajectory, opts: &LoopOptions) -> Result<LoopRecord> {
    let residual = t.closure_residual();
    if !(residual <= opts.closure_tol) {
        return Err(PwsError::NotClosed { residual });
    }
    let n = t.arcs.len();
    let mut switching_points = Vec::new();
    if n > 1 {
        for i in 0..n {
            let (a, b) = (&t.arcs[i], &t.arcs[(i + 1) % n]);
            if a.kind != b.kind {
                let &(_, x, _) = a.samples.last().unwrap();
                switching_points.push(SwitchingPoint { x, kind: switch_kind(sys, x, opts)? });
            }
        }
    }
    let tangent: Vec<f64> =
        switching_points.iter().filter(|s| s.kind == SwitchKind::Tangent).map(|s| s.x).collect();
    let grazes: Vec<f64> = t
        .events
        .iter()
        .filter(|e| e.kind == EventKind::TangencyTouch)
        .map(|e| e.x)
        .filter(|x| tangent.iter().all(|s| (s - x).abs() > 1e-7))
        .collect();
    let mut touch_points = dedupe(grazes, 1e-7);
    touch_points.extend(tangent.iter().copied());
    let touch_points = dedupe(touch_points, 1e-7);
    let touches = touch_points.len();

    let sliding = t.has_sliding();
    let (stability, return_slopes) = if sliding { (Stability::Unknown, (None, None)) } else { stability_of(sys, t, opts) };
    let isolated = match return_slopes {
        (Some(l), Some(r)) => (l - 1.0).abs() > opts.isolation_tol || (r - 1.0).abs() > opts.isolation_tol,
        _ => true,
    };
    let kind = if sliding {
        LoopKind::SlidingLoop
    } else if switching_points.is_empty() {
        LoopKind::Grazing
    } else if !tangent.is_empty() {
        LoopKind::Critical
    } else if touches > 0 {
        LoopKind::CrossingNonsliding
    } else if isolated {
        LoopKind::CrossingLimitCycle
    } else {
        LoopKind::CrossingPeriodic
    };
    Ok(LoopRecord { trajectory: t.clone(), kind, switching_points, touches, touch_points, stability, return_slopes })
}

/// One-sided slopes of the Σ return at the seed.
fn stability_of(sys: &PwsSystem, t: &Trajectory, opts: &LoopOptions) -> (Stability, (Option<f64>, Option<f64>)) {
    let Some((x0, y0)) = t.start() else { return (Stability::Unknown, (None, None)) };
    if y0.abs() > 1e-9 || t.arcs.len() < 2 {
        return (Stability::Unknown, (None, None));
    }
    let mut sides: Vec<Side> = Vec::new();
    for a in &t.arcs {
        let s = match a.kind {
            ArcKind::Upper => Side::Upper,
            ArcKind::Lower => Side::Lower,
            _ => return (Stability::Unknown, (None, None)),
        };
        if sides.last() != Some(&s) {
            sides.push(s);
        }
    }
    let e = opts.stability_eps;
    let left = sigma_return(sys, &sides, x0 - e, opts).map(|r| (x0 - r) / e);
    let right = sigma_return(sys, &sides, x0 + e, opts).map(|r| (r - x0) / e);
    let grows = |s: Option<f64>| s.map_or(true, |v| v > 1.0 + opts.isolation_tol);
    let shrinks = |s: Option<f64>| s.map_or(false, |v| v.abs() < 1.0 - opts.isolation_tol);
    let st = if grows(left) && grows(right) {
        Stability::Unstable
    } else if shrinks(left) && shrinks(right) {
        Stability::Stable
    } else {
        Stability::Unknown
    };
    (st, (left, right))
}

#[derive(Debug, Clone, Default)]
pub struct LoopCensus {
    pub beta_c: usize,
    pub beta_s: usize,
    pub beta_cro: BTreeMap<usize, usize>,
    pub beta_cri: BTreeMap<usize, usize>,
    pub grazing: usize,
    pub periodic: usize,
    pub witnesses: Vec<LoopRecord>,
}

impl LoopCensus {
    pub fn add(&mut self, r: LoopRecord) {
        match r.kind {
            LoopKind::CrossingLimitCycle => self.beta_c += 1,
            LoopKind::SlidingLoop => self.beta_s += 1,
            LoopKind::CrossingNonsliding => *self.beta_cro.entry(r.touches).or_default() += 1,
            LoopKind::Critical => *self.beta_cri.entry(r.touches).or_default() += 1,
            LoopKind::Grazing => self.grazing += 1,
            LoopKind::CrossingPeriodic => self.periodic += 1,
        }
        self.witnesses.push(r);
    }

    pub fn cro(&self, l: usize) -> usize {
        self.beta_cro.get(&l).copied().unwrap_or(0)
    }

    pub fn cri(&self, l: usize) -> usize {
        self.beta_cri.get(&l).copied().unwrap_or(0)
    }

    pub fn merge(mut self, other: LoopCensus) -> LoopCensus {
        for r in other.witnesses {
            self.add(r);
        }
        self
    }

    pub fn total(&self) -> usize {
        self.witnesses.len()
    }

    pub fn of_kind(&self, kind: LoopKind) -> impl Iterator<Item = &LoopRecord> {
        self.witnesses.iter().filter(move |r| r.kind == kind)
    }

    pub fn summary(&self) -> String {
        let mut s = format!("beta_c={} beta_s={}", self.beta_c, self.beta_s);
        for (l, n) in &self.beta_cro {
            s += &format!(" cro({l})={n}");
        }
        for (l, n) in &self.beta_cri {
            s += &format!(" cri({l})={n}");
        }
        if self.grazing + self.periodic > 0 {
            s += &format!(" grazing={} periodic={}", self.grazing, self.periodic);
        }
        s
    }

    /// Witness list with seeds and kinds, for error reports.
    pub fn dump(&self) -> String {
        let mut s = self.summary();
        for r in &self.witnesses {
            let (x, _) = r.seed();
            s += &format!(
                "\n  seed x={x:.12} kind={} touches={} crossings={:?} stability={:?}",
                r.kind,
                r.touches,
                r.crossing_points(),
                r.stability
            );
        }
        s
    }
}

/// Result of a displacement scan for crossing cycles.
#[derive(Debug, Clone, Default)]
pub struct CycleSearch {
    pub cycles: Vec<LoopRecord>,
    pub sign_changes: usize,
    /// The displacement vanished on the whole grid.
    pub continuum: bool,
    pub diagnostics: Vec<String>,
}

pub const DEFAULT_MAX_ROOTS: usize = 64;

/// Crossing cycles of `sys` seeded on Σ in `[a, b]`, from sign changes of the
/// lower-then-upper displacement.
pub fn find_crossing_cycles(sys: &PwsSystem, interval: (f64, f64), max_roots: usize, opts: &LoopOptions) -> CycleSearch {
    find_crossing_cycles_with(sys, interval, max_roots, 400, opts)
}

pub fn find_crossing_cycles_with(
    sys: &PwsSystem,
    interval: (f64, f64),
    max_roots: usize,
    grid: usize,
    opts: &LoopOptions,
) -> CycleSearch {
    let mut out = CycleSearch::default();
    let (a, b) = interval;
    if !(b > a) || grid == 0 {
        return out;
    }
    let d = Displacement::lower_then_upper(&sys.lower, &sys.upper, None, opts.smooth_in(sys));
    let disp = |x: f64| -> Option<f64> {
        if sys.h_value(x).ok()? <= 0.0 {
            return None;
        }
        d.eval(x).ok().map(|v| v.value)
    };
    let xs: Vec<f64> = (0..=grid).map(|i| a + (b - a) * i as f64 / grid as f64).collect();
    let vs: Vec<Option<f64>> = xs.iter().map(|&x| disp(x)).collect();
    let defined: Vec<f64> = vs.iter().flatten().copied().collect();
    if defined.len() > 2 && defined.iter().all(|v| v.abs() <= 1e-10) {
        out.continuum = true;
        out.diagnostics.push(format!("displacement vanishes on {} grid points: continuum of periodic orbits", defined.len()));
        return out;
    }
    let mut roots = Vec::new();
    for i in 0..grid {
        let (Some(v0), Some(v1)) = (vs[i], vs[i + 1]) else { continue };
        if v0 == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if v0.signum() == v1.signum() || v1 == 0.0 {
            continue;
        }
        out.sign_changes += 1;
        let f = |x: f64| -> Result<f64> { disp(x).ok_or_else(|| PwsError::NoArrival(format!("x={x}"))) };
        match crate::roots::bisect(f, xs[i], xs[i + 1], v0, v1, 1e-15 * (1.0 + xs[i].abs())) {
            Ok(r) => roots.push(r),
            Err(e) => out.diagnostics.push(format!("bisection in [{}, {}]: {e}", xs[i], xs[i + 1])),
        }
    }
    for r in roots.into_iter().take(max_roots) {
        match loop_from_seed(sys, r, Side::Lower, opts).and_then(|t| classify_loop(sys, &t, opts)) {
            Ok(rec) => out.cycles.push(rec),
            Err(e) => out.diagnostics.push(format!("root x={r}: {e}")),
        }
    }
    out
}

pub const CENSUS_SCHEMA: &str = "# schema: census v1";
const CENSUS_HEADER: &str = "scenario,m_plus,m_minus,ell,beta_c,beta_s,beta_cro_1,beta_cri_1,witnesses_path";

#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub scenario: String,
    pub m_plus: usize,
    pub m_minus: usize,
    pub ell: usize,
    pub beta_c: usize,
    pub beta_s: usize,
    pub beta_cro_1: usize,
    pub beta_cri_1: usize,
    pub witnesses_path: String,
}

impl CensusRow {
    pub fn from_census(scenario: &str, m_plus: usize, m_minus: usize, ell: usize, c: &LoopCensus, path: &str) -> Self {
        CensusRow {
            scenario: scenario.to_string(),
            m_plus,
            m_minus,
            ell,
            beta_c: c.beta_c,
            beta_s: c.beta_s,
            beta_cro_1: c.cro(1),
            beta_cri_1: c.cri(1),
            witnesses_path: path.to_string(),
        }
    }
}

pub fn write_census_csv<W: Write>(rows: &[CensusRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CENSUS_SCHEMA}")?;
    writeln!(w, "{CENSUS_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario, r.m_plus, r.m_minus, r.ell, r.beta_c, r.beta_s, r.beta_cro_1, r.beta_cri_1, r.witnesses_path
        )?;
    }
    Ok(())
}

pub fn read_census_csv<R: BufRead>(r: R) -> std::result::Result<Vec<CensusRow>, String> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == CENSUS_HEADER {
            continue;
        }
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 9 {
            return Err(format!("line {}: expected 9 columns, got {}", n + 1, c.len()));
        }
        let u = |s: &str| s.parse::<usize>().map_err(|_| format!("line {}: bad integer `{s}`", n + 1));
        out.push(CensusRow {
            scenario: c[0].to_string(),
            m_plus: u(c[1])?,
            m_minus: u(c[2])?,
            ell: u(c[3])?,
            beta_c: u(c[4])?,
            beta_s: u(c[5])?,
            beta_cro_1: u(c[6])?,
            beta_cri_1: u(c[7])?,
            witnesses_path: c[8].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_sliding, SlidingOptions};
    use crate::system::Window;

    fn win() -> Window {
        Window::new(-3.0, 3.0, -3.0, 3.0).unwrap()
    }

    #[test]
    fn grazing_orbit_has_no_switching_points() {
        // center at (0, 1) touching Σ at the origin
        let s = PwsSystem::from_sources("1 - y", "x", "1", "1", win()).unwrap();
        let o = LoopOptions::default();
        let mut so = o.smooth_in(&s);
        so.sigma_stop = false;
        so.t_max = 2.0 * std::f64::consts::PI;
        let arc = integrate_smooth(&s.upper, Side::Upper, (0.0, 0.0), Direction::Forward, &so).unwrap();
        let mut tr = Trajectory::default();
        push_smooth(&mut tr, &arc, 100);
        tr.push_event(EventKind::TangencyTouch, 0.0, 0.0);
        let r = classify_loop(&s, &tr, &o).unwrap();
        assert_eq!(r.kind, LoopKind::Grazing);
        assert_eq!(r.touches, 1);
        assert!(r.switching_points.is_empty());
    }

    #[test]
    fn symmetric_crossing_orbits_are_not_isolated() {
        let s = PwsSystem::from_sources("1", "-x", "-1", "-x", win()).unwrap();
        let o = LoopOptions::default();
        let t = loop_from_seed(&s, 0.5, Side::Lower, &o).unwrap();
        let r = classify_loop(&s, &t, &o).unwrap();
        assert_eq!(r.kind, LoopKind::CrossingPeriodic);
        assert_eq!(r.switching_points.len(), 2);
        assert!(r.switching_points.iter().all(|p| p.kind == SwitchKind::Crossing));
        assert_eq!(r.touches, 0);
    }

    #[test]
    fn unclosed_trajectory_is_rejected() {
        let s = PwsSystem::from_sources("1", "-x", "-1", "-x", win()).unwrap();
        let mut tr = Trajectory::default();
        tr.push_arc(ArcKind::Upper, vec![(0.0, -0.5, 0.0), (1.0, 0.4, 0.0)]);
        assert!(matches!(classify_loop(&s, &tr, &LoopOptions::default()), Err(PwsError::NotClosed { .. })));
    }

    #[test]
    fn sliding_arc_marks_a_sliding_loop() {
        let s = PwsSystem::from_sources("1", "x", "-1", "1", win()).unwrap();
        let mut so = SlidingOptions::default();
        so.stop_at = Some(-0.2);
        let arc = integrate_sliding(&s, -0.5, Direction::Forward, &so).unwrap();
        assert_eq!(arc.terminal, crate::flow::SlidingTerminal::Target);
        assert!((arc.end.1 + 0.2).abs() < 1e-12);
        let mut tr = Trajectory::default();
        tr.push_arc(ArcKind::Sliding, arc.samples.iter().map(|&(t, x)| (t, x, 0.0)).collect());
        tr.push_arc(ArcKind::Upper, vec![(0.0, -0.2, 0.0), (1.0, -0.5, 0.0)]);
        let r = classify_loop(&s, &tr, &LoopOptions::default()).unwrap();
        assert_eq!(r.kind, LoopKind::SlidingLoop);
    }

    #[test]
    fn isolated_cycle_from_displacement_sign_change() {
        // lower orbits are y = x²/2 + ε(x⁵/5 − r²x³/3) + c; the odd part
        // vanishes at x² = 5r²/3, where the lower leg lands at −x
        let s = PwsSystem::from_sources("1", "-x", "-1", "-x - 0.5*x^2*(x^2 - 0.16)", win()).unwrap();
        let o = LoopOptions::default();
        let res = find_crossing_cycles_with(&s, (0.2, 0.9), 8, 40, &o);
        assert!(!res.continuum);
        assert_eq!(res.sign_changes, 1);
        assert_eq!(res.cycles.len(), 1);
        let c = &res.cycles[0];
        let expect = 0.4 * (5.0f64 / 3.0).sqrt();
        assert!((c.seed().0 - expect).abs() < 1e-7, "{}", c.seed().0);
        assert_eq!(c.kind, LoopKind::CrossingLimitCycle);
        assert!(c.trajectory.closure_residual() <= 1e-8);
    }

    #[test]
    fn continuum_is_flagged() {
        let s = PwsSystem::from_sources("1", "-x", "-1", "-x", win()).unwrap();
        let res = find_crossing_cycles_with(&s, (0.2, 0.9), 8, 20, &LoopOptions::default());
        assert!(res.continuum);
        assert!(res.cycles.is_empty());
        let res = find_crossing_cycles_with(&s, (0.5, 0.5), 8, 20, &LoopOptions::default());
        assert!(res.cycles.is_empty() && !res.continuum);
    }

    #[test]
    fn census_csv_round_trip() {
        let rows = vec![
            CensusRow {
                scenario: "thm4".into(),
                m_plus: 5,
                m_minus: 5,
                ell: 1,
                beta_c: 2,
                beta_s: 0,
                beta_cro_1: 1,
                beta_cri_1: 2,
                witnesses_path: "trajectories".into(),
            },
            CensusRow { scenario: "thm5".into(), ell: 0, beta_s: 3, ..rows_default() },
        ];
        let mut buf = Vec::new();
        write_census_csv(&rows, &mut buf).unwrap();
        let back = read_census_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, rows);
        assert!(read_census_csv(std::io::Cursor::new("a,b\n")).is_err());
    }

    fn rows_default() -> CensusRow {
        CensusRow {
            scenario: String::new(),
            m_plus: 5,
            m_minus: 5,
            ell: 0,
            beta_c: 0,
            beta_s: 0,
            beta_cro_1: 0,
            beta_cri_1: 0,
            witnesses_path: "-".into(),
        }
    }
}
