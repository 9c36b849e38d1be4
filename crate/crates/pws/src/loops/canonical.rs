//! Critical loop through a visible-visible tangency with closed-form arcs.

use super::{classify_loop, loop_from_seed, LoopKind, LoopOptions, LoopRecord, SwitchKind};
use crate::error::{PwsError, Result};
use crate::system::{PwsSystem, Side, Window};
use crate::tangency::{multiplicity_at, visibility, Visibility};
use field_expr::ScalarField;

#[derive(Debug, Clone)]
pub struct CanonicalLoop {
    pub system: PwsSystem,
    pub record: LoopRecord,
    pub m_plus: usize,
    pub m_minus: usize,
    pub a: f64,
    pub k1: f64,
    pub k2: f64,
}

impl CanonicalLoop {
    /// Crossing point `P = (−a, 0)`.
    pub fn p(&self) -> f64 {
        -self.a
    }

    pub fn m_star(&self) -> usize {
        self.m_plus.max(self.m_minus)
    }

    /// `y = k1·x^{m⁺+1}(x + a)`.
    pub fn upper_orbit(&self, x: f64) -> f64 {
        self.k1 * x.powi(self.m_plus as i32 + 1) * (x + self.a)
    }

    /// `y = k2·x^{m⁻+1}(x + a)`.
    pub fn lower_orbit(&self, x: f64) -> f64 {
        self.k2 * x.powi(self.m_minus as i32 + 1) * (x + self.a)
    }
}

fn peak(m: usize, a: f64, k: f64) -> f64 {
    let xm = (m as f64 + 1.0) * a / (m as f64 + 2.0);
    (k * xm.powi(m as i32 + 1) * a / (m as f64 + 2.0)).abs()
}

fn phi_source(scale: f64, m: usize, a: f64) -> String {
    format!("{scale}*({}*x + {})", m + 2, (m as f64 + 1.0) * a)
}

pub fn canonical_critical_loop(m_plus: usize, m_minus: usize, a: f64, k1: f64, k2: f64) -> Result<CanonicalLoop> {
    if m_plus % 2 == 0 || m_minus % 2 == 0 {
        return Err(PwsError::Invalid(format!("multiplicities must be odd, got ({m_plus}, {m_minus})")));
    }
    if !(a > 0.0 && k1 > 0.0 && k2 < 0.0) {
        return Err(PwsError::Invalid(format!("need a > 0, k1 > 0, k2 < 0; got a={a}, k1={k1}, k2={k2}")));
    }
    let parse = |s: &str| ScalarField::parse(s).map_err(|e| PwsError::Invalid(format!("`{s}`: {e}")));
    let yp = peak(m_plus, a, k1);
    let ym = peak(m_minus, a, k2);
    let window = Window::new(-1.5 * a, 0.5 * a, -(4.0 * ym).max(0.5 * a), (4.0 * yp).max(0.5 * a))?;
    let system = PwsSystem::from_normal_form(
        parse("1")?,
        parse(&phi_source(k1, m_plus, a))?,
        m_plus,
        parse("-1")?,
        parse(&phi_source(-k2, m_minus, a))?,
        m_minus,
        window,
    )?;
    let record = verify(&system, m_plus, m_minus, a)?;
    let out = CanonicalLoop { system, record, m_plus, m_minus, a, k1, k2 };
    check_arcs(&out)?;
    Ok(out)
}

fn fail(msg: String) -> PwsError {
    PwsError::VerificationFailed(msg)
}

fn verify(sys: &PwsSystem, m_plus: usize, m_minus: usize, a: f64) -> Result<LoopRecord> {
    for (side, m) in [(Side::Upper, m_plus), (Side::Lower, m_minus)] {
        let sub = sys.side(side);
        let f0 = sub.f.eval(0.0, 0.0)?;
        let got = multiplicity_at(sub.g.as_ref(), f0, 0.0, m + 4)?;
        if got != m {
            return Err(fail(format!("{} multiplicity at O is {got}, expected {m}", side.name())));
        }
        let v = visibility(sub.f.as_ref(), sub.g.as_ref(), side, 0.0, m)?;
        if v != Visibility::V {
            return Err(fail(format!("{} tangency at O is {v:?}, expected visible", side.name())));
        }
    }
    let h = sys.h_value(-a)?;
    if !(h > 0.0) {
        return Err(fail(format!("P is not a crossing point: h(-a) = {h:e}")));
    }
    let opts = LoopOptions::default();
    let t = loop_from_seed(sys, 0.0, Side::Lower, &opts)?;
    let rec = classify_loop(sys, &t, &opts)?;
    let diag = || format!("kind={} switching={:?} touches={:?}", rec.kind, rec.switching_points, rec.touch_points);
    if rec.kind != LoopKind::Critical || rec.touches != 1 {
        return Err(fail(format!("expected a critical loop touching once: {}", diag())));
    }
    let sw = &rec.switching_points;
    let ok = sw.len() == 2
        && sw.iter().any(|s| s.kind == SwitchKind::Crossing && (s.x + a).abs() <= 1e-8)
        && sw.iter().any(|s| s.kind == SwitchKind::Tangent && s.x.abs() <= 1e-8);
    if !ok {
        return Err(fail(format!("loop must meet Σ exactly at P and O: {}", diag())));
    }
    let area = signed_area(&rec);
    if !(area < 0.0) {
        return Err(fail(format!("loop is not clockwise (signed area {area:e})")));
    }
    Ok(rec)
}

/// Shoelace area of the loop polyline; negative for clockwise.
pub(crate) fn signed_area(rec: &LoopRecord) -> f64 {
    let pts: Vec<(f64, f64)> = rec.trajectory.points().map(|&(_, x, y)| (x, y)).collect();
    let n = pts.len();
    (0..n).map(|i| {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        p.0 * q.1 - q.0 * p.1
    })
    .sum::<f64>()
        * 0.5
}

fn check_arcs(c: &CanonicalLoop) -> Result<()> {
    let mut worst = 0.0f64;
    for arc in &c.record.trajectory.arcs {
        for &(_, x, y) in &arc.samples {
            let exact = if arc.kind == crate::flow::ArcKind::Upper { c.upper_orbit(x) } else { c.lower_orbit(x) };
            worst = worst.max((y - exact).abs());
        }
    }
    if worst > 1e-8 {
        return Err(fail(format!("integrated arcs deviate from the closed-form orbits by {worst:e}")));
    }
    Ok(())
}
