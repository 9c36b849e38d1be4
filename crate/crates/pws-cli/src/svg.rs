//! Phase portraits as standalone SVG.

use std::fmt::Write as _;

use pws::flow::Trajectory;
use pws::loops::LoopKind;
use pws::{PwsSystem, TangentPointRecord, Window};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

/// A trajectory to draw; loops carry their kind for the colour.
#[derive(Debug, Clone)]
pub struct Curve {
    pub trajectory: Trajectory,
    pub kind: Option<LoopKind>,
}

impl Curve {
    pub fn orbit(trajectory: Trajectory) -> Self {
        Curve { trajectory, kind: None }
    }

    pub fn looped(trajectory: Trajectory, kind: LoopKind) -> Self {
        Curve { trajectory, kind: Some(kind) }
    }
}

pub fn kind_colour(kind: Option<LoopKind>) -> &'static str {
    match kind {
        None => "#555555",
        Some(LoopKind::CrossingPeriodic) => "#7f7f7f",
        Some(LoopKind::CrossingLimitCycle) => "#1f77b4",
        Some(LoopKind::SlidingLoop) => "#2ca02c",
        Some(LoopKind::Grazing) => "#9467bd",
        Some(LoopKind::CrossingNonsliding) => "#ff7f0e",
        Some(LoopKind::Critical) => "#d62728",
    }
}

struct Map {
    w: Window,
}

impl Map {
    fn x(&self, x: f64) -> f64 {
        (x - self.w.x_lo) / (self.w.x_hi - self.w.x_lo) * WIDTH
    }

    fn y(&self, y: f64) -> f64 {
        (self.w.y_hi - y) / (self.w.y_hi - self.w.y_lo) * HEIGHT
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Σ, the sliding set, tangent point markers and the given curves.
pub fn render_portrait(sys: &PwsSystem, curves: &[Curve], records: &[TangentPointRecord]) -> String {
    let w = sys.window;
    let m = Map { w };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let y0 = m.y(0.0);
    let _ = writeln!(s, r##"<rect id="upper" x="0" y="0" width="{WIDTH}" height="{y0:.2}" fill="#eef3fb"/>"##);
    let _ = writeln!(
        s,
        r##"<rect id="lower" x="0" y="{y0:.2}" width="{WIDTH}" height="{:.2}" fill="#fbf1ea"/>"##,
        HEIGHT - y0
    );
    let _ = writeln!(
        s,
        r##"<line id="sigma" x1="0" y1="{y0:.2}" x2="{WIDTH}" y2="{y0:.2}" stroke="black" stroke-width="1"/>"##
    );
    if let Ok(dec) = sys.decompose_sigma((w.x_hi - w.x_lo) / WIDTH) {
        for &(a, b) in &dec.sliding {
            let _ = writeln!(
                s,
                r##"<line class="sliding" x1="{:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="black" stroke-width="5"/>"##,
                m.x(a),
                m.x(b)
            );
        }
    }
    for c in curves {
        let colour = kind_colour(c.kind);
        let class = c.kind.map(|k| k.name()).unwrap_or("orbit");
        let pts: Vec<String> =
            c.trajectory.points().map(|&(_, x, y)| format!("{:.2},{:.2}", m.x(x), m.y(y))).collect();
        if pts.len() < 2 {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<polyline class="{class}" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }
    for r in records {
        let cx = m.x(r.x0);
        let _ = writeln!(s, r#"<circle class="tangent" cx="{cx:.2}" cy="{y0:.2}" r="4" fill="white" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" font-size="11" text-anchor="middle">({},{}) {}</text>"#,
            y0 - 8.0,
            r.m_plus,
            r.m_minus,
            escape(&r.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
