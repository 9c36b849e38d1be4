//! Two-zone systems split by Σ = {y = 0}.

use std::sync::Arc;

use field_expr::{Expr, ScalarField};

use crate::error::{PwsError, Result};
use crate::roots::bisect;
use crate::scalar::{Field, Negated, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Window {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        if !(x_lo < x_hi) || !(y_lo < 0.0 && 0.0 < y_hi) {
            return Err(PwsError::Invalid(format!(
                "window [{x_lo},{x_hi}]x[{y_lo},{y_hi}] must have x_lo<x_hi and y_lo<0<y_hi"
            )));
        }
        Ok(Window { x_lo, x_hi, y_lo, y_hi })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi && y >= self.y_lo && y <= self.y_hi
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    /// +1 for the upper half-plane, -1 for the lower.
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Upper => Side::Lower,
            Side::Lower => Side::Upper,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        }
    }
}

/// One smooth planar field `(f, g)`.
#[derive(Debug, Clone)]
pub struct Subsystem {
    pub f: Field,
    pub g: Field,
}

impl Subsystem {
    pub fn new(f: Field, g: Field) -> Self {
        Subsystem { f, g }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        Ok((self.f.eval(x, y)?, self.g.eval(x, y)?))
    }

    pub fn divergence(&self, x: f64, y: f64) -> Result<f64> {
        let (_, fx, _) = self.f.gradient(x, y)?;
        let (_, _, gy) = self.g.gradient(x, y)?;
        Ok(fx + gy)
    }
}

/// Metadata recorded when a system is built in tangency normal form
/// `g± = φ±(x,y) x^{m±}`.
#[derive(Debug, Clone)]
pub struct NormalForm {
    pub m_plus: usize,
    pub m_minus: usize,
    pub f_plus: ScalarField,
    pub phi_plus: ScalarField,
    pub f_minus: ScalarField,
    pub phi_minus: ScalarField,
}

#[derive(Debug, Clone)]
pub struct PwsSystem {
    pub upper: Subsystem,
    pub lower: Subsystem,
    pub window: Window,
    pub normal_form: Option<NormalForm>,
}

/// `φ · x^m` as an expression (just `φ` when `m = 0`).
pub fn normal_form_g(phi: &ScalarField, m: usize) -> Expr {
    if m == 0 {
        phi.expr().clone()
    } else {
        Expr::Mul(Box::new(phi.expr().clone()), Box::new(Expr::Pow(Box::new(Expr::x()), m as i32)))
    }
}

impl PwsSystem {
    pub fn new(upper: Subsystem, lower: Subsystem, window: Window) -> Self {
        PwsSystem { upper, lower, window, normal_form: None }
    }

    /// Parse the four component expressions.
    pub fn from_sources(f_plus: &str, g_plus: &str, f_minus: &str, g_minus: &str, window: Window) -> Result<Self> {
        let p = |s: &str| -> Result<Field> {
            Ok(Arc::new(ScalarField::parse(s).map_err(|e| PwsError::Invalid(format!("`{s}`: {e}")))?))
        };
        Ok(PwsSystem::new(
            Subsystem::new(p(f_plus)?, p(g_plus)?),
            Subsystem::new(p(f_minus)?, p(g_minus)?),
            window,
        ))
    }

    /// Build `g± = φ± x^{m±}` and record the normal-form metadata.
    pub fn from_normal_form(
        f_plus: ScalarField,
        phi_plus: ScalarField,
        m_plus: usize,
        f_minus: ScalarField,
        phi_minus: ScalarField,
        m_minus: usize,
        window: Window,
    ) -> Result<Self> {
        let phi0p = phi_plus.eval(0.0, 0.0)?;
        let phi0m = phi_minus.eval(0.0, 0.0)?;
        if phi0p == 0.0 || phi0m == 0.0 {
            return Err(PwsError::Invalid("normal form needs phi(0,0) != 0".into()));
        }
        let g_plus = ScalarField::new(normal_form_g(&phi_plus, m_plus));
        let g_minus = ScalarField::new(normal_form_g(&phi_minus, m_minus));
        let upper = Subsystem::new(Arc::new(f_plus.clone()), Arc::new(g_plus));
        let lower = Subsystem::new(Arc::new(f_minus.clone()), Arc::new(g_minus));
        Ok(PwsSystem {
            upper,
            lower,
            window,
            normal_form: Some(NormalForm { m_plus, m_minus, f_plus, phi_plus, f_minus, phi_minus }),
        })
    }

    /// The same system with time reversed.
    pub fn reversed(&self) -> PwsSystem {
        let neg = |s: &Subsystem| -> Subsystem {
            Subsystem::new(Arc::new(Negated(s.f.clone())), Arc::new(Negated(s.g.clone())))
        };
        PwsSystem { upper: neg(&self.upper), lower: neg(&self.lower), window: self.window, normal_form: None }
    }

    pub fn side(&self, side: Side) -> &Subsystem {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }

    pub fn h_value(&self, x: f64) -> Result<f64> {
        Ok(self.upper.g.eval(x, 0.0)? * self.lower.g.eval(x, 0.0)?)
    }

    /// Horizontal component of the Filippov sliding field at (x, 0).
    pub fn sliding_field(&self, x: f64) -> Result<f64> {
        let (fp, gp) = self.upper.eval(x, 0.0)?;
        let (fm, gm) = self.lower.eval(x, 0.0)?;
        let h = gp * gm;
        if !(h < 0.0) {
            return Err(PwsError::NotSliding { x, h });
        }
        let den = gm - gp;
        if den.abs() <= 1e-300 {
            return Err(PwsError::DegenerateDenominator { x });
        }
        Ok((fp * gm - fm * gp) / den)
    }

    /// Convex weight `a` with sliding vector `a Z⁺ + (1-a) Z⁻`.
    pub fn convex_coefficient(&self, x: f64) -> Result<f64> {
        let gp = self.upper.g.eval(x, 0.0)?;
        let gm = self.lower.g.eval(x, 0.0)?;
        let den = gm - gp;
        if den == 0.0 {
            return Err(PwsError::DegenerateDenominator { x });
        }
        Ok(gm / den)
    }

    /// Σ decomposition on the full window with the given grid step.
    pub fn decompose_sigma(&self, resolution: f64) -> Result<SigmaDecomposition> {
        self.decompose_sigma_on(self.window.x_lo, self.window.x_hi, resolution)
    }

    pub fn decompose_sigma_on(&self, a: f64, b: f64, resolution: f64) -> Result<SigmaDecomposition> {
        if !(resolution > 0.0) {
            return Err(PwsError::Invalid("resolution must be positive".into()));
        }
        let n = ((b - a) / resolution).ceil().max(2.0) as usize;
        let mut diagnostics = Vec::new();
        let mut cands = Vec::new();
        for sub in [&self.upper, &self.lower] {
            let (zs, diag) = zeros_on_sigma(sub.g.as_ref(), a, b, n)?;
            cands.extend(zs);
            diagnostics.extend(diag);
        }
        cands.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let candidates = merge_close(&cands, 1e-10);

        let mut boundary_equilibria = Vec::new();
        for &x in &candidates {
            let fp = self.upper.f.eval(x, 0.0)?;
            let fm = self.lower.f.eval(x, 0.0)?;
            let gp = self.upper.g.eval(x, 0.0)?;
            let gm = self.lower.g.eval(x, 0.0)?;
            let tol = 1e-12;
            if (fp.abs() <= tol && gp.abs() <= tol) || (fm.abs() <= tol && gm.abs() <= tol) {
                boundary_equilibria.push(x);
            }
        }

        let mut crossing = Vec::new();
        let mut sliding = Vec::new();
        let mut edges = vec![a];
        edges.extend(candidates.iter().copied().filter(|&x| x > a && x < b));
        edges.push(b);
        for w in edges.windows(2) {
            let (l, r) = (w[0], w[1]);
            if r - l <= 0.0 {
                continue;
            }
            let hm = self.h_value(0.5 * (l + r))?;
            if hm > 0.0 {
                crossing.push((l, r));
            } else if hm < 0.0 {
                sliding.push((l, r));
            } else {
                diagnostics.push(format!("h vanishes identically near ({l}, {r})"));
            }
        }
        Ok(SigmaDecomposition {
            crossing,
            sliding,
            tangency_candidates: candidates,
            boundary_equilibria,
            diagnostics,
        })
    }

    /// Roots of the sliding field inside each sliding interval.
    pub fn pseudo_equilibria(&self, dec: &SigmaDecomposition) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for &(l, r) in &dec.sliding {
            let w = r - l;
            // stay off the interval ends where the denominator may vanish
            let a = l + 1e-9 * w.max(1e-300);
            let b = r - 1e-9 * w;
            let n = 200;
            let zs = crate::roots::scan_roots(|x| self.sliding_field(x), a, b, n, 1e-14 * (1.0 + w))?;
            out.extend(zs);
        }
        Ok(out)
    }

    /// ρ distance on a `grid × grid` lattice of the common window.
    pub fn system_distance(&self, other: &PwsSystem, grid: usize) -> Result<f64> {
        self.system_distance_on(other, (self.window.x_lo, self.window.x_hi), grid)
    }

    /// ρ on the strip `x_range × [y_lo, y_hi]` of the common window; equals
    /// the full distance when the systems agree outside the strip.
    pub fn system_distance_on(&self, other: &PwsSystem, x_range: (f64, f64), grid: usize) -> Result<f64> {
        if self.window != other.window {
            return Err(PwsError::WindowMismatch);
        }
        let grid = grid.max(2);
        let mut w = self.window;
        w.x_lo = x_range.0.max(w.x_lo);
        w.x_hi = x_range.1.min(w.x_hi);
        if !(w.x_lo <= w.x_hi) {
            return Err(PwsError::Invalid(format!("strip {x_range:?} misses the window")));
        }
        let pairs: [(&Field, &Field); 4] = [
            (&self.upper.f, &other.upper.f),
            (&self.upper.g, &other.upper.g),
            (&self.lower.f, &other.lower.f),
            (&self.lower.g, &other.lower.g),
        ];
        let mut total = 0.0;
        for (p, q) in pairs {
            let mut best = 0.0f64;
            for i in 0..grid {
                let x = w.x_lo + w.width() * i as f64 / (grid - 1) as f64;
                for j in 0..grid {
                    let y = w.y_lo + w.height() * j as f64 / (grid - 1) as f64;
                    let (a, ax, ay) = p.gradient(x, y)?;
                    let (b, bx, by) = q.gradient(x, y)?;
                    best = best.max((a - b).abs() + (ax - bx).abs() + (ay - by).abs());
                }
            }
            total += best;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SigmaDecomposition {
    pub crossing: Vec<(f64, f64)>,
    pub sliding: Vec<(f64, f64)>,
    pub tangency_candidates: Vec<f64>,
    pub boundary_equilibria: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl SigmaDecomposition {
    pub fn is_sliding(&self, x: f64) -> bool {
        self.sliding.iter().any(|&(l, r)| x > l && x < r)
    }

    pub fn is_crossing(&self, x: f64) -> bool {
        self.crossing.iter().any(|&(l, r)| x > l && x < r)
    }
}

fn merge_close(sorted: &[f64], tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut group: Vec<f64> = Vec::new();
    for &x in sorted {
        if let Some(&last) = group.last() {
            if x - last > tol {
                out.push(group.iter().sum::<f64>() / group.len() as f64);
                group.clear();
            }
        }
        group.push(x);
    }
    if !group.is_empty() {
        out.push(group.iter().sum::<f64>() / group.len() as f64);
    }
    out
}

/// Zeros of `g(·, 0)` on `[a, b]`: odd-order zeros from sign changes of g,
/// even-order zeros from sign changes of ∂x g where g itself is negligible.
pub fn zeros_on_sigma(g: &dyn Scalar, a: f64, b: f64, n: usize) -> Result<(Vec<f64>, Vec<String>)> {
    let h = (b - a) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| if i == n { b } else { a + h * i as f64 }).collect();
    let mut vals = Vec::with_capacity(xs.len());
    let mut ders = Vec::with_capacity(xs.len());
    for &x in &xs {
        let d = g.x_derivatives(x, 0.0, 1)?;
        vals.push(d[0]);
        ders.push(d[1]);
    }
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let tol = 1e-15 * (1.0 + a.abs().max(b.abs()));
    let gv = |x: f64| -> Result<f64> { Ok(g.eval(x, 0.0)?) };
    let gd = |x: f64| -> Result<f64> { Ok(g.x_derivatives(x, 0.0, 1)?[1]) };

    let mut zeros = Vec::new();
    let mut diagnostics = Vec::new();
    let mut flat_run = 0usize;
    for i in 0..xs.len() {
        if vals[i] == 0.0 && ders[i] == 0.0 {
            flat_run += 1;
        } else {
            if flat_run >= 3 {
                diagnostics.push(format!(
                    "g vanishes on a stretch ending near x={} ({} samples)",
                    xs[i], flat_run
                ));
            }
            flat_run = 0;
        }
    }
    for i in 0..xs.len() {
        if vals[i] == 0.0 {
            let flat_left = i > 0 && vals[i - 1] == 0.0;
            let flat_right = i + 1 < xs.len() && vals[i + 1] == 0.0;
            if !(flat_left && flat_right) {
                zeros.push(xs[i]);
            }
        }
    }
    for i in 0..n {
        let (x0, x1) = (xs[i], xs[i + 1]);
        if vals[i] != 0.0 && vals[i + 1] != 0.0 && vals[i].signum() != vals[i + 1].signum() {
            zeros.push(bisect(gv, x0, x1, vals[i], vals[i + 1], tol)?);
        }
        if ders[i] != 0.0 && ders[i + 1] != 0.0 && ders[i].signum() != ders[i + 1].signum() {
            let xc = bisect(gd, x0, x1, ders[i], ders[i + 1], tol)?;
            let gc = g.eval(xc, 0.0)?;
            if gc.abs() <= 1e-12 * scale {
                zeros.push(xc);
            }
        }
    }
    zeros.sort_by(|p, q| p.partial_cmp(q).unwrap());
    Ok((merge_close(&zeros, 1e-10), diagnostics))
}
