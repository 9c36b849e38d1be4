//! Section-to-section transition maps and Σ displacement functions.

use crate::error::{PwsError, Result};
use crate::flow::{integrate_smooth, Direction, LineStop, SmoothArc, SmoothOptions, SmoothTerminal};
use crate::system::{Side, Subsystem};
use crate::tangency::multiplicity_at;
use crate::unfolding::PsiSpec;

/// Straight segment `anchor + r·N`, `|r| < eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub anchor: (f64, f64),
    pub dir: (f64, f64),
    pub eps: f64,
}

impl Section {
    pub fn new(anchor: (f64, f64), dir: (f64, f64), eps: f64) -> Result<Self> {
        let n = dir.0.hypot(dir.1);
        if !(n > 0.0) || !(eps > 0.0) {
            return Err(PwsError::Invalid("section needs a nonzero direction and eps > 0".into()));
        }
        Ok(Section { anchor, dir: (dir.0 / n, dir.1 / n), eps })
    }

    /// Horizontal segment on Σ at `x`.
    pub fn on_sigma(x: f64, eps: f64) -> Result<Self> {
        Section::new((x, 0.0), (1.0, 0.0), eps)
    }

    pub fn vertical(x: f64, y: f64, eps: f64) -> Result<Self> {
        Section::new((x, y), (0.0, 1.0), eps)
    }

    pub fn point(&self, r: f64) -> (f64, f64) {
        (self.anchor.0 + r * self.dir.0, self.anchor.1 + r * self.dir.1)
    }

    /// Signed offset of `p` along the section direction.
    pub fn offset(&self, p: (f64, f64)) -> f64 {
        (p.0 - self.anchor.0) * self.dir.0 + (p.1 - self.anchor.1) * self.dir.1
    }

    pub fn line(&self) -> LineStop {
        LineStop { anchor: self.anchor, normal: (-self.dir.1, self.dir.0) }
    }
}

/// `det(Z, N) = f·N₂ − g·N₁`.
pub fn det(z: (f64, f64), n: (f64, f64)) -> f64 {
    z.0 * n.1 - z.1 * n.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub smooth: SmoothOptions,
    /// Arrival with `|det(Z, N₁)| ≤ arrival_tol · |Z|` is tangential.
    pub arrival_tol: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        let smooth = SmoothOptions {
            sigma_stop: false,
            t_max: 1e3,
            stepper: crate::flow::StepperOptions { rtol: 1e-13, atol: 1e-15, ..Default::default() },
            ..Default::default()
        };
        MapOptions { smooth, arrival_tol: 1e-9 }
    }
}

fn transit(field: &Subsystem, from: (f64, f64), s1: &Section, direction: Direction, opts: &MapOptions) -> Result<SmoothArc> {
    let mut o = opts.smooth;
    o.line = Some(s1.line());
    let arc = integrate_smooth(field, Side::Upper, from, direction, &o)?;
    if arc.terminal != SmoothTerminal::Line {
        return Err(PwsError::NoArrival(format!("from ({}, {}) ended with {:?}", from.0, from.1, arc.terminal)));
    }
    let (f, g) = field.eval(arc.end.1, arc.end.2)?;
    if det((f, g), s1.dir).abs() <= opts.arrival_tol * f.hypot(g) {
        return Err(PwsError::TangentialArrival { x: arc.end.1, y: arc.end.2 });
    }
    Ok(arc)
}

/// Offset along `s1` of the orbit from `s0.point(r)`.
pub fn transition_map(field: &Subsystem, s0: &Section, s1: &Section, r: f64, direction: Direction, opts: &MapOptions) -> Result<f64> {
    if r.abs() >= s0.eps {
        return Err(PwsError::Invalid(format!("|r| = {} outside the section half-width {}", r.abs(), s0.eps)));
    }
    let arc = transit(field, s0.point(r), s1, direction, opts)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(s1.offset((arc.end.1, arc.end.2)))
}

/// Section through the arrival point of the base orbit from `s0.anchor`
/// on the line through `through` with direction `dir`.
pub fn arrival_section(
    field: &Subsystem,
    s0: &Section,
    through: (f64, f64),
    dir: (f64, f64),
    eps: f64,
    direction: Direction,
    opts: &MapOptions,
) -> Result<Section> {
    let probe = Section::new(through, dir, eps)?;
    let arc = transit(field, s0.anchor, &probe, direction, opts)?;
    Section::new((arc.end.1, arc.end.2), dir, eps)
}

struct BaseOrbit {
    div: f64,
    arrival: (f64, f64),
}

fn base_orbit(field: &Subsystem, s0: &Section, s1: &Section, opts: &MapOptions) -> Result<BaseOrbit> {
    let mut o = *opts;
    o.smooth.track_divergence = true;
    let arc = transit(field, s0.anchor, s1, Direction::Forward, &o)?;
    Ok(BaseOrbit { div: arc.divergence_integral, arrival: (arc.end.1, arc.end.2) })
}

/// `V₁ = (Δ₀/Δ₁)·exp(∫ div Z)` along the base orbit, with Δ₁ taken at the
/// arrival point.
pub fn regular_leading_coefficient(field: &Subsystem, s0: &Section, s1: &Section, opts: &MapOptions) -> Result<f64> {
    let z0 = field.eval(s0.anchor.0, s0.anchor.1)?;
    let d0 = det(z0, s0.dir);
    if d0.abs() <= 1e-12 * z0.0.hypot(z0.1) {
        return Err(PwsError::TangentialDeparture);
    }
    let b = base_orbit(field, s0, s1, opts)?;
    let z1 = field.eval(b.arrival.0, b.arrival.1)?;
    let d1 = det(z1, s1.dir);
    Ok(d0 / d1 * b.div.exp())
}

/// Closed form of the leading coefficient of order `m + 1` for a
/// departure tangent to a horizontal section:
/// `∂ᵐg · N₀₁^{m+1} / ((m+1)! Δ₁) · exp(∫ div Z)`.
///
/// With `det(a, b) = a₁b₂ − a₂b₁` the oriented map satisfies
/// `V ≈ −V_{m+1} r^{m+1}`; callers compare magnitudes and check the sign
/// with [`oriented_tangent_coefficient`].
pub fn tangent_leading_coefficient(field: &Subsystem, s0: &Section, s1: &Section, m: usize, opts: &MapOptions) -> Result<f64> {
    if s0.dir.1.abs() > 1e-15 {
        return Err(PwsError::Invalid("departure section must be horizontal".into()));
    }
    let (x0, y0) = s0.anchor;
    let f0 = field.f.eval(x0, y0)?;
    let shifted = Shift { inner: field, y0 };
    let detected = multiplicity_at(&shifted, f0, x0, m.max(1) + 4)?;
    if detected != m {
        return Err(PwsError::OrderMismatch { claimed: m, detected });
    }
    let ders = field.g.x_derivatives(x0, y0, m)?;
    let b = base_orbit(field, s0, s1, opts)?;
    let z1 = field.eval(b.arrival.0, b.arrival.1)?;
    let d1 = det(z1, s1.dir);
    let mut fact = 1.0;
    for i in 2..=m + 1 {
        fact *= i as f64;
    }
    Ok(ders[m] * s0.dir.0.powi(m as i32 + 1) / (fact * d1) * b.div.exp())
}

/// Leading coefficient of the oriented map `V(r)` in the tangent case.
pub fn oriented_tangent_coefficient(field: &Subsystem, s0: &Section, s1: &Section, m: usize, opts: &MapOptions) -> Result<f64> {
    Ok(-tangent_leading_coefficient(field, s0, s1, m, opts)?)
}

/// `g(x, y + y0)` so tangency detection can run on a horizontal line
/// other than Σ.
#[derive(Debug)]
struct Shift<'a> {
    inner: &'a Subsystem,
    y0: f64,
}

impl crate::scalar::Scalar for Shift<'_> {
    fn eval(&self, x: f64, y: f64) -> std::result::Result<f64, field_expr::EvalError> {
        self.inner.g.eval(x, y + self.y0)
    }

    fn series(&self, x: &field_expr::Series, y: &field_expr::Series) -> std::result::Result<field_expr::Series, field_expr::EvalError> {
        self.inner.g.series(x, &y.add_scalar(self.y0))
    }

    fn describe(&self) -> String {
        format!("shifted {}", self.inner.g.describe())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMapSample {
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub order: usize,
    pub coefficient: f64,
    /// Largest relative misfit of `coefficient · r^order` (with the
    /// linear correction) over the grid.
    pub residual: f64,
}

/// Sample `V` on a geometric grid over `[r_lo, r_hi]` and fit the leading
/// order and coefficient.
pub fn sample_transition_map(
    field: &Subsystem,
    s0: &Section,
    s1: &Section,
    r_lo: f64,
    r_hi: f64,
    n: usize,
    opts: &MapOptions,
) -> Result<TransitionMapSample> {
    let n = n.max(3);
    let r: Vec<f64> = (0..n).map(|i| r_lo * (r_hi / r_lo).powf(i as f64 / (n - 1) as f64)).collect();
    let v = r.iter().map(|&ri| transition_map(field, s0, s1, ri, Direction::Forward, opts)).collect::<Result<Vec<_>>>()?;
    fit_leading_term(&r, &v)
}

/// Least-squares slope of `log|V|` against `log r` gives the order; a
/// linear fit of `V / r^p` in `r` gives the coefficient.
pub fn fit_leading_term(r: &[f64], v: &[f64]) -> Result<TransitionMapSample> {
    if r.len() != v.len() || r.len() < 3 {
        return Err(PwsError::Invalid("need at least three samples".into()));
    }
    if v.iter().any(|x| *x == 0.0) {
        return Err(PwsError::Invalid("map vanishes on the sample grid".into()));
    }
    let lx: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = v.iter().map(|x| x.abs().ln()).collect();
    let (slope, _) = linear_fit(&lx, &ly);
    let order = slope.round().max(1.0) as usize;
    let q: Vec<f64> = r.iter().zip(v).map(|(ri, vi)| vi / ri.powi(order as i32)).collect();
    let (c1, c0) = linear_fit(r, &q);
    let residual = r
        .iter()
        .zip(v)
        .map(|(ri, vi)| {
            let model = (c0 + c1 * ri) * ri.powi(order as i32);
            ((vi - model) / vi).abs()
        })
        .fold(0.0, f64::max);
    Ok(TransitionMapSample { r: r.to_vec(), v: v.to_vec(), order, coefficient: c0, residual })
}

/// `(slope, intercept)` of the least-squares line.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

/// Legs of a Σ-to-Σ return: the first leg leaves `(x, 0)` into
/// `first_side` and lands on Σ at `P`; the second leaves `(P, 0)` into
/// `second_side` and is followed to the vertical line through `x`.
#[derive(Debug, Clone, Copy)]
pub struct Displacement<'a> {
    pub first: &'a Subsystem,
    pub first_side: Side,
    pub second: &'a Subsystem,
    pub second_side: Side,
    pub psi: Option<&'a PsiSpec>,
    pub opts: SmoothOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementValue {
    /// `Y(P(x), x) − ψ(x)`.
    pub value: f64,
    pub landing: f64,
    pub height: f64,
}

impl<'a> Displacement<'a> {
    /// Lower leg then upper leg, both forward.
    pub fn lower_then_upper(lower: &'a Subsystem, upper: &'a Subsystem, psi: Option<&'a PsiSpec>, opts: SmoothOptions) -> Self {
        Displacement { first: lower, first_side: Side::Lower, second: upper, second_side: Side::Upper, psi, opts }
    }

    /// Σ landing of the first leg from `(x, 0)`.
    pub fn landing(&self, x: f64) -> Result<f64> {
        let mut o = self.opts;
        o.sigma_stop = true;
        o.line = None;
        let a = integrate_smooth(self.first, self.first_side, (x, 0.0), Direction::Forward, &o)?;
        if a.terminal != SmoothTerminal::Sigma || a.duration() == 0.0 {
            return Err(PwsError::NoArrival(format!("first leg from x={x} ended with {:?}", a.terminal)));
        }
        Ok(a.end.1)
    }

    /// Height at the vertical line `x = target` of the second leg from `(p, 0)`.
    pub fn height(&self, p: f64, target: f64) -> Result<f64> {
        let mut o = self.opts;
        o.sigma_stop = false;
        o.line = Some(LineStop::vertical(target));
        let a = integrate_smooth(self.second, self.second_side, (p, 0.0), Direction::Forward, &o)?;
        if a.terminal != SmoothTerminal::Line {
            return Err(PwsError::NoArrival(format!("second leg from x={p} ended with {:?}", a.terminal)));
        }
        Ok(a.end.2)
    }

    pub fn eval(&self, x: f64) -> Result<DisplacementValue> {
        let p = self.landing(x)?;
        let y = self.height(p, x)?;
        let psi = self.psi.map_or(0.0, |s| s.value(x));
        Ok(DisplacementValue { value: y - psi, landing: p, height: y })
    }
}

pub fn displacement_sigma(d: &Displacement<'_>, from_x: f64) -> Result<DisplacementValue> {
    d.eval(from_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::expr_field;

    fn sub(f: &str, g: &str) -> Subsystem {
        Subsystem::new(expr_field(f).unwrap(), expr_field(g).unwrap())
    }

    #[test]
    fn translation_flow_is_identity() {
        let z = sub("1", "0");
        let s0 = Section::vertical(0.0, 0.0, 0.5).unwrap();
        let s1 = Section::vertical(1.0, 0.0, 0.5).unwrap();
        for &r in &[-0.3, 0.0, 0.01, 0.2] {
            let v = transition_map(&z, &s0, &s1, r, Direction::Forward, &MapOptions::default()).unwrap();
            assert!((v - r).abs() < 1e-14);
        }
        assert!((regular_leading_coefficient(&z, &s0, &s1, &MapOptions::default()).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_tangency_map() {
        let z = sub("1", "x^3");
        let o = MapOptions::default();
        let s0 = Section::on_sigma(0.0, 0.5).unwrap();
        let s1 = arrival_section(&z, &s0, (1.0, 0.0), (0.0, 1.0), 0.5, Direction::Forward, &o).unwrap();
        assert!((s1.anchor.1 - 0.25).abs() < 1e-13);
        for &r in &[0.05, 0.1, 0.3] {
            let v = transition_map(&z, &s0, &s1, r, Direction::Forward, &o).unwrap();
            assert!((v + r.powi(4) / 4.0).abs() < 1e-13);
        }
        assert_eq!(transition_map(&z, &s0, &s1, 0.0, Direction::Forward, &o).unwrap(), 0.0);
        let c = tangent_leading_coefficient(&z, &s0, &s1, 3, &o).unwrap();
        assert!((c.abs() - 0.25).abs() < 1e-12);
        assert!((oriented_tangent_coefficient(&z, &s0, &s1, 3, &o).unwrap() + 0.25).abs() < 1e-12);
        assert!(matches!(
            tangent_leading_coefficient(&z, &s0, &s1, 2, &o),
            Err(PwsError::OrderMismatch { claimed: 2, detected: 3 })
        ));
        assert!(matches!(regular_leading_coefficient(&z, &s0, &s1, &o), Err(PwsError::TangentialDeparture)));
    }

    #[test]
    fn exponential_growth_coefficient() {
        let z = sub("1", "y");
        let s0 = Section::vertical(0.0, 0.0, 0.5).unwrap();
        let s1 = Section::vertical(1.0, 0.0, 0.5).unwrap();
        let o = MapOptions::default();
        let v1 = regular_leading_coefficient(&z, &s0, &s1, &o).unwrap();
        assert!((v1 - std::f64::consts::E).abs() < 1e-10);
        let fit = sample_transition_map(&z, &s0, &s1, 1e-3, 1e-2, 8, &o).unwrap();
        assert_eq!(fit.order, 1);
        assert!((fit.coefficient - v1).abs() < 1e-8);
    }

    #[test]
    fn misses_and_tangential_arrivals() {
        let z = sub("1", "0");
        let s0 = Section::vertical(0.0, 0.0, 0.5).unwrap();
        let behind = Section::vertical(-1.0, 0.0, 0.5).unwrap();
        let mut o = MapOptions::default();
        o.smooth.t_max = 5.0;
        assert!(matches!(transition_map(&z, &s0, &behind, 0.1, Direction::Forward, &o), Err(PwsError::NoArrival(_))));
        let z = sub("0", "1");
        let s0 = Section::on_sigma(0.0, 0.5).unwrap();
        let s1 = Section::new((0.0, 1.0), (0.0, 1.0), 0.5).unwrap();
        assert!(transition_map(&z, &s0, &s1, 0.1, Direction::Forward, &o).is_err());
    }

    #[test]
    fn mirror_system_closes_everywhere() {
        let up = sub("1", "-x");
        let lo = sub("-1", "-x");
        let opts = SmoothOptions {
            stepper: crate::flow::StepperOptions { rtol: 1e-13, atol: 1e-15, ..Default::default() },
            ..Default::default()
        };
        let d = Displacement::lower_then_upper(&lo, &up, None, opts);
        for &x in &[0.1, 0.4, 0.9] {
            let v = displacement_sigma(&d, x).unwrap();
            assert!((v.landing + x).abs() < 1e-12);
            assert!(v.value.abs() < 1e-12);
        }
        let raised = PsiSpec::fallback(1, 1.0, -5.0, -4.0).unwrap();
        let d = Displacement::lower_then_upper(&lo, &up, Some(&raised), opts);
        assert!(displacement_sigma(&d, 0.5).unwrap().value < 0.0);
    }
}
