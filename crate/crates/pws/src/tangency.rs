//! Tangent points on Σ: multiplicity, visibility and type labels.

use std::fmt;

use crate::error::{PwsError, Result};
use crate::scalar::Scalar;
use crate::system::{PwsSystem, Side, SigmaDecomposition};

pub const DEFAULT_EPS_DER: f64 = 1e-8;
pub const DEFAULT_MAX_ORDER: usize = 12;

/// How the local tangent orbit sits relative to the subsystem's own
/// closed half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Visibility {
    V,
    I,
    L,
    R,
}

impl Visibility {
    pub fn letter(self) -> char {
        match self {
            Visibility::V => 'V',
            Visibility::I => 'I',
            Visibility::L => 'L',
            Visibility::R => 'R',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'V' => Some(Visibility::V),
            'I' => Some(Visibility::I),
            'L' => Some(Visibility::L),
            'R' => Some(Visibility::R),
            _ => None,
        }
    }
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentPointRecord {
    pub x0: f64,
    pub m_plus: usize,
    pub m_minus: usize,
    pub vis_plus: Option<Visibility>,
    pub vis_minus: Option<Visibility>,
    pub label: String,
}

impl TangentPointRecord {
    pub fn new(x0: f64, m_plus: usize, m_minus: usize, vis_plus: Option<Visibility>, vis_minus: Option<Visibility>) -> Self {
        let label = make_label(vis_plus, vis_minus);
        TangentPointRecord { x0, m_plus, m_minus, vis_plus, vis_minus, label }
    }

    pub fn multiplicity(&self) -> (usize, usize) {
        (self.m_plus, self.m_minus)
    }

    pub fn visibility(&self, side: Side) -> Option<Visibility> {
        match side {
            Side::Upper => self.vis_plus,
            Side::Lower => self.vis_minus,
        }
    }

    /// Check the parity rule and the None-iff-zero rule.
    pub fn is_consistent(&self) -> bool {
        fn ok(m: usize, v: Option<Visibility>) -> bool {
            match v {
                None => m == 0,
                Some(Visibility::V | Visibility::I) => m % 2 == 1,
                Some(Visibility::L | Visibility::R) => m > 0 && m % 2 == 0,
            }
        }
        self.m_plus + self.m_minus >= 1 && ok(self.m_plus, self.vis_plus) && ok(self.m_minus, self.vis_minus)
    }
}

/// Upper letter then lower letter, `·` for a regular side.
pub fn make_label(vis_plus: Option<Visibility>, vis_minus: Option<Visibility>) -> String {
    let c = |v: Option<Visibility>| v.map(|v| v.letter()).unwrap_or('·');
    format!("{}{}", c(vis_plus), c(vis_minus))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangencyOptions {
    pub eps_der: f64,
    pub max_order: usize,
}

impl Default for TangencyOptions {
    fn default() -> Self {
        TangencyOptions { eps_der: DEFAULT_EPS_DER, max_order: DEFAULT_MAX_ORDER }
    }
}

/// Order of the first x-derivative of `g(·,0)` at `x0` above threshold.
/// The threshold is `eps · max(1, largest Taylor coefficient up to max_order)`.
pub fn multiplicity_at(g: &dyn Scalar, f_at: f64, x0: f64, max_order: usize) -> Result<usize> {
    multiplicity_with(g, f_at, x0, TangencyOptions { max_order, ..Default::default() })
}

pub fn multiplicity_with(g: &dyn Scalar, f_at: f64, x0: f64, opts: TangencyOptions) -> Result<usize> {
    if f_at == 0.0 {
        return Err(PwsError::Invalid(format!("f vanishes at x0={x0}")));
    }
    if opts.max_order == 0 {
        return Err(PwsError::Invalid("max_order must be at least 1".into()));
    }
    let coeffs = taylor_coefficients(g, x0, opts.max_order)?;
    let scale = coeffs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let eps = opts.eps_der * scale;
    for (k, c) in coeffs.iter().enumerate() {
        if c.abs() > eps {
            return Ok(k);
        }
    }
    Err(PwsError::Indeterminate { x: x0, max_order: opts.max_order })
}

/// `g^(k)(x0,0)/k!` for `k = 0..=n`.
fn taylor_coefficients(g: &dyn Scalar, x0: f64, n: usize) -> Result<Vec<f64>> {
    let d = g.x_derivatives(x0, 0.0, n)?;
    let mut fact = 1.0;
    Ok(d.iter()
        .enumerate()
        .map(|(k, v)| {
            if k > 0 {
                fact *= k as f64;
            }
            v / fact
        })
        .collect())
}

/// Leading coefficient `c` of the tangent orbit `y ≈ c (x−x0)^{m+1}`.
pub fn orbit_coefficient(f: &dyn Scalar, g: &dyn Scalar, x0: f64, m: usize) -> Result<f64> {
    let f_at = f.eval(x0, 0.0)?;
    if f_at == 0.0 {
        return Err(PwsError::Invalid(format!("f vanishes at x0={x0}")));
    }
    let cm = taylor_coefficients(g, x0, m)?[m];
    if cm == 0.0 {
        return Err(PwsError::ZeroLeadingCoefficient { x: x0, m });
    }
    Ok(cm / f_at / (m as f64 + 1.0))
}

/// Classify a tangency of order `m ≥ 1` for the subsystem living on `side`.
pub fn visibility(f: &dyn Scalar, g: &dyn Scalar, side: Side, x0: f64, m: usize) -> Result<Visibility> {
    if m == 0 {
        return Err(PwsError::Invalid("visibility needs m >= 1".into()));
    }
    let c = orbit_coefficient(f, g, x0, m)?;
    Ok(classify_branches(c, m, side))
}

/// Which branches of `y = c t^{m+1}` lie in the own half-plane of `side`.
pub fn classify_branches(c: f64, m: usize, side: Side) -> Visibility {
    let s = side.sign();
    let left_sign = if (m + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let right_in = s * c > 0.0;
    let left_in = s * c * left_sign > 0.0;
    match (left_in, right_in) {
        (true, true) => Visibility::V,
        (false, false) => Visibility::I,
        (true, false) => Visibility::L,
        (false, true) => Visibility::R,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TangentScan {
    pub records: Vec<TangentPointRecord>,
    /// Candidates where `f⁺` or `f⁻` vanishes on Σ.
    pub boundary_degenerate: Vec<f64>,
    /// Candidates whose multiplicity exceeds `max_order` on some side.
    pub indeterminate: Vec<f64>,
}

pub fn find_tangent_points(sys: &PwsSystem, dec: &SigmaDecomposition) -> Result<TangentScan> {
    find_tangent_points_with(sys, dec, TangencyOptions::default())
}

pub fn find_tangent_points_with(sys: &PwsSystem, dec: &SigmaDecomposition, opts: TangencyOptions) -> Result<TangentScan> {
    let mut scan = TangentScan::default();
    'cand: for &x0 in &dec.tangency_candidates {
        let fp = sys.upper.f.eval(x0, 0.0)?;
        let fm = sys.lower.f.eval(x0, 0.0)?;
        if fp == 0.0 || fm == 0.0 {
            scan.boundary_degenerate.push(x0);
            continue;
        }
        let mut ms = [0usize; 2];
        let mut vs = [None; 2];
        for (i, side) in [Side::Upper, Side::Lower].into_iter().enumerate() {
            let sub = sys.side(side);
            let f_at = if i == 0 { fp } else { fm };
            match multiplicity_with(sub.g.as_ref(), f_at, x0, opts) {
                Ok(m) => {
                    ms[i] = m;
                    if m > 0 {
                        vs[i] = Some(visibility(sub.f.as_ref(), sub.g.as_ref(), side, x0, m)?);
                    }
                }
                Err(PwsError::Indeterminate { .. }) => {
                    scan.indeterminate.push(x0);
                    continue 'cand;
                }
                Err(e) => return Err(e),
            }
        }
        if ms[0] + ms[1] == 0 {
            continue;
        }
        scan.records.push(TangentPointRecord::new(x0, ms[0], ms[1], vs[0], vs[1]));
    }
    Ok(scan)
}

/// Tangent points of an unfolded system within `radius` of `base.x0`,
/// checked against the splitting bounds.
pub fn count_bifurcating(
    sys_unfolded: &PwsSystem,
    base: &TangentPointRecord,
    radius: f64,
) -> Result<(usize, Vec<TangentPointRecord>)> {
    if !(radius > 0.0) {
        return Err(PwsError::Invalid("radius must be positive".into()));
    }
    let a = (base.x0 - radius).max(sys_unfolded.window.x_lo);
    let b = (base.x0 + radius).min(sys_unfolded.window.x_hi);
    let dec = sys_unfolded.decompose_sigma_on(a, b, (b - a) * 1e-4)?;
    let scan = find_tangent_points(sys_unfolded, &dec)?;
    if let Some(x) = scan.indeterminate.first() {
        return Err(PwsError::Indeterminate { x: *x, max_order: DEFAULT_MAX_ORDER });
    }
    let recs: Vec<_> = scan.records.into_iter().filter(|r| (r.x0 - base.x0).abs() < radius).collect();
    let l = recs.len();
    let sp: usize = recs.iter().map(|r| r.m_plus).sum();
    let sm: usize = recs.iter().map(|r| r.m_minus).sum();
    if l > base.m_plus + base.m_minus || sp > base.m_plus || sm > base.m_minus {
        return Err(PwsError::BoundViolation(format!(
            "{l} points with multiplicity sums ({sp},{sm}) from base ({},{})",
            base.m_plus, base.m_minus
        )));
    }
    Ok((l, recs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::expr_field;
    use crate::system::Window;

    fn win() -> Window {
        Window::new(-1.0, 1.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn multiplicity_examples() {
        let g = expr_field("x^3").unwrap();
        assert_eq!(multiplicity_at(g.as_ref(), 1.0, 0.0, 12).unwrap(), 3);
        let g = expr_field("sin(x)").unwrap();
        assert_eq!(multiplicity_at(g.as_ref(), 1.0, 0.0, 12).unwrap(), 1);
        let g = expr_field("x^2*(x-1)").unwrap();
        assert_eq!(multiplicity_at(g.as_ref(), 1.0, 0.0, 12).unwrap(), 2);
        assert_eq!(multiplicity_at(g.as_ref(), 1.0, 1.0, 12).unwrap(), 1);
        assert_eq!(multiplicity_at(g.as_ref(), 1.0, 0.5, 12).unwrap(), 0);
        let g = expr_field("x^13").unwrap();
        assert!(matches!(multiplicity_at(g.as_ref(), 1.0, 0.0, 12), Err(PwsError::Indeterminate { .. })));
    }

    #[test]
    fn visibility_examples() {
        let one = expr_field("1").unwrap();
        let v = |g: &str, side, m| visibility(one.as_ref(), expr_field(g).unwrap().as_ref(), side, 0.0, m).unwrap();
        assert_eq!(v("x", Side::Upper, 1), Visibility::V);
        assert_eq!(v("-x", Side::Upper, 1), Visibility::I);
        assert_eq!(v("x^2", Side::Upper, 2), Visibility::R);
        assert_eq!(v("-x^2", Side::Upper, 2), Visibility::L);
        assert_eq!(v("x", Side::Lower, 1), Visibility::I);
        assert_eq!(v("-x", Side::Lower, 1), Visibility::V);
        assert_eq!(v("x^2", Side::Lower, 2), Visibility::L);
        assert!(matches!(
            visibility(one.as_ref(), expr_field("x^2").unwrap().as_ref(), Side::Upper, 0.0, 1),
            Err(PwsError::ZeroLeadingCoefficient { .. })
        ));
    }

    #[test]
    fn tangent_point_examples() {
        let s = PwsSystem::from_sources("1", "x", "1", "1", win()).unwrap();
        let scan = find_tangent_points(&s, &s.decompose_sigma(2e-3).unwrap()).unwrap();
        assert_eq!(scan.records.len(), 1);
        let r = &scan.records[0];
        assert_eq!((r.m_plus, r.m_minus), (1, 0));
        assert_eq!(r.label, "V·");

        let s = PwsSystem::from_sources("1", "x", "1", "-x", win()).unwrap();
        let scan = find_tangent_points(&s, &s.decompose_sigma(2e-3).unwrap()).unwrap();
        assert_eq!(scan.records.len(), 1);
        assert_eq!(scan.records[0].multiplicity(), (1, 1));
        assert_eq!(scan.records[0].label, "VV");

        let s = PwsSystem::from_sources("1", "1", "1", "1", win()).unwrap();
        assert!(find_tangent_points(&s, &s.decompose_sigma(2e-3).unwrap()).unwrap().records.is_empty());

        let s = PwsSystem::from_sources("x", "x", "1", "1", win()).unwrap();
        let scan = find_tangent_points(&s, &s.decompose_sigma(2e-3).unwrap()).unwrap();
        assert!(scan.records.is_empty());
        assert_eq!(scan.boundary_degenerate.len(), 1);
    }

    #[test]
    fn bifurcating_counts() {
        let base = TangentPointRecord::new(0.0, 3, 0, Some(Visibility::V), None);
        let s = PwsSystem::from_sources("1", "(x+0.1)*x*(x-0.1)", "1", "1", win()).unwrap();
        let (l, recs) = count_bifurcating(&s, &base, 0.5).unwrap();
        assert_eq!(l, 3);
        let vis: Vec<_> = recs.iter().map(|r| r.vis_plus.unwrap()).collect();
        assert_eq!(vis, vec![Visibility::V, Visibility::I, Visibility::V]);

        let s = PwsSystem::from_sources("1", "x^3", "1", "1", win()).unwrap();
        let (l, recs) = count_bifurcating(&s, &base, 0.5).unwrap();
        assert_eq!(l, 1);
        assert_eq!(recs[0].multiplicity(), (3, 0));

        let base2 = TangentPointRecord::new(0.0, 2, 0, Some(Visibility::R), None);
        let s = PwsSystem::from_sources("1", "(x-0.05)^2", "1", "1", win()).unwrap();
        let (l, recs) = count_bifurcating(&s, &base2, 0.5).unwrap();
        assert_eq!(l, 1);
        assert!((recs[0].x0 - 0.05).abs() < 1e-9);
        assert_eq!(recs[0].multiplicity(), (2, 0));

        let s = PwsSystem::from_sources("1", "x*(x-0.1)*(x+0.1)", "1", "1", win()).unwrap();
        assert!(matches!(count_bifurcating(&s, &base2, 0.5), Err(PwsError::BoundViolation(_))));
    }
}
