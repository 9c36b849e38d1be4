//! Cutoff functions, the block function ψ, and the transition and
//! unfolded systems built from a normal-form base.

use std::sync::Arc;

use field_expr::{EvalError, Expr, ScalarField, Series};

use crate::error::{PwsError, Result};
use crate::flow::{integrate_smooth, Direction, SmoothOptions, SmoothTerminal};
use crate::scalar::{Field, Scalar};
use crate::system::{NormalForm, PwsSystem, Side, Subsystem};

const KNOT_TOL: f64 = 1e-14;

/// `(value, first derivative, second derivative)` of the rising cutoff
/// (`rising = true`) or the falling one.
pub fn cutoff(x: f64, r1: f64, r2: f64, rising: bool) -> (f64, f64, f64) {
    let (lo, hi) = if rising { (0.0, 1.0) } else { (1.0, 0.0) };
    if x <= r1 {
        return (lo, 0.0, 0.0);
    }
    if x >= r2 {
        return (hi, 0.0, 0.0);
    }
    let (a, b) = (x - r1, x - r2);
    let eta = 1.0 / a + 1.0 / b;
    let eta1 = -1.0 / (a * a) - 1.0 / (b * b);
    let eta2 = 2.0 / (a * a * a) + 2.0 / (b * b * b);
    // value = logistic(-sigma * eta)
    let sigma = if rising { 1.0 } else { -1.0 };
    let z = -sigma * eta;
    let (v, s) = if z >= 0.0 {
        let e = (-z).exp();
        (1.0 / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
    } else {
        let e = z.exp();
        (e / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
    };
    let z1 = -sigma * eta1;
    let z2 = -sigma * eta2;
    let d1 = s * z1;
    let d2 = d1 * (1.0 - 2.0 * v) * z1 + s * z2;
    (v, d1, d2)
}

pub fn cutoff_up(x: f64, r1: f64, r2: f64) -> f64 {
    cutoff(x, r1, r2, true).0
}

pub fn cutoff_down(x: f64, r1: f64, r2: f64) -> f64 {
    cutoff(x, r1, r2, false).0
}

/// Taylor coefficients of the cutoff at `x` in the offset `u`, order `n`.
fn cutoff_taylor(x: f64, r1: f64, r2: f64, rising: bool, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    if x <= r1 || x >= r2 {
        c[0] = if (x >= r2) == rising { 1.0 } else { 0.0 };
        return c;
    }
    let u = Series::variable(x, n);
    let ta = u.add_scalar(-r1).recip().expect("inside the open interval");
    let tb = u.add_scalar(-r2).recip().expect("inside the open interval");
    let eta = &ta + &tb;
    let z = if rising { -&eta } else { eta };
    let one = Series::constant(1.0, n);
    let v = if z.value() >= 0.0 {
        let e = (-&z).exp();
        one.div(&(&one + &e)).unwrap()
    } else {
        let e = z.exp();
        e.div(&(&one + &e)).unwrap()
    };
    v.coeffs().to_vec()
}

/// Block function with `d` bumps, or the single-step fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSpec {
    pub d: usize,
    /// `k_1..k_{2d+1}` knots followed by `k_{2d+2}..k_{3d+1}` heights.
    pub k: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
}

impl PsiSpec {
    pub fn new(d: usize, k: Vec<f64>, r1: f64, r2: f64) -> Result<Self> {
        if d == 0 {
            return Err(PwsError::Invalid("block count d must be positive".into()));
        }
        if k.len() != 3 * d + 1 {
            return Err(PwsError::Invalid(format!("k needs {} entries, got {}", 3 * d + 1, k.len())));
        }
        let s = PsiSpec { d, k, r1, r2 };
        if !s.in_k() && !(r1 < r2) {
            return Err(PwsError::Invalid(format!("fallback cutoff needs r1 < r2, got ({r1}, {r2})")));
        }
        Ok(s)
    }

    /// Bumps over `knots` (length 2d+1, ascending) with the given heights.
    pub fn blocks(knots: &[f64], heights: &[f64]) -> Result<Self> {
        let d = heights.len();
        if knots.len() != 2 * d + 1 {
            return Err(PwsError::Invalid("knots must have 2d+1 entries".into()));
        }
        let mut k = knots.to_vec();
        k.extend_from_slice(heights);
        let s = PsiSpec::new(d, k, 0.0, 1.0)?;
        if !s.in_k() {
            return Err(PwsError::Invalid("knots must be strictly ascending".into()));
        }
        Ok(s)
    }

    /// `height · h*(x, r1, r2)` with the knot part left at zero.
    pub fn fallback(d: usize, height: f64, r1: f64, r2: f64) -> Result<Self> {
        let mut k = vec![0.0; 3 * d + 1];
        k[2 * d + 1] = height;
        PsiSpec::new(d, k, r1, r2)
    }

    pub fn zero() -> Self {
        PsiSpec { d: 1, k: vec![0.0; 4], r1: 0.0, r2: 1.0 }
    }

    pub fn knots(&self) -> &[f64] {
        &self.k[..2 * self.d + 1]
    }

    pub fn heights(&self) -> &[f64] {
        &self.k[2 * self.d + 1..]
    }

    pub fn in_k(&self) -> bool {
        self.knots().windows(2).all(|w| w[0] < w[1])
    }

    pub fn is_zero(&self) -> bool {
        if self.in_k() {
            self.heights().iter().all(|h| *h == 0.0)
        } else {
            self.k[2 * self.d + 1] == 0.0
        }
    }

    /// Equal gaps inside each block and `|height_i| ≤ c · gap_i^5`.
    pub fn is_admissible(&self, c: f64) -> bool {
        if !self.in_k() {
            return false;
        }
        let kn = self.knots();
        (0..self.d).all(|i| {
            let g1 = kn[2 * i + 1] - kn[2 * i];
            let g2 = kn[2 * i + 2] - kn[2 * i + 1];
            (g1 - g2).abs() <= 1e-12 * g1.abs().max(g2.abs()) && self.heights()[i].abs() <= c * g1.powi(5) * (1.0 + 1e-12)
        })
    }

    /// Piece of ψ containing `x`.
    fn piece(&self, x: f64) -> Piece {
        if !self.in_k() {
            return Piece::Cut(self.k[2 * self.d + 1], self.r1, self.r2, true);
        }
        let kn = self.knots();
        let h = self.heights();
        for (j, &kj) in kn.iter().enumerate() {
            if (x - kj).abs() <= KNOT_TOL * (1.0 + kj.abs()) {
                // peaks sit at odd 0-based offsets
                return if j % 2 == 1 { Piece::Const(h[j / 2]) } else { Piece::Const(0.0) };
            }
        }
        for i in 0..self.d {
            let (a, b, c) = (kn[2 * i], kn[2 * i + 1], kn[2 * i + 2]);
            if x > a && x <= b {
                return Piece::Cut(h[i], a, b, true);
            }
            if x > b && x <= c {
                return Piece::Cut(h[i], b, c, false);
            }
        }
        Piece::Const(0.0)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval3(x).0
    }

    pub fn dx(&self, x: f64) -> f64 {
        self.eval3(x).1
    }

    pub fn dxx(&self, x: f64) -> f64 {
        self.eval3(x).2
    }

    /// `(ψ, ψ̇, ψ̈)` at `x`.
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        match self.piece(x) {
            Piece::Const(v) => (v, 0.0, 0.0),
            Piece::Cut(h, r1, r2, up) => {
                if h == 0.0 {
                    return (0.0, 0.0, 0.0);
                }
                let (v, d1, d2) = cutoff(x, r1, r2, up);
                (h * v, h * d1, h * d2)
            }
        }
    }

    /// Taylor coefficients of ψ at `x` up to order `n`.
    pub fn taylor(&self, x: f64, n: usize) -> Vec<f64> {
        match self.piece(x) {
            Piece::Const(v) => {
                let mut c = vec![0.0; n + 1];
                c[0] = v;
                c
            }
            Piece::Cut(h, r1, r2, up) => {
                if h == 0.0 {
                    return vec![0.0; n + 1];
                }
                cutoff_taylor(x, r1, r2, up, n).into_iter().map(|c| c * h).collect()
            }
        }
    }

    /// Support of ψ̇: the knot span, or `[r1, r2]` for the fallback.
    pub fn support(&self) -> (f64, f64) {
        if self.in_k() {
            let kn = self.knots();
            (kn[0], kn[kn.len() - 1])
        } else {
            (self.r1, self.r2)
        }
    }

    /// Sampled `(sup|ψ|, sup|ψ̇|, sup|ψ̈|)` with `n` points per knot gap.
    pub fn sup_norms(&self, n: usize) -> (f64, f64, f64) {
        let mut pts = Vec::new();
        // the cutoff switches within about 5·gap² of the gap midpoint, so
        // that band gets its own samples
        let mut gap = |a: f64, b: f64| {
            let (mid, band) = (0.5 * (a + b), (6.0 * (b - a) * (b - a)).min(0.5 * (b - a)));
            for i in 0..=n {
                pts.push(a + (b - a) * i as f64 / n as f64);
                pts.push(mid - band + 2.0 * band * i as f64 / n as f64);
            }
        };
        if self.in_k() {
            for w in self.knots().windows(2) {
                gap(w[0], w[1]);
            }
        } else {
            gap(self.r1, self.r2);
        }
        pts.iter().fold((0.0f64, 0.0f64, 0.0f64), |acc, &x| {
            let (a, b, c) = self.eval3(x);
            (acc.0.max(a.abs()), acc.1.max(b.abs()), acc.2.max(c.abs()))
        })
    }
}

enum Piece {
    Const(f64),
    Cut(f64, f64, f64, bool),
}

/// Compose ψ's Taylor coefficients with an affine series argument.
fn psi_series(psi: &PsiSpec, x: &Series, deriv: bool) -> Series {
    let n = x.order();
    let c = x.coeffs();
    let slope = if n >= 1 { c[1] } else { 0.0 };
    let raw = if deriv {
        let t = psi.taylor(c[0], n + 1);
        (0..=n).map(|k| (k + 1) as f64 * t[k + 1]).collect::<Vec<_>>()
    } else {
        psi.taylor(c[0], n)
    };
    let mut p = 1.0;
    let out = raw
        .into_iter()
        .map(|v| {
            let r = v * p;
            p *= slope;
            r
        })
        .collect();
    Series::from_coeffs(out)
}

/// `F(x, y + ψ(x))`.
#[derive(Debug, Clone)]
pub struct ShiftedField {
    pub inner: ScalarField,
    pub psi: Arc<PsiSpec>,
}

impl Scalar for ShiftedField {
    fn eval(&self, x: f64, y: f64) -> std::result::Result<f64, EvalError> {
        self.inner.eval(x, y + self.psi.value(x))
    }

    fn series(&self, x: &Series, y: &Series) -> std::result::Result<Series, EvalError> {
        let yy = y + &psi_series(&self.psi, x, false);
        self.inner.eval_series(x, &yy)
    }

    fn describe(&self) -> String {
        format!("({})[y -> y + psi(x)]", self.inner)
    }
}

/// `G(x, y + ψ(x)) − F(x, y + ψ(x)) · ψ̇(x)`.
#[derive(Debug, Clone)]
pub struct ShearedG {
    pub g: ScalarField,
    pub f: ScalarField,
    pub psi: Arc<PsiSpec>,
}

impl Scalar for ShearedG {
    fn eval(&self, x: f64, y: f64) -> std::result::Result<f64, EvalError> {
        let (p, pd, _) = self.psi.eval3(x);
        let yy = y + p;
        Ok(self.g.eval(x, yy)? - self.f.eval(x, yy)? * pd)
    }

    fn series(&self, x: &Series, y: &Series) -> std::result::Result<Series, EvalError> {
        let yy = y + &psi_series(&self.psi, x, false);
        let pd = psi_series(&self.psi, x, true);
        let g = self.g.eval_series(x, &yy)?;
        let f = self.f.eval_series(x, &yy)?;
        Ok(&g - &(&f * &pd))
    }

    fn describe(&self) -> String {
        format!("({})[y -> y + psi] - ({})[y -> y + psi] * psi'(x)", self.g, self.f)
    }
}

/// `∏ (x − λ_i)`, equal roots grouped into powers; `None` for an empty list.
pub fn root_product(lambda: &[f64]) -> Option<Expr> {
    let mut roots: Vec<f64> = lambda.to_vec();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut groups: Vec<(f64, i32)> = Vec::new();
    for r in roots {
        match groups.last_mut() {
            Some((v, n)) if *v == r => *n += 1,
            _ => groups.push((r, 1)),
        }
    }
    // λ = 0 sits last so an all-zero list reproduces φ·x^m exactly
    groups.sort_by_key(|(v, _)| *v == 0.0);
    let mut out: Option<Expr> = None;
    for (v, n) in groups {
        let base = if v == 0.0 { Expr::x() } else { Expr::Sub(Box::new(Expr::x()), Box::new(Expr::Num(v))) };
        let factor = if n == 1 && v != 0.0 { base } else { Expr::Pow(Box::new(base), n) };
        out = Some(match out {
            None => factor,
            Some(e) => Expr::Mul(Box::new(e), Box::new(factor)),
        });
    }
    out
}

#[derive(Debug, Clone)]
pub struct UnfoldingSpec {
    pub base: PwsSystem,
    pub lambda_plus: Vec<f64>,
    pub lambda_minus: Vec<f64>,
    pub psi_plus: PsiSpec,
    pub psi_minus: PsiSpec,
}

impl UnfoldingSpec {
    pub fn new(
        base: PwsSystem,
        lambda_plus: Vec<f64>,
        lambda_minus: Vec<f64>,
        psi_plus: PsiSpec,
        psi_minus: PsiSpec,
    ) -> Result<Self> {
        let nf = base
            .normal_form
            .as_ref()
            .ok_or_else(|| PwsError::Invalid("base system is not in normal form".into()))?;
        if lambda_plus.len() != nf.m_plus || lambda_minus.len() != nf.m_minus {
            return Err(PwsError::Invalid(format!(
                "lambda lengths ({}, {}) must equal multiplicities ({}, {})",
                lambda_plus.len(),
                lambda_minus.len(),
                nf.m_plus,
                nf.m_minus
            )));
        }
        Ok(UnfoldingSpec { base, lambda_plus, lambda_minus, psi_plus, psi_minus })
    }

    /// Zero λ vectors and zero ψ.
    pub fn identity(base: PwsSystem) -> Result<Self> {
        let nf = base.normal_form.clone().ok_or_else(|| PwsError::Invalid("base system is not in normal form".into()))?;
        UnfoldingSpec::new(base, vec![0.0; nf.m_plus], vec![0.0; nf.m_minus], PsiSpec::zero(), PsiSpec::zero())
    }

    fn nf(&self) -> &NormalForm {
        self.base.normal_form.as_ref().expect("checked in new")
    }

    pub fn psi(&self, side: Side) -> &PsiSpec {
        match side {
            Side::Upper => &self.psi_plus,
            Side::Lower => &self.psi_minus,
        }
    }

    /// `φ± · ∏(x − λ±_i)` as an expression.
    fn transition_g(&self, side: Side) -> Expr {
        let nf = self.nf();
        let (phi, lambda) = match side {
            Side::Upper => (&nf.phi_plus, &self.lambda_plus),
            Side::Lower => (&nf.phi_minus, &self.lambda_minus),
        };
        match root_product(lambda) {
            None => phi.expr().clone(),
            Some(p) => Expr::Mul(Box::new(phi.expr().clone()), Box::new(p)),
        }
    }
}

pub fn build_transition(spec: &UnfoldingSpec) -> PwsSystem {
    let nf = spec.nf();
    let up = Subsystem::new(Arc::new(nf.f_plus.clone()), Arc::new(ScalarField::new(spec.transition_g(Side::Upper))));
    let lo = Subsystem::new(Arc::new(nf.f_minus.clone()), Arc::new(ScalarField::new(spec.transition_g(Side::Lower))));
    PwsSystem { upper: up, lower: lo, window: spec.base.window, normal_form: None }
}

pub fn build_unfolded(spec: &UnfoldingSpec) -> PwsSystem {
    let nf = spec.nf();
    let make = |side: Side, f: &ScalarField| -> Subsystem {
        let psi = spec.psi(side);
        let g = ScalarField::new(spec.transition_g(side));
        if psi.is_zero() {
            return Subsystem::new(Arc::new(f.clone()), Arc::new(g));
        }
        let psi = Arc::new(psi.clone());
        let ff: Field = Arc::new(ShiftedField { inner: f.clone(), psi: psi.clone() });
        let gg: Field = Arc::new(ShearedG { g, f: f.clone(), psi });
        Subsystem::new(ff, gg)
    };
    PwsSystem {
        upper: make(Side::Upper, &nf.f_plus),
        lower: make(Side::Lower, &nf.f_minus),
        window: spec.base.window,
        normal_form: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearReport {
    pub residual: f64,
    /// Time actually compared; shorter than requested if an orbit stopped early.
    pub t_reached: f64,
    pub completed: bool,
}

/// Compare the unfolded orbit from `(x0, y0 − ψ(x0))` with the sheared
/// transition orbit from `(x0, y0)` on the subsystem of `side`.
pub fn shear_conjugacy_check(
    spec: &UnfoldingSpec,
    side: Side,
    x0: f64,
    y0: f64,
    t_span: f64,
    opts: &SmoothOptions,
) -> Result<ShearReport> {
    if t_span <= 0.0 {
        return Ok(ShearReport { residual: 0.0, t_reached: 0.0, completed: true });
    }
    let tr = build_transition(spec);
    let un = build_unfolded(spec);
    let psi = spec.psi(side);
    let mut o = *opts;
    o.t_max = t_span;
    o.window = Some(spec.base.window);
    let a = integrate_smooth(tr.side(side), side, (x0, y0), Direction::Forward, &o)?;
    let b = integrate_smooth(un.side(side), side, (x0, y0 - psi.value(x0)), Direction::Forward, &o)?;
    let t_end = a.duration().min(b.duration());
    let n = 400;
    let mut worst = 0.0f64;
    for i in 0..=n {
        let t = t_end * i as f64 / n as f64;
        let (xa, ya) = a.position(t);
        let (xb, yb) = b.position(t);
        worst = worst.max((xb - xa).hypot(yb - (ya - psi.value(xa))));
    }
    let completed = a.terminal == SmoothTerminal::TimeLimit && b.terminal == SmoothTerminal::TimeLimit;
    Ok(ShearReport { residual: worst, t_reached: t_end, completed })
}

/// Nested block functions with gaps `base_gap · shrink^n` and heights
/// `c · gap^5`.
pub fn admissible_k_family(d: usize, base_gap: f64, shrink: f64, steps: usize) -> Result<Vec<PsiSpec>> {
    admissible_k_family_with(d, base_gap, shrink, steps, 1.0)
}

pub fn admissible_k_family_with(d: usize, base_gap: f64, shrink: f64, steps: usize, c: f64) -> Result<Vec<PsiSpec>> {
    if !(shrink > 0.0 && shrink < 1.0) || steps < 2 || !(base_gap > 0.0) {
        return Err(PwsError::Invalid("need 0 < shrink < 1, steps >= 2, base_gap > 0".into()));
    }
    (0..steps)
        .map(|n| {
            let gap = base_gap * shrink.powi(n as i32);
            let knots: Vec<f64> = (0..=2 * d).map(|j| j as f64 * gap).collect();
            let heights = vec![c * gap.powi(5); d];
            PsiSpec::blocks(&knots, &heights)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Window;

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_up(-1.0, 0.0, 1.0), 0.0);
        assert_eq!(cutoff_up(2.0, 0.0, 1.0), 1.0);
        assert!((cutoff_up(0.5, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((cutoff_up(0.5, 0.0, 1.0) + cutoff_down(0.5, 0.0, 1.0) - 1.0).abs() < 1e-15);
        for &x in &[0.1, 0.37, 0.9] {
            assert!((cutoff_up(x, 0.0, 1.0) + cutoff_down(x, 0.0, 1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cutoff_derivatives_against_differences() {
        for &x in &[0.05, 0.3, 0.5, 0.77, 0.96] {
            let h = 1e-6;
            for up in [true, false] {
                let (_, d1, d2) = cutoff(x, 0.0, 1.0, up);
                let fd1 = (cutoff(x + h, 0.0, 1.0, up).0 - cutoff(x - h, 0.0, 1.0, up).0) / (2.0 * h);
                let fd2 = (cutoff(x + h, 0.0, 1.0, up).1 - cutoff(x - h, 0.0, 1.0, up).1) / (2.0 * h);
                assert!((d1 - fd1).abs() < 1e-7 * (1.0 + d1.abs()));
                assert!((d2 - fd2).abs() < 1e-6 * (1.0 + d2.abs()));
                let t = cutoff_taylor(x, 0.0, 1.0, up, 2);
                assert!((t[1] - d1).abs() < 1e-12 * (1.0 + d1.abs()));
                assert!((2.0 * t[2] - d2).abs() < 1e-10 * (1.0 + d2.abs()));
            }
        }
    }

    #[test]
    fn psi_examples() {
        let c = 0.7;
        let p = PsiSpec::blocks(&[0.0, 1.0, 2.0], &[c]).unwrap();
        assert!((p.value(0.5) - c / 2.0).abs() < 1e-15);
        assert_eq!(p.value(1.0), c);
        assert!((p.value(1.5) - c / 2.0).abs() < 1e-15);
        assert_eq!(p.value(3.0), 0.0);
        assert_eq!(p.value(-1.0), 0.0);
        let z = PsiSpec::blocks(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.sup_norms(50), (0.0, 0.0, 0.0));
        let f = PsiSpec::fallback(1, 2.0, 0.0, 1.0).unwrap();
        assert!(!f.in_k());
        assert_eq!(f.value(5.0), 2.0);
        assert!((f.value(0.5) - 1.0).abs() < 1e-15);
        assert!(PsiSpec::fallback(1, 2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn derivative_bound_single_block() {
        for &delta in &[1.0, 0.3, 0.01] {
            let h = 0.25;
            let p = PsiSpec::blocks(&[0.0, delta, 2.0 * delta], &[h]).unwrap();
            let (_, d1, _) = p.sup_norms(4000);
            assert!(d1 <= 8.0 * h / (delta * delta));
        }
    }

    fn base() -> PwsSystem {
        PwsSystem::from_normal_form(
            ScalarField::parse("1").unwrap(),
            ScalarField::parse("1 + 0.1*y").unwrap(),
            3,
            ScalarField::parse("1").unwrap(),
            ScalarField::parse("1").unwrap(),
            0,
            Window::new(-1.0, 1.0, -1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identity_unfolding_is_bitwise_base() {
        let b = base();
        let spec = UnfoldingSpec::identity(b.clone()).unwrap();
        let t = build_transition(&spec);
        let u = build_unfolded(&spec);
        for i in 0..=10 {
            for j in 0..=10 {
                let (x, y) = (-1.0 + 0.2 * i as f64, -1.0 + 0.2 * j as f64);
                for (s1, s2) in [(&b, &t), (&b, &u)] {
                    assert_eq!(s1.upper.g.eval(x, y).unwrap().to_bits(), s2.upper.g.eval(x, y).unwrap().to_bits());
                    assert_eq!(s1.upper.f.eval(x, y).unwrap().to_bits(), s2.upper.f.eval(x, y).unwrap().to_bits());
                    assert_eq!(s1.lower.g.eval(x, y).unwrap().to_bits(), s2.lower.g.eval(x, y).unwrap().to_bits());
                }
            }
        }
    }

    #[test]
    fn transition_expansion() {
        let d = 0.1;
        let spec = UnfoldingSpec::new(base(), vec![-d, 0.0, d], vec![], PsiSpec::zero(), PsiSpec::zero()).unwrap();
        let t = build_transition(&spec);
        for &x in &[-0.7, -0.1, 0.03, 0.5] {
            let want = x * (x * x - d * d);
            assert!((t.upper.g.eval(x, 0.0).unwrap() - want).abs() < 1e-15);
            assert_eq!(t.lower.g.eval(x, 0.3).unwrap(), 1.0);
        }
    }

    #[test]
    fn plateau_and_tangency_of_unfolded() {
        let d = 0.1;
        let hgt = 0.05;
        let psi = PsiSpec::fallback(1, hgt, -0.9, -0.5).unwrap();
        let spec = UnfoldingSpec::new(base(), vec![-d, 0.0, d], vec![], psi, PsiSpec::zero()).unwrap();
        let u = build_unfolded(&spec);
        let t = build_transition(&spec);
        for &x in &[-0.2, 0.0, 0.4] {
            for &y in &[-0.3, 0.2] {
                let want = t.upper.g.eval(x, y + hgt).unwrap();
                assert_eq!(u.upper.g.eval(x, y).unwrap(), want);
            }
        }
        for &l in &[-d, 0.0, d] {
            assert!(u.upper.g.eval(l, 0.0).unwrap().abs() < 1e-15);
        }
        // series agrees with pointwise values on the ramp
        let x = -0.7;
        let ders = u.upper.g.x_derivatives(x, 0.1, 2).unwrap();
        let h = 1e-5;
        let fd = (u.upper.g.eval(x + h, 0.1).unwrap() - u.upper.g.eval(x - h, 0.1).unwrap()) / (2.0 * h);
        assert!((ders[0] - u.upper.g.eval(x, 0.1).unwrap()).abs() < 1e-14);
        assert!((ders[1] - fd).abs() < 1e-7 * (1.0 + fd.abs()));
    }

    #[test]
    fn family_shrinks() {
        let fam = admissible_k_family(2, 0.5, 0.5, 3).unwrap();
        assert_eq!(fam.len(), 3);
        let sups: Vec<f64> = fam.iter().map(|p| p.sup_norms(200).0).collect();
        for w in sups.windows(2) {
            assert!(w[1] <= w[0] / 32.0 * (1.0 + 1e-12));
        }
        assert!(fam.iter().all(|p| p.is_admissible(1.0)));
        let flat = admissible_k_family_with(1, 0.5, 0.5, 3, 0.0).unwrap();
        assert!(flat.iter().all(|p| p.sup_norms(100) == (0.0, 0.0, 0.0)));
    }

    #[test]
    fn shear_identity() {
        let d = 0.1;
        let spec = UnfoldingSpec::new(base(), vec![-d, 0.0, d], vec![], PsiSpec::zero(), PsiSpec::zero()).unwrap();
        let r = shear_conjugacy_check(&spec, Side::Upper, -0.8, 0.3, 0.5, &SmoothOptions::default()).unwrap();
        assert!(r.residual <= 1e-9);
        let r0 = shear_conjugacy_check(&spec, Side::Upper, -0.8, 0.3, 0.0, &SmoothOptions::default()).unwrap();
        assert_eq!(r0.residual, 0.0);
        let psi = PsiSpec::fallback(1, 1e-3, -0.7, -0.3).unwrap();
        let spec = UnfoldingSpec::new(base(), vec![-d, 0.0, d], vec![], psi, PsiSpec::zero()).unwrap();
        let r = shear_conjugacy_check(&spec, Side::Upper, -0.9, 0.3, 1.0, &SmoothOptions::default()).unwrap();
        assert!(r.completed);
        assert!(r.residual <= 1e-6, "{}", r.residual);
    }
}
