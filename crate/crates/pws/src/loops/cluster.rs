//! Split tangency cluster next to the canonical loop's tangent point O.
//!
//! The upper tangency of order m at O is split into simple tangent points
//! λ_i = (i − m − 1)δ. A block function ψ⁺ with knots (−(m+2)δ, λ_1..λ_m, 0)
//! puts its peaks on the visible points λ_1, λ_3, ... and the fallback
//! ψ⁻ = y0·h*(x, 2P/3, P/3) fixes where the lower return lands.

use std::cell::RefCell;
use std::collections::HashMap;

use super::{classify_loop, leg_to_sigma, loop_from_seed, push_smooth, CanonicalLoop, LoopCensus, LoopOptions, LoopRecord};
use crate::error::{PwsError, Result};
use crate::flow::{
    integrate_sliding, integrate_smooth, Direction, EventKind, LineStop, SlidingOptions, SlidingTerminal, SmoothTerminal,
    Trajectory,
};
use crate::flow::ArcKind;
use crate::roots::bisect;
use crate::system::{PwsSystem, Side};
use crate::unfolding::{build_transition, build_unfolded, PsiSpec, UnfoldingSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    /// λ spacing as a fraction of `a`; by default 0.04, reduced so the
    /// cluster fits in `(-a/3, 0)`.
    pub delta: Option<f64>,
    /// α_i = min(alpha_scale·u'_i·gap, u'_i²/(4 g'_i)).
    pub alpha_scale: f64,
    /// Uniform scan points across the knot span.
    pub grid: usize,
    pub loops: LoopOptions,
}

impl ClusterOptions {
    pub fn delta_for(&self, m: usize) -> f64 {
        self.delta.unwrap_or_else(|| 0.04f64.min(0.3 / (m as f64 + 2.0)))
    }
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions { delta: None, alpha_scale: 0.1, grid: 120, loops: LoopOptions::default() }
    }
}

pub struct Cluster<'a> {
    pub base: &'a CanonicalLoop,
    pub opts: ClusterOptions,
    pub lambda: Vec<f64>,
    pub knots: Vec<f64>,
    /// λ applied, ψ± = 0.
    pub transition: PwsSystem,
    /// Height above λ_1 of the reference transition orbit.
    pub h: f64,
    /// Backward Σ landing of the reference orbit.
    pub p_plus: f64,
    pub seed: f64,
    pub y0: f64,
    pub psi_minus: PsiSpec,
    lower: PwsSystem,
    cache: RefCell<HashMap<u64, (f64, f64)>>,
}

impl<'a> Cluster<'a> {
    /// Cluster whose lower return from `(seed, 0)` lands on the reference
    /// orbit's Σ point.
    pub fn new(base: &'a CanonicalLoop, mut opts: ClusterOptions, seed: f64) -> Result<Self> {
        let m = base.m_plus;
        let a = base.a;
        opts.delta = Some(opts.delta_for(m));
        let delta = opts.delta_for(m) * a;
        // a bump of ψ⁺ switches within a few gap² of its midpoint; cap the
        // step so no switch is stepped over
        let st = &mut opts.loops.smooth.stepper;
        st.h_max = st.h_max.min(delta * delta / a);
        if !(delta > 0.0) || (m as f64 + 2.0) * delta >= a / 3.0 {
            return Err(PwsError::RangeError(format!("delta {} must keep the cluster inside (-a/3, 0)", delta / a)));
        }
        let lambda: Vec<f64> = (1..=m).map(|i| (i as f64 - m as f64 - 1.0) * delta).collect();
        let mut knots = vec![-(m as f64 + 2.0) * delta];
        knots.extend(&lambda);
        knots.push(0.0);
        let spec = UnfoldingSpec::new(
            base.system.clone(),
            lambda.clone(),
            vec![0.0; base.m_minus],
            PsiSpec::zero(),
            PsiSpec::zero(),
        )?;
        let transition = build_transition(&spec);
        let mut c = Cluster {
            base,
            opts,
            lambda,
            knots,
            transition: transition.clone(),
            h: 0.0,
            p_plus: base.p(),
            seed,
            y0: 0.0,
            psi_minus: PsiSpec::zero(),
            lower: transition,
            cache: RefCell::new(HashMap::new()),
        };
        // lift the reference orbit until its Σ point sits left of P, with
        // room for the spread of the return heights over the cluster
        let h1 = delta.powi(m as i32) + c.trans_height((base.p(), 0.0), c.lambda[0])?.max(0.0);
        c.set_height(h1)?;
        let n = 40;
        let (lo, hi) = (c.knots[0], 0.0);
        let mut us = Vec::with_capacity(n + 1);
        for i in 0..=n {
            us.push(c.u(lo + (hi - lo) * i as f64 / n as f64)?.0);
        }
        let spread = us.iter().cloned().fold(f64::MIN, f64::max) - us.iter().cloned().fold(f64::MAX, f64::min);
        c.set_height(h1 + 2.0 * spread)?;
        Ok(c)
    }

    /// Absolute λ spacing.
    pub fn delta(&self) -> f64 {
        self.opts.delta_for(self.base.m_plus) * self.base.a
    }

    fn set_height(&mut self, h: f64) -> Result<()> {
        self.h = h;
        self.p_plus = self.trans_backward_landing((self.lambda[0], h))?;
        self.solve_y0(self.seed, self.p_plus)
    }

    /// Re-solve ψ⁻ so the lower return from `(seed, 0)` lands at `target`.
    pub fn solve_y0(&mut self, seed: f64, target: f64) -> Result<()> {
        let a = self.base.a;
        let d = |y: f64| -> Result<f64> { Ok(self.lower_with(y)?.1.landing_from(seed, &self.opts.loops)? - target) };
        let mut s = 1e-3 * a;
        let (mut lo, mut hi) = (-s, s);
        let (mut dlo, mut dhi) = (d(lo)?, d(hi)?);
        while dlo.signum() == dhi.signum() {
            s *= 4.0;
            if s > 0.5 * a {
                return Err(PwsError::RootNotBracketed(format!(
                    "lower return from x={seed} cannot reach {target} (D = {dlo:e}, {dhi:e})"
                )));
            }
            lo = -s;
            hi = s;
            dlo = d(lo)?;
            dhi = d(hi)?;
        }
        let y0 = bisect(d, lo, hi, dlo, dhi, 1e-16)?;
        let (psi, lower) = self.lower_with(y0)?;
        self.seed = seed;
        self.y0 = y0;
        self.psi_minus = psi;
        self.lower = lower.0;
        self.cache.borrow_mut().clear();
        Ok(())
    }

    fn lower_with(&self, y0: f64) -> Result<(PsiSpec, LowerSys)> {
        let p = self.base.p();
        let psi = PsiSpec::fallback(1, y0, 2.0 * p / 3.0, p / 3.0)?;
        let spec = self.spec(PsiSpec::zero(), psi.clone())?;
        Ok((psi, LowerSys(build_unfolded(&spec))))
    }

    pub fn spec(&self, psi_plus: PsiSpec, psi_minus: PsiSpec) -> Result<UnfoldingSpec> {
        UnfoldingSpec::new(
            self.base.system.clone(),
            self.lambda.clone(),
            vec![0.0; self.base.m_minus],
            psi_plus,
            psi_minus,
        )
    }

    /// Unfolded system for the given ψ⁺ and the current ψ⁻.
    pub fn unfolded(&self, psi_plus: &PsiSpec) -> Result<(UnfoldingSpec, PwsSystem)> {
        let spec = self.spec(psi_plus.clone(), self.psi_minus.clone())?;
        let sys = build_unfolded(&spec);
        Ok((spec, sys))
    }

    pub fn peaks(&self) -> usize {
        (self.base.m_plus + 1) / 2
    }

    /// Visible tangent points λ_1, λ_3, ...
    pub fn visible(&self) -> Vec<f64> {
        self.lambda.iter().step_by(2).copied().collect()
    }

    /// Knot right of the visible point with index `i` (0-based peak index).
    pub fn next_knot(&self, i: usize) -> f64 {
        self.knots[2 * i + 2]
    }

    pub fn psi_plus(&self, peaks: &[f64]) -> Result<PsiSpec> {
        PsiSpec::blocks(&self.knots, peaks)
    }

    /// Height at the vertical line `x` of the transition upper orbit through `start`.
    pub fn trans_height(&self, start: (f64, f64), x: f64) -> Result<f64> {
        let mut o = self.opts.loops.smooth_in(&self.transition);
        o.sigma_stop = false;
        o.line = Some(LineStop::vertical(x));
        let arc = integrate_smooth(&self.transition.upper, Side::Upper, start, Direction::Forward, &o)?;
        if arc.terminal != SmoothTerminal::Line {
            return Err(PwsError::HarvestFailure(format!(
                "orbit from ({}, {}) missed x={x} ({:?})",
                start.0, start.1, arc.terminal
            )));
        }
        Ok(arc.end.2)
    }

    fn trans_backward_landing(&self, start: (f64, f64)) -> Result<f64> {
        let mut o = self.opts.loops.smooth_in(&self.transition);
        o.sigma_stop = true;
        let arc = integrate_smooth(&self.transition.upper, Side::Upper, start, Direction::Backward, &o)?;
        if arc.terminal != SmoothTerminal::Sigma {
            return Err(PwsError::NoArrival(format!("backward orbit from {start:?} ended with {:?}", arc.terminal)));
        }
        Ok(arc.end.1)
    }

    /// Σ landing `P⁻(x)` of the unfolded lower orbit from `(x, 0)`.
    pub fn landing(&self, x: f64) -> Result<f64> {
        Ok(self.u(x)?.1)
    }

    /// `(u(x), P⁻(x))`: height at `x` of the transition upper orbit from `P⁻(x)`.
    pub fn u(&self, x: f64) -> Result<(f64, f64)> {
        if let Some(v) = self.cache.borrow().get(&x.to_bits()) {
            return Ok(*v);
        }
        let p = LowerSys::landing_of(&self.lower, x, &self.opts.loops)?;
        let v = (self.trans_height((p, 0.0), x)?, p);
        self.cache.borrow_mut().insert(x.to_bits(), v);
        Ok(v)
    }

    /// `𝒴(x) = u(x) − ψ⁺(x)`.
    pub fn displacement(&self, psi: &PsiSpec, x: f64) -> Result<f64> {
        Ok(self.u(x)?.0 - psi.value(x))
    }

    /// Central-difference `u'(x)`.
    pub fn u_slope(&self, x: f64) -> Result<f64> {
        let e = 1e-3 * self.delta();
        Ok((self.u(x + e)?.0 - self.u(x - e)?.0) / (2.0 * e))
    }

    /// Scan points: uniform grid plus geometric offsets around every λ.
    fn scan_points(&self) -> Vec<f64> {
        let (lo, hi) = (self.knots[0], 0.0);
        let delta = self.delta();
        let n = self.opts.grid.max(4);
        let mut xs: Vec<f64> = (1..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        for &l in &self.lambda {
            xs.push(l);
            for j in 1..=12 {
                let off = delta * 10f64.powf(-0.5 * j as f64);
                xs.push(l - off);
                xs.push(l + off);
            }
        }
        xs.retain(|&x| x > lo && x < hi);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        xs
    }

    /// Roots of 𝒴 in `(lo, hi)`, in increasing order.
    pub fn roots_in(&self, psi: &PsiSpec, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let xs: Vec<f64> = self.scan_points().into_iter().filter(|&x| x > lo && x < hi).collect();
        let mut vals = Vec::with_capacity(xs.len());
        for &x in &xs {
            vals.push(self.displacement(psi, x)?);
        }
        let mut out = Vec::new();
        for i in 0..xs.len().saturating_sub(1) {
            let (v0, v1) = (vals[i], vals[i + 1]);
            if v0 == 0.0 {
                out.push(xs[i]);
            } else if v1 != 0.0 && v0.signum() != v1.signum() {
                let f = |x: f64| self.displacement(psi, x);
                out.push(bisect(f, xs[i], xs[i + 1], v0, v1, 1e-16)?);
            }
        }
        // a pinned peak is a root sitting exactly on its tangent point
        for &l in &self.lambda {
            if l > lo && l < hi && self.displacement(psi, l)?.abs() <= 1e-12 {
                for r in out.iter_mut() {
                    if (*r - l).abs() <= 1e-6 {
                        *r = l;
                    }
                }
                if !out.iter().any(|&r| r == l) {
                    out.push(l);
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        Ok(out)
    }

    /// Loops of the unfolded system for ψ⁺: 𝒴 roots plus sliding loops
    /// started at each visible tangent point.
    pub fn census(&self, psi: &PsiSpec) -> Result<(LoopCensus, PwsSystem, Vec<String>)> {
        let (_, sys) = self.unfolded(psi)?;
        let lo = &self.opts.loops;
        let mut census = LoopCensus::default();
        let mut diag = Vec::new();
        for r in self.roots_in(psi, self.knots[0], 0.0)? {
            let tangent = self.lambda.contains(&r);
            if !tangent && sys.h_value(r)? <= 0.0 {
                diag.push(format!("root x={r:.12} lies in a sliding region"));
                continue;
            }
            match loop_from_seed(&sys, r, Side::Lower, lo).and_then(|t| classify_loop(&sys, &t, lo)) {
                Ok(rec) => census.add(rec),
                Err(e) => diag.push(format!("root x={r:.12}: {e}")),
            }
        }
        for (i, &l) in self.visible().iter().enumerate() {
            match self.sliding_loop_at(&sys, l, self.next_knot(i)) {
                Ok(Some(rec)) => census.add(rec),
                Ok(None) => {}
                Err(e) => diag.push(format!("sliding loop at λ={l}: {e}")),
            }
        }
        Ok((census, sys, diag))
    }

    /// Sliding loop through the visible tangent point `l`: upper arc into
    /// `l`, sliding arc along `(l, q)`, lower arc back to the start.
    pub fn sliding_loop_at(&self, sys: &PwsSystem, l: f64, next: f64) -> Result<Option<LoopRecord>> {
        let lo = &self.opts.loops;
        let mut o = lo.smooth_in(sys);
        o.sigma_stop = true;
        let back = integrate_smooth(&sys.upper, Side::Upper, (l, 0.0), Direction::Backward, &o)?;
        if back.terminal != SmoothTerminal::Sigma {
            return Ok(None);
        }
        let pb = back.end.1;
        if sys.h_value(pb)? <= 0.0 {
            return Ok(None);
        }
        let d = |x: f64| -> Result<f64> { Ok(self.landing(x)? - pb) };
        let w = next - l;
        let mut prev: Option<(f64, f64)> = None;
        let mut q = None;
        for j in (0..=24).rev() {
            let x = l + w * 10f64.powf(-0.25 * j as f64) * 0.999;
            if sys.h_value(x)? >= 0.0 {
                break;
            }
            let v = d(x)?;
            if let Some((xp, vp)) = prev {
                if vp.signum() != v.signum() {
                    q = Some(bisect(d, xp, x, vp, v, 1e-16)?);
                    break;
                }
            }
            prev = Some((x, v));
        }
        let Some(q) = q else { return Ok(None) };

        let up = leg_to_sigma(sys, Side::Upper, pb, Some(LineStop::vertical(l)), lo)?;
        if up.terminal != SmoothTerminal::Line || up.end.2.abs() > lo.closure_tol {
            return Err(PwsError::VerificationFailed(format!("upper arc from {pb} does not reach ({l}, 0): {:?}", up.end)));
        }
        let so = SlidingOptions { stop_at: Some(q), window: Some(sys.window), ..SlidingOptions::default() };
        let slide = integrate_sliding(sys, l, Direction::Forward, &so)?;
        if slide.terminal != SlidingTerminal::Target {
            return Err(PwsError::VerificationFailed(format!("sliding arc from {l} ended with {:?}", slide.terminal)));
        }
        let down = leg_to_sigma(sys, Side::Lower, q, None, lo)?;
        if down.terminal != SmoothTerminal::Sigma {
            return Err(PwsError::VerificationFailed(format!("lower arc from {q} ended with {:?}", down.terminal)));
        }
        let mut tr = Trajectory::default();
        push_smooth(&mut tr, &up, lo.samples_per_arc);
        tr.push_event(EventKind::SlidingEntry, l, 0.0);
        tr.push_arc(ArcKind::Sliding, slide.samples.iter().map(|&(t, x)| (t, x, 0.0)).collect());
        tr.push_event(EventKind::SlidingExit, q, 0.0);
        push_smooth(&mut tr, &down, lo.samples_per_arc);
        tr.push_event(EventKind::Crossing, down.end.1, 0.0);
        classify_loop(sys, &tr, lo).map(Some)
    }
}

struct LowerSys(PwsSystem);

impl LowerSys {
    fn landing_from(&self, x: f64, opts: &LoopOptions) -> Result<f64> {
        LowerSys::landing_of(&self.0, x, opts)
    }

    fn landing_of(sys: &PwsSystem, x: f64, opts: &LoopOptions) -> Result<f64> {
        let arc = leg_to_sigma(sys, Side::Lower, x, None, opts)?;
        if arc.terminal != SmoothTerminal::Sigma || arc.duration() == 0.0 {
            return Err(PwsError::NoArrival(format!("lower orbit from x={x} ended with {:?}", arc.terminal)));
        }
        Ok(arc.end.1)
    }
}
