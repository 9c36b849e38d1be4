//! Constructive unfoldings: splitting counts, tangent orbits, critical
//! loops and the loop censuses around a canonical critical loop.

use std::collections::BTreeSet;

use super::{
    classify_loop, loop_from_seed, Cluster, ClusterOptions, CanonicalLoop, LoopCensus, LoopKind, LoopOptions,
    LoopRecord, Stability,
};
use crate::error::{PwsError, Result};
use crate::flow::{integrate_smooth, ArcKind, Direction, SmoothArc, SmoothTerminal, Trajectory};
use crate::system::{PwsSystem, Side, Window};
use crate::tangency::{count_bifurcating, find_tangent_points, TangentPointRecord, Visibility};
use crate::unfolding::{build_transition, build_unfolded, PsiSpec, UnfoldingSpec};
use field_expr::ScalarField;

fn parse(s: &str) -> Result<ScalarField> {
    ScalarField::parse(s).map_err(|e| PwsError::Invalid(format!("`{s}`: {e}")))
}

// ---------------------------------------------------------------- splitting

/// `f± = 1`, `g± = x^{m±}` on `[-1, 1]²`.
pub fn thm1_base(m_plus: usize, m_minus: usize) -> Result<PwsSystem> {
    if m_plus + m_minus == 0 {
        return Err(PwsError::Invalid("need m⁺ + m⁻ ≥ 1".into()));
    }
    PwsSystem::from_normal_form(
        parse("1")?,
        parse("1")?,
        m_plus,
        parse("1")?,
        parse("1")?,
        m_minus,
        Window::new(-1.0, 1.0, -1.0, 1.0)?,
    )
}

/// λ vectors realizing exactly `ell` tangent points: the m⁺ upper and m⁻
/// lower roots are dealt in order to `ell` distinct abscissas, one root
/// each, the last abscissa taking the remainder.
pub fn thm1_construction(m_plus: usize, m_minus: usize, ell: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let total = m_plus + m_minus;
    if ell == 0 || ell > total {
        return Err(PwsError::RangeError(format!("ell={ell} outside 1..={total}")));
    }
    let pos = |k: usize| -0.15 + 0.3 * (k as f64 + 0.5) / ell as f64;
    let (mut lp, mut lm) = (Vec::new(), Vec::new());
    for u in 0..total {
        let x = pos(u.min(ell - 1));
        if u < m_plus {
            lp.push(x);
        } else {
            lm.push(x);
        }
    }
    Ok((lp, lm))
}

#[derive(Debug, Clone)]
pub struct Thm1Report {
    pub ell: usize,
    pub records: Vec<TangentPointRecord>,
    pub sum_plus: usize,
    pub sum_minus: usize,
    /// Simple tangent points of each subsystem alternate V, I along Σ.
    pub alternates: bool,
}

/// Tangent points of the transition system for the given λ vectors, with
/// the splitting bounds checked against the base multiplicities.
pub fn thm1_check(base: &PwsSystem, lambda_plus: &[f64], lambda_minus: &[f64]) -> Result<Thm1Report> {
    let spec = UnfoldingSpec::new(
        base.clone(),
        lambda_plus.to_vec(),
        lambda_minus.to_vec(),
        PsiSpec::zero(),
        PsiSpec::zero(),
    )?;
    let sys = build_transition(&spec);
    let o = TangentPointRecord::new(0.0, lambda_plus.len(), lambda_minus.len(), None, None);
    let (ell, records) = count_bifurcating(&sys, &o, 0.5)?;
    let sum_plus = records.iter().map(|r| r.m_plus).sum();
    let sum_minus = records.iter().map(|r| r.m_minus).sum();
    let alternates = [Side::Upper, Side::Lower].into_iter().all(|side| {
        let vis: Vec<Option<Visibility>> = records
            .iter()
            .filter(|r| r.multiplicity_on(side) > 0)
            .map(|r| if r.multiplicity_on(side) == 1 { r.visibility(side) } else { None })
            .collect();
        vis.iter().all(|v| matches!(v, Some(Visibility::V) | Some(Visibility::I))) && vis.windows(2).all(|w| w[0] != w[1])
    });
    Ok(Thm1Report { ell, records, sum_plus, sum_minus, alternates })
}

trait SideMultiplicity {
    fn multiplicity_on(&self, side: Side) -> usize;
}

impl SideMultiplicity for TangentPointRecord {
    fn multiplicity_on(&self, side: Side) -> usize {
        match side {
            Side::Upper => self.m_plus,
            Side::Lower => self.m_minus,
        }
    }
}

// ------------------------------------------------------------ tangent orbits

#[derive(Debug, Clone)]
pub struct TangentOrbit {
    /// Visible tangent points on the orbit, ascending.
    pub touched: Vec<f64>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct Thm2Result {
    pub spec: UnfoldingSpec,
    pub system: PwsSystem,
    pub visible: Vec<f64>,
    pub orbits: Vec<TangentOrbit>,
    /// Orbits through exactly ℓ visible tangent points.
    pub count: usize,
    pub heights: Vec<f64>,
}

/// Upper tangent orbits through the visible tangent points in `[a, b]`,
/// followed both ways to Σ; orbits sharing their set of touched points
/// are merged.
pub fn count_tangent_orbits(sys: &PwsSystem, interval: (f64, f64), opts: &LoopOptions) -> Result<(Vec<f64>, Vec<TangentOrbit>)> {
    let (a, b) = interval;
    let dec = sys.decompose_sigma_on(a, b, (b - a) * 1e-4)?;
    let scan = find_tangent_points(sys, &dec)?;
    let visible: Vec<f64> =
        scan.records.iter().filter(|r| r.m_plus >= 1 && r.vis_plus == Some(Visibility::V)).map(|r| r.x0).collect();
    let tol = 1e-6 * (1.0 + a.abs().max(b.abs()));
    let index = |x: f64| visible.iter().position(|v| (v - x).abs() <= tol);
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut orbits = Vec::new();
    let mut so = opts.smooth_in(sys);
    so.sigma_stop = true;
    for (i, &v) in visible.iter().enumerate() {
        let fwd = integrate_smooth(&sys.upper, Side::Upper, (v, 0.0), Direction::Forward, &so)?;
        let bwd = integrate_smooth(&sys.upper, Side::Upper, (v, 0.0), Direction::Backward, &so)?;
        let mut sig: BTreeSet<usize> = BTreeSet::new();
        sig.insert(i);
        for t in fwd.touches.iter().chain(&bwd.touches) {
            if let Some(j) = index(t.x) {
                sig.insert(j);
            }
        }
        let key: Vec<usize> = sig.into_iter().collect();
        if seen.insert(key.clone()) {
            orbits.push(TangentOrbit {
                touched: key.iter().map(|&j| visible[j]).collect(),
                trajectory: two_way(&bwd, &fwd, opts.samples_per_arc),
            });
        }
    }
    Ok((visible, orbits))
}

fn two_way(bwd: &SmoothArc, fwd: &SmoothArc, n: usize) -> Trajectory {
    let mut tr = Trajectory::default();
    let tb = bwd.duration();
    let mut back: Vec<(f64, f64, f64)> = bwd.resample(n).into_iter().map(|(t, x, y)| (tb - t, x, y)).collect();
    back.reverse();
    tr.push_arc(ArcKind::Upper, back);
    let fw: Vec<(f64, f64, f64)> = fwd.resample(n).into_iter().map(|(t, x, y)| (tb + t, x, y)).collect();
    tr.push_arc(ArcKind::Upper, fw);
    tr
}

/// Split an order-m upper tangency at O into λ_i = iδ and raise ψ⁺ bumps on
/// the visible points so that tangent orbits pass through ℓ of them.
pub fn scenario_thm2(m_plus: usize, vis: Visibility, ell: usize, delta: f64, opts: &LoopOptions) -> Result<Thm2Result> {
    let m = m_plus;
    let odd = m % 2 == 1;
    let phi = match vis {
        Visibility::V | Visibility::R => 1.0,
        Visibility::I | Visibility::L => -1.0,
    };
    if m == 0 || odd != matches!(vis, Visibility::V | Visibility::I) {
        return Err(PwsError::RangeError(format!("visibility {vis:?} impossible for m⁺={m}")));
    }
    let max_ell = if vis == Visibility::I { (m - 1) / 2 } else { (m + 1) / 2 };
    if ell == 0 || ell > max_ell {
        return Err(PwsError::RangeError(format!("ell={ell} outside 1..={max_ell} for m⁺={m}, {vis:?}")));
    }
    if !(delta > 0.0) {
        return Err(PwsError::Invalid("delta must be positive".into()));
    }
    let lam = |j: usize| j as f64 * delta;
    let vis_idx: Vec<usize> = (1..=m).filter(|&j| phi * if (m - j) % 2 == 0 { 1.0 } else { -1.0 } > 0.0).collect();
    let d = vis_idx.len();
    let knots: Vec<f64> = (vis_idx[0] - 1..=vis_idx[d - 1] + 1).map(lam).collect();
    let window = Window::new(-0.5, (m as f64 + 2.0) * delta + 0.5, -1.0, 1.0)?;
    let base = PwsSystem::from_normal_form(parse("1")?, parse(&format!("{phi}"))?, m, parse("1")?, parse("1")?, 0, window)?;
    let lambda: Vec<f64> = (1..=m).map(lam).collect();
    let spec0 = UnfoldingSpec::new(base.clone(), lambda.clone(), vec![], PsiSpec::zero(), PsiSpec::zero())?;
    let transition = build_transition(&spec0);

    // Θ_n: transition orbit through (v_1, C_n); y[n][k] is its height at v_k
    let dm = delta.powi(m as i32);
    let v1 = lam(vis_idx[0]);
    let mut so = opts.smooth_in(&transition);
    so.sigma_stop = false;
    let mut y = vec![vec![0.0; d]; d];
    for n in 1..=d {
        let c = dm * (1.0 + n as f64 * delta);
        y[n - 1][0] = c;
        for k in 1..d {
            let mut o = so;
            o.line = Some(crate::flow::LineStop::vertical(lam(vis_idx[k])));
            let arc = integrate_smooth(&transition.upper, Side::Upper, (v1, c), Direction::Forward, &o)?;
            if arc.terminal != SmoothTerminal::Line {
                return Err(PwsError::HarvestFailure(format!(
                    "orbit through ({v1}, {c:e}) missed x={} ({:?})",
                    lam(vis_idx[k]),
                    arc.terminal
                )));
            }
            y[n - 1][k] = arc.end.2;
        }
    }
    let heights: Vec<f64> = (1..=d)
        .map(|n| {
            if ell == 1 {
                y[n - 1][n - 1]
            } else if n <= (d / ell) * ell {
                y[(n - 1) / ell][n - 1]
            } else {
                2.0 * dm
            }
        })
        .collect();
    let psi = PsiSpec::blocks(&knots, &heights)?;
    let spec = UnfoldingSpec::new(base, lambda, vec![], psi, PsiSpec::zero())?;
    let system = build_unfolded(&spec);
    let span = (knots[0] - 0.5 * delta, knots[knots.len() - 1] + 0.5 * delta);
    let (visible, orbits) = count_tangent_orbits(&system, span, opts)?;
    let count = orbits.iter().filter(|o| o.touched.len() == ell).count();
    Ok(Thm2Result { spec, system, visible, orbits, count, heights })
}

// --------------------------------------------------------- loop scenarios

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Thm3Kind {
    Cro,
    Cri,
}

#[derive(Debug, Clone)]
pub struct Thm3Result {
    pub spec: UnfoldingSpec,
    pub system: PwsSystem,
    pub record: LoopRecord,
    pub seed: f64,
    pub y0: f64,
    pub peaks: Vec<f64>,
}

fn check_base(base: &CanonicalLoop, min_m: usize) -> Result<()> {
    if base.m_plus < base.m_minus {
        return Err(PwsError::RangeError(format!(
            "the cluster splits the upper tangency; need m⁺ ≥ m⁻, got ({}, {})",
            base.m_plus, base.m_minus
        )));
    }
    if base.m_star() < min_m {
        return Err(PwsError::RangeError(format!("need m* ≥ {min_m}, got {}", base.m_star())));
    }
    Ok(())
}

/// A loop through the cluster touching ℓ visible tangent points: for `Cri`
/// it leaves Σ at the ℓ-th visible point, for `Cro` it crosses Σ just
/// after it.
pub fn scenario_thm3(base: &CanonicalLoop, ell: usize, kind: Thm3Kind, opts: &ClusterOptions) -> Result<Thm3Result> {
    let ms = base.m_star();
    let max_ell = match kind {
        Thm3Kind::Cro => ms / 2,
        Thm3Kind::Cri => (ms + 1) / 2,
    };
    if kind == Thm3Kind::Cro && ms == 1 {
        return Err(PwsError::RangeError("no crossing loop through the cluster when m* = 1".into()));
    }
    if ell == 0 || ell > max_ell {
        return Err(PwsError::RangeError(format!("ell={ell} outside 1..={max_ell}")));
    }
    check_base(base, 1)?;
    let mut cl = Cluster::new(base, *opts, 0.0)?;
    let vis = cl.visible();
    let start = (cl.lambda[0], cl.h);
    let mut theta = vec![cl.h];
    for &v in &vis[1..] {
        theta.push(cl.trans_height(start, v)?);
    }
    let peaks: Vec<f64> = (0..vis.len())
        .map(|i| if i < ell { theta[i] } else { theta[i] + cl.h })
        .collect();
    let psi = cl.psi_plus(&peaks)?;
    let (_, sys) = cl.unfolded(&psi)?;
    let lo = &cl.opts.loops.clone();
    let mut so = lo.smooth_in(&sys);
    so.sigma_stop = true;
    let back = integrate_smooth(&sys.upper, Side::Upper, (cl.lambda[0], 0.0), Direction::Backward, &so)?;
    if back.terminal != SmoothTerminal::Sigma {
        return Err(PwsError::VerificationFailed(format!("reference orbit does not return to Σ ({:?})", back.terminal)));
    }
    let p_a = back.end.1;
    let seed = match kind {
        Thm3Kind::Cri => vis[ell - 1],
        Thm3Kind::Cro => {
            let fwd = integrate_smooth(&sys.upper, Side::Upper, (cl.lambda[0], 0.0), Direction::Forward, &so)?;
            let (l, r) = (cl.lambda[2 * ell - 1], cl.lambda[2 * ell]);
            let q = fwd.end.1;
            if fwd.terminal != SmoothTerminal::Sigma || !(q > l && q < r) {
                return Err(PwsError::VerificationFailed(format!(
                    "reference orbit should cross Σ in ({l}, {r}); ended at {q} ({:?})",
                    fwd.terminal
                )));
            }
            q
        }
    };
    cl.solve_y0(seed, p_a)?;
    let (spec, system) = cl.unfolded(&psi)?;
    let t = loop_from_seed(&system, seed, Side::Lower, lo)?;
    let record = classify_loop(&system, &t, lo)?;
    let want = match kind {
        Thm3Kind::Cro => LoopKind::CrossingNonsliding,
        Thm3Kind::Cri => LoopKind::Critical,
    };
    if record.kind != want || record.touches != ell {
        return Err(PwsError::VerificationFailed(format!(
            "expected {want} with ℓ={ell}, got {} with ℓ={} (touch points {:?})",
            record.kind, record.touches, record.touch_points
        )));
    }
    Ok(Thm3Result { spec, system, record, seed, y0: cl.y0, peaks })
}

#[derive(Debug, Clone)]
pub struct LoopScenario {
    pub spec: UnfoldingSpec,
    pub system: PwsSystem,
    pub census: LoopCensus,
    pub peaks: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Visible tangent points of the cluster.
    pub visible: Vec<f64>,
    /// Strict nesting of the critical loops, checked when all peaks are pinned.
    pub nested: Option<bool>,
    pub diagnostics: Vec<String>,
}

/// ℓ+1 critical loops pinned at the rightmost visible points; the other
/// visible points each carry a crossing loop through one tangency.
pub fn scenario_thm4(base: &CanonicalLoop, ell: usize, opts: &ClusterOptions) -> Result<LoopScenario> {
    check_base(base, 5)?;
    let m = base.m_star();
    let n_cro = (m - 1) / 2;
    if ell > n_cro {
        return Err(PwsError::RangeError(format!("ell={ell} outside 0..={n_cro}")));
    }
    let cl = Cluster::new(base, *opts, 0.0)?;
    let vis = cl.visible();
    let d = vis.len();
    let free = d - ell - 1;
    let mut peaks = vec![0.0; d];
    for i in free..d {
        peaks[i] = cl.u(vis[i])?.0;
    }
    for i in (0..free).rev() {
        let psi = cl.psi_plus(&peaks)?;
        let (l, r) = (cl.lambda[2 * i + 1], cl.lambda[2 * i + 2]);
        let q = *cl.roots_in(&psi, l, r)?.first().ok_or_else(|| {
            PwsError::RootNotBracketed(format!("no displacement root in ({l}, {r}) for peak {}", i + 1))
        })?;
        let p = cl.landing(q)?;
        peaks[i] = cl.trans_height((p, 0.0), vis[i])?;
    }
    let psi = cl.psi_plus(&peaks)?;
    let (census, system, diagnostics) = cl.census(&psi)?;
    let (spec, _) = cl.unfolded(&psi)?;
    let nested = if free == 0 { Some(nesting_holds(&census)) } else { None };
    if census.cro(1) != n_cro - ell || census.cri(1) != ell + 1 {
        return Err(PwsError::CensusMismatch(format!(
            "expected (cro(1), cri(1)) = ({}, {}); {}\n{}",
            n_cro - ell,
            ell + 1,
            census.dump(),
            diagnostics.join("\n")
        )));
    }
    Ok(LoopScenario { spec, system, census, peaks, alphas: vec![], visible: vis, nested, diagnostics })
}

/// Critical loops ordered by their tangent point have strictly decreasing
/// crossing points: each lies inside the next.
fn nesting_holds(c: &LoopCensus) -> bool {
    let mut cri: Vec<(f64, f64)> = c
        .of_kind(LoopKind::Critical)
        .filter_map(|r| Some((*r.tangent_switches().first()?, *r.crossing_points().first()?)))
        .collect();
    cri.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    cri.len() >= 2 && cri.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1)
}

/// Peaks offset by ±α from the pinned heights: +α on the first d−ℓ visible
/// points gives sliding loops, −α on the rest gives crossing cycles.
pub fn scenario_thm5(base: &CanonicalLoop, ell: usize, opts: &ClusterOptions) -> Result<LoopScenario> {
    check_base(base, 5)?;
    let m = base.m_star();
    let d = (m + 1) / 2;
    if ell > d {
        return Err(PwsError::RangeError(format!("ell={ell} outside 0..={d}")));
    }
    let cl = Cluster::new(base, *opts, 0.0)?;
    let vis = cl.visible();
    let gap = cl.delta();
    let g = &cl.transition.upper.g;
    let mut peaks = Vec::with_capacity(d);
    let mut alphas = Vec::with_capacity(d);
    for (i, &v) in vis.iter().enumerate() {
        let u = cl.u(v)?.0;
        let du = cl.u_slope(v)?;
        let dg = g.x_derivatives(v, 0.0, 1)?[1];
        let alpha = (opts.alpha_scale * du * gap).min(du * du / (4.0 * dg));
        if !(alpha > 0.0) {
            return Err(PwsError::VerificationFailed(format!("nonpositive α at λ={v} (u'={du:e}, g'={dg:e})")));
        }
        alphas.push(alpha);
        peaks.push(if i < d - ell { u + alpha } else { u - alpha });
    }
    let psi = cl.psi_plus(&peaks)?;
    let (census, system, diagnostics) = cl.census(&psi)?;
    let (spec, _) = cl.unfolded(&psi)?;
    let want_c = m - d + ell;
    let ends_ok = census.of_kind(LoopKind::SlidingLoop).all(|r| sliding_arc_at_visible(r, &vis));
    if census.beta_s != d - ell || census.beta_c < want_c || !ends_ok {
        return Err(PwsError::CensusMismatch(format!(
            "expected beta_s = {}, beta_c ≥ {want_c}, sliding arcs anchored at visible points; {}\n{}",
            d - ell,
            census.dump(),
            diagnostics.join("\n")
        )));
    }
    Ok(LoopScenario { spec, system, census, peaks, alphas, visible: vis, nested: None, diagnostics })
}

/// Some sliding arc of `r` has an end on one of `visible`.
pub fn sliding_arc_at_visible(r: &LoopRecord, visible: &[f64]) -> bool {
    r.trajectory.arcs.iter().filter(|a| a.kind == ArcKind::Sliding).any(|a| {
        let ends = [a.samples.first().unwrap().1, a.samples.last().unwrap().1];
        ends.iter().any(|e| visible.iter().any(|v| (v - e).abs() <= 1e-9))
    })
}

/// Critical loops of a census that are unstable.
pub fn unstable_critical(c: &LoopCensus) -> usize {
    c.of_kind(LoopKind::Critical).filter(|r| r.stability == Stability::Unstable).count()
}
