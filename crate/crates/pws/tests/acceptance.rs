//! One PASS/FAIL line per acceptance criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use pws::flow::{integrate_smooth, Direction, SmoothOptions, SmoothTerminal};
use pws::loops::{
    canonical_critical_loop, count_tangent_orbits, scenario_thm2, scenario_thm3, scenario_thm4, scenario_thm5,
    sliding_arc_at_visible, thm1_base, thm1_check, thm1_construction, ClusterOptions, LoopKind, LoopOptions,
    Thm3Kind,
};
use pws::maps::{arrival_section, sample_transition_map, MapOptions, Section};
use pws::unfolding::{admissible_k_family_with, build_unfolded, shear_conjugacy_check, PsiSpec, UnfoldingSpec};
use pws::{expr_field, PwsError, PwsSystem, Side, Subsystem, Visibility, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn e(err: PwsError) -> String {
    err.to_string()
}

fn poly(rng: &mut ChaCha8Rng, scale: f64) -> String {
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-scale..scale)).collect();
    format!("{} + {}*x + {}*y + {}*x^2 + {}*x*y + {}*y^2", c[0], c[1], c[2], c[3], c[4], c[5])
}

fn normal(f_plus: &str, phi_plus: &str, m_plus: usize, f_minus: &str, phi_minus: &str, m_minus: usize, w: Window) -> PwsSystem {
    let p = |s: &str| field_expr::ScalarField::parse(s).unwrap();
    PwsSystem::from_normal_form(p(f_plus), p(phi_plus), m_plus, p(f_minus), p(phi_minus), m_minus, w).unwrap()
}

fn sliding_convex() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = Window::new(-2.0, 2.0, -2.0, 2.0).unwrap();
    let (mut done, mut worst) = (0usize, 0.0f64);
    let mut s = 0;
    while s < 20 {
        let fp = expr_field(&poly(&mut rng, 1.0)).unwrap();
        let gp = expr_field(&poly(&mut rng, 1.0)).unwrap();
        let fm = expr_field(&poly(&mut rng, 1.0)).unwrap();
        let gm = expr_field(&poly(&mut rng, 1.0)).unwrap();
        let sys = PwsSystem::new(Subsystem::new(fp, gp), Subsystem::new(fm, gm), w);
        // keep only systems whose sliding set covers a tenth of the window
        let hits = (0..400).filter(|i| sys.h_value(-2.0 + 4.0 * (*i as f64 + 0.5) / 400.0).unwrap() < 0.0).count();
        if hits < 40 {
            continue;
        }
        s += 1;
        let mut got = 0;
        let mut tries = 0;
        while got < 500 {
            tries += 1;
            if tries > 200_000 {
                return Err(format!("system {s} has too little sliding region"));
            }
            let x = rng.gen_range(-2.0..2.0);
            let (f1, g1) = sys.upper.eval(x, 0.0).map_err(e)?;
            let (f2, g2) = sys.lower.eval(x, 0.0).map_err(e)?;
            if !(g1 * g2 < 0.0) || (g2 - g1).abs() < 1e-6 {
                continue;
            }
            let a = g2 / (g2 - g1);
            if !(0.0..=1.0).contains(&a) {
                return Err(format!("convex weight {a} outside [0, 1] at x={x}"));
            }
            let xs = sys.sliding_field(x).map_err(e)?;
            let a_sys = sys.convex_coefficient(x).map_err(e)?;
            let scale = 1.0 + f1.abs().max(f2.abs());
            let dev = [
                (xs - (a * f1 + (1.0 - a) * f2)).abs() / scale,
                (a * g1 + (1.0 - a) * g2).abs() / (1.0 + g1.abs().max(g2.abs())),
                (a_sys - a).abs(),
            ];
            worst = dev.iter().fold(worst, |m, d| m.max(*d));
            got += 1;
        }
        done += got;
    }
    if worst <= 1e-10 {
        Ok(format!("{done} sliding points, worst deviation {worst:.1e}"))
    } else {
        Err(format!("worst deviation {worst:e}"))
    }
}

const BASE_GAP: f64 = 0.05;

/// Gaps 0.05·2⁻ⁿ, heights 1e-4·gap⁵, eight steps.
fn family(d: usize) -> Result<Vec<PsiSpec>, String> {
    admissible_k_family_with(d, BASE_GAP, 0.5, 8, 1e-4).map_err(e)
}

fn psi_family() -> Check {
    for d in 1..=3 {
        let fam = family(d)?;
        let mut prev = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for (n, p) in fam.iter().enumerate() {
            let s = p.sup_norms(400);
            if !(s.0 < prev.0 && s.1 < prev.1 && s.2 < prev.2) {
                return Err(format!("d={d} step {n}: norms {s:?} not below {prev:?}"));
            }
            let kn = p.knots();
            let gap = kn[1] - kn[0];
            let hmax = p.heights().iter().fold(0.0f64, |m, h| m.max(h.abs()));
            if s.1 > 8.0 * hmax / (gap * gap) {
                return Err(format!("d={d} step {n}: sup|ψ'| = {:e} exceeds 8|k|/gap² = {:e}", s.1, 8.0 * hmax / (gap * gap)));
            }
            prev = s;
        }
        if !(prev.0 < 1e-6 && prev.1 < 1e-6 && prev.2 < 1e-6) {
            return Err(format!("d={d}: final norms {prev:?}"));
        }
    }
    Ok("d = 1, 2, 3 monotone, bound holds".into())
}

fn distance() -> Check {
    let base = normal("1", "1 + 0.5*x", 1, "1", "1", 1, Window::new(-1.0, 1.0, -1.0, 1.0).unwrap());
    let mut last = 0.0f64;
    for d in 1..=3 {
        let fam = family(d)?;
        let mut prev = f64::INFINITY;
        for (n, p) in fam.into_iter().enumerate() {
            let spec = UnfoldingSpec::new(base.clone(), vec![0.0], vec![0.0], p, PsiSpec::zero()).map_err(e)?;
            // the systems differ only over supp ψ, so the grid is laid there
            let rho = build_unfolded(&spec).system_distance_on(&base, spec.psi_plus.support(), 201).map_err(e)?;
            if !(rho < prev) {
                return Err(format!("d={d} step {n}: ρ = {rho:e} not below {prev:e}"));
            }
            prev = rho;
        }
        if !(prev < 1e-4) {
            return Err(format!("d={d}: final ρ = {prev:e}"));
        }
        last = last.max(prev);
    }
    Ok(format!("final ρ ≤ {last:.1e}"))
}

fn conjugacy() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let w = Window::new(-4.0, 4.0, -4.0, 4.0).unwrap();
    let mut opts = SmoothOptions::default();
    opts.sigma_stop = false;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let fp = format!("1 + {}*y", rng.gen_range(-0.3..0.3));
        let phi = format!("{} + {}*x", rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5));
        let m = rng.gen_range(1..=3);
        let base = normal(&fp, &phi, m, "1", "1", 1, w);
        let lam: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let d = rng.gen_range(1..=2);
        let x0 = rng.gen_range(-1.0..0.0);
        let gap = rng.gen_range(0.1..0.3);
        let knots: Vec<f64> = (0..=2 * d).map(|j| x0 + j as f64 * gap).collect();
        let heights: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let psi = PsiSpec::blocks(&knots, &heights).map_err(e)?;
        let spec = UnfoldingSpec::new(base, lam, vec![0.0], psi, PsiSpec::zero()).map_err(e)?;
        let (sx, sy) = (rng.gen_range(-1.5..0.0), rng.gen_range(0.2..1.0));
        let r = shear_conjugacy_check(&spec, Side::Upper, sx, sy, 2.0, &opts).map_err(e)?;
        if r.t_reached <= 0.0 {
            return Err(format!("case {i}: no overlap"));
        }
        worst = worst.max(r.residual);
    }
    if worst <= 1e-6 {
        Ok(format!("100 cases, worst residual {worst:.1e}"))
    } else {
        Err(format!("worst residual {worst:e}"))
    }
}

fn splitting() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let slots: Vec<f64> = (0..9).map(|i| -0.2 + 0.05 * i as f64).collect();
    let mut trials = 0;
    for (mp, mm) in [(3usize, 0usize), (2, 2), (5, 3)] {
        let base = thm1_base(mp, mm).map_err(e)?;
        for t in 0..200 {
            let jitter = if t % 2 == 0 { 0.0 } else { rng.gen_range(-0.01..0.01) };
            let mut pick = |n: usize| -> Vec<f64> {
                (0..n).map(|_| slots[rng.gen_range(0..slots.len())] + jitter).collect()
            };
            let (lp, lm) = (pick(mp), pick(mm));
            let r = thm1_check(&base, &lp, &lm).map_err(e)?;
            let mut distinct: Vec<f64> = lp.iter().chain(&lm).copied().collect();
            distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
            distinct.dedup();
            if r.ell != distinct.len() || r.ell > mp + mm || r.sum_plus != mp || r.sum_minus != mm {
                return Err(format!(
                    "({mp},{mm}) λ⁺={lp:?} λ⁻={lm:?}: ℓ={} (expected {}), sums ({}, {})",
                    r.ell,
                    distinct.len(),
                    r.sum_plus,
                    r.sum_minus
                ));
            }
            trials += 1;
        }
        for ell in 1..=mp + mm {
            let (lp, lm) = thm1_construction(mp, mm, ell).map_err(e)?;
            let r = thm1_check(&base, &lp, &lm).map_err(e)?;
            if r.ell != ell || r.sum_plus != mp || r.sum_minus != mm {
                return Err(format!("({mp},{mm}) construction for ℓ={ell} gave ℓ={}", r.ell));
            }
            if ell == mp + mm && !r.alternates {
                return Err(format!("({mp},{mm}) simple tangent points do not alternate V/I"));
            }
        }
    }
    Ok(format!("{trials} random trials, all constructions exact"))
}

fn tangent_orbits() -> Check {
    let lo = LoopOptions::default();
    let mut got = Vec::new();
    for ell in 1..=3 {
        let r = scenario_thm2(7, Visibility::I, ell, 0.2, &lo).map_err(e)?;
        got.push(r.count);
    }
    let base = normal("1", "-1", 1, "1", "1", 0, Window::new(-1.0, 1.0, -1.0, 1.0).unwrap());
    let (_, orbits) = count_tangent_orbits(&base, (-0.5, 0.5), &lo).map_err(e)?;
    let m1 = orbits.iter().filter(|o| o.touched.len() == 1).count();
    let want: Vec<usize> = (1..=3).map(|l| (7 - 1) / (2 * l)).collect();
    if got == want && m1 == 0 {
        Ok(format!("m⁺=7: {got:?}, m⁺=1: {m1}"))
    } else {
        Err(format!("m⁺=7 counts {got:?} (want {want:?}), m⁺=1 count {m1}"))
    }
}

fn order_law() -> Check {
    let o = MapOptions::default();
    let mut out = Vec::new();
    for m in 1..=5 {
        let z = Subsystem::new(expr_field("1").unwrap(), expr_field(&format!("x^{m}")).unwrap());
        let s0 = Section::on_sigma(0.0, 0.5).map_err(e)?;
        let s1 = arrival_section(&z, &s0, (1.0, 0.0), (0.0, 1.0), 0.5, Direction::Forward, &o).map_err(e)?;
        let fit = sample_transition_map(&z, &s0, &s1, 1e-2, 1e-1, 12, &o).map_err(e)?;
        let want = 1.0 / (m as f64 + 1.0);
        let rel = (fit.coefficient.abs() - want).abs() / want;
        if fit.order != m + 1 || rel > 0.01 {
            return Err(format!("m={m}: order {} coefficient {:e}", fit.order, fit.coefficient));
        }
        out.push(rel);
    }
    Ok(format!("orders m+1, worst coefficient error {:.1e}", out.iter().fold(0.0f64, |a, b| a.max(*b))))
}

fn critical_loops() -> Check {
    let base = canonical_critical_loop(5, 5, 1.0, 1.0, -1.0).map_err(e)?;
    let co = ClusterOptions::default();
    let runs = [(Thm3Kind::Cro, 1), (Thm3Kind::Cro, 2), (Thm3Kind::Cri, 1), (Thm3Kind::Cri, 2), (Thm3Kind::Cri, 3)];
    for (kind, ell) in runs {
        let r = scenario_thm3(&base, ell, kind, &co).map_err(|x| format!("{kind:?}({ell}): {x}"))?;
        let want = if kind == Thm3Kind::Cro { LoopKind::CrossingNonsliding } else { LoopKind::Critical };
        let res = r.record.trajectory.closure_residual();
        if r.record.kind != want || r.record.touches != ell || res > 1e-8 {
            return Err(format!("{kind:?}({ell}): {} touches {} residual {res:e}", r.record.kind, r.record.touches));
        }
    }
    Ok("cro(1), cro(2), cri(1), cri(2), cri(3) verified".into())
}

fn census_critical() -> Check {
    let base = canonical_critical_loop(5, 5, 1.0, 1.0, -1.0).map_err(e)?;
    let co = ClusterOptions::default();
    let mut got = Vec::new();
    for ell in 0..=2 {
        let r = scenario_thm4(&base, ell, &co).map_err(|x| format!("ℓ={ell}: {x}"))?;
        got.push((r.census.cro(1), r.census.cri(1)));
        if ell == 2 && r.nested != Some(true) {
            return Err("critical loops are not nested in the ℓ=2 run".into());
        }
    }
    if got == [(2, 1), (1, 2), (0, 3)] {
        Ok(format!("{got:?}, nested"))
    } else {
        Err(format!("{got:?}"))
    }
}

fn census_sliding() -> Check {
    let base = canonical_critical_loop(5, 5, 1.0, 1.0, -1.0).map_err(e)?;
    let co = ClusterOptions::default();
    let mut got = Vec::new();
    for ell in 0..=3 {
        let r = scenario_thm5(&base, ell, &co).map_err(|x| format!("ℓ={ell}: {x}"))?;
        let (bs, bc) = (r.census.beta_s, r.census.beta_c);
        if bs != 3 - ell || bc < 2 + ell {
            return Err(format!("ℓ={ell}: beta_s={bs} beta_c={bc}"));
        }
        if !r.census.of_kind(LoopKind::SlidingLoop).all(|w| sliding_arc_at_visible(w, &r.visible)) {
            return Err(format!("ℓ={ell}: a sliding arc misses the visible tangent points"));
        }
        got.push((bs, bc));
    }
    Ok(format!("(beta_s, beta_c) = {got:?}"))
}

fn quadrature() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let w = Window::new(-3.0, 3.0, -3.0, 3.0).unwrap();
    let mut opts = SmoothOptions::default();
    opts.window = Some(w);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let g = format!("-(1 + {}*x + {}*x^2 + {}*x^3)", a[0], a[1], a[2]);
        let sub = Subsystem::new(expr_field("1").unwrap(), expr_field(&g).unwrap());
        let (x0, y0) = (rng.gen_range(-0.8..-0.3), rng.gen_range(0.05..0.3));
        let anti = |x: f64| x + a[0] * x * x / 2.0 + a[1] * x.powi(3) / 3.0 + a[2] * x.powi(4) / 4.0;
        // y(x) = y0 − (G(x) − G(x0)); bisect for the contact
        let y = |x: f64| y0 - (anti(x) - anti(x0));
        let (mut lo, mut hi) = (x0, x0 + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if y(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let arc = integrate_smooth(&sub, Side::Upper, (x0, y0), Direction::Forward, &opts).map_err(e)?;
        if arc.terminal != SmoothTerminal::Sigma {
            return Err(format!("case {i}: ended with {:?}", arc.terminal));
        }
        worst = worst.max((arc.end.1 - 0.5 * (lo + hi)).abs()).max(arc.end.2.abs());
    }
    if worst <= 1e-9 {
        Ok(format!("100 polynomials, worst contact error {worst:.1e}"))
    } else {
        Err(format!("worst contact error {worst:e}"))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Check); 11] = [
        ("sliding convex combination", 10, sliding_convex),
        ("cutoff family convergence", 5, psi_family),
        ("unfolding distance", 30, distance),
        ("shear conjugacy", 60, conjugacy),
        ("tangency splitting", 60, splitting),
        ("tangent orbit counts", 120, tangent_orbits),
        ("transition map order law", 30, order_law),
        ("critical and crossing loops", 300, critical_loops),
        ("nonsliding loop census", 600, census_critical),
        ("sliding loop census", 600, census_sliding),
        ("integrator quadrature oracle", 10, quadrature),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let dt = t.elapsed();
        let out = match out {
            Ok(msg) if dt > Duration::from_secs(*limit) => Err(format!("{msg}; took {dt:.1?}, limit {limit} s")),
            o => o,
        };
        match out {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} ({dt:.1?})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} ({dt:.1?})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
