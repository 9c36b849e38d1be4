//! Scenario execution and artifact output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pws::flow::{integrate_pws, Direction, PwsOptions, Trajectory};
use pws::loops::{
    canonical_critical_loop, scenario_thm2, scenario_thm3, scenario_thm4, scenario_thm5, thm1_base, thm1_check,
    thm1_construction, write_census_csv, CensusRow, ClusterOptions, LoopCensus, LoopOptions, Thm3Kind,
};
use pws::tangency::find_tangent_points;
use pws::{PwsSystem, TangentPointRecord, Visibility};

use crate::config::{RunConfig, ScenarioKind};
use crate::report::{write_summary, write_tangent_points_csv};
use crate::svg::{render_portrait, Curve};

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

/// What a scenario produced, before anything is written.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub system: Option<PwsSystem>,
    pub census: Vec<CensusRow>,
    pub witnesses: Vec<(String, Curve)>,
    pub tangent_points: Vec<TangentPointRecord>,
    pub summary: Vec<(String, String)>,
    /// Failed assertions; empty on success.
    pub failures: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl Artifacts {
    fn put(&mut self, k: &str, v: impl ToString) {
        self.summary.push((k.to_string(), v.to_string()));
    }

    fn expect(&mut self, what: &str, got: usize, want: usize) {
        self.put(what, got);
        if got != want {
            self.failures.push(format!("{what}: got {got}, expected {want}"));
        }
    }

    fn expect_at_least(&mut self, what: &str, got: usize, want: usize) {
        self.put(what, got);
        if got < want {
            self.failures.push(format!("{what}: got {got}, expected at least {want}"));
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn out_dir(cfg: &RunConfig, ov: &Overrides) -> PathBuf {
    ov.out.clone().unwrap_or_else(|| cfg.output.dir.clone())
}

fn loop_options(cfg: &RunConfig, ov: &Overrides) -> LoopOptions {
    let mut lo = LoopOptions::default();
    if let Some(t) = ov.tol.or(cfg.scenario.tol) {
        lo.smooth.stepper.rtol = t;
        lo.smooth.stepper.atol = t * 1e-2;
    }
    lo
}

fn cluster_options(cfg: &RunConfig, ov: &Overrides) -> ClusterOptions {
    let mut co = ClusterOptions { loops: loop_options(cfg, ov), delta: cfg.scenario.delta, ..ClusterOptions::default() };
    if let Some(a) = cfg.scenario.alpha {
        co.alpha_scale = a;
    }
    co
}

fn tangent_records(sys: &PwsSystem) -> pws::Result<Vec<TangentPointRecord>> {
    let w = sys.window;
    let dec = sys.decompose_sigma((w.x_hi - w.x_lo) * 1e-4)?;
    Ok(find_tangent_points(sys, &dec)?.records)
}

fn census_witnesses(a: &mut Artifacts, c: &LoopCensus) {
    for (i, r) in c.witnesses.iter().enumerate() {
        a.witnesses.push((format!("{:03}_{}", i, r.kind.name()), Curve::looped(r.trajectory.clone(), r.kind)));
    }
}

fn canonical(cfg: &RunConfig) -> pws::Result<pws::loops::CanonicalLoop> {
    let sc = &cfg.scenario;
    canonical_critical_loop(cfg.upper.m.unwrap_or(1), cfg.lower.m.unwrap_or(1), sc.a, sc.k1, sc.k2)
}

/// Run the configured scenario in memory. Library errors become failures.
pub fn execute(cfg: &RunConfig, ov: &Overrides) -> Artifacts {
    let mut a = Artifacts::default();
    a.put("scenario", cfg.scenario.kind);
    if let Err(e) = execute_into(cfg, ov, &mut a) {
        a.failures.push(e.to_string());
    }
    a
}

fn execute_into(cfg: &RunConfig, ov: &Overrides, a: &mut Artifacts) -> pws::Result<()> {
    let sc = &cfg.scenario;
    let (mp, mm) = (cfg.upper.m.unwrap_or(0), cfg.lower.m.unwrap_or(0));
    let ell = sc.ell.unwrap_or(0);
    match sc.kind {
        ScenarioKind::Portrait => {
            let sys = cfg.system()?;
            let mut po = PwsOptions::default();
            if let Some(t) = ov.tol.or(sc.tol) {
                po.smooth.stepper.rtol = t;
                po.smooth.stepper.atol = t * 1e-2;
            }
            for (i, &p) in sc.starts.iter().enumerate() {
                let t = integrate_pws(&sys, p, sc.t_span, Direction::Forward, &po)?;
                a.witnesses.push((format!("{i:03}_orbit"), Curve::orbit(t)));
            }
            a.tangent_points = tangent_records(&sys)?;
            a.put("tangent_points", a.tangent_points.len());
            a.put("trajectories", sc.starts.len());
            a.system = Some(sys);
        }
        ScenarioKind::Thm1 => {
            let base = if cfg.upper.phi.is_some() && cfg.lower.phi.is_some() { cfg.system()? } else { thm1_base(mp, mm)? };
            let total = mp + mm;
            if let (Some(lp), Some(lm)) = (&sc.lambda_plus, &sc.lambda_minus) {
                let r = thm1_check(&base, lp, lm)?;
                let mut distinct: Vec<f64> = lp.iter().chain(lm).copied().collect();
                distinct.sort_by(|x, y| x.partial_cmp(y).unwrap());
                distinct.dedup();
                a.expect("ell", r.ell, distinct.len());
                a.expect("sum_plus", r.sum_plus, mp);
                a.expect("sum_minus", r.sum_minus, mm);
                a.tangent_points = r.records;
            } else if let Some(ell) = sc.ell {
                let (lp, lm) = thm1_construction(mp, mm, ell)?;
                let r = thm1_check(&base, &lp, &lm)?;
                a.expect("ell", r.ell, ell);
                a.expect("sum_plus", r.sum_plus, mp);
                a.expect("sum_minus", r.sum_minus, mm);
                if ell == total {
                    a.put("alternates", r.alternates);
                    if !r.alternates {
                        a.failures.push("simple tangent points do not alternate V/I".into());
                    }
                }
                a.tangent_points = r.records;
            }
            if sc.trials > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(ov.seed.unwrap_or(sc.seed));
                let slots: Vec<f64> = (0..9).map(|i| -0.2 + 0.05 * i as f64).collect();
                let mut bad = 0;
                for _ in 0..sc.trials {
                    let mut pick = |n: usize| -> Vec<f64> { (0..n).map(|_| slots[rng.gen_range(0..slots.len())]).collect() };
                    let (lp, lm) = (pick(mp), pick(mm));
                    let r = thm1_check(&base, &lp, &lm)?;
                    let mut distinct: Vec<f64> = lp.iter().chain(&lm).copied().collect();
                    distinct.sort_by(|x, y| x.partial_cmp(y).unwrap());
                    distinct.dedup();
                    if r.ell != distinct.len() || r.ell > total || r.sum_plus != mp || r.sum_minus != mm {
                        bad += 1;
                        a.diagnostics.push(format!("λ⁺={lp:?} λ⁻={lm:?}: ℓ={} sums=({}, {})", r.ell, r.sum_plus, r.sum_minus));
                    }
                }
                a.put("trials", sc.trials);
                a.expect("failed_trials", bad, 0);
            }
            a.system = Some(base);
        }
        ScenarioKind::Thm2 => {
            let vis = sc.visibility.unwrap_or(Visibility::V);
            let r = scenario_thm2(mp, vis, ell, sc.delta.unwrap_or(0.2), &loop_options(cfg, ov))?;
            let d = match vis {
                Visibility::I => (mp - 1) / 2,
                Visibility::V => (mp + 1) / 2,
                Visibility::L | Visibility::R => mp / 2,
            };
            a.expect("visible", r.visible.len(), d);
            a.expect("tangent_orbits", r.count, d / ell);
            for (i, o) in r.orbits.iter().enumerate() {
                a.witnesses.push((format!("{i:03}_touch{}", o.touched.len()), Curve::orbit(o.trajectory.clone())));
            }
            a.tangent_points = tangent_records(&r.system)?;
            a.system = Some(r.system);
        }
        ScenarioKind::Thm3 => {
            let base = canonical(cfg)?;
            let kind = sc.loop_kind.unwrap_or(Thm3Kind::Cri);
            let r = scenario_thm3(&base, ell, kind, &cluster_options(cfg, ov))?;
            let name = match kind {
                Thm3Kind::Cro => "thm3-cro",
                Thm3Kind::Cri => "thm3-cri",
            };
            a.put("loop_kind", r.record.kind);
            a.expect("touches", r.record.touches, ell);
            a.put("closure_residual", format!("{:e}", r.record.trajectory.closure_residual()));
            let mut c = LoopCensus::default();
            c.add(r.record);
            a.census.push(CensusRow::from_census(name, base.m_plus, base.m_minus, ell, &c, "trajectories"));
            census_witnesses(a, &c);
            a.tangent_points = tangent_records(&r.system)?;
            a.system = Some(r.system);
        }
        ScenarioKind::Thm4 => {
            let base = canonical(cfg)?;
            let r = scenario_thm4(&base, ell, &cluster_options(cfg, ov))?;
            let n_cro = (base.m_star() - 1) / 2;
            a.expect("beta_cro_1", r.census.cro(1), n_cro - ell);
            a.expect("beta_cri_1", r.census.cri(1), ell + 1);
            if let Some(n) = r.nested {
                a.put("nested", n);
                if !n {
                    a.failures.push("critical loops are not nested".into());
                }
            }
            a.census.push(CensusRow::from_census("thm4", base.m_plus, base.m_minus, ell, &r.census, "trajectories"));
            a.diagnostics.extend(r.diagnostics.iter().cloned());
            census_witnesses(a, &r.census);
            a.tangent_points = tangent_records(&r.system)?;
            a.system = Some(r.system);
        }
        ScenarioKind::Thm5 => {
            let base = canonical(cfg)?;
            let r = scenario_thm5(&base, ell, &cluster_options(cfg, ov))?;
            let m = base.m_star();
            let d = (m + 1) / 2;
            a.expect("beta_s", r.census.beta_s, d - ell);
            a.expect_at_least("beta_c", r.census.beta_c, m - d + ell);
            a.census.push(CensusRow::from_census("thm5", base.m_plus, base.m_minus, ell, &r.census, "trajectories"));
            a.diagnostics.extend(r.diagnostics.iter().cloned());
            census_witnesses(a, &r.census);
            a.tangent_points = tangent_records(&r.system)?;
            a.system = Some(r.system);
        }
    }
    Ok(())
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write every artifact under `dir`; the diagnostics file only on failure.
pub fn write_artifacts(a: &Artifacts, dir: &Path, portrait: bool) -> std::io::Result<()> {
    fs::create_dir_all(dir.join("trajectories"))?;
    write_census_csv(&a.census, create(&dir.join("census.csv"))?)?;
    write_tangent_points_csv(&a.tangent_points, create(&dir.join("tangent_points.csv"))?)?;
    for (name, c) in &a.witnesses {
        c.trajectory.write_csv(create(&dir.join("trajectories").join(format!("{name}.csv")))?)?;
    }
    let mut summary = a.summary.clone();
    summary.push(("status".into(), if a.passed() { "pass" } else { "fail" }.into()));
    write_summary(&summary, create(&dir.join("summary.txt"))?)?;
    if portrait {
        if let Some(sys) = &a.system {
            let curves: Vec<Curve> = a.witnesses.iter().map(|(_, c)| c.clone()).collect();
            fs::write(dir.join("portrait.svg"), render_portrait(sys, &curves, &a.tangent_points))?;
        }
    }
    let diag = dir.join("diagnostics.txt");
    if a.passed() {
        if diag.exists() {
            fs::remove_file(&diag)?;
        }
    } else {
        let mut w = create(&diag)?;
        for f in &a.failures {
            writeln!(w, "FAIL {f}")?;
        }
        for d in &a.diagnostics {
            writeln!(w, "{d}")?;
        }
    }
    Ok(())
}

/// Trajectories of the configured system only, no assertions.
pub fn portrait_only(cfg: &RunConfig, ov: &Overrides) -> Artifacts {
    let mut cfg = cfg.clone();
    if cfg.scenario.kind == ScenarioKind::Thm1 {
        cfg.scenario.kind = ScenarioKind::Portrait;
    }
    let mut a = execute(&cfg, ov);
    a.census.clear();
    a
}

/// A single smooth arc through `points`, unit time apart.
pub fn trajectory_from_points(points: &[(f64, f64)]) -> Trajectory {
    let mut t = Trajectory::default();
    let samples = points.iter().enumerate().map(|(i, &(x, y))| (i as f64, x, y)).collect();
    t.push_arc(pws::flow::ArcKind::Upper, samples);
    t
}
