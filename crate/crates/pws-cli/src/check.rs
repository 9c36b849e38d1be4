//! Built-in self-test suite.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use pws::flow::Trajectory;
use pws::loops::{read_census_csv, write_census_csv};

use crate::config::parse_config;
use crate::report::{read_tangent_points_csv, write_tangent_points_csv};
use crate::run::{execute, Overrides};
use crate::svg::render_portrait;

pub struct CheckResult {
    pub name: &'static str,
    pub outcome: Result<String, String>,
}

type CheckFn = fn() -> Result<String, String>;

fn run_config(text: &str) -> Result<String, String> {
    let cfg = parse_config(text).map_err(|e| e.to_string())?;
    let a = execute(&cfg, &Overrides::default());
    let s: Vec<String> = a.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if a.passed() {
        Ok(s.join(" "))
    } else {
        Err(a.failures.join("; "))
    }
}

fn minimal_config() -> Result<String, String> {
    let c = parse_config("upper.f = \"1\"\nupper.phi = \"1\"\nupper.m = 1\nlower.g = \"1\"\n").map_err(|e| e.to_string())?;
    let s = c.system().map_err(|e| e.to_string())?;
    match s.normal_form {
        Some(_) => Ok("normal form recorded".into()),
        None => Err("normal form missing".into()),
    }
}

fn splitting() -> Result<String, String> {
    run_config("upper.m = 5\nlower.m = 3\nscenario.kind = thm1\nscenario.ell = 8\n")
}

fn tangent_orbits() -> Result<String, String> {
    run_config("upper.m = 7\nscenario.kind = thm2\nscenario.visibility = I\nscenario.ell = 1\n")
}

fn loop_census() -> Result<String, String> {
    run_config("upper.m = 5\nlower.m = 5\nscenario.kind = thm4\nscenario.ell = 1\n")
}

fn round_trips() -> Result<String, String> {
    let cfg = parse_config("upper.m = 3\nlower.m = 3\nscenario.kind = thm3\nscenario.loop = cri\nscenario.ell = 1\n")
        .map_err(|e| e.to_string())?;
    let a = execute(&cfg, &Overrides::default());
    if !a.passed() {
        return Err(a.failures.join("; "));
    }
    let mut buf = Vec::new();
    write_census_csv(&a.census, &mut buf).map_err(|e| e.to_string())?;
    if read_census_csv(buf.as_slice())? != a.census {
        return Err("census rows differ after round trip".into());
    }
    buf.clear();
    write_tangent_points_csv(&a.tangent_points, &mut buf).map_err(|e| e.to_string())?;
    if read_tangent_points_csv(buf.as_slice())? != a.tangent_points {
        return Err("tangent points differ after round trip".into());
    }
    for (name, c) in &a.witnesses {
        buf.clear();
        c.trajectory.write_csv(&mut buf).map_err(|e| e.to_string())?;
        if Trajectory::read_csv(buf.as_slice())? != c.trajectory {
            return Err(format!("trajectory {name} differs after round trip"));
        }
    }
    let svg = render_portrait(a.system.as_ref().unwrap(), &[], &a.tangent_points);
    if !svg.contains("id=\"sigma\"") {
        return Err("portrait lacks Σ".into());
    }
    Ok(format!("{} census rows, {} tangent points, {} trajectories", a.census.len(), a.tangent_points.len(), a.witnesses.len()))
}

pub const CHECKS: &[(&str, CheckFn)] = &[
    ("minimal-config", minimal_config),
    ("splitting", splitting),
    ("tangent-orbits", tangent_orbits),
    ("loop-census", loop_census),
    ("round-trips", round_trips),
];

/// Run all checks on `threads` workers; results come back in suite order.
pub fn run_checks(threads: usize) -> Vec<CheckResult> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CheckResult>>> = Mutex::new((0..CHECKS.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, CHECKS.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(name, f)) = CHECKS.get(i) else { break };
                let outcome = f();
                results.lock().unwrap()[i] = Some(CheckResult { name, outcome });
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every check ran")).collect()
}
