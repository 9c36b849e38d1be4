use std::fs;
use std::path::Path;
use std::process::Command;

use pws::flow::{integrate_pws, Direction, PwsOptions, Trajectory};
use pws::loops::{read_census_csv, LoopKind};
use pws::{PwsSystem, Window};
use pws_cli::report::read_tangent_points_csv;
use pws_cli::svg::{render_portrait, Curve, HEIGHT};
use pws_cli::{parse_config, ConfigError, ScenarioKind};

fn pws(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pws")).args(args).output().unwrap()
}

fn run_config(dir: &Path, text: &str) -> std::process::Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, text).unwrap();
    let out = dir.join("out");
    pws(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn summary(dir: &Path) -> String {
    fs::read_to_string(dir.join("out/summary.txt")).unwrap()
}

#[test]
fn minimal_config_is_valid() {
    let c = parse_config("upper.f = \"1\"\nupper.phi = \"1\"\nupper.m = 1\nlower.g = \"1\"\n").unwrap();
    assert_eq!(c.upper.m, Some(1));
    assert_eq!(c.scenario.kind, ScenarioKind::Portrait);
    c.system().unwrap();
}

#[test]
fn negative_multiplicity_is_rejected() {
    let e = parse_config("upper.phi = \"1\"\nupper.m = -1\n").unwrap_err();
    assert!(matches!(&e, ConfigError::Invalid { field, .. } if field == "upper.m"), "{e}");
}

#[test]
fn unknown_key_is_named() {
    let e = parse_config("upper.g = \"x\"\nscenario.colour = 3\n").unwrap_err();
    assert_eq!(e, ConfigError::UnknownKey("scenario.colour".into()));
    assert!(e.to_string().contains("scenario.colour"));
}

#[test]
fn parse_errors_carry_the_line() {
    let e = parse_config("upper.g = \"x\"\n\nthis is not a key\n").unwrap_err();
    assert!(matches!(e, ConfigError::Parse { line: 3, .. }), "{e}");
}

#[test]
fn malformed_config_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let o = run_config(d.path(), "upper.g = \"x +\"\n");
    assert_eq!(o.status.code(), Some(2));
    let o = pws(&["run", d.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn loop_census_run() {
    let d = tempfile::tempdir().unwrap();
    let o = run_config(d.path(), "upper.m = 5\nlower.m = 5\nscenario.kind = thm4\nscenario.ell = 1\n");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_census_csv(fs::File::open(d.path().join("out/census.csv")).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].scenario.as_str(), rows[0].beta_cro_1, rows[0].beta_cri_1), ("thm4", 1, 2));
    assert!(!d.path().join("out/diagnostics.txt").exists());
    assert!(d.path().join("out/portrait.svg").exists());
}

#[test]
fn tangent_orbit_run() {
    let d = tempfile::tempdir().unwrap();
    let o = run_config(d.path(), "upper.m = 7\nscenario.kind = thm2\nscenario.visibility = I\nscenario.ell = 1\n");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(summary(d.path()).lines().any(|l| l == "tangent_orbits=3"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("tangent_orbits=3"));
}

#[test]
fn failing_scenario_writes_diagnostics() {
    let d = tempfile::tempdir().unwrap();
    let o = run_config(d.path(), "upper.m = 5\nlower.m = 5\nscenario.kind = thm4\nscenario.ell = 1\nscenario.delta = 0.5\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(fs::read_to_string(d.path().join("out/diagnostics.txt")).unwrap().starts_with("FAIL"));
    assert!(summary(d.path()).contains("status=fail"));
}

#[test]
fn artifacts_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let o = run_config(d.path(), "upper.m = 3\nlower.m = 3\nscenario.kind = thm3\nscenario.loop = cro\nscenario.ell = 1\n");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("out");
    let tp = read_tangent_points_csv(fs::read_to_string(out.join("tangent_points.csv")).unwrap().as_bytes()).unwrap();
    assert!(tp.iter().all(|r| r.is_consistent()));
    let mut again = Vec::new();
    pws_cli::report::write_tangent_points_csv(&tp, &mut again).unwrap();
    assert_eq!(String::from_utf8(again).unwrap(), fs::read_to_string(out.join("tangent_points.csv")).unwrap());
    let mut n = 0;
    for e in fs::read_dir(out.join("trajectories")).unwrap() {
        let text = fs::read_to_string(e.unwrap().path()).unwrap();
        let t = Trajectory::read_csv(text.as_bytes()).unwrap();
        let mut again = Vec::new();
        t.write_csv(&mut again).unwrap();
        assert_eq!(String::from_utf8(again).unwrap(), text);
        n += 1;
    }
    assert_eq!(n, 1);
}

#[test]
fn portrait_command_draws_orbits() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("p.cfg");
    fs::write(&cfg, "upper.f = \"1\"\nupper.g = \"-x\"\nlower.f = \"1\"\nlower.g = \"1\"\nscenario.start = 0.5, 0.5\nscenario.t_span = 2\n").unwrap();
    let out = d.path().join("o");
    let o = pws(&["portrait", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let svg = fs::read_to_string(out.join("portrait.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.contains("class=\"tangent\""));
}

#[test]
fn check_suite_passes() {
    let o = Command::new(env!("CARGO_BIN_EXE_pws")).arg("check").env("PWS_THREADS", "2").output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

fn polylines(svg: &str, class: &str) -> Vec<Vec<(f64, f64)>> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline") && l.contains(&format!("class=\"{class}\"")))
        .map(|l| {
            let pts = l.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
            pts.split(' ')
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

fn sigma_row(svg: &str) -> f64 {
    let l = svg.lines().find(|l| l.contains("id=\"sigma\"")).unwrap();
    l.split("y1=\"").nth(1).unwrap().split('"').next().unwrap().parse().unwrap()
}

#[test]
fn empty_portrait_has_sigma_and_shading() {
    let sys = PwsSystem::from_sources("1", "x", "1", "-x", Window::new(-1.0, 1.0, -1.0, 1.0).unwrap()).unwrap();
    let svg = render_portrait(&sys, &[], &[]);
    assert!(svg.contains("width=\"800\"") && svg.contains("height=\"600\""));
    assert!(svg.contains("id=\"sigma\"") && svg.contains("id=\"upper\"") && svg.contains("id=\"lower\""));
    assert!(!svg.contains("<polyline"));
    assert!((sigma_row(&svg) - HEIGHT / 2.0).abs() < 1e-9);
    // g⁺g⁻ = -x² < 0 away from 0: sliding on both sides
    assert!(svg.matches("class=\"sliding\"").count() >= 1);
}

#[test]
fn grazing_loop_is_one_closed_polyline_above_sigma() {
    // circle of radius 1 about (0, 1), touching Σ at the origin
    let sys = PwsSystem::from_sources("1 - y", "x", "1", "1", Window::new(-3.0, 3.0, -3.0, 3.0).unwrap()).unwrap();
    let t = integrate_pws(&sys, (0.0, 2.0), 2.0 * std::f64::consts::PI, Direction::Forward, &PwsOptions::default()).unwrap();
    let svg = render_portrait(&sys, &[Curve::looped(t, LoopKind::Grazing)], &[]);
    let lines = polylines(&svg, "grazing");
    assert_eq!(lines.len(), 1);
    assert_eq!(svg.matches("<polyline").count(), 1);
    let (a, b) = (lines[0][0], *lines[0].last().unwrap());
    assert!((a.0 - b.0).hypot(a.1 - b.1) <= 0.02);
    let y0 = sigma_row(&svg);
    assert!(lines[0].iter().all(|p| p.1 <= y0 + 1e-6));
}

#[test]
fn sliding_census_portrait() {
    let d = tempfile::tempdir().unwrap();
    let o = run_config(d.path(), "upper.m = 5\nlower.m = 5\nscenario.kind = thm5\nscenario.ell = 0\n");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(d.path().join("out/portrait.svg")).unwrap();
    assert_eq!(polylines(&svg, "sliding-loop").len(), 3);
    assert!(polylines(&svg, "crossing-limit-cycle").len() >= 2);
}
