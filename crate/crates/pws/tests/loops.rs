use pws::flow::ArcKind;
use pws::loops::{
    canonical_critical_loop, classify_loop, find_crossing_cycles, scenario_thm3, scenario_thm4, scenario_thm5,
    unstable_critical, CanonicalLoop, ClusterOptions, LoopKind, LoopOptions, Thm3Kind, DEFAULT_MAX_ROOTS,
};
use pws::PwsError;

fn base5() -> CanonicalLoop {
    canonical_critical_loop(5, 5, 1.0, 1.0, -1.0).unwrap()
}

#[test]
fn census_witnesses_reclassify_to_their_counters() {
    let base = base5();
    let co = ClusterOptions::default();
    let lo = LoopOptions::default();
    let runs = [scenario_thm4(&base, 1, &co).unwrap(), scenario_thm5(&base, 1, &co).unwrap()];
    for run in &runs {
        let mut again = pws::loops::LoopCensus::default();
        for w in &run.census.witnesses {
            assert!(w.trajectory.closure_residual() <= 1e-8);
            let r = classify_loop(&run.system, &w.trajectory, &lo).unwrap();
            assert_eq!((r.kind, r.touches), (w.kind, w.touches));
            again.add(r);
        }
        assert_eq!(again.summary(), run.census.summary());
        assert_eq!(run.census.grazing, 0);
    }
}

#[test]
fn pinned_critical_loops_are_unstable() {
    let r = scenario_thm4(&base5(), 2, &ClusterOptions::default()).unwrap();
    assert_eq!(r.census.cri(1), 3);
    assert_eq!(unstable_critical(&r.census), 3);
    assert_eq!(r.nested, Some(true));
}

#[test]
fn sliding_arcs_are_convex_combinations() {
    let r = scenario_thm5(&base5(), 0, &ClusterOptions::default()).unwrap();
    let mut n = 0;
    for w in r.census.of_kind(LoopKind::SlidingLoop) {
        for arc in w.trajectory.arcs.iter().filter(|a| a.kind == ArcKind::Sliding) {
            for &(_, x, y) in &arc.samples {
                assert_eq!(y, 0.0);
                let a = r.system.convex_coefficient(x).unwrap();
                assert!((0.0..=1.0).contains(&a), "weight {a} at x={x}");
                n += 1;
            }
        }
    }
    assert!(n > 0);
}

#[test]
fn sign_changes_of_the_return_map() {
    let base = base5();
    let r = scenario_thm5(&base, 3, &ClusterOptions::default()).unwrap();
    let interval = (base.p() - 0.2 * base.a, 0.2 * base.a);
    let s = find_crossing_cycles(&r.system, interval, DEFAULT_MAX_ROOTS, &LoopOptions::default());
    assert_eq!(s.sign_changes, 5, "{:?}", s.diagnostics);
    assert!(!s.continuum);
    assert!(s.cycles.iter().all(|c| c.kind == LoopKind::CrossingLimitCycle));
}

#[test]
fn scenario_ranges() {
    let co = ClusterOptions::default();
    let b1 = canonical_critical_loop(1, 1, 1.0, 1.0, -1.0).unwrap();
    assert!(matches!(scenario_thm3(&b1, 1, Thm3Kind::Cro, &co), Err(PwsError::RangeError(_))));
    let b5 = base5();
    assert!(matches!(scenario_thm3(&b5, 3, Thm3Kind::Cro, &co), Err(PwsError::RangeError(_))));
    assert!(matches!(scenario_thm3(&b5, 4, Thm3Kind::Cri, &co), Err(PwsError::RangeError(_))));
    assert!(matches!(scenario_thm3(&b5, 0, Thm3Kind::Cri, &co), Err(PwsError::RangeError(_))));
    assert!(matches!(scenario_thm4(&b5, 3, &co), Err(PwsError::RangeError(_))));
    assert!(matches!(scenario_thm5(&b5, 4, &co), Err(PwsError::RangeError(_))));
    let b3 = canonical_critical_loop(3, 3, 1.0, 1.0, -1.0).unwrap();
    assert!(matches!(scenario_thm4(&b3, 0, &co), Err(PwsError::RangeError(_))));
    let skew = canonical_critical_loop(3, 5, 1.0, 1.0, -1.0).unwrap();
    assert!(matches!(scenario_thm3(&skew, 1, Thm3Kind::Cri, &co), Err(PwsError::RangeError(_))));
}

#[test]
fn fold_cluster_gives_one_critical_loop() {
    let b1 = canonical_critical_loop(1, 1, 1.0, 1.0, -1.0).unwrap();
    let r = scenario_thm3(&b1, 1, Thm3Kind::Cri, &ClusterOptions::default()).unwrap();
    assert_eq!(r.record.kind, LoopKind::Critical);
    assert_eq!(r.record.touches, 1);
}

#[test]
fn unequal_multiplicities() {
    let b = canonical_critical_loop(5, 3, 1.0, 1.0, -1.0).unwrap();
    assert_eq!(b.m_star(), 5);
    let r = scenario_thm3(&b, 2, Thm3Kind::Cro, &ClusterOptions::default()).unwrap();
    assert_eq!((r.record.kind, r.record.touches), (LoopKind::CrossingNonsliding, 2));
}
