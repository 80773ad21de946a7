use frontlab::fronts::Verdict;
use frontlab::scenario::{fixture, run_scenario, scenario_library, OutputOptions, Scenario, ScenarioError, SnapshotFormat};
use frontlab::geometry::{DomainSpec, Rect, Variant};
use std::fs;

#[test]
fn every_fixture_validates_on_a_small_grid() {
    let lib = scenario_library();
    assert_eq!(lib.len(), 8);
    for sc in lib {
        sc.validate().unwrap_or_else(|e| panic!("{}: {e}", sc.name));
        let w = sc.domain.window;
        let cells = ((w.x1 - w.x0) / sc.h) * ((w.y1 - w.y0) / sc.h);
        assert!(cells <= 1024.0 * 1024.0, "{} has {cells} cells", sc.name);
    }
}

#[test]
fn json_round_trip() {
    for sc in scenario_library() {
        assert_eq!(Scenario::from_json(&sc.to_json()).unwrap(), sc);
    }
}

#[test]
fn rejects_a_horizon_the_window_cannot_hold() {
    let mut sc = fixture("freeplane_planar").unwrap();
    sc.horizon *= 4.0;
    assert!(matches!(sc.validate(), Err(ScenarioError::Validation(_))));
    assert!(matches!(fixture("no_such_fixture"), Err(ScenarioError::UnknownFixture(_))));
}

#[test]
fn rejects_cfl_violations_and_empty_probes() {
    let mut sc = fixture("bilateral_narrowing").unwrap();
    sc.dt = Some(sc.h * sc.h);
    assert!(sc.validate().is_err());
    let mut sc = fixture("bilateral_narrowing").unwrap();
    sc.observers.probe = frontlab::pde::Region::Disk { center: [500.0, 0.0], radius: 1.0 };
    assert!(sc.validate().is_err());
}

#[test]
fn outputs_are_bitwise_reproducible() {
    let mut sc = fixture("bilateral_narrowing").unwrap();
    sc.initial_noise = 0.05;
    sc.seed = 9;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_scenario(&sc, &OutputOptions { out: Some(d.path()), snapshot_format: SnapshotFormat::Binary }).unwrap();
    }
    let read = |i: usize, f: &str| fs::read(dirs[i].path().join(&sc.name).join(f)).unwrap();
    for f in ["speeds.csv", "interfaces.csv"] {
        assert_eq!(read(0, f), read(1, f), "{f}");
    }
    let snaps = |i: usize| {
        let mut v: Vec<_> = fs::read_dir(dirs[i].path().join(&sc.name).join("snapshots")).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>()
    };
    let (a, b) = (snaps(0), snaps(1));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn straight_cylinder_is_a_free_strip() {
    let cyl = fixture("straight_cylinder").unwrap();
    let mut strip = cyl.clone();
    strip.name = "strip".into();
    let w = cyl.domain.window;
    strip.domain = DomainSpec { variant: Variant::FreePlane, window: Rect { x0: w.x0, y0: -3.0, x1: w.x1, y1: 3.0 } };
    let d = tempfile::tempdir().unwrap();
    let out = OutputOptions { out: Some(d.path()), snapshot_format: SnapshotFormat::Binary };
    let a = run_scenario(&cyl, &out).unwrap();
    let b = run_scenario(&strip, &out).unwrap();
    assert_eq!(a.cells, b.cells);
    assert!(a.verdict_is(Verdict::Complete), "{}", a.verdict);
    assert!(a.gamma_rel_error.unwrap().abs() < 0.05);
    for f in ["speeds.csv", "interfaces.csv"] {
        let read = |n: &str| fs::read(d.path().join(n).join(f)).unwrap();
        assert_eq!(read(&cyl.name), read("strip"), "{f}");
    }
}
