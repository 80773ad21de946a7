use frontlab::fronts::{interface_of, mean_speed, width_bound, Interface, Recorder};
use frontlab::geometry::{rasterize, set_distance, DomainSpec, MaskedGrid, Rect, Variant};
use frontlab::pde::{init_planar_front, run, StepScheme};
use frontlab::reaction::Reaction;
use frontlab::wave::solve_profile;
use proptest::prelude::*;
use std::sync::Arc;

fn plane(w: f64, hgt: f64, h: f64) -> Arc<MaskedGrid> {
    let spec = DomainSpec { variant: Variant::FreePlane, window: Rect { x0: 0.0, y0: 0.0, x1: w, y1: hgt } };
    Arc::new(rasterize(&spec, h).unwrap())
}

/// Interfaces of the indicator of `{x . e < b + c t}` on a clean grid.
fn moving_halfplane(g: &MaskedGrid, e: [f64; 2], b: f64, c: f64, times: &[f64]) -> Vec<Interface> {
    times
        .iter()
        .map(|&t| {
            let u: Vec<f64> = (0..g.len())
                .map(|k| {
                    let p = g.center(k);
                    if p[0] * e[0] + p[1] * e[1] < b + c * t { 1.0 } else { 0.0 }
                })
                .collect();
            interface_of(g, &u, t)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn axis_motion_speed_is_exact(m in 1u32..8) {
        let g = plane(80.0, 4.0, 0.5);
        // m cells per 5 time units: the interface lands on cell rows exactly.
        let c = m as f64 * 0.5 / 5.0;
        let times: Vec<f64> = (0..12).map(|n| 5.0 * n as f64).collect();
        let est = mean_speed(&moving_halfplane(&g, [1.0, 0.0], 4.0, c, &times), &g).unwrap();
        prop_assert!((est.gamma - c).abs() < 1e-12, "{} vs {c}", est.gamma);
    }

    #[test]
    fn oblique_motion_is_within_the_octile_bound(angle in 0.0f64..std::f64::consts::FRAC_PI_2, c in 0.2f64..0.6) {
        let g = plane(60.0, 60.0, 0.25);
        let e = [angle.cos(), angle.sin()];
        let times: Vec<f64> = (0..10).map(|n| 6.0 * n as f64).collect();
        let est = mean_speed(&moving_halfplane(&g, e, 8.0, c, &times), &g).unwrap();
        let rel = est.gamma / c - 1.0;
        // Grid snapping adds up to one diagonal per distance, over distances >= 12 c.
        let snap = 2f64.sqrt() * 0.25 / (0.2 * 54.0 * c);
        prop_assert!(rel > -snap && rel < 0.0824 + snap, "angle {angle}: rel {rel}");
    }
}

#[test]
fn simulated_front_has_bounded_oscillation_and_width() {
    let r = Reaction::cubic(0.25).unwrap();
    let p = solve_profile(&r, 1e-10).unwrap();
    let g = plane(64.0, 8.0, 0.25);
    let f0 = init_planar_front(g.clone(), &p, [1.0, 0.0], 8.0);
    let s = StepScheme::default_for(&g, &r);
    let mut rec = Recorder::new(10.0);
    run(f0, &r, &s, 100.0, &mut [&mut rec]).unwrap();
    let ifs: Vec<Interface> = rec.snaps.iter().map(|sn| interface_of(&g, &sn.values, sn.time)).collect();
    let mut fitted: f64 = 0.0;
    for a in &ifs {
        for b in &ifs {
            let d = set_distance(&g, &a.cells, &b.cells);
            fitted = fitted.max(d / (1.0 + (a.time - b.time).abs()));
        }
    }
    assert!(fitted <= p.c_f * 1.1, "oscillation constant {fitted}");
    // Transition layer width is that of the profile up to a cell.
    let m = width_bound(&g, &rec.snaps, 0.01);
    assert!(m <= 2.0 * p.threshold_c(0.01) + 2.0 * g.h, "width {m}");
    assert!(m >= p.threshold_c(0.01) - 2.0 * g.h);
}
