use frontlab::certificates::{build_params, certificate_suite, check_sub_lemma22, sub_lemma22_value, CertificateParams, Sampling};
use frontlab::geometry::{rasterize, DomainSpec, Rect, Variant};
use frontlab::pde::{run, Field, StepScheme};
use frontlab::reaction::Reaction;
use frontlab::wave::{solve_profile, WaveProfile};
use std::sync::Arc;

fn setup() -> (Reaction, WaveProfile) {
    let r = Reaction::cubic(0.25).unwrap();
    let p = solve_profile(&r, 1e-10).unwrap();
    (r, p)
}

fn horizon(profile: &WaveProfile, q: &CertificateParams) -> f64 {
    q.r_eps + q.l_eps + (profile.c_f - q.eps) * 8.0 / q.delta
}

#[test]
fn passing_verdicts_do_not_depend_on_the_seed() {
    let (r, p) = setup();
    let run = |seed| certificate_suite(&r, &p, p.c_f / 2.0, 1.0, 2, Sampling { samples: 100_000, seed }).unwrap();
    let (a, b) = (run(0), run(12345));
    for (x, y) in a.iter().zip(&b).filter(|(x, _)| x.expect_pass) {
        assert!(x.report.passed() && y.report.passed(), "{}", x.label);
        assert!((x.report.worst - y.report.worst).abs() <= 1e-7, "{}: {} vs {}", x.label, x.report.worst, y.report.worst);
    }
}

#[test]
fn checks_also_pass_in_three_dimensions() {
    let (r, p) = setup();
    let rows = certificate_suite(&r, &p, p.c_f / 2.0, 1.0, 3, Sampling { samples: 20_000, seed: 1 }).unwrap();
    for row in rows {
        assert_eq!(row.report.passed(), row.expect_pass, "{}: {}", row.label, row.report.summary());
    }
}

#[test]
fn larger_omega_widens_the_sub_solution_margin() {
    let (r, p) = setup();
    let base = build_params(&r, &p, p.c_f / 2.0, 1.0, 2).unwrap();
    let worst: Vec<f64> = [1.0, 1.5, 2.0, 3.0, 4.0]
        .iter()
        .map(|&m| {
            let mut q = base.clone();
            q.omega *= m;
            q.r_eps = q.helper().h_eps.max(q.helper().h0()) + q.omega + q.c_eps + q.c;
            let rep = check_sub_lemma22(&p, &r, &q, horizon(&p, &q), Sampling { samples: 20_000, seed: 0 });
            assert!(rep.passed(), "{}", rep.summary());
            rep.worst
        })
        .collect();
    assert!(worst.windows(2).all(|w| w[1] < w[0]), "{worst:?}");
}

// delta_eps is proportional to eps, so a smaller eps also shrinks the
// vertical shift that pays for the reaction term; the margin narrows.
#[test]
fn smaller_eps_narrows_the_sub_solution_margin() {
    let (r, p) = setup();
    let worst: Vec<f64> = [0.5, 0.4, 0.3, 0.2, 0.1]
        .iter()
        .map(|&frac| {
            let q = build_params(&r, &p, frac * p.c_f, 1.0, 2).unwrap();
            let rep = check_sub_lemma22(&p, &r, &q, horizon(&p, &q), Sampling { samples: 20_000, seed: 0 });
            assert!(rep.passed(), "{}", rep.summary());
            rep.worst
        })
        .collect();
    assert!(worst.windows(2).all(|w| w[1] > w[0]), "{worst:?}");
}

#[test]
fn simulation_stays_above_the_expanding_sub_solution() {
    let (r, p) = setup();
    let q = build_params(&r, &p, p.c_f / 2.0, 1.0, 2).unwrap();
    // One quadrant with mirror walls on both axes is the radial problem exactly.
    let x1 = (q.r_eps + 40.0).ceil();
    let spec = DomainSpec { variant: Variant::FreePlane, window: Rect { x0: 0.0, y0: 0.0, x1, y1: x1 } };
    let g = Arc::new(rasterize(&spec, 0.5).unwrap());
    let radius = |x: [f64; 2]| x[0].hypot(x[1]);
    let mut u = Field::from_fn(g.clone(), 0.0, |x| sub_lemma22_value(&p, &q, 0.0, radius(x)));
    let s = StepScheme::default_for(&g, &r);
    let mut worst: f64 = 0.0;
    for k in 1..=4 {
        u = run(u, &r, &s, 5.0 * k as f64, &mut []).unwrap();
        let t = u.time;
        for (i, &val) in u.values.iter().enumerate() {
            worst = worst.max(sub_lemma22_value(&p, &q, t, radius(g.center(i))) - val);
        }
    }
    assert!(worst <= 0.01, "sub-solution exceeds u by {worst}");
}
