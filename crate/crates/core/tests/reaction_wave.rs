use approx::assert_relative_eq;
use frontlab::reaction::Reaction;
use frontlab::wave::{shoot, shoot_speed, signed_speed, solve_profile, Shot};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quarter() -> Reaction {
    Reaction::cubic(0.25).unwrap()
}

// A bistable table that is not a cubic: f(u) = u (1 - u) (u - 0.3) (1 + u / 2).
fn skewed_table() -> Reaction {
    let nodes = frontlab::reaction::chebyshev_lobatto(33);
    Reaction::table(nodes.iter().map(|&u| u * (1.0 - u) * (u - 0.3) * (1.0 + 0.5 * u)).collect()).unwrap()
}

proptest! {
    #[test]
    fn mirror_identity(theta in 0.05f64..0.45, s in 0.0f64..1.0) {
        let r = Reaction::cubic(theta).unwrap();
        prop_assert!((r.eval(s) + r.mirror().eval(1.0 - s)).abs() < 1e-14);
    }

    #[test]
    fn table_mirror_identity(s in 0.0f64..1.0) {
        let r = skewed_table();
        prop_assert!((r.eval(s) + r.mirror().eval(1.0 - s)).abs() < 1e-12);
    }
}

#[test]
fn eval_is_globally_lipschitz() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for r in [quarter(), Reaction::cubic(0.1).unwrap(), skewed_table()] {
        let l = r.global_lipschitz();
        for _ in 0..10_000 {
            let (a, b): (f64, f64) = (rng.gen_range(-2.0..3.0), rng.gen_range(-2.0..3.0));
            assert!((r.eval(a) - r.eval(b)).abs() <= l * (a - b).abs() * (1.0 + 1e-12) + 1e-15);
        }
    }
}

#[test]
fn small_constants_satisfy_their_inequalities() {
    for r in [quarter(), Reaction::cubic(0.4).unwrap(), skewed_table()] {
        let sc = r.small_constants().unwrap();
        let (d, f0, f1) = (sc.delta, r.fprime0, r.fprime1);
        assert!(d > 0.0 && d <= r.theta1 / 4.0 && d <= (1.0 - r.theta2) / 4.0);
        assert!(d <= f0.abs() / 2.0 && d <= f1.abs() / 2.0);
        for i in 0..=2000 {
            let s = 2.0 * d * i as f64 / 2000.0;
            assert!(r.eval_prime(s) <= f0 / 2.0);
            assert!(r.eval_prime(1.0 - s) <= f1 / 2.0);
        }
        assert!(sc.mu > 0.0 && sc.mu * sc.mu < f0.abs().min(f1.abs()) / 2.0);
    }
}

#[test]
fn shooting_sign_changes_once_across_the_bracket() {
    for r in [quarter(), skewed_table()] {
        let (lo, hi) = shoot_speed(&r, 1e-10).unwrap();
        let (a, b) = (lo - 0.05, hi + 0.05);
        let shots: Vec<Shot> = (0..50).map(|i| shoot(&r, a + (b - a) * i as f64 / 49.0)).collect();
        let flips = shots.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(flips, 1, "{shots:?}");
        assert_eq!(shots[0], Shot::Overshoot);
    }
}

#[test]
fn closed_form_speeds() {
    for theta in [0.1, 0.25, 0.4] {
        let p = solve_profile(&Reaction::cubic(theta).unwrap(), 1e-10).unwrap();
        // Independent oracle: phi = 1 / (1 + e^{xi/sqrt2}) solves phi'' + c phi' + f(phi) = 0
        // only for c = (1 - 2 theta) / sqrt2; check the residual vanishes at that c.
        let c = (1.0 - 2.0 * theta) / 2f64.sqrt();
        for i in 0..41 {
            let x = -10.0 + 0.5 * i as f64;
            let e = (x / 2f64.sqrt()).exp();
            let phi = 1.0 / (1.0 + e);
            let d1 = -e / (2f64.sqrt() * (1.0 + e).powi(2));
            let d2 = e * (e - 1.0) / (2.0 * (1.0 + e).powi(3));
            assert!((d2 + c * d1 + phi * (1.0 - phi) * (phi - theta)).abs() < 1e-14);
        }
        assert!((p.c_f - c).abs() < 1e-3);
    }
}

#[test]
fn mirrored_reaction_runs_backwards_at_the_same_speed() {
    for r in [quarter(), skewed_table()] {
        let c = signed_speed(&r, 1e-10).unwrap();
        let m = signed_speed(&r.mirror(), 1e-10).unwrap();
        assert!(c > 0.0);
        assert_relative_eq!(c, -m, epsilon = 1e-8);
    }
}

#[test]
fn right_tail_decays_at_lambda() {
    for r in [quarter(), skewed_table()] {
        let p = solve_profile(&r, 1e-10).unwrap();
        let n = p.phi.len();
        // Last decade of phi values.
        let end = p.phi[n - 1];
        let idx: Vec<usize> = (0..n).filter(|&k| p.phi[k] <= 10.0 * end && p.phi[k] > 0.0).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = idx.iter().map(|&k| (p.xi(k), p.phi[k].ln())).unzip();
        let m = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((-slope / p.lambda - 1.0).abs() < 0.02, "slope {slope} lambda {}", p.lambda);
    }
}

#[test]
fn profile_is_normalized_and_monotone() {
    let p = solve_profile(&skewed_table(), 1e-10).unwrap();
    assert!((p.phi_at(0.0) - 0.5).abs() < 1e-9);
    assert!(p.dphi.iter().all(|&d| d < 0.0));
}
