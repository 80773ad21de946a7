//! Planar traveling wave `phi'' + c phi' + f(phi) = 0`, `phi(-inf) = 1`, `phi(+inf) = 0`.
//!
//! The speed is found by shooting from the unstable manifold of `(1, 0)`;
//! the profile is then assembled from two stable integrations (forward from
//! 1, backward from 0) that meet at `phi = 1/2`, which also fixes the shift.

use crate::reaction::Reaction;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("no positive front speed: shooting bracket collapsed at c <= 0")]
    NoPositiveSpeed,
    #[error("tolerance {0} outside [1e-12, 1e-4]")]
    BadTolerance(f64),
    #[error("shooting failed to bracket the speed below c = {0}")]
    NoBracket(f64),
}

#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub c_f: f64,
    /// Right decay exponent, `phi ~ b exp(-lambda xi)`.
    pub lambda: f64,
    /// Left growth exponent, `1 - phi ~ a exp(nu xi)`.
    pub nu: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub dxi: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// Final shooting bracket `[lo, hi]`.
    pub bracket: (f64, f64),
    reaction: Reaction,
}

/// Outcome of one shooting trajectory: overshoot crosses `phi = 0`
/// with negative slope, undershoot turns around before reaching 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shot {
    Overshoot,
    Undershoot,
}

const START_GAP: f64 = 1e-10;

fn rates(r: &Reaction, c: f64) -> (f64, f64, f64) {
    let nu = 0.5 * (-c + (c * c - 4.0 * r.fprime1).sqrt());
    let lambda = 0.5 * (c + (c * c - 4.0 * r.fprime0).sqrt());
    let mu_plus = 0.5 * (-c + (c * c - 4.0 * r.fprime0).sqrt());
    (nu, lambda, mu_plus)
}

type State = [f64; 2];

fn rhs(r: &Reaction, c: f64, y: State) -> State {
    [y[1], -c * y[1] - r.eval(y[0])]
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One adaptive sweep. `h` carries the sign of the direction; the callback
/// sees every accepted node and returns false to stop.
fn dopri(
    r: &Reaction,
    c: f64,
    y0: State,
    mut h: f64,
    h_max: f64,
    x_span: f64,
    mut accept: impl FnMut(f64, State) -> bool,
) {
    let (rtol, atol) = (1e-12, 1e-15);
    let mut x: f64 = 0.0;
    let mut y = y0;
    let dir = h.signum();
    while x.abs() < x_span {
        if h.abs() > h_max {
            h = dir * h_max;
        }
        let mut k = [[0.0; 2]; 7];
        k[0] = rhs(r, c, y);
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += h * A[s][j] * kj[0];
                ys[1] += h * A[s][j] * kj[1];
            }
            k[s] = rhs(r, c, ys);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for d in 0..2 {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for s in 0..7 {
                s5 += B5[s] * k[s][d];
                s4 += B4[s] * k[s][d];
            }
            y5[d] += h * s5;
            let sc = atol + rtol * y[d].abs().max(y5[d].abs());
            err = err.max((h * (s5 - s4)).abs() / sc);
        }
        if err <= 1.0 {
            x += h;
            y = y5;
            if !accept(x, y) {
                return;
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h.abs() < 1e-14 {
            return;
        }
    }
}

/// Integrates one trial speed from the unstable manifold at `phi = 1`.
pub fn shoot(r: &Reaction, c: f64) -> Shot {
    let (nu, lambda, mu_plus) = rates(r, c);
    let y0 = [1.0 - START_GAP, -nu * START_GAP];
    let mut outcome = None;
    let span = 60.0 / nu + 400.0 / (lambda.min(nu));
    dopri(r, c, y0, 1e-3, 0.5, span, |_, y| {
        if y[0] <= 0.0 {
            outcome = Some(Shot::Overshoot);
            return false;
        }
        if y[1] >= 0.0 {
            outcome = Some(Shot::Undershoot);
            return false;
        }
        if y[0] < 1e-6 {
            // Decompose on the eigenbasis of the saddle at 0; the unstable
            // coefficient decides which way the orbit leaves.
            let beta = (y[1] + lambda * y[0]) / (lambda + mu_plus);
            outcome = Some(if beta > 0.0 { Shot::Undershoot } else { Shot::Overshoot });
            return false;
        }
        true
    });
    // A trajectory that never resolves is sitting on the connection.
    outcome.unwrap_or(Shot::Undershoot)
}

/// Bisects the shooting functional; returns the final bracket.
pub fn shoot_speed(r: &Reaction, tol: f64) -> Result<(f64, f64), WaveError> {
    if shoot(r, 0.0) == Shot::Undershoot {
        return Err(WaveError::NoPositiveSpeed);
    }
    let mut lo = 0.0;
    let mut hi = 0.25 * r.lipschitz.sqrt().max(1e-3);
    while shoot(r, hi) == Shot::Overshoot {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(WaveError::NoBracket(hi));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match shoot(r, mid) {
            Shot::Overshoot => lo = mid,
            Shot::Undershoot => hi = mid,
        }
    }
    if hi <= 0.0 {
        return Err(WaveError::NoPositiveSpeed);
    }
    Ok((lo, hi))
}

/// Signed speed: positive when 1 invades 0, negative when 0 invades 1.
pub fn signed_speed(r: &Reaction, tol: f64) -> Result<f64, WaveError> {
    if r.integral_f(0.0, 1.0) >= 0.0 {
        let (lo, hi) = shoot_speed(r, tol)?;
        Ok(0.5 * (lo + hi))
    } else {
        let (lo, hi) = shoot_speed(&r.mirror(), tol)?;
        Ok(-0.5 * (lo + hi))
    }
}

/// Nodes of one branch, stopped once `phi` crosses 1/2.
fn branch(r: &Reaction, c: f64, y0: State, h: f64, h_max: f64) -> Vec<(f64, State)> {
    let mut nodes = vec![(0.0, y0)];
    let above = y0[0] > 0.5;
    dopri(r, c, y0, h, h_max, 1e4, |x, y| {
        nodes.push((x, y));
        (y[0] > 0.5) == above
    });
    nodes
}

fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let w = x1 - x0;
    let t = (x - x0) / w;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * w * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * w * d1
}

/// Cubic Hermite interpolation of `phi` and `phi'` over ODE nodes.
struct Dense<'a> {
    r: &'a Reaction,
    c: f64,
    nodes: Vec<(f64, State)>,
}

impl Dense<'_> {
    fn at(&self, x: f64) -> State {
        let n = &self.nodes;
        let asc = n[n.len() - 1].0 > n[0].0;
        let i = n
            .windows(2)
            .position(|w| {
                let (a, b) = if asc { (w[0].0, w[1].0) } else { (w[1].0, w[0].0) };
                a <= x && x <= b
            })
            .unwrap_or(if (x > n[0].0) == asc { n.len() - 2 } else { 0 });
        let (xa, ya) = n[i];
        let (xb, yb) = n[i + 1];
        let fa = rhs(self.r, self.c, ya);
        let fb = rhs(self.r, self.c, yb);
        [
            hermite(xa, xb, ya[0], yb[0], fa[0], fb[0], x),
            hermite(xa, xb, ya[1], yb[1], fa[1], fb[1], x),
        ]
    }

    /// Location where the last node interval crosses `phi = 1/2`.
    fn half_crossing(&self) -> f64 {
        let n = &self.nodes;
        let (mut a, mut b) = (n[n.len() - 2].0, n[n.len() - 1].0);
        let sa = self.at(a)[0] > 0.5;
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if (self.at(m)[0] > 0.5) == sa {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

impl WaveProfile {
    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    fn sample_index(&self, xi: f64) -> (usize, f64) {
        let s = (xi - self.xi_min) / self.dxi;
        let i = (s.floor() as usize).min(self.phi.len() - 2);
        (i, self.xi_min + i as f64 * self.dxi)
    }

    pub fn phi_at(&self, xi: f64) -> f64 {
        if xi <= self.xi_min {
            let a = 1.0 - self.phi[0];
            return 1.0 - a * (self.nu * (xi - self.xi_min)).exp();
        }
        if xi >= self.xi_max {
            let b = self.phi[self.phi.len() - 1];
            return b * (-self.lambda * (xi - self.xi_max)).exp();
        }
        let (i, x0) = self.sample_index(xi);
        hermite(x0, x0 + self.dxi, self.phi[i], self.phi[i + 1], self.dphi[i], self.dphi[i + 1], xi)
    }

    pub fn phi_prime_at(&self, xi: f64) -> f64 {
        if xi <= self.xi_min {
            let a = 1.0 - self.phi[0];
            return -a * self.nu * (self.nu * (xi - self.xi_min)).exp();
        }
        if xi >= self.xi_max {
            let b = self.phi[self.phi.len() - 1];
            return -b * self.lambda * (-self.lambda * (xi - self.xi_max)).exp();
        }
        let (i, x0) = self.sample_index(xi);
        let dd = |k: usize| -self.c_f * self.dphi[k] - self.reaction.eval(self.phi[k]);
        hermite(x0, x0 + self.dxi, self.dphi[i], self.dphi[i + 1], dd(i), dd(i + 1), xi)
    }

    /// `phi''` through the ODE identity.
    pub fn phi_second_at(&self, xi: f64) -> f64 {
        -self.c_f * self.phi_prime_at(xi) - self.reaction.eval(self.phi_at(xi))
    }

    pub fn xi(&self, k: usize) -> f64 {
        self.xi_min + k as f64 * self.dxi
    }

    /// Smallest `C >= 0` with `phi >= 1 - eps` on `(-inf, -C]` and `phi <= eps` on `[C, inf)`.
    pub fn threshold_c(&self, eps: f64) -> f64 {
        assert!(eps > 0.0 && eps <= 0.5, "threshold_c needs eps in (0, 1/2]");
        let p0 = self.phi_at(0.0);
        if p0 <= eps && p0 >= 1.0 - eps {
            return 0.0;
        }
        let right = self.invert(eps);
        let left = -self.invert(1.0 - eps);
        right.max(left).max(0.0)
    }

    /// The unique `xi` with `phi(xi) = level`.
    pub fn invert(&self, level: f64) -> f64 {
        let (mut a, mut b) = (self.xi_min, self.xi_max);
        while self.phi_at(a) < level {
            a -= (b - a).max(1.0);
        }
        while self.phi_at(b) > level {
            b += (b - a).max(1.0);
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.phi_at(m) > level {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-13 * (1.0 + m.abs()) {
                break;
            }
        }
        0.5 * (a + b)
    }

    /// `min -phi'` over `[-c, c]`.
    pub fn steepness_k(&self, c: f64) -> f64 {
        assert!(c >= 0.0);
        let mut k = (-self.phi_prime_at(-c)).min(-self.phi_prime_at(c));
        for (j, d) in self.dphi.iter().enumerate() {
            let x = self.xi(j);
            if x.abs() <= c {
                k = k.min(-d);
            }
        }
        k
    }

    /// `max |phi'|`.
    pub fn max_slope(&self) -> f64 {
        self.dphi.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

/// Speed by shooting to bracket width `tol`, then the normalized profile.
pub fn solve_profile(r: &Reaction, tol: f64) -> Result<WaveProfile, WaveError> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(WaveError::BadTolerance(tol));
    }
    let (lo, hi) = shoot_speed(r, tol)?;
    let c = 0.5 * (lo + hi);
    let (nu, lambda, _) = rates(r, c);
    let dxi = 0.01 / r.lipschitz.max(1e-3).sqrt();

    let left = Dense {
        r,
        c,
        nodes: branch(r, c, [1.0 - START_GAP, -nu * START_GAP], 1e-3, 0.5 * dxi),
    };
    let right = Dense {
        r,
        c,
        nodes: branch(r, c, [START_GAP, -lambda * START_GAP], -1e-3, 0.5 * dxi),
    };
    let xl = left.half_crossing();
    let xr = right.half_crossing();
    // Shift both branches so the crossing sits at xi = 0.
    let left_start = -xl;
    let right_end = -xr;
    let k_min = (left_start / dxi).ceil() as i64;
    let k_max = (right_end / dxi).floor() as i64;
    let mut phi = Vec::with_capacity((k_max - k_min + 1) as usize);
    let mut dphi = Vec::with_capacity(phi.capacity());
    for k in k_min..=k_max {
        let xi = k as f64 * dxi;
        let y = if k == 0 {
            let a = left.at(xl);
            let b = right.at(xr);
            [0.5, 0.5 * (a[1] + b[1])]
        } else if k < 0 {
            left.at(xi + xl)
        } else {
            right.at(xi + xr)
        };
        phi.push(y[0]);
        dphi.push(y[1]);
    }
    Ok(WaveProfile {
        c_f: c,
        lambda,
        nu,
        xi_min: k_min as f64 * dxi,
        xi_max: k_max as f64 * dxi,
        dxi,
        phi,
        dphi,
        bracket: (lo, hi),
        reaction: r.clone(),
    })
}

/// Exact profile of the cubic, `(1 + exp(xi / sqrt 2))^-1`.
pub fn cubic_exact_phi(xi: f64) -> f64 {
    1.0 / (1.0 + (xi / std::f64::consts::SQRT_2).exp())
}

pub fn cubic_exact_speed(theta: f64) -> f64 {
    (1.0 - 2.0 * theta) / std::f64::consts::SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quarter() -> WaveProfile {
        solve_profile(&Reaction::cubic(0.25).unwrap(), 1e-10).unwrap()
    }

    #[test]
    fn exact_solution_satisfies_ode() {
        // Oracle: substitute the closed form into the ODE.
        let theta = 0.3;
        let r = Reaction::cubic(theta).unwrap();
        let c = cubic_exact_speed(theta);
        let h = 1e-4;
        for i in -40..=40 {
            let x = i as f64 * 0.25;
            let p = cubic_exact_phi(x);
            let d1 = (cubic_exact_phi(x + h) - cubic_exact_phi(x - h)) / (2.0 * h);
            let d2 = (cubic_exact_phi(x + h) - 2.0 * p + cubic_exact_phi(x - h)) / (h * h);
            assert!((d2 + c * d1 + r.eval(p)).abs() < 1e-6);
        }
    }

    #[test]
    fn speeds_match_closed_form() {
        for theta in [0.1, 0.25, 0.4, 0.49] {
            let r = Reaction::cubic(theta).unwrap();
            let (lo, hi) = shoot_speed(&r, 1e-10).unwrap();
            assert!(hi - lo <= 1e-10);
            assert_abs_diff_eq!(0.5 * (lo + hi), cubic_exact_speed(theta), epsilon = 1e-8);
        }
    }

    #[test]
    fn profile_matches_closed_form() {
        let p = quarter();
        assert_eq!(p.phi_at(0.0), 0.5);
        let mut worst: f64 = 0.0;
        for i in -400..=400 {
            let x = i as f64 * 0.1;
            worst = worst.max((p.phi_at(x) - cubic_exact_phi(x)).abs());
        }
        assert!(worst < 1e-9, "worst profile error {worst}");
        assert_abs_diff_eq!(p.phi_at(std::f64::consts::SQRT_2 * 3f64.ln()), 0.25, epsilon = 1e-9);
        assert!(p.phi_at(p.xi_max + 10.0) < 1e-8);
        assert!(p.phi[0] > 1.0 - 1e-8 && p.phi[p.phi.len() - 1] < 1e-8);
        assert!(p.dphi.iter().all(|&d| d < 0.0));
        assert!(p.phi.iter().all(|&v| v > 0.0 && v < 1.0));
        let lam = 0.5 * (p.c_f + (p.c_f * p.c_f + 4.0 * 0.25).sqrt());
        assert_abs_diff_eq!(p.lambda, lam, epsilon = 1e-10);
    }

    #[test]
    fn samples_are_consistent_with_the_ode() {
        // Re-integrate between neighbouring samples and compare.
        let p = quarter();
        let r = p.reaction().clone();
        for k in (0..p.phi.len() - 1).step_by(97) {
            let mut end = [0.0; 2];
            dopri(&r, p.c_f, [p.phi[k], p.dphi[k]], p.dxi / 4.0, p.dxi / 4.0, p.dxi * (1.0 - 1e-12), |_, y| {
                end = y;
                true
            });
            let target = p.phi[k + 1];
            assert!((end[0] - target).abs() < 1e-10 * (1.0 + 1.0 / p.dxi), "k = {k}");
        }
    }

    #[test]
    fn thresholds_and_steepness() {
        let p = quarter();
        assert_eq!(p.threshold_c(0.5), 0.0);
        assert_abs_diff_eq!(p.threshold_c(0.25), std::f64::consts::SQRT_2 * 3f64.ln(), epsilon = 1e-8);
        let tiny = p.threshold_c(1e-9);
        assert!(tiny.is_finite() && tiny > p.xi_max - 20.0);
        assert_abs_diff_eq!(p.steepness_k(1e-9), 1.0 / (4.0 * std::f64::consts::SQRT_2), epsilon = 1e-8);
        let sc = Reaction::cubic(0.25).unwrap().small_constants().unwrap();
        let k = p.steepness_k(p.threshold_c(sc.delta));
        assert!(k > 0.0 && k <= p.max_slope());
    }

    #[test]
    fn phi_prime_matches_exact_derivative() {
        let p = quarter();
        for i in -300..=300 {
            let x = i as f64 * 0.13;
            let e = cubic_exact_phi(x);
            assert_abs_diff_eq!(p.phi_prime_at(x), -e * (1.0 - e) / std::f64::consts::SQRT_2, epsilon = 1e-9);
        }
    }

    #[test]
    fn mirrored_cubic_has_no_positive_speed() {
        // -f(1 - s) for θ = 0.3 is the cubic with θ = 0.7, whose front retreats.
        let r = Reaction::cubic(0.3).unwrap().mirror();
        assert_eq!(solve_profile(&r, 1e-8).unwrap_err(), WaveError::NoPositiveSpeed);
    }

    #[test]
    fn mirror_reverses_the_speed() {
        let r = Reaction::cubic(0.2).unwrap();
        let c = signed_speed(&r, 1e-10).unwrap();
        let m = signed_speed(&r.mirror(), 1e-10).unwrap();
        assert_abs_diff_eq!(c, -m, epsilon = 1e-9);
    }
}
