//! Pointwise checks of the explicit sub- and super-solutions used in the
//! comparison arguments.
//!
//! Every check evaluates the parabolic residual `v_t - Δv - f(v)` in closed
//! form, replacing `phi''` by `-c phi' - f(phi)`, at quasi-random points of
//! a (time, space) box. Points on the box edges and on the seams where the
//! case analysis switches (`zeta = ±C, ±C_eps`) are always included.
//! Sampling is not a proof; reports say what was evaluated.
//!
//! A report passes when the residual has the right sign within [`TOL`]
//! and every parameter hypothesis the construction relies on holds.

use crate::reaction::{Reaction, ReactionError};
use crate::wave::WaveProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub const TOL: f64 = 1e-6;

/// Safety factor on the `k omega` inequalities.
const OMEGA_MARGIN: f64 = 1.05;

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("parameter construction failed: {0}")]
    ParamFailure(String),
    #[error("phi'' < 0 at xi = {0} on the right of C")]
    ProfileConvexityFail(f64),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertificateKind {
    SubLemma22,
    SuperLemma24,
    BranchUpper41,
    BranchLower41,
    BranchSub51,
    CenterSuper53,
}

impl CertificateKind {
    fn is_sub(self) -> bool {
        matches!(self, Self::SubLemma22 | Self::BranchLower41 | Self::BranchSub51)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    /// Points where the residual was evaluated (inside the active region).
    pub sampled: usize,
    /// Max residual for sub-solutions, min residual for super-solutions.
    pub worst: f64,
    /// `(t, x)` of the worst point; `x` is a radius or a branch coordinate.
    pub worst_at: (f64, f64),
    /// Parameter hypotheses that failed.
    pub violations: Vec<String>,
}

impl CertificateReport {
    pub fn residual_ok(&self) -> bool {
        if self.kind.is_sub() {
            self.worst <= TOL
        } else {
            self.worst >= -TOL
        }
    }

    pub fn passed(&self) -> bool {
        self.residual_ok() && self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "{:?}: {} worst={:.3e} at t={:.4} x={:.4} samples={}{}",
            self.kind,
            if self.passed() { "PASS" } else { "FAIL" },
            self.worst,
            self.worst_at.0,
            self.worst_at.1,
            self.sampled,
            if self.violations.is_empty() { String::new() } else { format!(" violated: {}", self.violations.join("; ")) }
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0 }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Halton points in bases 2 and 3 with a seeded Cranley-Patterson rotation.
pub fn halton(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 2] = [rng.gen(), rng.gen()];
    (1..=n as u64)
        .map(|i| [(radical_inverse(i, 2) + shift[0]).fract(), (radical_inverse(i, 3) + shift[1]).fract()])
        .collect()
}

/// The `h_eps` of the radial constructions: `h' = S((r - H/4) / (3H/4))` with
/// the smootherstep `S`, `h(0) = 5H/8`, and `h(r) = r` from `H` on.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HelperFunction {
    pub eps: f64,
    pub n: usize,
    pub h_eps: f64,
}

fn smootherstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

fn smootherstep_d(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        30.0 * x * x * (x - 1.0) * (x - 1.0)
    }
}

fn smootherstep_dd(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        60.0 * x * (x - 1.0) * (2.0 * x - 1.0)
    }
}

/// Sup norms of `S'` and `S''` on `[0, 1]`.
const SMOOTHERSTEP_D_MAX: f64 = 1.875;
const SMOOTHERSTEP_DD_MAX: f64 = 5.773502691896258; // 10 / sqrt(3)

impl HelperFunction {
    fn x(&self, r: f64) -> f64 {
        (r - 0.25 * self.h_eps) / (0.75 * self.h_eps)
    }

    pub fn h0(&self) -> f64 {
        0.625 * self.h_eps
    }

    pub fn value(&self, r: f64) -> f64 {
        if r >= self.h_eps {
            return r;
        }
        let x = self.x(r).clamp(0.0, 1.0);
        let x4 = x * x * x * x;
        self.h0() + 0.75 * self.h_eps * x4 * (x * (x - 3.0) + 2.5)
    }

    pub fn d1(&self, r: f64) -> f64 {
        smootherstep(self.x(r))
    }

    pub fn d2(&self, r: f64) -> f64 {
        smootherstep_d(self.x(r)) / (0.75 * self.h_eps)
    }

    /// `(N - 1) h'(r) / r + h''(r)`.
    pub fn curvature(&self, r: f64) -> f64 {
        let lin = if r > 0.0 { (self.n as f64 - 1.0) * self.d1(r) / r } else { 0.0 };
        lin + self.d2(r)
    }
}

const HELPER_SAMPLES: usize = 10_000;

fn helper_ok(h: &HelperFunction) -> bool {
    (1..=HELPER_SAMPLES).all(|i| {
        let r = 2.0 * h.h_eps * i as f64 / HELPER_SAMPLES as f64;
        h.curvature(r) <= 0.5 * h.eps
    })
}

/// Doubling search from the lower bound `2(N-1)/eps` forced by the identity branch.
pub fn build_helper(eps: f64, n: usize) -> HelperFunction {
    assert!(eps > 0.0 && n >= 2, "build_helper needs eps > 0 and N >= 2");
    let mut h = HelperFunction { eps, n, h_eps: 2.0 * (n as f64 - 1.0) / eps };
    while !helper_ok(&h) {
        h.h_eps *= 2.0;
    }
    h
}

/// Parameters of the radial constructions.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateParams {
    pub eps: f64,
    pub c: f64,
    pub c_eps: f64,
    pub k: f64,
    pub omega: f64,
    pub delta: f64,
    pub delta_eps: f64,
    pub h_eps: f64,
    pub r_eps: f64,
    pub l_eps: f64,
    pub l: f64,
    pub n: usize,
    pub mu: f64,
    /// `max |f'|` over `[0, 1]`.
    pub max_fp: f64,
}

/// Largest `xi` such that `pred(phi, phi', phi'')` holds at every sample left of it.
fn left_region_end(p: &WaveProfile, pred: impl Fn(f64, f64, f64) -> bool) -> f64 {
    for j in 0..p.phi.len() {
        let x = p.xi(j);
        if !pred(p.phi[j], p.dphi[j], p.phi_second_at(x)) {
            return x - p.dxi;
        }
    }
    p.xi_max
}

/// Smallest `C` beyond which `phi'' >= 0`.
fn convex_from(p: &WaveProfile) -> f64 {
    let mut last_bad = -f64::INFINITY;
    for j in 0..p.phi.len() {
        let x = p.xi(j);
        if p.phi_second_at(x) < 0.0 {
            last_bad = x;
        }
    }
    last_bad + p.dxi
}

pub fn build_params(r: &Reaction, profile: &WaveProfile, eps: f64, l: f64, n: usize) -> Result<CertificateParams, CertificateError> {
    if !(eps > 0.0 && eps < profile.c_f) {
        return Err(CertificateError::ParamFailure(format!("eps = {eps} is not in (0, c_f)")));
    }
    let sc = r.small_constants()?;
    let delta = sc.delta;
    let max_fp = r.lipschitz;
    let mut c = profile.threshold_c(delta);
    let convex = convex_from(profile);
    if convex > c {
        c = convex;
    }
    let k = profile.steepness_k(c);
    if !(k > 0.0) {
        return Err(CertificateError::ParamFailure("phi' vanishes on [-C, C]".into()));
    }
    let omega = OMEGA_MARGIN * (2.0 * delta + 2.0 * max_fp) / k;
    let delta_eps = (eps * k / (2.0 * max_fp)).min(delta / 2.0);
    let c_eps = profile.threshold_c(delta_eps).max(c);
    let helper = build_helper(eps, n);
    let h = helper.h_eps;
    // Covering r < H by zeta <= -C_eps keeps the (1 - h'^2) phi'' term signed.
    let r_eps = (h + omega + c_eps + c).max(helper.h0() + omega + c_eps + c);
    Ok(CertificateParams {
        eps,
        c,
        c_eps,
        k,
        omega,
        delta,
        delta_eps,
        h_eps: h,
        r_eps,
        l_eps: l - c + c_eps,
        l,
        n,
        mu: sc.mu,
        max_fp,
    })
}

impl CertificateParams {
    pub fn helper(&self) -> HelperFunction {
        HelperFunction { eps: self.eps.abs(), n: self.n, h_eps: self.h_eps }
    }

    /// `R_eps = max(H_eps, h_eps(0) + omega + C_eps + C)` without the enlargement.
    pub fn minimal_radius(&self) -> f64 {
        self.h_eps.max(self.helper().h0() + self.omega + self.c_eps + self.c)
    }

    /// Hypotheses shared by the radial sub- and super-solutions.
    fn radial_violations(&self, profile: &WaveProfile, r: &Reaction) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = r.small_constants() {
            v.push(format!("small constants: {e}"));
        }
        let d = self.delta;
        let bound = (r.theta1 / 4.0).min((1.0 - r.theta2) / 4.0).min(r.fprime0.abs() / 2.0).min(r.fprime1.abs() / 2.0);
        if !(d > 0.0 && d < bound) {
            v.push(format!("delta = {d} outside (0, {bound})"));
        }
        if !(self.eps > 0.0 && self.eps < profile.c_f) {
            v.push(format!("eps = {} outside (0, c_f)", self.eps));
        }
        if profile.phi_at(-self.c) < 1.0 - d - 1e-12 || profile.phi_at(self.c) > d + 1e-12 {
            v.push("C too small for delta".into());
        }
        if profile.steepness_k(self.c) < self.k * (1.0 - 1e-12) {
            v.push("phi' <= -k fails on [-C, C]".into());
        }
        if self.k * self.omega < 2.0 * d + 2.0 * self.max_fp {
            v.push(format!("k omega = {:.4} < 2 delta + 2 max|f'| = {:.4}", self.k * self.omega, 2.0 * d + 2.0 * self.max_fp));
        }
        let de = (self.eps * self.k / (2.0 * self.max_fp)).min(d / 2.0);
        if (self.delta_eps - de).abs() > 1e-12 * de.abs() {
            v.push(format!("delta_eps = {:.4e} differs from its formula {de:.4e}", self.delta_eps));
        }
        if profile.phi_at(-self.c_eps) < 1.0 - self.delta_eps - 1e-12 || profile.phi_at(self.c_eps) > self.delta_eps + 1e-12 {
            v.push("C_eps too small for delta_eps".into());
        }
        let h = self.helper();
        if !helper_ok(&h) {
            v.push("h_eps curvature exceeds eps / 2".into());
        }
        if self.r_eps < self.minimal_radius() {
            v.push("R_eps below max(H_eps, h(0) + omega + C_eps + C)".into());
        }
        if (self.l_eps - (self.l - self.c + self.c_eps)).abs() > 1e-9 {
            v.push("L_eps != L - C + C_eps".into());
        }
        v
    }
}

#[derive(Clone, Copy)]
enum Sense {
    Sub,
    Super,
}

/// A rectangular sampling box `[t0, t1] x [x0, x1]`.
#[derive(Debug, Clone, Copy)]
struct Box2 {
    t0: f64,
    t1: f64,
    x0: f64,
    x1: f64,
}

const EDGE_POINTS: usize = 256;
const SEAM_TIMES: usize = 256;

impl Box2 {
    fn points(&self, s: Sampling) -> Vec<(f64, f64)> {
        let map = |u: f64, w: f64| (self.t0 + u * (self.t1 - self.t0), self.x0 + w * (self.x1 - self.x0));
        let mut pts: Vec<(f64, f64)> = halton(s.samples, s.seed).into_iter().map(|q| map(q[0], q[1])).collect();
        for i in 0..=EDGE_POINTS {
            let a = i as f64 / EDGE_POINTS as f64;
            pts.extend([map(a, 0.0), map(a, 1.0), map(0.0, a), map(1.0, a)]);
        }
        pts
    }

    /// Points where `z(t, x) = target` for each target, by bisection in `x`.
    fn seams(&self, targets: &[f64], z: impl Fn(f64, f64) -> f64) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for i in 0..=SEAM_TIMES {
            let t = self.t0 + (self.t1 - self.t0) * i as f64 / SEAM_TIMES as f64;
            for &target in targets {
                let g = |x: f64| z(t, x) - target;
                let (mut a, mut b) = (self.x0, self.x1);
                let (ga, gb) = (g(a), g(b));
                if ga == 0.0 {
                    pts.push((t, a));
                    continue;
                }
                if ga * gb > 0.0 {
                    continue;
                }
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if g(m) * ga > 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                pts.extend([(t, a), (t, b)]);
            }
        }
        pts
    }
}

const POLISH_STARTS: usize = 8;
const POLISH_ITERS: usize = 3000;

/// Maximizes `score` from a start point, in coordinates scaled to the unit box.
/// Points outside the box or the active region count as `-inf`.
fn nelder_mead(bx: &Box2, score: &impl Fn(f64, f64) -> Option<f64>, v0: f64, p0: (f64, f64)) -> (f64, (f64, f64)) {
    let (st, sx) = ((bx.t1 - bx.t0).max(1e-12), (bx.x1 - bx.x0).max(1e-12));
    let to_world = |u: [f64; 2]| (bx.t0 + u[0] * st, bx.x0 + u[1] * sx);
    let f = |u: [f64; 2]| {
        if !(0.0..=1.0).contains(&u[0]) || !(0.0..=1.0).contains(&u[1]) {
            return -f64::INFINITY;
        }
        let (t, x) = to_world(u);
        score(t, x).unwrap_or(-f64::INFINITY)
    };
    let u0 = [(p0.0 - bx.t0) / st, (p0.1 - bx.x0) / sx];
    let size = 1.0 / 256.0;
    let mut simplex: Vec<([f64; 2], f64)> = vec![(u0, v0)];
    for d in [[size, 0.0], [0.0, size]] {
        let mut u = [u0[0] + d[0], u0[1] + d[1]];
        if f(u) == -f64::INFINITY {
            u = [u0[0] - d[0], u0[1] - d[1]];
        }
        simplex.push((u, f(u)));
    }
    let lerp = |a: [f64; 2], b: [f64; 2], k: f64| [a[0] + k * (b[0] - a[0]), a[1] + k * (b[1] - a[1])];
    for _ in 0..POLISH_ITERS {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let spread = (1..3).map(|i| (simplex[i].0[0] - simplex[0].0[0]).abs().max((simplex[i].0[1] - simplex[0].0[1]).abs())).fold(0.0, f64::max);
        if spread < 1e-13 {
            break;
        }
        let centroid = lerp(simplex[0].0, simplex[1].0, 0.5);
        let worst = simplex[2];
        let refl = lerp(worst.0, centroid, 2.0);
        let fr = f(refl);
        if fr > simplex[0].1 {
            let exp = lerp(worst.0, centroid, 3.0);
            let fe = f(exp);
            simplex[2] = if fe > fr { (exp, fe) } else { (refl, fr) };
        } else if fr > simplex[1].1 {
            simplex[2] = (refl, fr);
        } else {
            let con = lerp(worst.0, centroid, 0.5);
            let fc = f(con);
            if fc > worst.1 {
                simplex[2] = (con, fc);
            } else {
                let best = simplex[0].0;
                for v in &mut simplex[1..] {
                    let u = lerp(best, v.0, 0.5);
                    *v = (u, f(u));
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (u, v) = simplex[0];
    if v > v0 {
        (v, to_world(u))
    } else {
        (v0, p0)
    }
}

fn scan(kind: CertificateKind, sense: Sense, bx: Box2, pts: Vec<(f64, f64)>, res: impl Fn(f64, f64) -> Option<f64> + Sync, violations: Vec<String>) -> CertificateReport {
    // Work with a score to maximize: the residual for sub, its negative for super.
    let sign = match sense {
        Sense::Sub => 1.0,
        Sense::Super => -1.0,
    };
    let score = |t: f64, x: f64| res(t, x).map(|v| sign * v);
    let vals: Vec<Option<f64>> = pts.par_iter().map(|&(t, x)| score(t, x)).collect();
    let mut hits: Vec<(f64, (f64, f64))> = pts.iter().zip(&vals).filter_map(|(p, v)| v.map(|v| (v, *p))).collect();
    let sampled = hits.len();
    if sampled == 0 {
        return CertificateReport { kind, sampled, worst: 0.0, worst_at: (f64::NAN, f64::NAN), violations };
    }
    hits.sort_by(|a, b| b.0.total_cmp(&a.0));
    hits.truncate(POLISH_STARTS);
    // Sampled maxima sit on smooth ridges along zeta = const; polishing pins
    // them down so the reported worst does not depend on the sampling seed.
    let polished: Vec<(f64, (f64, f64))> = hits.par_iter().map(|&(v, p)| nelder_mead(&bx, &score, v, p)).collect();
    let (best, at) = polished.into_iter().fold(hits[0], |a, b| if b.0 > a.0 { b } else { a });
    CertificateReport { kind, sampled, worst: sign * best, worst_at: at, violations }
}

/// Expanding radial sub-solution
/// `v = max(phi(zeta) - delta e^{-delta t} - delta_eps, 0)` with
/// `zeta = h(|x|) - (c_f - eps) t - omega e^{-delta t} + omega - R_eps + C`,
/// on `0 <= t <= T_eps = (|x0| - R_eps - L_eps) / (c_f - eps)`.
pub fn check_sub_lemma22(profile: &WaveProfile, r: &Reaction, p: &CertificateParams, x0_norm: f64, s: Sampling) -> CertificateReport {
    let mut violations = p.radial_violations(profile, r);
    let cs = profile.c_f - p.eps;
    let t_end = (x0_norm - p.r_eps - p.l_eps) / cs;
    if !(t_end >= 0.0) {
        violations.push(format!("|x0| = {x0_norm} below R_eps + L_eps"));
    }
    let t_end = t_end.max(0.0);
    let h = p.helper();
    let (d, om, n1) = (p.delta, p.omega, p.n as f64 - 1.0);
    let zeta = |t: f64, x: f64| h.value(x) - cs * t - om * (-d * t).exp() + om - p.r_eps + p.c;
    let bx = Box2 { t0: 0.0, t1: t_end, x0: 0.0, x1: p.r_eps + om + p.c_eps + cs * t_end + 10.0 };
    let mut pts = bx.points(s);
    pts.extend(bx.seams(&[-p.c_eps, -p.c, p.c, p.c_eps], zeta));
    let res = |t: f64, x: f64| {
        let e = (-d * t).exp();
        let z = zeta(t, x);
        let (ph, p1, p2) = (profile.phi_at(z), profile.phi_prime_at(z), profile.phi_second_at(z));
        let v = ph - d * e - p.delta_eps;
        if v <= 0.0 {
            return None;
        }
        let (h1, h2) = (h.d1(x), h.d2(x));
        let radial = if x > 0.0 { n1 * h1 / x } else { 0.0 };
        let vt = p1 * (-cs + om * d * e) + d * d * e;
        let lap = p2 * h1 * h1 + p1 * (h2 + radial);
        Some(vt - lap - r.eval(v))
    };
    scan(CertificateKind::SubLemma22, Sense::Sub, bx, pts, res, violations)
}

/// Value of the expanding sub-solution of [`check_sub_lemma22`] at radius `r`.
pub fn sub_lemma22_value(profile: &WaveProfile, p: &CertificateParams, t: f64, r: f64) -> f64 {
    let e = (-p.delta * t).exp();
    let z = p.helper().value(r) - (profile.c_f - p.eps) * t - p.omega * e + p.omega - p.r_eps + p.c;
    (profile.phi_at(z) - p.delta * e - p.delta_eps).max(0.0)
}

/// Contracting radial super-solution
/// `v = min(phi(zeta) + delta e^{-delta t} + delta_eps, 1)` with
/// `zeta = -h(|x|) - (c_f + eps) t + omega e^{-delta t} - omega + R - C`,
/// on `0 <= t <= (R - R_eps) / (c_f + eps)`.
pub fn check_super_lemma24(profile: &WaveProfile, r: &Reaction, p: &CertificateParams, big_r: f64, x0_norm: f64, s: Sampling) -> CertificateReport {
    let mut violations = p.radial_violations(profile, r);
    if convex_from(profile) > p.c {
        violations.push(format!("phi'' < 0 somewhere on [C, inf) with C = {}", p.c));
    }
    if !(big_r > p.r_eps) {
        violations.push(format!("R = {big_r} not above R_eps = {}", p.r_eps));
    }
    if x0_norm < big_r + p.l_eps {
        violations.push(format!("|x0| = {x0_norm} below R + L_eps"));
    }
    let cs = profile.c_f + p.eps;
    let t_end = ((big_r - p.r_eps) / cs).max(0.0);
    let h = p.helper();
    let (d, om, n1) = (p.delta, p.omega, p.n as f64 - 1.0);
    let zeta = |t: f64, x: f64| -h.value(x) - cs * t + om * (-d * t).exp() - om + big_r - p.c;
    let bx = Box2 { t0: 0.0, t1: t_end, x0: 0.0, x1: big_r + p.c_eps + 10.0 };
    let mut pts = bx.points(s);
    pts.extend(bx.seams(&[-p.c_eps, -p.c, p.c, p.c_eps], zeta));
    let res = |t: f64, x: f64| {
        let e = (-d * t).exp();
        let z = zeta(t, x);
        let (ph, p1, p2) = (profile.phi_at(z), profile.phi_prime_at(z), profile.phi_second_at(z));
        let v = ph + d * e + p.delta_eps;
        if v >= 1.0 {
            return None;
        }
        let (h1, h2) = (h.d1(x), h.d2(x));
        let radial = if x > 0.0 { n1 * h1 / x } else { 0.0 };
        let vt = p1 * (-cs - om * d * e) - d * d * e;
        let lap = p2 * h1 * h1 - p1 * (h2 + radial);
        Some(vt - lap - r.eval(v))
    };
    scan(CertificateKind::SuperLemma24, Sense::Super, bx, pts, res, violations)
}

/// Constants of the branch envelopes.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeConstants {
    pub delta: f64,
    pub mu: f64,
    pub c: f64,
    pub k: f64,
    pub omega: f64,
    /// The `R` of the exponential-tail condition.
    pub r: f64,
    pub l: f64,
    pub max_fp: f64,
}

pub fn build_envelope_constants(r: &Reaction, profile: &WaveProfile, l: f64) -> Result<EnvelopeConstants, CertificateError> {
    let sc = r.small_constants()?;
    let (delta, mu, max_fp) = (sc.delta, sc.mu, r.lipschitz);
    let c = profile.threshold_c(delta);
    let k = profile.steepness_k(c);
    let omega = OMEGA_MARGIN * (2.0 * delta + max_fp) / k;
    let mut big_r = omega + 2.0 * c;
    let mut step = 1.0;
    while (max_fp + mu * mu) * (-mu * (big_r - omega - 2.0 * c)).exp() > delta {
        big_r += step;
        step *= 2.0;
    }
    Ok(EnvelopeConstants { delta, mu, c, k, omega, r: big_r, l, max_fp })
}

impl EnvelopeConstants {
    fn violations(&self, profile: &WaveProfile, r: &Reaction) -> Vec<String> {
        let mut v = Vec::new();
        let (d, mu) = (self.delta, self.mu);
        let mu_bound = (r.fprime0.abs() / 2.0).min(r.fprime1.abs() / 2.0).sqrt();
        if !(mu > 0.0 && mu < mu_bound) {
            v.push(format!("mu = {mu:.4} outside (0, {mu_bound:.4})"));
        }
        let bound = (mu * profile.c_f)
            .min(r.theta1 / 4.0)
            .min((1.0 - r.theta2) / 4.0)
            .min(r.fprime0.abs() / 2.0)
            .min(r.fprime1.abs() / 2.0);
        if !(d > 0.0 && d < bound) {
            v.push(format!("delta = {d:.4e} outside (0, {bound:.4e})"));
        }
        let slopes_ok = (0..=1000).all(|i| {
            let s = 3.0 * d * i as f64 / 1000.0;
            r.eval_prime(s) <= r.fprime0 / 2.0 && r.eval_prime(1.0 - s) <= r.fprime1 / 2.0
        });
        if !slopes_ok {
            v.push("f' bounds fail on [0, 3 delta] or [1 - 3 delta, 1]".into());
        }
        if profile.phi_at(-self.c) < 1.0 - d - 1e-12 || profile.phi_at(self.c) > d + 1e-12 {
            v.push("C too small for delta".into());
        }
        if profile.steepness_k(self.c) < self.k * (1.0 - 1e-12) {
            v.push("phi' <= -k fails on [-C, C]".into());
        }
        if self.k * self.omega < 2.0 * d + self.max_fp {
            v.push(format!("k omega = {:.4} < 2 delta + max|f'|", self.k * self.omega));
        }
        if self.r < self.omega + 2.0 * self.c {
            v.push("R < omega + 2C".into());
        }
        if (self.max_fp + mu * mu) * (-mu * (self.r - self.omega - 2.0 * self.c)).exp() > d {
            v.push("exponential tail condition on R fails".into());
        }
        v
    }
}

/// Branch super- and sub-solutions with the `delta e^{-mu (x.e - L)}` tails,
/// in the branch coordinate `s = x.e_j >= L` and `tau = t - t_i >= 0`.
pub fn check_branch_envelopes_lemma41(profile: &WaveProfile, r: &Reaction, k: &EnvelopeConstants, s: Sampling) -> (CertificateReport, CertificateReport) {
    let violations = k.violations(profile, r);
    let (d, mu, om, c) = (k.delta, k.mu, k.omega, profile.c_f);
    let t_end = 6.0 / d;
    let bx = Box2 { t0: 0.0, t1: t_end, x0: k.l, x1: k.l + k.r + om + c * t_end + 2.0 * k.c + 10.0 };
    let shift = -om - k.l - k.r + k.c;
    let xi_up = |t: f64, x: f64| x - c * t + om * (-d * t).exp() + shift;
    let xi_lo = |t: f64, x: f64| x - c * t - om * (-d * t).exp() + 2.0 * om + shift;
    let seams = [-k.c, k.c];
    let mut pts_up = bx.points(s);
    pts_up.extend(bx.seams(&seams, xi_up));
    let mut pts_lo = bx.points(s);
    pts_lo.extend(bx.seams(&seams, xi_lo));
    let upper = |t: f64, x: f64| {
        let (e, tail) = ((-d * t).exp(), d * (-mu * (x - k.l)).exp());
        let z = xi_up(t, x);
        let (ph, p1, p2) = (profile.phi_at(z), profile.phi_prime_at(z), profile.phi_second_at(z));
        let v = ph + d * e + tail;
        if v >= 1.0 {
            return None;
        }
        let vt = p1 * (-c - om * d * e) - d * d * e;
        let vss = p2 + mu * mu * tail;
        Some(vt - vss - r.eval(v))
    };
    let lower = |t: f64, x: f64| {
        let (e, tail) = ((-d * t).exp(), d * (-mu * (x - k.l)).exp());
        let z = xi_lo(t, x);
        let (ph, p1, p2) = (profile.phi_at(z), profile.phi_prime_at(z), profile.phi_second_at(z));
        let v = ph - d * e - tail;
        if v <= 0.0 {
            return None;
        }
        let vt = p1 * (-c + om * d * e) + d * d * e;
        let vss = p2 - mu * mu * tail;
        Some(vt - vss - r.eval(v))
    };
    (
        scan(CertificateKind::BranchUpper41, Sense::Super, bx, pts_up, upper, violations.clone()),
        scan(CertificateKind::BranchLower41, Sense::Sub, bx, pts_lo, lower, violations),
    )
}

/// Parameters of the two-sided branch sub-solution.
#[derive(Debug, Clone, Serialize)]
pub struct BranchSubParams {
    pub base: CertificateParams,
    /// `min(eps k / (4 max|f'|), delta / 2)`.
    pub delta_eps: f64,
    pub alpha: f64,
    pub c_eps: f64,
    /// `max(H_eps, h(0) + 2 omega + C_eps + C)`.
    pub r_eps: f64,
    /// Center of the initial plateau along the branch.
    pub l_center: f64,
}

fn alpha_ok(r: &Reaction, alpha: f64, de: f64) -> bool {
    let cap = r.fprime0.abs().min(r.fprime1.abs()) * de;
    (0..=1000).all(|i| {
        let s = 1.0 - alpha * de * i as f64 / 1000.0;
        let f = r.eval(s);
        (0.0..=cap).contains(&f)
    })
}

pub fn build_branch_sub(r: &Reaction, profile: &WaveProfile, base: &CertificateParams) -> BranchSubParams {
    let p = base;
    let de = (p.eps * p.k / (4.0 * p.max_fp)).min(p.delta / 2.0);
    let mut alpha = 1.0;
    while !alpha_ok(r, alpha, de) {
        alpha *= 0.5;
    }
    let c_eps = branch_c_eps(r, profile, alpha, de).max(p.c);
    let h = p.helper();
    let r_eps = h.h_eps.max(h.h0() + 2.0 * p.omega + c_eps + p.c);
    let l_eps = p.l - p.c + c_eps;
    BranchSubParams { base: p.clone(), delta_eps: de, alpha, c_eps, r_eps, l_center: r_eps + l_eps + 20.0 }
}

fn branch_c_eps(r: &Reaction, profile: &WaveProfile, alpha: f64, de: f64) -> f64 {
    let cap = r.fprime0.abs().min(r.fprime1.abs()) * de;
    let left = left_region_end(profile, |ph, _, p2| ph >= 1.0 - alpha * de && p2.abs() <= cap);
    (-left).max(profile.invert(de))
}

impl BranchSubParams {
    fn l_eps(&self) -> f64 {
        self.base.l - self.base.c + self.c_eps
    }

    fn violations(&self, profile: &WaveProfile, r: &Reaction) -> Vec<String> {
        let p = &self.base;
        let mut v = Vec::new();
        if !(p.eps > 0.0 && p.eps < profile.c_f) {
            v.push(format!("eps = {} outside (0, c_f)", p.eps));
        }
        let de = (p.eps * p.k / (4.0 * p.max_fp)).min(p.delta / 2.0);
        if (self.delta_eps - de).abs() > 1e-12 * de.abs() {
            v.push(format!("delta_eps = {:.4e} differs from min(eps k / (4 max|f'|), delta / 2) = {de:.4e}", self.delta_eps));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            v.push(format!("alpha = {} outside (0, 1]", self.alpha));
        }
        if !alpha_ok(r, self.alpha, self.delta_eps) {
            v.push("0 <= f <= min(|f'(0)|, |f'(1)|) delta_eps fails on [1 - alpha delta_eps, 1]".into());
        }
        let need = branch_c_eps(r, profile, self.alpha.min(1.0), self.delta_eps);
        if self.c_eps < need - 1e-9 {
            v.push(format!("C_eps = {:.4} below the profile requirement {need:.4}", self.c_eps));
        }
        if p.k * p.omega < 2.0 * p.delta + 2.0 * p.max_fp {
            v.push("k omega < 2 delta + 2 max|f'|".into());
        }
        let h = p.helper();
        if self.r_eps < h.h_eps.max(h.h0() + 2.0 * p.omega + self.c_eps + p.c) {
            v.push("R_eps below max(H_eps, h(0) + 2 omega + C_eps + C)".into());
        }
        if self.l_center < self.r_eps + self.l_eps() {
            v.push("l below R_eps + L_eps".into());
        }
        v
    }
}

/// `w = max(phi(xi1) + phi(xi2) - 1 - 2 delta_eps - delta e^{-delta (t - T_eps)}, 0)`
/// in the branch coordinate, for `t >= T_eps = (l - R_eps - L_eps) / (c_f - eps)`.
pub fn check_branch_sub_lemma51(profile: &WaveProfile, r: &Reaction, q: &BranchSubParams, s: Sampling) -> CertificateReport {
    let violations = q.violations(profile, r);
    let p = &q.base;
    let (d, om, de) = (p.delta, p.omega, q.delta_eps);
    let cs = profile.c_f - p.eps;
    let l_eps = q.l_eps();
    let h0 = p.helper().h0();
    let t0 = ((q.l_center - q.r_eps - l_eps) / cs).max(0.0);
    let span = 6.0 / d;
    let xi1 = |t: f64, x: f64| -x - om * (-d * (t - t0)).exp() + l_eps + p.c + 2.0 * om + h0;
    let xi2 = |t: f64, x: f64| x - cs * t - om * (-d * (t - t0)).exp() - q.l_center + 2.0 * om + h0 + p.c - q.r_eps;
    let bx = Box2 { t0, t1: t0 + span, x0: p.l, x1: q.l_center + cs * (t0 + span) + 2.0 * om + h0 + p.c + q.c_eps + 10.0 };
    let mut pts = bx.points(s);
    let seams = [-q.c_eps, -p.c, p.c, q.c_eps];
    pts.extend(bx.seams(&seams, xi1));
    pts.extend(bx.seams(&seams, xi2));
    let res = |t: f64, x: f64| {
        let e = (-d * (t - t0)).exp();
        let (z1, z2) = (xi1(t, x), xi2(t, x));
        let w = profile.phi_at(z1) + profile.phi_at(z2) - 1.0 - 2.0 * de - d * e;
        if w <= 0.0 {
            return None;
        }
        let (a1, a2) = (profile.phi_prime_at(z1), profile.phi_prime_at(z2));
        let wt = a1 * om * d * e + a2 * (-cs + om * d * e) + d * d * e;
        let wss = profile.phi_second_at(z1) + profile.phi_second_at(z2);
        Some(wt - wss - r.eval(w))
    };
    scan(CertificateKind::BranchSub51, Sense::Sub, bx, pts, res, violations)
}

/// Parameters of the center super-solution with the cutoff
/// `hat h(xi) = 1 - S((xi - C) / W)`, `W = xi_eps - 1`.
#[derive(Debug, Clone, Serialize)]
pub struct CenterParams {
    pub base: CertificateParams,
    pub width: f64,
    /// `2C + omega + xi_eps`.
    pub r_eps: f64,
    /// Radius of the initial low region, at least `R_eps + L`.
    pub big_r: f64,
}

fn cutoff_lhs(p: &CertificateParams, profile: &WaveProfile, width: f64) -> f64 {
    let (d1, d2) = (SMOOTHERSTEP_D_MAX / width, SMOOTHERSTEP_DD_MAX / (width * width));
    p.delta * (2.0 * profile.c_f + p.omega * p.delta) * d1 + p.delta * d2 + 2.0 * d1 * profile.max_slope()
}

pub fn build_center(r: &Reaction, profile: &WaveProfile, base: &CertificateParams) -> CenterParams {
    let rhs = r.fprime0.abs() * base.delta_eps / 2.0;
    let mut width = 1.0;
    while cutoff_lhs(base, profile, width) > rhs {
        width *= 2.0;
    }
    let r_eps = 2.0 * base.c + base.omega + width + 1.0;
    CenterParams { base: base.clone(), width, r_eps, big_r: r_eps + base.l + profile.c_f * 6.0 / base.delta }
}

impl CenterParams {
    fn violations(&self, profile: &WaveProfile, r: &Reaction) -> Vec<String> {
        let p = &self.base;
        let mut v = p.radial_violations(profile, r);
        let lhs = cutoff_lhs(p, profile, self.width);
        let rhs = r.fprime0.abs() * p.delta_eps / 2.0;
        if lhs > rhs {
            v.push(format!("cutoff inequality fails: {lhs:.3e} > {rhs:.3e}"));
        }
        if (self.r_eps - (2.0 * p.c + p.omega + self.width + 1.0)).abs() > 1e-9 {
            v.push("R_eps != 2C + omega + xi_eps".into());
        }
        if self.big_r < self.r_eps + p.l {
            v.push("R below R_eps + L".into());
        }
        v
    }
}

/// Super-solution `min(hat h phi + (1 - hat h) delta + delta_eps + delta e^{-delta t}, 1)`
/// along a branch, with `xi = -x.e - (c_f + eps) t + omega e^{-delta t} - omega + R - C`;
/// points with `x.e <= L` see the constant `delta + delta_eps + delta e^{-delta t}`.
pub fn check_center_super_lemma53(profile: &WaveProfile, r: &Reaction, q: &CenterParams, s: Sampling) -> CertificateReport {
    let violations = q.violations(profile, r);
    let p = &q.base;
    let (d, om, w) = (p.delta, p.omega, q.width);
    let cs = profile.c_f + p.eps;
    let t_end = ((q.big_r - q.r_eps - p.l) / cs).max(0.0);
    let xi = |t: f64, x: f64| -x - cs * t + om * (-d * t).exp() - om + q.big_r - p.c;
    let bx = Box2 { t0: 0.0, t1: t_end, x0: 0.0, x1: q.big_r + 10.0 };
    let mut pts = bx.points(s);
    pts.extend(bx.seams(&[-p.c, p.c, p.c + w], xi));
    let res = |t: f64, x: f64| {
        let e = (-d * t).exp();
        if x <= p.l {
            let v = d + p.delta_eps + d * e;
            return (v < 1.0).then(|| -d * d * e - r.eval(v));
        }
        let z = xi(t, x);
        let y = (z - p.c) / w;
        let (hh, h1, h2) = (1.0 - smootherstep(y), -smootherstep_d(y) / w, -smootherstep_dd(y) / (w * w));
        let (ph, p1, p2) = (profile.phi_at(z), profile.phi_prime_at(z), profile.phi_second_at(z));
        let big_phi = hh * ph + (1.0 - hh) * d;
        let v = big_phi + p.delta_eps + d * e;
        if v >= 1.0 {
            return None;
        }
        // d/dxi of Phi and its second derivative; xi_x = -1, xi_t = -cs - omega delta e.
        let g1 = h1 * (ph - d) + hh * p1;
        let g2 = h2 * (ph - d) + 2.0 * h1 * p1 + hh * p2;
        let vt = g1 * (-cs - om * d * e) - d * d * e;
        Some(vt - g2 - r.eval(v))
    };
    scan(CertificateKind::CenterSuper53, Sense::Super, bx, pts, res, violations)
}

/// One row of the certificate suite.
#[derive(Debug, Clone)]
pub struct SuiteRow {
    pub label: String,
    /// Whether the row is expected to pass.
    pub expect_pass: bool,
    pub report: CertificateReport,
}

/// All certificates with valid parameters, then every broken variant.
pub fn certificate_suite(r: &Reaction, profile: &WaveProfile, eps: f64, l: f64, n: usize, s: Sampling) -> Result<Vec<SuiteRow>, CertificateError> {
    let p = build_params(r, profile, eps, l, n)?;
    // Long enough for e^{-delta t} to decay well below eps / (omega delta).
    let x0 = |q: &CertificateParams| q.r_eps + q.l_eps + (profile.c_f - q.eps) * 8.0 / q.delta;
    let big_r = p.r_eps + (profile.c_f + eps) * 6.0 / p.delta;
    let env = build_envelope_constants(r, profile, l)?;
    let bsub = build_branch_sub(r, profile, &p);
    let center = build_center(r, profile, &p);
    let mut rows = Vec::new();
    let mut push = |label: &str, expect_pass: bool, report: CertificateReport| rows.push(SuiteRow { label: label.into(), expect_pass, report });

    push("radial sub", true, check_sub_lemma22(profile, r, &p, x0(&p), s));
    push("radial super", true, check_super_lemma24(profile, r, &p, big_r, big_r + p.l_eps, s));
    let (up, lo) = check_branch_envelopes_lemma41(profile, r, &env, s);
    push("envelope upper", true, up);
    push("envelope lower", true, lo);
    push("branch sub", true, check_branch_sub_lemma51(profile, r, &bsub, s));
    push("center super", true, check_center_super_lemma53(profile, r, &center, s));

    // Broken variants. Flipping the sign of eps makes the front outrun c_f
    // (sub) or lag it (super) and must break the residual itself.
    let mut q = p.clone();
    q.omega /= 10.0;
    push("radial sub omega/10", false, check_sub_lemma22(profile, r, &q, x0(&q), s));
    let mut q = p.clone();
    q.eps = -q.eps;
    push("radial sub eps -> -eps", false, check_sub_lemma22(profile, r, &q, x0(&q), s));
    let mut q = p.clone();
    q.delta_eps *= 100.0;
    push("radial super delta_eps*100", false, check_super_lemma24(profile, r, &q, big_r, big_r + p.l_eps, s));
    let mut q = p.clone();
    q.eps = -q.eps;
    push("radial super eps -> -eps", false, check_super_lemma24(profile, r, &q, big_r, big_r + p.l_eps, s));

    let mut e2 = env.clone();
    e2.mu *= 2.0;
    let (up, lo) = check_branch_envelopes_lemma41(profile, r, &e2, s);
    push("envelope upper mu*2", false, up);
    push("envelope lower mu*2", false, lo);
    let mut e0 = env.clone();
    e0.omega = 0.0;
    let (_, lo) = check_branch_envelopes_lemma41(profile, r, &e0, s);
    push("envelope lower omega=0", false, lo);

    let mut b10 = bsub.clone();
    b10.alpha = 10.0;
    b10.c_eps = branch_c_eps(r, profile, 10.0, b10.delta_eps).max(p.c);
    push("branch sub alpha=10", false, check_branch_sub_lemma51(profile, r, &b10, s));
    let mut bf = bsub.clone();
    bf.base.eps = -bf.base.eps;
    push("branch sub eps -> -eps", false, check_branch_sub_lemma51(profile, r, &bf, s));

    let mut cf = center.clone();
    cf.base.eps = -cf.base.eps;
    push("center super eps -> -eps", false, check_center_super_lemma53(profile, r, &cf, s));
    let mut cs = center.clone();
    cs.width /= 10.0;
    push("center super cutoff W/10", false, check_center_super_lemma53(profile, r, &cs, s));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::solve_profile;

    #[test]
    fn helper_bounds() {
        let h = build_helper(0.1, 2);
        assert!(h.h_eps >= 20.0);
        for i in 0..=4000 {
            let r = 2.0 * h.h_eps * i as f64 / 4000.0;
            let (v, d1) = (h.value(r), h.d1(r));
            assert!((0.0..=1.0).contains(&d1));
            assert!(r <= v + 1e-12 && v <= r + h.h0() + 1e-12);
            if r <= h.h_eps / 4.0 {
                assert_eq!(d1, 0.0);
            }
        }
        assert_eq!(h.value(2.0 * h.h_eps), 2.0 * h.h_eps);
        assert_eq!(h.d1(h.h_eps), 1.0);
        assert_eq!(h.curvature(0.0), 0.0);
    }

    #[test]
    fn helper_derivatives_match_differences() {
        let h = build_helper(0.3, 3);
        let dr = 1e-5;
        for i in 1..50 {
            let r = h.h_eps * i as f64 / 50.0;
            let fd1 = (h.value(r + dr) - h.value(r - dr)) / (2.0 * dr);
            let fd2 = (h.d1(r + dr) - h.d1(r - dr)) / (2.0 * dr);
            assert!((fd1 - h.d1(r)).abs() < 1e-8);
            assert!((fd2 - h.d2(r)).abs() < 1e-6);
        }
    }

    #[test]
    fn halton_is_in_the_unit_square_and_seeded() {
        let a = halton(1000, 1);
        assert!(a.iter().all(|p| (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1])));
        assert_eq!(a, halton(1000, 1));
        assert_ne!(a, halton(1000, 2));
        assert_eq!(radical_inverse(6, 2), 0.375);
    }

    #[test]
    fn params_satisfy_their_invariants() {
        let r = Reaction::cubic(0.25).unwrap();
        let prof = solve_profile(&r, 1e-10).unwrap();
        let p = build_params(&r, &prof, prof.c_f / 2.0, 1.0, 2).unwrap();
        assert!(p.radial_violations(&prof, &r).is_empty());
        assert!(p.delta_eps <= p.delta / 2.0);
        assert!(p.omega >= (2.0 * p.delta + 2.0 * p.max_fp) / p.k);
        assert!(build_params(&r, &prof, prof.c_f, 1.0, 2).is_err());
    }
}
