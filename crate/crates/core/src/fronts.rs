//! Interfaces, global mean speed, and propagation diagnostics.
//!
//! The interface at time t is the set of cells with `u >= 1/2` that touch
//! a 4-neighbour with `u < 1/2`: one cell thick, on the invaded side.

use crate::geometry::{geodesic, Branch, MaskedGrid, Point};
use crate::pde::{Field, Observer};
use crate::wave::WaveProfile;
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontsError {
    #[error("need at least {need} non-empty interfaces with separated times, got {got}")]
    InsufficientHistory { need: usize, got: usize },
    #[error("no recorded cell ever lies in the band [{0}, {1}]")]
    EmptyBand(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    Crossing,
    AllBelow,
    AllAbove,
}

#[derive(Debug, Clone)]
pub struct Interface {
    pub time: f64,
    pub cells: Vec<usize>,
    /// Interface cells by branch id (`None` for the junction or non-branched domains).
    pub per_branch: BTreeMap<Option<u16>, Vec<usize>>,
    pub level: Level,
}

pub fn extract_interface(f: &Field) -> Interface {
    interface_of(&f.grid, &f.values, f.time)
}

pub fn interface_of(grid: &MaskedGrid, u: &[f64], time: f64) -> Interface {
    let cells: Vec<usize> = (0..grid.len())
        .filter(|&k| u[k] >= 0.5 && grid.nbr[k].iter().any(|&q| u[q as usize] < 0.5))
        .collect();
    let mut per_branch: BTreeMap<Option<u16>, Vec<usize>> = BTreeMap::new();
    for &k in &cells {
        per_branch.entry(grid.branch_id[k]).or_default().push(k);
    }
    let level = if !cells.is_empty() {
        Level::Crossing
    } else if u.iter().all(|&v| v < 0.5) {
        Level::AllBelow
    } else {
        Level::AllAbove
    };
    Interface { time, cells, per_branch, level }
}

#[derive(Debug, Clone)]
pub struct SpeedEstimate {
    /// `(t, s, d(Γ_t, Γ_s))` with `t < s`.
    pub pairs: Vec<(f64, f64, f64)>,
    pub gamma: f64,
    /// Max relative deviation of `d / |t - s|` from gamma.
    pub residual: f64,
}

/// Fraction of the run below which pairs are discarded.
pub const BURN_IN: f64 = 0.2;

pub fn mean_speed(history: &[Interface], grid: &MaskedGrid) -> Result<SpeedEstimate, FrontsError> {
    let mut hist: Vec<&Interface> = history.iter().filter(|i| !i.cells.is_empty()).collect();
    hist.sort_by(|a, b| a.time.total_cmp(&b.time));
    if hist.len() < 5 {
        return Err(FrontsError::InsufficientHistory { need: 5, got: hist.len() });
    }
    let span = hist[hist.len() - 1].time - hist[0].time;
    let sep = BURN_IN * span;
    let pairs: Vec<(f64, f64, f64)> = (0..hist.len())
        .into_par_iter()
        .map(|i| {
            let later: Vec<&&Interface> = hist[i + 1..].iter().filter(|b| b.time - hist[i].time >= sep).collect();
            if later.is_empty() {
                return Vec::new();
            }
            let g = geodesic(grid, &hist[i].cells);
            later
                .iter()
                .map(|b| {
                    let d = b.cells.iter().map(|&k| g.dist[k]).fold(f64::INFINITY, f64::min);
                    (hist[i].time, b.time, d)
                })
                .collect()
        })
        .flatten()
        .collect();
    if pairs.is_empty() || span <= 0.0 {
        return Err(FrontsError::InsufficientHistory { need: 5, got: hist.len() });
    }
    Ok(fit_speed(pairs))
}

/// Least-squares slope through the origin of `d` against `|t - s|`.
pub fn fit_speed(pairs: Vec<(f64, f64, f64)>) -> SpeedEstimate {
    let (num, den) = pairs.iter().fold((0.0, 0.0), |(n, d), &(t, s, dist)| {
        let dt = (s - t).abs();
        (n + dist * dt, d + dt * dt)
    });
    let gamma = num / den;
    let residual = pairs
        .iter()
        .map(|&(t, s, d)| {
            let ratio = d / (s - t).abs();
            if gamma > 0.0 {
                (ratio - gamma).abs() / gamma
            } else {
                ratio
            }
        })
        .fold(0.0, f64::max);
    SpeedEstimate { pairs, gamma, residual }
}

/// A recorded state with its forward difference `(u^{n+1} - u^n) / dt`.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub values: Vec<f64>,
    pub ut: Vec<f64>,
}

impl Snapshot {
    pub fn stationarity(&self) -> f64 {
        self.ut.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Observer that keeps full snapshots at its cadence.
#[derive(Debug, Clone)]
pub struct Recorder {
    pub every: f64,
    pub snaps: Vec<Snapshot>,
}

impl Recorder {
    pub fn new(every: f64) -> Self {
        Self { every, snaps: Vec::new() }
    }
}

impl Observer for Recorder {
    fn every(&self) -> f64 {
        self.every
    }

    fn observe(&mut self, now: &Field, next: &[f64], dt: f64) {
        let ut = now.values.iter().zip(next).map(|(a, b)| (b - a) / dt).collect();
        self.snaps.push(Snapshot { time: now.time, values: now.values.clone(), ut });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Complete,
    Blocked,
    Undecided,
}

#[derive(Debug, Clone)]
pub struct PropagationVerdict {
    pub verdict: Verdict,
    /// `(t, min u over the probe)`.
    pub probe_min: Vec<(f64, f64)>,
    /// `(t, max u over the far probe)`.
    pub far_max: Vec<(f64, f64)>,
    /// `(t, max |u_t|)`.
    pub stationarity: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct VerdictRule {
    pub eps_complete: f64,
    pub eps_stationary: f64,
    pub theta1: f64,
}

pub fn classify_propagation(history: &[Snapshot], probe: &[usize], far: &[usize], rule: VerdictRule) -> PropagationVerdict {
    let probe_min: Vec<(f64, f64)> = history
        .iter()
        .map(|s| (s.time, probe.iter().map(|&k| s.values[k]).fold(f64::INFINITY, f64::min)))
        .collect();
    let far_max: Vec<(f64, f64)> = history
        .iter()
        .map(|s| (s.time, far.iter().map(|&k| s.values[k]).fold(-f64::INFINITY, f64::max)))
        .collect();
    let stationarity: Vec<(f64, f64)> = history.iter().map(|s| (s.time, s.stationarity())).collect();
    let complete = probe_min.iter().any(|&(_, m)| m > 1.0 - rule.eps_complete);
    let blocked = match (stationarity.last(), far_max.last()) {
        (Some(&(_, st)), Some(&(_, fm))) => !far.is_empty() && st < rule.eps_stationary && fm < rule.theta1,
        _ => false,
    };
    let verdict = if complete {
        Verdict::Complete
    } else if blocked {
        Verdict::Blocked
    } else {
        Verdict::Undecided
    };
    PropagationVerdict { verdict, probe_min, far_max, stationarity }
}

pub fn min_ut_band(history: &[Snapshot], a: f64, b: f64) -> Result<f64, FrontsError> {
    assert!(0.0 < a && a <= b && b < 1.0);
    let mut best = f64::INFINITY;
    for s in history {
        for (u, ut) in s.values.iter().zip(&s.ut) {
            if *u >= a && *u <= b {
                best = best.min(*ut);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(FrontsError::EmptyBand(a, b))
    }
}

/// Best planar fit `u ≈ phi(x . e - X)` over the given cells.
#[derive(Debug, Clone, Copy)]
pub struct PlanarFit {
    pub position: f64,
    pub sup_error: f64,
    pub rms_error: f64,
}

pub fn planar_fit(grid: &MaskedGrid, u: &[f64], cells: &[usize], e: Point, profile: &WaveProfile) -> PlanarFit {
    let s: Vec<f64> = cells.iter().map(|&k| {
        let p = grid.center(k);
        p[0] * e[0] + p[1] * e[1]
    }).collect();
    let sse = |x: f64| -> f64 {
        cells.iter().zip(&s).map(|(&k, &sk)| {
            let d = u[k] - profile.phi_at(sk - x);
            d * d
        }).sum()
    };
    let (lo, hi) = s.iter().fold((f64::INFINITY, -f64::INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = (lo - 20.0, hi + 20.0);
    let n = ((hi - lo) / 0.25).ceil() as usize;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let v = sse(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    // Golden-section refinement around the best coarse point.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best.0 - 0.5, best.0 + 0.5);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sse(d);
        }
    }
    let x = 0.5 * (a + b);
    let mut sup: f64 = 0.0;
    for (&k, &sk) in cells.iter().zip(&s) {
        sup = sup.max((u[k] - profile.phi_at(sk - x)).abs());
    }
    PlanarFit { position: x, sup_error: sup, rms_error: (sse(x) / cells.len().max(1) as f64).sqrt() }
}

/// Cells of branch `j` with axial coordinate `x . e_j >= from`.
pub fn branch_cells(grid: &MaskedGrid, j: usize, branch: &Branch, from: f64) -> Vec<usize> {
    (0..grid.len())
        .filter(|&k| {
            let p = grid.center(k);
            grid.branch_id[k] == Some(j as u16) && p[0] * branch.direction[0] + p[1] * branch.direction[1] >= from
        })
        .collect()
}

/// Interface made of branch cross-sections, one per branch whose tail
/// (`x . e_j >= l`) currently carries the transition. The section sits at
/// the fitted planar position in that branch. Returns an empty interface
/// while the front is inside the junction.
pub fn branch_section_interface(grid: &MaskedGrid, branches: &[Branch], l: f64, u: &[f64], time: f64, profile: &WaveProfile) -> Interface {
    let mut cells = Vec::new();
    let mut per_branch = BTreeMap::new();
    for (j, b) in branches.iter().enumerate() {
        let tail = branch_cells(grid, j, b, l);
        let above = tail.iter().filter(|&&k| u[k] >= 0.5).count();
        if above == 0 || above == tail.len() {
            continue;
        }
        // Entry branches are invaded from their far end, so try both orientations.
        let fwd = planar_fit(grid, u, &tail, b.direction, profile);
        let back = planar_fit(grid, u, &tail, [-b.direction[0], -b.direction[1]], profile);
        let at = if fwd.rms_error <= back.rms_error { fwd.position } else { -back.position };
        let sec: Vec<usize> = tail
            .iter()
            .copied()
            .filter(|&k| {
                let x = grid.center(k);
                (x[0] * b.direction[0] + x[1] * b.direction[1] - at).abs() <= 0.75 * grid.h
            })
            .collect();
        if sec.is_empty() {
            continue;
        }
        cells.extend_from_slice(&sec);
        per_branch.insert(Some(j as u16), sec);
    }
    let level = if !cells.is_empty() {
        Level::Crossing
    } else if u.iter().all(|&v| v < 0.5) {
        Level::AllBelow
    } else {
        Level::AllAbove
    };
    Interface { time, cells, per_branch, level }
}

#[derive(Debug, Clone, Copy)]
pub struct EnvelopeParams {
    pub t1: f64,
    pub tau1: f64,
    pub t2: f64,
    pub tau2: f64,
    pub delta: f64,
    pub mu: f64,
    pub l: f64,
}

/// `(max (u - upper), max (lower - u))` over branch cells with `x . e >= L`.
pub fn envelope_check_branch(f: &Field, cells: &[usize], branch: &Branch, profile: &WaveProfile, p: &EnvelopeParams) -> (f64, f64) {
    let t = f.time;
    assert!(t >= p.t1.max(p.t2), "envelope check before its start times");
    let c = profile.c_f;
    let e = branch.direction;
    let mut up = -f64::INFINITY;
    let mut low = -f64::INFINITY;
    for &k in cells {
        let x = f.grid.center(k);
        let s = x[0] * e[0] + x[1] * e[1];
        if s < p.l {
            continue;
        }
        let tail = p.delta * (-p.mu * (s - p.l)).exp();
        let upper = profile.phi_at(s - c * (t - p.t1) + p.tau1) + p.delta * (-p.delta * (t - p.t1)).exp() + tail;
        let lower = profile.phi_at(s - c * (t - p.t2) + p.tau2) - p.delta * (-p.delta * (t - p.t2)).exp() - tail;
        up = up.max(f.values[k] - upper);
        low = low.max(lower - f.values[k]);
    }
    (up, low)
}

/// Smallest `M` such that every cell with `eps < u < 1 - eps` lies within
/// geodesic distance `M` of the interface, over all snapshots.
pub fn width_bound(grid: &MaskedGrid, history: &[Snapshot], eps: f64) -> f64 {
    history
        .par_iter()
        .map(|s| {
            let iface = interface_of(grid, &s.values, s.time);
            if iface.cells.is_empty() {
                return 0.0;
            }
            let g = geodesic(grid, &iface.cells);
            (0..grid.len())
                .filter(|&k| s.values[k] > eps && s.values[k] < 1.0 - eps)
                .map(|k| g.dist[k])
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, DomainSpec, Rect, Variant};
    use crate::reaction::Reaction;
    use crate::wave::solve_profile;
    use std::sync::Arc;

    fn plane(w: f64, hgt: f64, h: f64) -> Arc<MaskedGrid> {
        let spec = DomainSpec { variant: Variant::FreePlane, window: Rect { x0: 0.0, y0: 0.0, x1: w, y1: hgt } };
        Arc::new(rasterize(&spec, h).unwrap())
    }

    #[test]
    fn flat_fields_have_no_interface() {
        let g = plane(4.0, 2.0, 0.5);
        let f = Field::from_fn(g.clone(), 0.0, |_| 0.0);
        let i = extract_interface(&f);
        assert!(i.cells.is_empty());
        assert_eq!(i.level, Level::AllBelow);
    }

    #[test]
    fn two_opposing_fronts_give_two_bands() {
        let r = Reaction::cubic(0.25).unwrap();
        let p = solve_profile(&r, 1e-8).unwrap();
        let g = plane(40.0, 4.0, 0.5);
        let f = Field::from_fn(g.clone(), 0.0, |x| p.phi_at(x[0] - 10.0).max(p.phi_at(30.0 - x[0])));
        let i = extract_interface(&f);
        let mut xs: Vec<f64> = i.cells.iter().map(|&k| g.center(k)[0]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        assert_eq!(xs, vec![9.75, 30.25]);
    }

    #[test]
    fn synthetic_axis_motion_gives_exact_speed() {
        let g = plane(60.0, 5.0, 0.5);
        let c = 0.5;
        let history: Vec<Interface> = (0..10)
            .map(|n| {
                let t = 10.0 * n as f64;
                let x = 2.25 + c * t;
                let cells = (0..g.len()).filter(|&k| g.center(k)[0] == x).collect();
                Interface { time: t, cells, per_branch: BTreeMap::new(), level: Level::Crossing }
            })
            .collect();
        let est = mean_speed(&history, &g).unwrap();
        assert!((est.gamma - c).abs() < 1e-12);
        assert!(est.residual < 1e-12);
    }

    #[test]
    fn frozen_interface_has_zero_speed() {
        let g = plane(20.0, 5.0, 0.5);
        let cells: Vec<usize> = (0..g.len()).filter(|&k| g.center(k)[0] == 5.25).collect();
        let history: Vec<Interface> = (0..6)
            .map(|n| Interface { time: n as f64, cells: cells.clone(), per_branch: BTreeMap::new(), level: Level::Crossing })
            .collect();
        assert_eq!(mean_speed(&history, &g).unwrap().gamma, 0.0);
        assert!(matches!(mean_speed(&history[..3], &g), Err(FrontsError::InsufficientHistory { .. })));
    }

    #[test]
    fn band_speed_detects_sign() {
        let snap = |t: f64, u: f64, ut: f64| Snapshot { time: t, values: vec![u], ut: vec![ut] };
        let up = vec![snap(0.0, 0.5, 0.1), snap(1.0, 0.6, 0.2)];
        assert_eq!(min_ut_band(&up, 0.1, 0.9), Ok(0.1));
        let down = vec![snap(0.0, 0.5, -0.1)];
        assert!(min_ut_band(&down, 0.1, 0.9).unwrap() < 0.0);
        let flat = vec![snap(0.0, 0.0, 0.0)];
        assert_eq!(min_ut_band(&flat, 0.1, 0.9), Err(FrontsError::EmptyBand(0.1, 0.9)));
    }

    #[test]
    fn envelope_contains_the_profile() {
        let r = Reaction::cubic(0.25).unwrap();
        let p = solve_profile(&r, 1e-8).unwrap();
        let spec = DomainSpec {
            variant: Variant::Branched {
                l: 3.0,
                branches: vec![Branch { direction: [1.0, 0.0], half_width: 2.0, origin: [0.0, 0.0] }],
                junction: vec![[-2.0, -2.0], [0.0, -2.0], [0.0, 2.0], [-2.0, 2.0]],
            },
            window: Rect { x0: -6.0, y0: -6.0, x1: 60.0, y1: 6.0 },
        };
        let g = Arc::new(rasterize(&spec, 0.25).unwrap());
        let b = spec.branches()[0].clone();
        let cells = branch_cells(&g, 0, &b, 2.0);
        let t = 12.0;
        let f = Field { grid: g.clone(), values: (0..g.len()).map(|k| p.phi_at(g.center(k)[0] - 20.0)).collect(), time: t };
        let params = EnvelopeParams { t1: 0.0, tau1: p.c_f * t - 20.0, t2: 0.0, tau2: p.c_f * t - 20.0, delta: 0.01, mu: 0.3, l: 2.0 };
        let (up, low) = envelope_check_branch(&f, &cells, &b, &p, &params);
        assert!(up <= 0.0 && low <= 0.0);
        let ones = Field { values: vec![1.0; g.len()], ..f };
        assert!(envelope_check_branch(&ones, &cells, &b, &p, &params).0 > 0.0);
        let fit = planar_fit(&g, &f.values, &cells, [1.0, 0.0], &p);
        assert!((fit.position - 20.0).abs() < 1e-6 && fit.sup_error < 1e-9);
    }
}
