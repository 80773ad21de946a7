//! Stationary objects: the radial bump `psi`, long-time limits of the
//! evolution, and the dilation test for the Liouville property.

use crate::geometry::{rasterize, DomainSpec, GeometryError, MaskedGrid, Point, Rect, Shape, Variant};
use crate::pde::{run_with, Field, PdeError, RunOptions, StepScheme, StopReason};
use crate::reaction::Reaction;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StationaryError {
    #[error("horizon reached before stationarity ({} > {stop})", .partial.stationarity)]
    HorizonReached { partial: Box<StationaryLimit>, stop: f64 },
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Radial stationary profile on `[0, R]` with `psi(R) = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct BumpSolution {
    pub radius: f64,
    pub dim: usize,
    pub dr: f64,
    pub psi: Vec<f64>,
    pub peak: f64,
    /// Max of the discrete residual `|psi'' + (N-1)/r psi' + f(psi)|` at interior samples.
    pub residual: f64,
}

impl BumpSolution {
    pub fn is_zero(&self) -> bool {
        self.peak == 0.0
    }

    /// Linear interpolation in `r`, zero beyond the radius.
    pub fn value_at(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        let s = r / self.dr;
        let i = (s.floor() as usize).min(self.psi.len() - 2);
        let w = s - i as f64;
        (1.0 - w) * self.psi[i] + w * self.psi[i + 1]
    }

    /// The bump centred at `center`, zero elsewhere.
    pub fn field(&self, grid: Arc<MaskedGrid>, center: Point) -> Field {
        Field::from_fn(grid, 0.0, |p| self.value_at(((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt()))
    }
}

const BUMP_STATIONARY: f64 = 1e-8;
const BUMP_MAX_STEPS: usize = 2_000_000;

fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = d.len();
    let mut cp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

/// Discrete radial operator `psi'' + (N-1)/r psi'` at node `i` (`psi[n-1] = 0`).
fn radial_coeffs(i: usize, dr: f64, dim: usize) -> (f64, f64, f64) {
    let inv = 1.0 / (dr * dr);
    if i == 0 {
        // Symmetric limit: Δpsi(0) = 2N (psi_1 - psi_0) / dr².
        let k = 2.0 * dim as f64 * inv;
        return (0.0, -k, k);
    }
    let g = (dim as f64 - 1.0) / (i as f64 * dr) / (2.0 * dr);
    (inv - g, -2.0 * inv, inv + g)
}

pub fn solve_bump(r: &Reaction, radius: f64, n_samples: usize) -> BumpSolution {
    solve_bump_dim(r, radius, n_samples, 2)
}

/// Semi-implicit radial flow: implicit diffusion, explicit reaction with
/// `dt = 1 / max|f'|`, from `(1 - 1e-3) (1 - (r/R)²)` until stationary.
pub fn solve_bump_dim(r: &Reaction, radius: f64, n_samples: usize, dim: usize) -> BumpSolution {
    assert!(radius > 0.0 && n_samples >= 256, "solve_bump needs R > 0 and at least 256 samples");
    let n = n_samples;
    let dr = radius / (n - 1) as f64;
    let dt = 1.0 / r.global_lipschitz();
    let m = n - 1; // unknowns 0..m, psi[m] = 0
    let mut psi: Vec<f64> = (0..n).map(|i| (1.0 - 1e-3) * (1.0 - (i as f64 * dr / radius).powi(2)).max(0.0)).collect();
    let (mut a, mut b, mut c) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for i in 0..m {
        let (lo, mid, hi) = radial_coeffs(i, dr, dim);
        a[i] = -dt * lo;
        b[i] = 1.0 - dt * mid;
        c[i] = if i + 1 < m { -dt * hi } else { 0.0 };
    }
    let mut rhs = vec![0.0; m];
    for _ in 0..BUMP_MAX_STEPS {
        for i in 0..m {
            rhs[i] = psi[i] + dt * r.eval(psi[i]);
        }
        thomas(&a, &b, &c, &mut rhs);
        // The exact flow stays in [0, 1]; the solve can round a hair past 1.
        rhs.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        let change = (0..m).map(|i| (rhs[i] - psi[i]).abs()).fold(0.0, f64::max) / dt;
        psi[..m].copy_from_slice(&rhs);
        let top = psi[0];
        if top < 1e-6 {
            psi.iter_mut().for_each(|v| *v = 0.0);
            break;
        }
        if change <= BUMP_STATIONARY {
            break;
        }
    }
    let residual = (0..m)
        .map(|i| {
            let (lo, mid, hi) = radial_coeffs(i, dr, dim);
            let left = if i == 0 { 0.0 } else { psi[i - 1] };
            (lo * left + mid * psi[i] + hi * psi[i + 1] + r.eval(psi[i])).abs()
        })
        .fold(0.0, f64::max);
    BumpSolution { radius, dim, dr, peak: psi[0], psi, residual }
}

#[derive(Debug, Clone)]
pub struct StationaryLimit {
    pub p: Field,
    /// `max |u^{n+1} - u^n| / dt`, which equals `|Δ_h p + f(p)|` on active cells.
    pub stationarity: f64,
    /// Mean of `p` over the far part of each branch (key `None` outside branches).
    pub far_field: Vec<(Option<u16>, f64)>,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy)]
pub struct LimitOptions {
    pub stop: f64,
    pub horizon: f64,
    /// Stop early once `min p` reaches this value.
    pub saturate_at: Option<f64>,
}

fn far_field(f: &Field, far: &[usize]) -> Vec<(Option<u16>, f64)> {
    let g = &f.grid;
    let mut acc: Vec<(Option<u16>, f64, usize)> = Vec::new();
    for &k in far {
        let b = g.branch_id[k];
        match acc.iter_mut().find(|e| e.0 == b) {
            Some(e) => {
                e.1 += f.values[k];
                e.2 += 1;
            }
            None => acc.push((b, f.values[k], 1)),
        }
    }
    acc.sort_by_key(|e| e.0);
    acc.into_iter().map(|(b, s, n)| (b, s / n as f64)).collect()
}

/// Runs until `max |u^{n+1} - u^n| / dt <= stop`; `far` lists the cells
/// averaged into the far-field estimates.
pub fn stationary_limit(f0: Field, r: &Reaction, s: &StepScheme, opts: LimitOptions, far: &[usize]) -> Result<StationaryLimit, StationaryError> {
    let run = RunOptions { t_end: f0.time + opts.horizon, stationary_below: Some(opts.stop), min_above: opts.saturate_at, check_every: 1.0 };
    let out = run_with(f0, r, s, run, &mut [])?;
    let mut lim = StationaryLimit { far_field: far_field(&out.field, far), p: out.field, stationarity: out.stationarity, stop: out.stop };
    if out.stop == StopReason::Saturated {
        // min p >= saturate_at: only p = 1 is left, so report its residual.
        lim.stationarity = crate::pde::stationarity(&lim.p.values, &crate::pde::step(&lim.p, r, s)?.values, s.dt);
    }
    match out.stop {
        StopReason::Horizon => Err(StationaryError::HorizonReached { partial: Box::new(lim), stop: opts.stop }),
        _ => Ok(lim),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LiouvilleVerdict {
    PassesToOne,
    /// Settled on a state with `min p < 1 - 0.01`.
    StuckBelow,
    /// Neither stationary nor saturated by the horizon.
    Undecided,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleResult {
    pub scale: f64,
    pub h: f64,
    pub cells: usize,
    pub min_p: f64,
    pub stationarity: f64,
    pub time: f64,
    pub verdict: LiouvilleVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct LiouvilleReport {
    pub results: Vec<ScaleResult>,
    pub smallest_passing: Option<f64>,
}

impl LiouvilleReport {
    /// Every scale above a passing one also passes.
    pub fn upward_closed(&self) -> bool {
        let first = self.results.iter().position(|s| s.verdict == LiouvilleVerdict::PassesToOne);
        first.is_none_or(|i| self.results[i..].iter().all(|s| s.verdict == LiouvilleVerdict::PassesToOne))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LiouvilleOptions {
    /// Grid step at scale 1; at scale `s` the step is `min(h1 s, h_max)`.
    pub h1: f64,
    pub h_max: f64,
    /// Radius of the igniting bump.
    pub bump_radius: f64,
    pub horizon: f64,
    pub margin: f64,
}

impl Default for LiouvilleOptions {
    fn default() -> Self {
        Self { h1: 0.125, h_max: 0.25, bump_radius: 8.0, horizon: 3000.0, margin: 4.0 }
    }
}

const LIOUVILLE_TOL: f64 = 0.01;

fn bounding_circle(obstacle: &[Shape]) -> (Point, f64) {
    let pts: Vec<(Point, f64)> = obstacle
        .iter()
        .flat_map(|s| match s {
            Shape::Disk { center, radius } => vec![(*center, *radius)],
            Shape::Polygon { vertices } => vertices.iter().map(|v| (*v, 0.0)).collect(),
        })
        .collect();
    let n = pts.len() as f64;
    let c = [pts.iter().map(|p| p.0[0]).sum::<f64>() / n, pts.iter().map(|p| p.0[1]).sum::<f64>() / n];
    let r = pts.iter().map(|(p, rad)| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt() + rad).fold(0.0, f64::max);
    (c, r)
}

/// For each scale, dilates the obstacle about the origin, ignites a bump
/// on the `+x` side at distance max(diameter, bump radius + 1) from the
/// obstacle's bounding circle and runs to a stationary state.
pub fn liouville_scaling_test(spec: &DomainSpec, scales: &[f64], r: &Reaction, opts: LiouvilleOptions) -> Result<LiouvilleReport, StationaryError> {
    let Variant::Exterior { obstacle, .. } = &spec.variant else {
        return Err(GeometryError::Unsupported("liouville_scaling_test needs an exterior domain".into()).into());
    };
    assert!(scales.windows(2).all(|w| w[0] <= w[1]), "scales must be ascending");
    let bump = solve_bump(r, opts.bump_radius, 1024);
    let results: Result<Vec<ScaleResult>, StationaryError> = scales
        .par_iter()
        .map(|&s| {
            let scaled = DomainSpec { variant: Variant::Exterior { obstacle: obstacle.clone(), l: 0.0 }, window: spec.window }.scaled(s);
            let Variant::Exterior { obstacle: obs, .. } = &scaled.variant else { unreachable!() };
            let (c, rad) = bounding_circle(obs);
            let gap = (2.0 * rad).max(opts.bump_radius + 1.0);
            let x0 = [c[0] + rad + gap, c[1]];
            let m = opts.margin;
            let window = Rect { x0: c[0] - rad - m, y0: c[1] - rad - m, x1: x0[0] + opts.bump_radius + m, y1: c[1] + rad + m };
            let window = Rect { y0: window.y0.min(c[1] - opts.bump_radius - m), y1: window.y1.max(c[1] + opts.bump_radius + m), ..window };
            let dom = DomainSpec { variant: Variant::Exterior { obstacle: obs.clone(), l: rad }, window };
            let h = (opts.h1 * s).min(opts.h_max);
            let grid = Arc::new(rasterize(&dom, h)?);
            let f0 = bump.field(grid.clone(), x0);
            let step = StepScheme::default_for(&grid, r);
            let lim = stationary_limit(f0, r, &step, LimitOptions { stop: 1e-6, horizon: opts.horizon, saturate_at: Some(1.0 - LIOUVILLE_TOL) }, &[]);
            let (lim, decided) = match lim {
                Ok(l) => (l, true),
                Err(StationaryError::HorizonReached { partial, .. }) => (*partial, false),
                Err(e) => return Err(e),
            };
            let min_p = lim.p.min();
            let verdict = if min_p >= 1.0 - LIOUVILLE_TOL {
                LiouvilleVerdict::PassesToOne
            } else if decided {
                LiouvilleVerdict::StuckBelow
            } else {
                LiouvilleVerdict::Undecided
            };
            Ok(ScaleResult { scale: s, h, cells: grid.len(), min_p, stationarity: lim.stationarity, time: lim.p.time, verdict })
        })
        .collect();
    let results = results?;
    let smallest_passing = results.iter().find(|s| s.verdict == LiouvilleVerdict::PassesToOne).map(|s| s.scale);
    Ok(LiouvilleReport { results, smallest_passing })
}

/// Obstacles used by the dilation test: `disk` (radius 4) and `c_shape`, an
/// annular sector `3 <= |x| <= 4` built from convex quads, open towards `+x`
/// through a gap of width 0.8 at the inner radius.
pub fn liouville_fixture(name: &str) -> Option<DomainSpec> {
    let obstacle = match name {
        "disk" => vec![Shape::Disk { center: [0.0, 0.0], radius: 4.0 }],
        "c_shape" => {
            let (ri, ro, pieces) = (3.0f64, 4.0f64, 24);
            let a0 = (0.4f64 / ri).asin();
            let a1 = 2.0 * std::f64::consts::PI - a0;
            (0..pieces)
                .map(|k| {
                    let s = a0 + (a1 - a0) * k as f64 / pieces as f64;
                    let e = a0 + (a1 - a0) * (k + 1) as f64 / pieces as f64;
                    let at = |r: f64, a: f64| [r * a.cos(), r * a.sin()];
                    Shape::Polygon { vertices: vec![at(ri, s), at(ro, s), at(ro, e), at(ri, e)] }
                })
                .collect()
        }
        _ => return None,
    };
    Some(DomainSpec { variant: Variant::Exterior { obstacle, l: 4.0 }, window: Rect { x0: -10.0, y0: -10.0, x1: 10.0, y1: 10.0 } })
}
