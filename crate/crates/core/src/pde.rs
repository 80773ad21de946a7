//! Explicit Euler for `u_t = Δu + f(u)` with zero-flux walls.
//!
//! Each step is split: a diffusion update that is a convex combination of
//! neighbour values (ghost = centre across inactive faces), then the
//! pointwise map `v + dt f(v)`. Both halves are monotone under the step
//! bound, which is what gives the discrete comparison principle.

use crate::geometry::{MaskedGrid, Point};
use crate::reaction::Reaction;
use crate::wave::WaveProfile;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("dt = {dt} exceeds the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("field has {got} values for a grid of {want} cells")]
    Shape { got: usize, want: usize },
}

#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<MaskedGrid>,
    pub values: Vec<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScheme {
    pub dt: f64,
}

/// Region predicates used for indicator data and probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "snake_case")]
pub enum Region {
    All,
    Disk { center: Point, radius: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// `{ x : x . normal > offset }`.
    HalfPlane { normal: Point, offset: f64 },
    Union { parts: Vec<Region> },
    Intersection { parts: Vec<Region> },
    Complement { of: Box<Region> },
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::All => true,
            Region::Disk { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy < radius * radius
            }
            Region::Rect { x0, y0, x1, y1 } => p[0] >= *x0 && p[0] <= *x1 && p[1] >= *y0 && p[1] <= *y1,
            Region::HalfPlane { normal, offset } => p[0] * normal[0] + p[1] * normal[1] > *offset,
            Region::Union { parts } => parts.iter().any(|r| r.contains(p)),
            Region::Intersection { parts } => parts.iter().all(|r| r.contains(p)),
            Region::Complement { of } => !of.contains(p),
        }
    }

    pub fn cells(&self, grid: &MaskedGrid) -> Vec<usize> {
        (0..grid.len()).filter(|&k| self.contains(grid.center(k))).collect()
    }
}

impl StepScheme {
    /// Largest stable step: `min(h^2 / 4, 1 / L_f)`.
    pub fn bound(grid: &MaskedGrid, r: &Reaction) -> f64 {
        (grid.h * grid.h / 4.0).min(1.0 / r.global_lipschitz())
    }

    pub fn default_for(grid: &MaskedGrid, r: &Reaction) -> Self {
        Self { dt: 0.9 * Self::bound(grid, r) }
    }

    pub fn check(&self, grid: &MaskedGrid, r: &Reaction) -> Result<(), PdeError> {
        let bound = Self::bound(grid, r);
        if self.dt > 0.0 && self.dt <= bound {
            Ok(())
        } else {
            Err(PdeError::CflViolation { dt: self.dt, bound })
        }
    }
}

impl Field {
    pub fn from_fn(grid: Arc<MaskedGrid>, time: f64, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.center(k))).collect();
        Self { grid, values, time }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(-f64::INFINITY, f64::max)
    }

    /// Header `nx ny h time`, then row-major values with inactive cells as `nan`.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = format!("{} {} {} {}\n", g.nx, g.ny, g.h, self.time);
        for j in 0..g.ny {
            let row: Vec<String> = (0..g.nx)
                .map(|i| g.at(i, j).map_or("nan".to_string(), |k| format!("{:.10e}", self.values[k])))
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Little-endian: `nx`, `ny` as u64, then `h`, `time` and row-major f64 values (NaN when inactive).
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(32 + 8 * g.nx * g.ny);
        out.extend((g.nx as u64).to_le_bytes());
        out.extend((g.ny as u64).to_le_bytes());
        out.extend(g.h.to_le_bytes());
        out.extend(self.time.to_le_bytes());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let v = g.at(i, j).map_or(f64::NAN, |k| self.values[k]);
                out.extend(v.to_le_bytes());
            }
        }
        out
    }
}

pub fn init_planar_front(grid: Arc<MaskedGrid>, profile: &WaveProfile, e: Point, offset: f64) -> Field {
    Field::from_fn(grid, 0.0, |p| profile.phi_at(p[0] * e[0] + p[1] * e[1] - offset))
}

pub fn init_indicator(grid: Arc<MaskedGrid>, region: &Region, inside: f64, outside: f64) -> Field {
    assert!((0.0..=1.0).contains(&inside) && (0.0..=1.0).contains(&outside));
    Field::from_fn(grid, 0.0, |p| if region.contains(p) { inside } else { outside })
}

const ROWS_PER_BLOCK: usize = 32;
const SERIAL_BELOW: usize = 1 << 14;

/// One step from `u` into `out`; both indexed by compact cell.
pub fn step_into(grid: &MaskedGrid, r: &Reaction, dt: f64, u: &[f64], out: &mut [f64]) {
    let c = dt / (grid.h * grid.h);
    let kernel = |k: usize| {
        let n = grid.nbr[k];
        let uk = u[k];
        let lap = (u[n[0] as usize] + u[n[1] as usize]) + (u[n[2] as usize] + u[n[3] as usize]) - 4.0 * uk;
        let v = uk + c * lap;
        v + dt * r.eval(v)
    };
    if grid.len() < SERIAL_BELOW {
        for (k, o) in out.iter_mut().enumerate() {
            *o = kernel(k);
        }
        return;
    }
    let mut blocks = Vec::new();
    let mut rest = out;
    let mut start = 0;
    for j in (ROWS_PER_BLOCK..=grid.ny).step_by(ROWS_PER_BLOCK).chain(std::iter::once(grid.ny)) {
        let end = grid.row_start[j];
        if end <= start {
            continue;
        }
        let (head, tail) = rest.split_at_mut(end - start);
        blocks.push((start, head));
        rest = tail;
        start = end;
    }
    blocks.into_par_iter().for_each(|(offset, block)| {
        for (i, o) in block.iter_mut().enumerate() {
            *o = kernel(offset + i);
        }
    });
}

pub fn step(f: &Field, r: &Reaction, s: &StepScheme) -> Result<Field, PdeError> {
    s.check(&f.grid, r)?;
    if f.values.len() != f.grid.len() {
        return Err(PdeError::Shape { got: f.values.len(), want: f.grid.len() });
    }
    let mut out = vec![0.0; f.values.len()];
    step_into(&f.grid, r, s.dt, &f.values, &mut out);
    Ok(Field { grid: f.grid.clone(), values: out, time: f.time + s.dt })
}

/// Callbacks at a fixed time cadence. `next` is the field one step later,
/// so forward differences `(next - now) / dt` are available.
pub trait Observer {
    fn every(&self) -> f64;
    fn observe(&mut self, now: &Field, next: &[f64], dt: f64);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    Horizon,
    /// `max |u^{n+1} - u^n| / dt` fell below the threshold.
    Stationary,
    /// `min u` rose above the threshold.
    Saturated,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub t_end: f64,
    pub stationary_below: Option<f64>,
    pub min_above: Option<f64>,
    /// Time between stopping-rule checks.
    pub check_every: f64,
}

impl RunOptions {
    pub fn until(t_end: f64) -> Self {
        Self { t_end, stationary_below: None, min_above: None, check_every: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub field: Field,
    pub steps: usize,
    pub stop: StopReason,
    /// Last measured `max |u^{n+1} - u^n| / dt` (NaN if never measured).
    pub stationarity: f64,
}

pub fn stationarity(now: &[f64], next: &[f64], dt: f64) -> f64 {
    now.iter().zip(next).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max) / dt
}

pub fn run(f0: Field, r: &Reaction, s: &StepScheme, t_end: f64, observers: &mut [&mut dyn Observer]) -> Result<Field, PdeError> {
    Ok(run_with(f0, r, s, RunOptions::until(t_end), observers)?.field)
}

pub fn run_with(
    f0: Field,
    r: &Reaction,
    s: &StepScheme,
    opts: RunOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutcome, PdeError> {
    s.check(&f0.grid, r)?;
    assert!(opts.t_end >= f0.time, "t_end before the initial time");
    let dt = s.dt;
    let t0 = f0.time;
    let mut cur = f0;
    let mut next = vec![0.0; cur.values.len()];
    let mut marks: Vec<i64> = vec![-1; observers.len()];
    let mut check_mark = 0i64;
    let mut steps = 0usize;
    let mut last_stat = f64::NAN;
    let total = ((opts.t_end - t0) / dt).round() as usize;
    loop {
        if steps >= total {
            return Ok(RunOutcome { field: cur, steps, stop: StopReason::Horizon, stationarity: last_stat });
        }
        step_into(&cur.grid, r, dt, &cur.values, &mut next);
        let elapsed = cur.time - t0;
        for (o, mark) in observers.iter_mut().zip(marks.iter_mut()) {
            let m = (elapsed / o.every() + 1e-9).floor() as i64;
            if m > *mark {
                *mark = m;
                o.observe(&cur, &next, dt);
            }
        }
        let check = (elapsed / opts.check_every + 1e-9).floor() as i64;
        let due = check > check_mark || steps == 0;
        if due {
            check_mark = check;
            last_stat = stationarity(&cur.values, &next, dt);
        }
        std::mem::swap(&mut cur.values, &mut next);
        steps += 1;
        cur.time = t0 + steps as f64 * dt;
        if due {
            if let Some(th) = opts.stationary_below {
                if last_stat <= th {
                    return Ok(RunOutcome { field: cur, steps, stop: StopReason::Stationary, stationarity: last_stat });
                }
            }
            if let Some(th) = opts.min_above {
                if cur.min() >= th {
                    return Ok(RunOutcome { field: cur, steps, stop: StopReason::Saturated, stationarity: last_stat });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, DomainSpec, Rect, Shape, Variant};

    fn grid() -> Arc<MaskedGrid> {
        let spec = DomainSpec {
            variant: Variant::Exterior { obstacle: vec![Shape::Disk { center: [0.0, 0.0], radius: 1.0 }], l: 1.0 },
            window: Rect { x0: -4.0, y0: -4.0, x1: 4.0, y1: 4.0 },
        };
        Arc::new(rasterize(&spec, 0.2).unwrap())
    }

    #[test]
    fn constant_states_are_fixed() {
        let r = Reaction::cubic(0.25).unwrap();
        let g = grid();
        let s = StepScheme::default_for(&g, &r);
        for c in [0.0, 0.25, 1.0] {
            let f = Field::from_fn(g.clone(), 0.0, |_| c);
            assert!(step(&f, &r, &s).unwrap().values.iter().all(|&v| v == c));
        }
    }

    #[test]
    fn uniform_data_follows_the_scalar_euler_map() {
        let r = Reaction::cubic(0.25).unwrap();
        let g = grid();
        let s = StepScheme::default_for(&g, &r);
        let mut f = Field::from_fn(g.clone(), 0.0, |_| 0.6);
        let mut x: f64 = 0.6;
        for _ in 0..50 {
            f = step(&f, &r, &s).unwrap();
            x += s.dt * r.eval(x);
            assert!(f.values.iter().all(|&v| v == x));
        }
    }

    #[test]
    fn rejects_large_steps() {
        let r = Reaction::cubic(0.25).unwrap();
        let g = grid();
        let f = Field::from_fn(g, 0.0, |_| 0.0);
        assert!(matches!(step(&f, &r, &StepScheme { dt: 0.011 }), Err(PdeError::CflViolation { .. })));
    }

    #[test]
    fn run_to_current_time_is_identity() {
        let r = Reaction::cubic(0.25).unwrap();
        let g = grid();
        let s = StepScheme::default_for(&g, &r);
        let f = Field::from_fn(g, 0.0, |p| (p[0] * 0.3).sin().abs());
        let out = run(f.clone(), &r, &s, 0.0, &mut []).unwrap();
        assert_eq!(out.values, f.values);
    }
}
