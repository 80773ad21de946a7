//! Scenario files, the run pipeline, and the bundled fixtures.

use crate::fronts::{
    branch_cells, branch_section_interface, classify_propagation, envelope_check_branch, interface_of, mean_speed, min_ut_band, planar_fit,
    EnvelopeParams, FrontsError, Interface, Level, Recorder, Snapshot, SpeedEstimate, Verdict, VerdictRule,
};
use crate::geometry::{geodesic, rasterize, Branch, DomainSpec, GeometryError, MaskedGrid, Point, Variant};
use crate::pde::{init_indicator, init_planar_front, run_with, Field, Observer, PdeError, Region, RunOptions, StepScheme, StopReason};
use crate::reaction::{Reaction, ReactionError, ReactionSpec};
use crate::stationary::solve_bump;
use crate::wave::{solve_profile, WaveError, WaveProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    PlanarFront { e: Point, offset: f64 },
    Indicator { region: Region, inside: f64, outside: f64 },
    /// The stationary bump on a ball, extended by zero.
    Bump { center: Point, radius: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    /// One-sided level set `{u >= 1/2}` bordering `{u < 1/2}`.
    #[default]
    LevelSet,
    /// Cross-sections of the branches at the fitted front position.
    BranchSections,
}

/// Downstream region where the front should relax back to a planar profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryBand {
    pub region: Region,
    pub e: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observers {
    pub snapshot_every: f64,
    pub interface_every: f64,
    #[serde(default)]
    pub interfaces: InterfaceKind,
    /// Cells whose minimum decides complete propagation.
    pub probe: Region,
    /// Cells whose maximum decides blocking.
    #[serde(default)]
    pub far_probe: Option<Region>,
    #[serde(default)]
    pub recovery: Option<RecoveryBand>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StopRules {
    #[serde(default)]
    pub stationary_below: Option<f64>,
    #[serde(default)]
    pub min_above: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub reaction: ReactionSpec,
    pub domain: DomainSpec,
    pub h: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    pub initial: InitialData,
    pub horizon: f64,
    pub observers: Observers,
    #[serde(default)]
    pub stop: StopRules,
    /// Seeds the optional uniform perturbation of the initial data.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_noise: f64,
}

/// Cells kept free between the farthest point the front can reach by the
/// horizon and the truncation boundary.
pub const MARGIN_CELLS: f64 = 20.0;

pub const VERDICT_RULE_COMPLETE: f64 = 0.01;
pub const VERDICT_RULE_STATIONARY: f64 = 1e-6;

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn build(&self) -> Result<Setup, ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Validation(m));
        if !(self.h > 0.0) || !(self.horizon > 0.0) {
            return bad(format!("h = {} and horizon = {} must be positive", self.h, self.horizon));
        }
        if !(self.observers.snapshot_every > 0.0 && self.observers.interface_every > 0.0) {
            return bad("observer cadences must be positive".into());
        }
        if !(0.0..=0.5).contains(&self.initial_noise) {
            return bad(format!("initial_noise = {} outside [0, 1/2]", self.initial_noise));
        }
        self.domain.validate()?;
        let reaction = Reaction::from_spec(&self.reaction)?;
        let profile = solve_profile(&reaction, 1e-10)?;
        let grid = Arc::new(rasterize(&self.domain, self.h)?);
        let scheme = match self.dt {
            Some(dt) => StepScheme { dt },
            None => StepScheme::default_for(&grid, &reaction),
        };
        scheme.check(&grid, &reaction)?;
        let f0 = self.initial_field(grid.clone(), &reaction, &profile)?;
        let invaded: Vec<usize> = (0..grid.len()).filter(|&k| f0.values[k] >= 0.5).collect();
        if invaded.is_empty() {
            return bad("initial data has no cell with u >= 1/2".into());
        }
        let reach = geodesic(&grid, &invaded).dist.into_iter().filter(|d| d.is_finite()).fold(0.0, f64::max);
        let need = profile.c_f * self.horizon + MARGIN_CELLS * self.h;
        if need > reach {
            return bad(format!(
                "front can travel {:.2} by the horizon (+{} cells), but the truncation ends {:.2} from the initial invaded set",
                profile.c_f * self.horizon,
                MARGIN_CELLS,
                reach
            ));
        }
        let probe = self.observers.probe.cells(&grid);
        if probe.is_empty() {
            return bad("probe region contains no cell".into());
        }
        let far = self.observers.far_probe.as_ref().map(|r| r.cells(&grid)).unwrap_or_default();
        Ok(Setup { reaction, profile, grid, scheme, f0, probe, far })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.build().map(|_| ())
    }

    fn initial_field(&self, grid: Arc<MaskedGrid>, r: &Reaction, profile: &WaveProfile) -> Result<Field, ScenarioError> {
        let mut f = match &self.initial {
            InitialData::PlanarFront { e, offset } => {
                let n = (e[0] * e[0] + e[1] * e[1]).sqrt();
                if !(n > 0.0) {
                    return Err(ScenarioError::Validation("planar front direction is zero".into()));
                }
                init_planar_front(grid, profile, [e[0] / n, e[1] / n], *offset)
            }
            InitialData::Indicator { region, inside, outside } => {
                if !(0.0..=1.0).contains(inside) || !(0.0..=1.0).contains(outside) {
                    return Err(ScenarioError::Validation("indicator values must lie in [0, 1]".into()));
                }
                init_indicator(grid, region, *inside, *outside)
            }
            InitialData::Bump { center, radius } => {
                let b = solve_bump(r, *radius, 1024);
                if b.is_zero() {
                    return Err(ScenarioError::Validation(format!("no nonzero bump on a ball of radius {radius}")));
                }
                b.field(grid, *center)
            }
        };
        if self.initial_noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for v in &mut f.values {
                *v = (*v + self.initial_noise * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0);
            }
        }
        Ok(f)
    }

    fn branches(&self) -> (&[Branch], f64) {
        match &self.domain.variant {
            Variant::Branched { l, branches, .. } => (branches, *l),
            _ => (&[], 0.0),
        }
    }
}

struct Setup {
    reaction: Reaction,
    profile: WaveProfile,
    grid: Arc<MaskedGrid>,
    scheme: StepScheme,
    f0: Field,
    probe: Vec<usize>,
    far: Vec<usize>,
}

struct InterfaceLog<'a> {
    every: f64,
    kind: InterfaceKind,
    branches: &'a [Branch],
    l: f64,
    profile: &'a WaveProfile,
    out: Vec<Interface>,
}

impl Observer for InterfaceLog<'_> {
    fn every(&self) -> f64 {
        self.every
    }

    fn observe(&mut self, now: &Field, _next: &[f64], _dt: f64) {
        let i = match self.kind {
            InterfaceKind::LevelSet => interface_of(&now.grid, &now.values, now.time),
            InterfaceKind::BranchSections => branch_section_interface(&now.grid, self.branches, self.l, &now.values, now.time, self.profile),
        };
        self.out.push(i);
    }
}

/// Late-time planar fit in one branch tail.
#[derive(Debug, Clone, Serialize)]
pub struct BranchFit {
    pub branch: usize,
    /// `None` when the tail is fully invaded or not reached at the end.
    pub tau: Option<f64>,
    /// Max over late snapshots of the per-snapshot sup error.
    pub sup_error: Option<f64>,
    pub snapshots: usize,
    /// Max excess over the branch envelopes started at the first late fit.
    pub envelope_excess: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub c_f: f64,
    pub lambda: f64,
    pub h: f64,
    pub dt: f64,
    pub cells: usize,
    pub steps: usize,
    pub stop: String,
    pub end_time: f64,
    pub gamma: Option<f64>,
    pub gamma_rel_error: Option<f64>,
    pub speed_residual: Option<f64>,
    pub speed_error: Option<String>,
    pub verdict: String,
    pub final_probe_min: f64,
    pub final_far_max: Option<f64>,
    pub final_stationarity: f64,
    pub min_ut_band: Option<f64>,
    pub branch_fits: Vec<BranchFit>,
    /// `(t, sup error)` of the planar fit in the recovery band over the last third.
    pub recovery: Vec<(f64, f64)>,
    pub wall_seconds: f64,
    #[serde(skip)]
    pub speed: Option<SpeedEstimate>,
    #[serde(skip)]
    pub interfaces: Vec<Interface>,
}

impl RunReport {
    pub fn verdict_is(&self, v: Verdict) -> bool {
        self.verdict == format!("{v:?}")
    }

    /// Recovery error decreasing over the last third: last below first and
    /// no step up by more than `slack`.
    pub fn recovery_decreasing(&self, slack: f64) -> bool {
        self.recovery.len() >= 2
            && self.recovery.last().unwrap().1 < self.recovery[0].1
            && self.recovery.windows(2).all(|w| w[1].1 <= w[0].1 + slack)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(s, "scenario: {}", self.name);
        let _ = writeln!(s, "c_f: {:.8}", self.c_f);
        let _ = writeln!(s, "lambda: {:.8}", self.lambda);
        let _ = writeln!(s, "grid: {} cells, h = {}, dt = {:.6}", self.cells, self.h, self.dt);
        let _ = writeln!(s, "run: {} steps, stop = {}, t_end = {:.4}", self.steps, self.stop, self.end_time);
        let _ = writeln!(s, "gamma: {}", opt(self.gamma));
        let _ = writeln!(s, "gamma_rel_error: {}", opt(self.gamma_rel_error));
        let _ = writeln!(s, "speed_residual: {}", opt(self.speed_residual));
        if let Some(e) = &self.speed_error {
            let _ = writeln!(s, "speed_error: {e}");
        }
        let _ = writeln!(s, "verdict: {}", self.verdict);
        let _ = writeln!(s, "probe_min: {:.6}", self.final_probe_min);
        let _ = writeln!(s, "far_max: {}", opt(self.final_far_max));
        let _ = writeln!(s, "stationarity: {:.3e}", self.final_stationarity);
        let _ = writeln!(s, "min_ut_band_0.1_0.9: {}", opt(self.min_ut_band));
        for b in &self.branch_fits {
            let env = b.envelope_excess.map_or("none".to_string(), |(u, l)| format!("{u:.4}/{l:.4}"));
            let _ = writeln!(s, "branch {}: tau = {}, sup_error = {}, snapshots = {}, envelope_excess = {}", b.branch, opt(b.tau), opt(b.sup_error), b.snapshots, env);
        }
        if !self.recovery.is_empty() {
            let series: Vec<String> = self.recovery.iter().map(|(t, e)| format!("{t:.1}:{e:.4}")).collect();
            let _ = writeln!(s, "recovery: {}", series.join(" "));
            let _ = writeln!(s, "recovery_decreasing: {}", self.recovery_decreasing(0.005));
        }
        let _ = writeln!(s, "wall_seconds: {:.2}", self.wall_seconds);
        s
    }

    pub fn speeds_csv(&self) -> String {
        let mut s = String::from("t,s,dist,ratio\n");
        if let Some(est) = &self.speed {
            for &(t, u, d) in &est.pairs {
                let _ = writeln!(s, "{t:.6},{u:.6},{d:.6},{:.8}", d / (u - t));
            }
        }
        s
    }

    pub fn interfaces_csv(&self, grid: &MaskedGrid) -> String {
        let mut s = String::from("time,branch,cells,mean_x,mean_y,level\n");
        for i in &self.interfaces {
            let level = match i.level {
                Level::Crossing => "crossing",
                Level::AllBelow => "all_below",
                Level::AllAbove => "all_above",
            };
            if i.per_branch.is_empty() {
                let _ = writeln!(s, "{:.6},,0,,,{level}", i.time);
            }
            for (b, cells) in &i.per_branch {
                let n = cells.len() as f64;
                let (mx, my) = cells.iter().fold((0.0, 0.0), |(x, y), &k| {
                    let c = grid.center(k);
                    (x + c[0] / n, y + c[1] / n)
                });
                let b = b.map_or(String::new(), |b| b.to_string());
                let _ = writeln!(s, "{:.6},{b},{},{mx:.6},{my:.6},{level}", i.time, cells.len());
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SnapshotFormat {
    #[default]
    Text,
    Binary,
    None,
}

/// Output settings; `out` is the parent of the `<scenario>/` directory.
#[derive(Debug, Clone, Default)]
pub struct OutputOptions<'a> {
    pub out: Option<&'a Path>,
    pub snapshot_format: SnapshotFormat,
}

fn final_snapshot(f: &Field, r: &Reaction, s: &StepScheme) -> Snapshot {
    let mut next = vec![0.0; f.values.len()];
    crate::pde::step_into(&f.grid, r, s.dt, &f.values, &mut next);
    let ut = f.values.iter().zip(&next).map(|(a, b)| (b - a) / s.dt).collect();
    Snapshot { time: f.time, values: f.values.clone(), ut }
}

fn fit_branches(sc: &Scenario, grid: &Arc<MaskedGrid>, snaps: &[Snapshot], profile: &WaveProfile, r: &Reaction) -> Vec<BranchFit> {
    let (branches, l) = sc.branches();
    let Some(last) = snaps.last() else { return Vec::new() };
    let late: Vec<&Snapshot> = snaps.iter().filter(|s| s.time >= last.time * 2.0 / 3.0).collect();
    let consts = r.small_constants().ok();
    branches
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let tail = branch_cells(grid, j, b, l);
            let moving = |s: &Snapshot| {
                let above = tail.iter().filter(|&&k| s.values[k] >= 0.5).count();
                above > 0 && above < tail.len()
            };
            let fits: Vec<(f64, f64, f64)> = late
                .iter()
                .filter(|s| moving(s))
                .map(|s| {
                    let f = planar_fit(grid, &s.values, &tail, b.direction, profile);
                    (s.time, f.position, f.sup_error)
                })
                .collect();
            let Some(&(t_end, x_end, _)) = fits.last() else {
                return BranchFit { branch: j, tau: None, sup_error: None, snapshots: 0, envelope_excess: None };
            };
            let sup = fits.iter().map(|f| f.2).fold(0.0, f64::max);
            // Envelopes launched from the first late fit, shifted by one length unit each way.
            let envelope_excess = consts.map(|c| {
                let (t1, x1, _) = fits[0];
                let p = EnvelopeParams { t1, tau1: -x1 - 1.0, t2: t1, tau2: -x1 + 1.0, delta: c.delta, mu: c.mu, l };
                late.iter().filter(|s| s.time >= t1).fold((-f64::INFINITY, -f64::INFINITY), |acc, s| {
                    let f = Field { grid: grid.clone(), values: s.values.clone(), time: s.time };
                    let (u, lo) = envelope_check_branch(&f, &tail, b, profile, &p);
                    (acc.0.max(u), acc.1.max(lo))
                })
            });
            BranchFit { branch: j, tau: Some(profile.c_f * t_end - x_end), sup_error: Some(sup), snapshots: fits.len(), envelope_excess }
        })
        .collect()
}

pub fn run_scenario(sc: &Scenario, out: &OutputOptions) -> Result<RunReport, ScenarioError> {
    let clock = Instant::now();
    let Setup { reaction, profile, grid, scheme, f0, probe, far } = sc.build()?;
    let (branches, l) = sc.branches();
    let mut rec = Recorder::new(sc.observers.snapshot_every);
    let mut log = InterfaceLog { every: sc.observers.interface_every, kind: sc.observers.interfaces, branches, l, profile: &profile, out: Vec::new() };
    let opts = RunOptions { t_end: sc.horizon, stationary_below: sc.stop.stationary_below, min_above: sc.stop.min_above, check_every: 1.0 };
    let outcome = run_with(f0, &reaction, &scheme, opts, &mut [&mut rec, &mut log])?;
    let mut snaps = rec.snaps;
    let last = final_snapshot(&outcome.field, &reaction, &scheme);
    if snaps.last().is_none_or(|s| s.time < last.time) {
        snaps.push(last);
    }

    let speed: Result<SpeedEstimate, FrontsError> = mean_speed(&log.out, &grid);
    let rule = VerdictRule { eps_complete: VERDICT_RULE_COMPLETE, eps_stationary: VERDICT_RULE_STATIONARY, theta1: reaction.theta1 };
    let verdict = classify_propagation(&snaps, &probe, &far, rule);
    let branch_fits = fit_branches(sc, &grid, &snaps, &profile, &reaction);
    let recovery = match &sc.observers.recovery {
        Some(band) => {
            let cells = band.region.cells(&grid);
            let t_last = snaps.last().map_or(0.0, |s| s.time);
            snaps
                .iter()
                .filter(|s| s.time >= t_last * 2.0 / 3.0 && !cells.is_empty())
                .map(|s| (s.time, planar_fit(&grid, &s.values, &cells, band.e, &profile).sup_error))
                .collect()
        }
        None => Vec::new(),
    };
    let final_snap = snaps.last().expect("at least the final snapshot");
    let report = RunReport {
        name: sc.name.clone(),
        c_f: profile.c_f,
        lambda: profile.lambda,
        h: sc.h,
        dt: scheme.dt,
        cells: grid.len(),
        steps: outcome.steps,
        stop: format!("{:?}", outcome.stop),
        end_time: outcome.field.time,
        gamma: speed.as_ref().ok().map(|e| e.gamma),
        gamma_rel_error: speed.as_ref().ok().map(|e| e.gamma / profile.c_f - 1.0),
        speed_residual: speed.as_ref().ok().map(|e| e.residual),
        speed_error: speed.as_ref().err().map(|e| e.to_string()),
        verdict: format!("{:?}", verdict.verdict),
        final_probe_min: probe.iter().map(|&k| final_snap.values[k]).fold(f64::INFINITY, f64::min),
        final_far_max: (!far.is_empty()).then(|| far.iter().map(|&k| final_snap.values[k]).fold(-f64::INFINITY, f64::max)),
        final_stationarity: if outcome.stop == StopReason::Stationary { outcome.stationarity } else { final_snap.stationarity() },
        min_ut_band: min_ut_band(&snaps, 0.1, 0.9).ok(),
        branch_fits,
        recovery,
        wall_seconds: clock.elapsed().as_secs_f64(),
        speed: speed.ok(),
        interfaces: log.out,
    };
    if let Some(dir) = out.out {
        write_outputs(&report, &grid, &snaps, &dir.join(&sc.name), out.snapshot_format)?;
    }
    Ok(report)
}

fn write_outputs(report: &RunReport, grid: &Arc<MaskedGrid>, snaps: &[Snapshot], dir: &Path, fmt: SnapshotFormat) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.txt"), report.to_text())?;
    std::fs::write(dir.join("speeds.csv"), report.speeds_csv())?;
    std::fs::write(dir.join("interfaces.csv"), report.interfaces_csv(grid))?;
    if fmt != SnapshotFormat::None {
        let sd = dir.join("snapshots");
        std::fs::create_dir_all(&sd)?;
        for (i, s) in snaps.iter().enumerate() {
            let f = Field { grid: grid.clone(), values: s.values.clone(), time: s.time };
            match fmt {
                SnapshotFormat::Text => std::fs::write(sd.join(format!("snap_{i:04}.txt")), f.to_text())?,
                SnapshotFormat::Binary => std::fs::write(sd.join(format!("snap_{i:04}.bin")), f.to_bytes())?,
                SnapshotFormat::None => {}
            }
        }
    }
    Ok(())
}

const FIXTURES: [(&str, &str); 8] = [
    ("freeplane_planar", include_str!("../scenarios/freeplane_planar.json")),
    ("straight_cylinder", include_str!("../scenarios/straight_cylinder.json")),
    ("bilateral_narrowing", include_str!("../scenarios/bilateral_narrowing.json")),
    ("cylinder_block", include_str!("../scenarios/cylinder_block.json")),
    ("exterior_disk", include_str!("../scenarios/exterior_disk.json")),
    ("exterior_dumbbell", include_str!("../scenarios/exterior_dumbbell.json")),
    ("branched_3", include_str!("../scenarios/branched_3.json")),
    ("branched_5", include_str!("../scenarios/branched_5.json")),
];

pub fn scenario_library() -> Vec<Scenario> {
    FIXTURES.iter().map(|(_, text)| Scenario::from_json(text).expect("bundled fixture parses")).collect()
}

pub fn fixture(name: &str) -> Result<Scenario, ScenarioError> {
    FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_json(text).expect("bundled fixture parses"))
        .ok_or_else(|| ScenarioError::UnknownFixture(name.into()))
}
