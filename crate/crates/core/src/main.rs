use clap::{Args, Parser, Subcommand, ValueEnum};
use frontlab::certificates::{certificate_suite, Sampling};
use frontlab::reaction::{Reaction, ReactionSpec};
use frontlab::scenario::{fixture, run_scenario, OutputOptions, Scenario, ScenarioError, SnapshotFormat};
use frontlab::stationary::{liouville_fixture, liouville_scaling_test, solve_bump, LiouvilleOptions};
use frontlab::wave::solve_profile;
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "frontlab", version, about = "Bistable reaction-diffusion fronts on masked 2D grids")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ReactionArgs {
    /// Cubic threshold theta in f(u) = u (1 - u) (u - theta).
    #[arg(long, default_value_t = 0.25)]
    theta: f64,
    /// Comma-separated samples of f on Chebyshev-Lobatto nodes (overrides --theta).
    #[arg(long, value_delimiter = ',')]
    table: Option<Vec<f64>>,
}

impl ReactionArgs {
    fn reaction(&self) -> Result<Reaction, String> {
        let spec = match &self.table {
            Some(values) => ReactionSpec::Table { values: values.clone() },
            None => ReactionSpec::Cubic { theta: self.theta },
        };
        Reaction::from_spec(&spec).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SnapFmt {
    Text,
    Binary,
    None,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario files or bundled fixture names.
    #[arg(required = true)]
    configs: Vec<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    snapshot_every: Option<f64>,
    #[arg(long, value_enum, default_value_t = SnapFmt::Text)]
    snapshot_format: SnapFmt,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Planar front speed and profile constants.
    Wavespeed {
        #[command(flatten)]
        reaction: ReactionArgs,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run scenarios and write out/<name>/{report.txt, speeds.csv, interfaces.csv, snapshots/}.
    Simulate(RunArgs),
    /// Run scenarios and print the global mean speed pairs as CSV.
    Meanspeed(RunArgs),
    /// Pointwise residual checks of the sub- and super-solutions.
    Certify {
        /// One of 2.2, 2.4, 4.1, 5.1, 5.3, or all.
        #[arg(long, default_value = "all")]
        lemma: String,
        /// Speed margin; defaults to c_f / 2.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Space dimension N of the radial constructions.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Also run the deliberately broken parameter sets.
        #[arg(long)]
        broken: bool,
        #[command(flatten)]
        reaction: ReactionArgs,
    },
    /// Radial bumps and the dilation test.
    Stationary {
        #[arg(long = "bump-R")]
        bump_r: Option<f64>,
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        #[arg(long)]
        liouville: bool,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        scales: Vec<f64>,
        /// disk or c_shape.
        #[arg(long, default_value = "c_shape")]
        obstacle: String,
        #[command(flatten)]
        reaction: ReactionArgs,
    },
    /// Blocking sweep over the neck half-width of the cylinder_block fixture.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,3")]
        widths: Vec<f64>,
        #[arg(long, default_value_t = 0.25)]
        theta: f64,
    },
}

fn load(config: &str) -> Result<Scenario, ScenarioError> {
    let p = Path::new(config);
    if p.exists() {
        Scenario::load(p)
    } else {
        fixture(config)
    }
}

fn prepared(args: &RunArgs) -> Result<Vec<Scenario>, String> {
    args.configs
        .iter()
        .map(|c| {
            let mut s = load(c).map_err(|e| format!("{c}: {e}"))?;
            if let Some(h) = args.h {
                s.h = h;
            }
            if let Some(t) = args.horizon {
                s.horizon = t;
            }
            if let Some(e) = args.snapshot_every {
                s.observers.snapshot_every = e;
            }
            if let Some(seed) = args.seed {
                s.seed = seed;
            }
            Ok(s)
        })
        .collect()
}

fn simulate(args: &RunArgs, speeds_only: bool) -> Result<bool, String> {
    let scenarios = prepared(args)?;
    let fmt = match args.snapshot_format {
        SnapFmt::Text => SnapshotFormat::Text,
        SnapFmt::Binary => SnapshotFormat::Binary,
        SnapFmt::None => SnapshotFormat::None,
    };
    let out = OutputOptions { out: (!speeds_only).then_some(args.out.as_path()), snapshot_format: fmt };
    let reports: Vec<_> = scenarios.par_iter().map(|s| (s.name.clone(), run_scenario(s, &out))).collect();
    let mut ok = true;
    for (name, r) in reports {
        match r {
            Ok(r) if speeds_only => {
                print!("{}", r.speeds_csv());
                match (r.gamma, r.speed_residual) {
                    (Some(g), Some(res)) => println!("gamma={g:.6} residual={res:.6}"),
                    _ => {
                        println!("gamma=none ({})", r.speed_error.as_deref().unwrap_or("no interfaces"));
                        ok = false;
                    }
                }
            }
            Ok(r) => println!("{}", r.to_text()),
            Err(e) => {
                eprintln!("{name}: {e}");
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn certify(lemma: &str, eps: Option<f64>, samples: usize, seed: u64, dim: usize, broken: bool, reaction: &ReactionArgs) -> Result<bool, String> {
    let prefix = match lemma {
        "2.2" => "radial sub",
        "2.4" => "radial super",
        "4.1" => "envelope",
        "5.1" => "branch sub",
        "5.3" => "center super",
        "all" => "",
        _ => return Err("--lemma must be one of 2.2, 2.4, 4.1, 5.1, 5.3, all".into()),
    };
    let r = reaction.reaction()?;
    let p = solve_profile(&r, 1e-10).map_err(|e| e.to_string())?;
    let eps = eps.unwrap_or(p.c_f / 2.0);
    let rows = certificate_suite(&r, &p, eps, 1.0, dim, Sampling { samples, seed }).map_err(|e| e.to_string())?;
    println!("c_f = {:.8}, eps = {eps:.6}, samples = {samples} (sampled check, not a proof)", p.c_f);
    let mut ok = true;
    for row in rows.iter().filter(|row| row.label.starts_with(prefix)) {
        if !row.expect_pass && !broken {
            continue;
        }
        let rep = &row.report;
        let as_expected = rep.passed() == row.expect_pass;
        ok &= as_expected;
        let tag = if row.expect_pass { "" } else { " (broken, expect FAIL)" };
        println!("{:<28} {}{tag}", row.label, rep.summary());
    }
    Ok(ok)
}

fn stationary(bump_r: Option<f64>, samples: usize, liouville: bool, scales: &[f64], obstacle: &str, reaction: &ReactionArgs) -> Result<bool, String> {
    let r = reaction.reaction()?;
    if let Some(radius) = bump_r {
        if radius <= 0.0 || samples < 256 {
            return Err("--bump-R must be positive and --samples at least 256".into());
        }
        let b = solve_bump(&r, radius, samples);
        println!("R={radius} peak={:.10} residual={:.3e}", b.peak, b.residual);
        println!("r,psi");
        for (i, v) in b.psi.iter().enumerate() {
            println!("{:.6},{v:.10}", i as f64 * b.dr);
        }
    }
    if liouville {
        let spec = liouville_fixture(obstacle).ok_or_else(|| format!("unknown obstacle {obstacle:?} (disk or c_shape)"))?;
        let mut scales = scales.to_vec();
        scales.sort_by(f64::total_cmp);
        let rep = liouville_scaling_test(&spec, &scales, &r, LiouvilleOptions::default()).map_err(|e| e.to_string())?;
        println!("scale,min_p,verdict");
        for s in &rep.results {
            println!("{},{:.6},{:?}", s.scale, s.min_p, s.verdict);
        }
        println!("smallest_passing={}", rep.smallest_passing.map_or("none".into(), |s| s.to_string()));
    }
    if bump_r.is_none() && !liouville {
        return Err("stationary needs --bump-R and/or --liouville".into());
    }
    Ok(true)
}

fn sweep(widths: &[f64], theta: f64) -> Result<bool, String> {
    let base = fixture("cylinder_block").map_err(|e| e.to_string())?;
    let runs: Vec<(f64, Result<_, ScenarioError>)> = widths
        .par_iter()
        .map(|&w| {
            let mut s = base.clone();
            s.name = format!("cylinder_block_w{w}");
            s.reaction = ReactionSpec::Cubic { theta };
            if let frontlab::geometry::Variant::Cylinder { half_width, .. } = &mut s.domain.variant {
                half_width[0][1] = w;
            }
            s.stop.min_above = Some(0.99);
            (w, run_scenario(&s, &OutputOptions::default()))
        })
        .collect();
    println!("neck_half_width,verdict,far_max,stationarity,end_time");
    let mut ok = true;
    for (w, r) in runs {
        match r {
            Ok(r) => println!("{w},{},{:.3e},{:.3e},{:.2}", r.verdict, r.final_far_max.unwrap_or(f64::NAN), r.final_stationarity, r.end_time),
            Err(e) => {
                println!("{w},error: {e},,,");
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("--jobs: {e}");
        }
    }
    let res = match &cli.cmd {
        Cmd::Wavespeed { reaction, tol } => reaction.reaction().and_then(|r| {
            let p = solve_profile(&r, *tol).map_err(|e| e.to_string())?;
            println!("c_f={:.10} bracket=[{:.10}, {:.10}] lambda={:.8} nu={:.8}", p.c_f, p.bracket.0, p.bracket.1, p.lambda, p.nu);
            if let Some(theta) = r.cubic_theta() {
                println!("closed_form={:.10}", frontlab::wave::cubic_exact_speed(theta));
            }
            Ok(true)
        }),
        Cmd::Simulate(a) => simulate(a, false),
        Cmd::Meanspeed(a) => simulate(a, true),
        Cmd::Certify { lemma, eps, samples, seed, dim, broken, reaction } => certify(lemma, *eps, *samples, *seed, *dim, *broken, reaction),
        Cmd::Stationary { bump_r, samples, liouville, scales, obstacle, reaction } => stationary(*bump_r, *samples, *liouville, scales, obstacle, reaction),
        Cmd::Sweep { widths, theta } => sweep(widths, *theta),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
