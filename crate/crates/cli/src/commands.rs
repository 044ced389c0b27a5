//! Subcommand bodies. Every artifact goes to a fixed file name inside the
//! configured output directory; CSVs open with `# config_sha256=... seed=...`
//! and JSON reports carry the same two values as fields.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;
use stefan_spde::heat_kernel::{verify_kernel_bounds, BoundReport, KernelBoundConfig};
use stefan_spde::lob::{
    fit_coefficients, parse_events, simulate_price as run_price, synthetic_stream, FitOptions, FitResult, InputFormat,
    ParseOptions, SyntheticSpec, TouchPrices,
};
use stefan_spde::obstacle::{random_smooth_obstacle, sine_obstacle, ObstacleSolver};
use stefan_spde::picard::{compare_with_direct, picard_iterate, IterationReport, PicardOptions};
use stefan_spde::regularity::{dyadic_lags, HolderEnsemble, HolderEstimate};
use stefan_spde::spde::{run_seeded, CoupledState, RunOptions};
use stefan_spde::{GridSpec, NoisePair};

use crate::config::{Config, ObstacleMethod, ObstacleShape, RunSection};
use crate::CliError;

pub struct Context {
    pub cfg: Config,
    pub grid: GridSpec,
    pub hash: String,
}

impl Context {
    pub fn new(cfg: Config) -> Result<Self, CliError> {
        let grid = cfg.grid.spec()?;
        cfg.coefficients.validate()?;
        cfg.boundary.validate()?;
        let hash = cfg.hash();
        std::fs::create_dir_all(&cfg.output.dir)
            .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", cfg.output.dir.display())))?;
        Ok(Self { cfg, grid, hash })
    }

    fn seed(&self) -> u64 {
        self.cfg.seed()
    }

    fn header(&self) -> Vec<String> {
        vec![format!("config_sha256={} seed={}", self.hash, self.seed())]
    }

    fn path(&self, name: &str) -> PathBuf {
        debug_assert!(!name.contains(['/', '\\']));
        self.cfg.output.dir.join(name)
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
        Ok((path, BufWriter::new(file)))
    }

    fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            config_sha256: &'a str,
            seed: u64,
            #[serde(flatten)]
            body: &'a T,
        }
        let (path, mut w) = self.create(name)?;
        let env = Envelope { config_sha256: &self.hash, seed: self.seed(), body };
        serde_json::to_writer_pretty(&mut w, &env).map_err(|e| CliError::Validation(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    fn initial_state(&self, run: &RunSection) -> Result<CoupledState, CliError> {
        let g = &self.grid;
        let length = g.length();
        let mut v: Vec<f64> =
            (0..g.nodes()).map(|j| run.initial_amplitude * (std::f64::consts::PI * g.x(j) / length).sin()).collect();
        v[0] = 0.0;
        v[g.nx] = 0.0;
        Ok(CoupledState::new(v.clone(), v, run.p0, g)?)
    }
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let run = ctx.cfg.simulate;
    let opts = RunOptions { record_stride: ctx.cfg.output.record_stride.max(1), profile_stride: ctx.cfg.output.profile_stride };
    let traj = run_seeded(
        ctx.initial_state(&run)?,
        &ctx.cfg.coefficients,
        &ctx.cfg.boundary,
        run.spde(),
        ctx.grid,
        ctx.seed(),
        opts,
    )?;
    let mut header = ctx.header();
    let tau = traj.tau_estimate().map_or("none".to_string(), |t| t.to_string());
    header.push(format!("blown_up={} tau_estimate={tau}", traj.blown_up()));
    let (path, mut w) = ctx.create("trajectory.csv")?;
    traj.write_csv(&mut w, &header)?;
    w.flush()?;
    println!("wrote {}", path.display());
    if opts.profile_stride.is_some() {
        let (path, mut w) = ctx.create("profiles.csv")?;
        traj.write_profiles_csv(&mut w, &header)?;
        w.flush()?;
        println!("wrote {}", path.display());
    }
    let s = &traj.final_state;
    println!("blown_up={} t={} p={} p_prime={}", traj.blown_up(), s.time, s.p, s.p_prime);
    Ok(())
}

pub fn obstacle(ctx: &Context) -> Result<(), CliError> {
    let sec = &ctx.cfg.obstacle;
    let v = match sec.shape {
        ObstacleShape::Sine => sine_obstacle(ctx.grid),
        ObstacleShape::Random => random_smooth_obstacle(ctx.grid, ctx.seed()),
    };
    let solver = ObstacleSolver::new(ctx.grid).with_lap_scale(sec.lap_scale);
    let sol = match sec.method {
        ObstacleMethod::Projected => solver.solve_projected(&v)?,
        ObstacleMethod::Penalized => solver.solve_penalized(&v, sec.epsilon)?,
    };
    let summary = format!(
        "complementarity={} eta_mass={} min_gap={}",
        sol.complementarity(),
        sol.eta_mass(),
        sol.min_gap()
    );
    let (path, mut w) = ctx.create("obstacle.csv")?;
    for line in ctx.header().iter().chain([&summary]) {
        writeln!(w, "# {line}")?;
    }
    sol.write_csv(&mut w)?;
    w.flush()?;
    println!("wrote {}", path.display());
    println!("{summary}");
    Ok(())
}

pub fn picard_check(ctx: &Context) -> Result<(), CliError> {
    let sec = &ctx.cfg.picard;
    let noise = NoisePair::sample(ctx.grid, ctx.seed());
    let init = ctx.initial_state(&ctx.cfg.simulate)?;
    let opts = PicardOptions { n_iters: sec.n_iters, tol: sec.tol, lap_scale: sec.lap_scale, stop_early: false };
    let coeffs = &ctx.cfg.coefficients;
    let boundary = &ctx.cfg.boundary;
    let mut outcome = picard_iterate(&init.v1, &init.v2, coeffs, boundary, sec.m, &noise, ctx.grid, opts)?;
    if sec.compare_direct {
        compare_with_direct(&mut outcome, coeffs, boundary, sec.m, &noise, sec.lap_scale)?;
    }
    let report: &IterationReport = &outcome.report;
    let path = ctx.write_json("picard_report.json", report)?;
    println!("wrote {}", path.display());
    println!(
        "iters={} converged={} d_last={:e} gap_vs_direct={:?}",
        report.iters,
        report.converged,
        report.d.last().copied().unwrap_or(f64::NAN),
        report.final_gap_vs_direct
    );
    Ok(())
}

#[derive(Serialize)]
struct HolderRow<'a> {
    series: &'static str,
    #[serde(flatten)]
    estimate: &'a HolderEstimate,
}

#[derive(Serialize)]
struct HolderReport<'a> {
    schema: u32,
    estimates: Vec<HolderRow<'a>>,
    blown_up_paths: usize,
}

pub fn holder(ctx: &Context) -> Result<(), CliError> {
    let sec = &ctx.cfg.holder;
    let ensemble = HolderEnsemble {
        grid: ctx.grid,
        coeffs: ctx.cfg.coefficients.clone(),
        boundary: ctx.cfg.boundary.clone(),
        spde: sec.run.spde(),
        seed: ctx.seed(),
        n_paths: sec.n_paths,
        q: sec.q,
        time_lags: dyadic_lags(sec.time_lags[0], sec.time_lags[1]),
        space_lags: dyadic_lags(sec.space_lags[0], sec.space_lags[1]),
        boundary_lags: sec.boundary_lags.map(|[a, b]| dyadic_lags(a, b)),
        margin: sec.margin,
    };
    let summary = ensemble.run()?;
    let mut estimates = vec![
        HolderRow { series: "profile", estimate: &summary.time },
        HolderRow { series: "profile", estimate: &summary.space },
    ];
    if let Some(b) = &summary.boundary {
        estimates.push(HolderRow { series: "boundary_speed", estimate: b });
    }
    for row in &estimates {
        let e = row.estimate;
        println!("{} {:?}: {:.4} +- {:.4}", row.series, e.axis, e.exponent, e.stderr);
    }
    let report = HolderReport { schema: 1, estimates, blown_up_paths: summary.blown_up_paths };
    let path = ctx.write_json("holder.json", &report)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct KernelReport {
    schema: u32,
    reports: Vec<BoundReport>,
}

pub fn kernel_check(ctx: &Context) -> Result<(), CliError> {
    let k = &ctx.cfg.kernel_check;
    let cfg = KernelBoundConfig::new(k.t_min, k.t_max, k.n_t, k.x_max, k.n_x, k.r)?;
    let reports = verify_kernel_bounds(&cfg)?;
    for r in &reports {
        println!("{}: scaled_sup={:.4} bounded={}", r.estimate_name, r.scaled_sup, r.bounded);
    }
    let path = ctx.write_json("kernel_check.json", &KernelReport { schema: 1, reports })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn open(path: &PathBuf) -> Result<BufReader<File>, CliError> {
    let f = File::open(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(BufReader::new(f))
}

pub fn fit_lob(ctx: &Context) -> Result<(), CliError> {
    let sec = &ctx.cfg.fit_lob;
    let stream = match (&sec.input, &sec.synthetic) {
        (Some(input), _) => {
            let touch = match (&sec.touch, sec.format) {
                (Some(t), _) => Some(TouchPrices::parse_csv(open(t)?)?),
                (None, InputFormat::LobsterMessage) => {
                    return Err(CliError::Validation("missing required field `fit_lob.touch`".into()))
                }
                (None, InputFormat::Normalized) => None,
            };
            let opts = ParseOptions { max_malformed: sec.max_malformed, horizon: sec.horizon };
            parse_events(open(input)?, sec.format, touch.as_ref(), opts)?
        }
        (None, Some(s)) => synthetic_stream(&SyntheticSpec {
            bins: s.bins.clone(),
            horizon: s.horizon,
            size: s.size,
            seed: ctx.seed(),
        })?,
        (None, None) => {
            return Err(CliError::Validation("missing required field `fit_lob.input` (or `fit_lob.synthetic`)".into()))
        }
    };
    let opts = FitOptions { n_bins: sec.n_bins, pool_sides: sec.pool_sides, interval: sec.interval, min_events: sec.min_events };
    let fit = fit_coefficients(&stream, opts)?;
    let mut header = ctx.header();
    header.push(format!(
        "events={} malformed={} out_of_window={} skipped={}",
        stream.events.len(),
        stream.malformed,
        stream.out_of_window,
        stream.skipped
    ));
    let (path, mut w) = ctx.create("fit_lob.csv")?;
    fit.write_csv(&mut w, &header)?;
    w.flush()?;
    println!("wrote {} ({} events, {} bins)", path.display(), stream.events.len(), fit.bins.len());
    Ok(())
}

pub fn simulate_price(ctx: &Context) -> Result<(), CliError> {
    let sec = &ctx.cfg.simulate_price;
    let fit_path = sec.fit.clone().unwrap_or_else(|| ctx.path("fit_lob.csv"));
    let fit = FitResult::read_csv(open(&fit_path)?)?;
    let series = run_price(&fit, &ctx.cfg.boundary, ctx.grid, ctx.seed(), sec.run.spde(), sec.run.p0)?;
    let mut header = ctx.header();
    header.push(format!("blown_up={}", series.blown_up));
    let (path, mut w) = ctx.create("price.csv")?;
    series.write_csv(&mut w, &header)?;
    w.flush()?;
    println!("wrote {}", path.display());
    println!("blown_up={} p_final={}", series.blown_up, series.p.last().copied().unwrap_or(sec.run.p0));
    Ok(())
}
