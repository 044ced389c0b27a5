//! Forward-Euler integration of the truncated reflected system in the
//! relative frame.
//!
//! One step: explicit Laplacian, first-order upwind advection of the
//! truncated profile, drift, and the noise increment `sigma * xi * dt`
//! (std `sigma * sqrt(dt / dx)`); then projection onto `v >= 0`, which
//! realizes the reflection measure; then `p' = h_M(v1, v2)` and
//! `p += dt * p'`.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::boundary::{advance_p, f_mr, BoundaryFunctional};
use crate::coefficients::ModelCoefficients;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::noise::{NoiseSource, SeededNoise, STREAM_ASK, STREAM_BID};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdeConfig {
    /// Truncation level `M` of the advection term and of `h`.
    pub m: f64,
    /// Blow-up threshold on `||v1|| + ||v2||`.
    pub m_max: f64,
    /// Diffusion coefficient in front of the Laplacian.
    pub lap_scale: f64,
}

impl Default for SpdeConfig {
    fn default() -> Self {
        Self { m: 1e3, m_max: 1e6, lap_scale: 1.0 }
    }
}

impl SpdeConfig {
    pub fn validate(&self, grid: &GridSpec, boundary: &BoundaryFunctional) -> Result<()> {
        if !(self.m > 0.0) || !(self.m_max > 0.0) {
            return Err(Error::Config("truncation levels must be positive".into()));
        }
        if self.m > self.m_max {
            return Err(Error::Config(format!("truncation M = {} exceeds M_max = {}", self.m, self.m_max)));
        }
        if let Some(m) = boundary.truncation_m {
            if m != self.m {
                return Err(Error::Config(format!(
                    "boundary truncation {m} differs from the run truncation {}",
                    self.m
                )));
            }
        }
        if !(self.lap_scale > 0.0) {
            return Err(Error::Config("lap_scale must be positive".into()));
        }
        let limit = 0.5 * grid.dx * grid.dx;
        if self.lap_scale * grid.dt > limit {
            return Err(Error::CflViolation { dt: self.lap_scale * grid.dt, limit });
        }
        Ok(())
    }
}

/// Bid/ask profiles together with the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub p: f64,
    pub p_prime: f64,
    pub time: f64,
    pub step: usize,
    pub blown_up: bool,
    pub tau_estimate: Option<f64>,
}

impl CoupledState {
    /// Validated initial state: nonnegative profiles, zero at Dirichlet nodes.
    pub fn new(v1: Vec<f64>, v2: Vec<f64>, p: f64, grid: &GridSpec) -> Result<Self> {
        grid.check_profile(v1.len())?;
        grid.check_profile(v2.len())?;
        for v in [&v1, &v2] {
            if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::Config("initial profiles must be finite and nonnegative".into()));
            }
            if v[0] != 0.0 || v[grid.nx] != 0.0 {
                return Err(Error::Config("initial profiles must vanish at Dirichlet nodes".into()));
            }
        }
        Ok(Self { v1, v2, p, p_prime: 0.0, time: 0.0, step: 0, blown_up: false, tau_estimate: None })
    }

    pub fn zero(grid: &GridSpec, p: f64) -> Self {
        Self::new(vec![0.0; grid.nodes()], vec![0.0; grid.nodes()], p, grid).expect("zero state is valid")
    }

    pub fn profile(&self, side: usize) -> &[f64] {
        if side == 0 {
            &self.v1
        } else {
            &self.v2
        }
    }
}

/// Absolute price coordinate of relative position `x` on `side` (0 = bid, 1 = ask).
pub fn absolute_position(side: usize, p: f64, x: f64) -> f64 {
    if side == 0 {
        p - x
    } else {
        p + x
    }
}

/// `max_j e^{-r x_j} |u_j|`.
pub fn weighted_norm(profile: &[f64], grid: &GridSpec, r: f64) -> f64 {
    profile
        .iter()
        .enumerate()
        .map(|(j, v)| (-r * grid.x(j)).exp() * v.abs())
        .fold(0.0, f64::max)
}

/// Sup norm on the unit interval, weighted norm on the half-line.
pub fn profile_norm(profile: &[f64], grid: &GridSpec) -> f64 {
    if grid.domain.is_half_line() {
        weighted_norm(profile, grid, grid.weight())
    } else {
        profile.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Reusable stepping context holding scratch buffers and the last reflection masses.
pub struct Stepper<'a> {
    grid: GridSpec,
    coeffs: &'a ModelCoefficients,
    boundary: BoundaryFunctional,
    cfg: SpdeConfig,
    next: [Vec<f64>; 2],
    /// Reflection mass per node from the last step (value x space).
    pub eta: [Vec<f64>; 2],
}

impl<'a> Stepper<'a> {
    pub fn new(
        grid: GridSpec,
        coeffs: &'a ModelCoefficients,
        boundary: &BoundaryFunctional,
        cfg: SpdeConfig,
    ) -> Result<Self> {
        cfg.validate(&grid, boundary)?;
        coeffs.validate()?;
        boundary.validate()?;
        let boundary = boundary.clone().with_truncation(cfg.m);
        let n = grid.nodes();
        Ok(Self {
            grid,
            coeffs,
            boundary,
            cfg,
            next: [vec![0.0; n], vec![0.0; n]],
            eta: [vec![0.0; n], vec![0.0; n]],
        })
    }

    /// `h_M` of the given profiles.
    pub fn speed(&self, v1: &[f64], v2: &[f64]) -> Result<f64> {
        self.boundary.eval(v1, v2, &self.grid)
    }

    fn truncated(&self, v: &[f64]) -> Vec<f64> {
        if self.grid.domain.is_half_line() {
            f_mr(v, &self.grid, self.cfg.m, self.grid.weight())
        } else {
            v.iter().map(|x| x.min(self.cfg.m)).collect()
        }
    }

    pub fn norms(&self, state: &CoupledState) -> (f64, f64) {
        (profile_norm(&state.v1, &self.grid), profile_norm(&state.v2, &self.grid))
    }

    /// Advances `state` by one step with noise rows `xi1`, `xi2`.
    pub fn step(&mut self, state: &mut CoupledState, xi1: &[f64], xi2: &[f64]) -> Result<()> {
        if state.blown_up {
            return Err(Error::AlreadyBlownUp(state.tau_estimate.unwrap_or(state.time)));
        }
        let g = self.grid;
        let n = g.nodes();
        for xi in [xi1, xi2] {
            if xi.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: xi.len() });
            }
        }
        g.check_profile(state.v1.len())?;
        g.check_profile(state.v2.len())?;

        let c = self.speed(&state.v1, &state.v2)?;
        let courant = g.dt * c.abs();
        if courant > g.dx {
            return Err(Error::AdvectionCfl { step: state.step, courant });
        }
        let mu = self.cfg.lap_scale * g.dt / (g.dx * g.dx);
        let inv_dx = 1.0 / g.dx;

        for side in 0..2 {
            let v = state.profile(side);
            let xi = if side == 0 { xi1 } else { xi2 };
            // velocity of the transport term: -c dx(.) for v1, +c dx(.) for v2
            let a = if side == 0 { c } else { -c };
            let capped = if a != 0.0 { self.truncated(v) } else { Vec::new() };
            let f = self.coeffs.drift(side);
            let sigma = self.coeffs.volatility(side);
            let out = &mut self.next[side];
            let eta = &mut self.eta[side];
            out[0] = 0.0;
            out[n - 1] = 0.0;
            eta.fill(0.0);
            for j in 1..n - 1 {
                let x = g.x(j);
                let u = v[j];
                let lap = mu * (v[j - 1] - 2.0 * u + v[j + 1]);
                let adv = if a > 0.0 {
                    a * (capped[j] - capped[j - 1]) * inv_dx
                } else if a < 0.0 {
                    a * (capped[j + 1] - capped[j]) * inv_dx
                } else {
                    0.0
                };
                let mut w = u + lap + g.dt * (f.eval(x, u) - adv) + sigma.eval(x, u) * xi[j] * g.dt;
                if w < 0.0 {
                    eta[j] = -w * g.dx;
                    w = 0.0;
                }
                out[j] = w;
            }
        }

        let finite = self.next.iter().all(|v| v.iter().all(|x| x.is_finite()));
        state.step += 1;
        state.time = g.t(state.step);
        if !finite {
            state.blown_up = true;
            state.tau_estimate = Some(state.time);
            return Ok(());
        }
        std::mem::swap(&mut state.v1, &mut self.next[0]);
        std::mem::swap(&mut state.v2, &mut self.next[1]);
        state.p_prime = self.speed(&state.v1, &state.v2)?;
        state.p = advance_p(state.p, state.p_prime, g.dt);
        let (n1, n2) = self.norms(state);
        if n1 + n2 >= self.cfg.m_max || !state.p.is_finite() {
            state.blown_up = true;
            state.tau_estimate = Some(state.time);
        }
        Ok(())
    }
}

/// One reflected Euler step as a pure function of the state.
#[allow(clippy::too_many_arguments)]
pub fn step_reflected(
    state: &CoupledState,
    coeffs: &ModelCoefficients,
    boundary: &BoundaryFunctional,
    cfg: SpdeConfig,
    xi1: &[f64],
    xi2: &[f64],
    grid: GridSpec,
) -> Result<CoupledState> {
    let mut stepper = Stepper::new(grid, coeffs, boundary, cfg)?;
    let mut next = state.clone();
    stepper.step(&mut next, xi1, xi2)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub p: f64,
    pub p_prime: f64,
    pub norm1: f64,
    pub norm2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Store a step record every `record_stride` steps (the last step is always stored).
    pub record_stride: usize,
    /// Store full profiles every `profile_stride` steps.
    pub profile_stride: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_stride: 1, profile_stride: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub records: Vec<StepRecord>,
    pub profiles: Vec<Snapshot>,
    pub final_state: CoupledState,
}

impl Trajectory {
    pub fn blown_up(&self) -> bool {
        self.final_state.blown_up
    }

    pub fn tau_estimate(&self) -> Option<f64> {
        self.final_state.tau_estimate
    }

    pub fn p_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p).collect()
    }

    pub fn p_prime_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p_prime).collect()
    }

    /// Stored profiles of one side as a `(snapshot, node)` matrix.
    pub fn profile_matrix(&self, side: usize) -> Array2<f64> {
        let n = self.grid.nodes();
        let mut out = Array2::zeros((self.profiles.len(), n));
        for (mut row, s) in out.rows_mut().into_iter().zip(&self.profiles) {
            let v = if side == 0 { &s.v1 } else { &s.v2 };
            row.as_slice_mut().expect("standard layout").copy_from_slice(v);
        }
        out
    }

    /// CSV with columns `step,t,p,p_prime,norm1,norm2`, preceded by `header` comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "t", "p", "p_prime", "norm1", "norm2"])?;
        for r in &self.records {
            w.write_record(&[
                r.step.to_string(),
                r.t.to_string(),
                r.p.to_string(),
                r.p_prime.to_string(),
                r.norm1.to_string(),
                r.norm2.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long-format profile dump `t,x,v1,v2`.
    pub fn write_profiles_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "v1", "v2"])?;
        for s in &self.profiles {
            for j in 0..self.grid.nodes() {
                w.write_record(&[
                    s.t.to_string(),
                    self.grid.x(j).to_string(),
                    s.v1[j].to_string(),
                    s.v2[j].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the system to the grid horizon (or to blow-up) with the given noise.
pub fn run_relative_frame(
    initial: CoupledState,
    coeffs: &ModelCoefficients,
    boundary: &BoundaryFunctional,
    cfg: SpdeConfig,
    grid: GridSpec,
    noise: &dyn NoiseSource,
    opts: RunOptions,
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(grid, coeffs, boundary, cfg)?;
    let mut state = initial;
    grid.check_profile(state.v1.len())?;
    grid.check_profile(state.v2.len())?;
    state.p_prime = stepper.speed(&state.v1, &state.v2)?;
    let record_stride = opts.record_stride.max(1);

    let record = |s: &CoupledState, st: &Stepper| {
        let (norm1, norm2) = st.norms(s);
        StepRecord { step: s.step, t: s.time, p: s.p, p_prime: s.p_prime, norm1, norm2 }
    };
    let snapshot = |s: &CoupledState| Snapshot { step: s.step, t: s.time, v1: s.v1.clone(), v2: s.v2.clone() };

    let mut records = vec![record(&state, &stepper)];
    let mut profiles = Vec::new();
    if opts.profile_stride.is_some() {
        profiles.push(snapshot(&state));
    }
    let mut xi1 = vec![0.0; grid.nodes()];
    let mut xi2 = vec![0.0; grid.nodes()];
    {
        let (n1, n2) = stepper.norms(&state);
        if n1 + n2 >= cfg.m_max {
            state.blown_up = true;
            state.tau_estimate = Some(0.0);
        }
    }
    while state.step < grid.nt && !state.blown_up {
        noise.fill_row(STREAM_BID, state.step, &mut xi1);
        noise.fill_row(STREAM_ASK, state.step, &mut xi2);
        stepper.step(&mut state, &xi1, &xi2)?;
        let last = state.step == grid.nt || state.blown_up;
        if state.step % record_stride == 0 || last {
            records.push(record(&state, &stepper));
        }
        if let Some(stride) = opts.profile_stride {
            if state.step % stride.max(1) == 0 || last {
                profiles.push(snapshot(&state));
            }
        }
    }
    Ok(Trajectory { grid, records, profiles, final_state: state })
}

/// [`run_relative_frame`] driven by the seeded noise pair `(seed, 0)`, `(seed, 1)`.
pub fn run_seeded(
    initial: CoupledState,
    coeffs: &ModelCoefficients,
    boundary: &BoundaryFunctional,
    cfg: SpdeConfig,
    grid: GridSpec,
    seed: u64,
    opts: RunOptions,
) -> Result<Trajectory> {
    run_relative_frame(initial, coeffs, boundary, cfg, grid, &SeededNoise::new(grid, seed), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Coefficient;
    use crate::noise::ZeroNoise;
    use std::f64::consts::PI;

    fn sine_state(grid: &GridSpec) -> CoupledState {
        let mut v: Vec<f64> = grid.xs().iter().map(|x| (PI * x).sin()).collect();
        v[0] = 0.0;
        v[grid.nx] = 0.0;
        CoupledState::new(v.clone(), v, 0.0, grid).unwrap()
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let g = GridSpec::compact(16, 0.01, 200).unwrap();
        let c = ModelCoefficients::zero();
        let s = CoupledState::zero(&g, 1.0);
        let zeros = vec![0.0; g.nodes()];
        let next = step_reflected(&s, &c, &BoundaryFunctional::zero(), SpdeConfig::default(), &zeros, &zeros, g).unwrap();
        assert_eq!(next.v1, s.v1);
        assert_eq!(next.v2, s.v2);
        assert_eq!(next.p, 1.0);
        assert_eq!(next.step, 1);
        assert!(next.time > 0.0);
    }

    #[test]
    fn heat_eigenfunction_decay() {
        let g = GridSpec::compact(64, 0.05, 4096).unwrap();
        let traj = run_relative_frame(
            sine_state(&g),
            &ModelCoefficients::zero(),
            &BoundaryFunctional::zero(),
            SpdeConfig::default(),
            g,
            &ZeroNoise,
            RunOptions::default(),
        )
        .unwrap();
        let decay = (-PI * PI * 0.05).exp();
        let err = traj
            .final_state
            .v1
            .iter()
            .enumerate()
            .map(|(j, v)| (v - decay * (PI * g.x(j)).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "err {err}");
    }

    #[test]
    fn constant_source_reaches_parabola() {
        let g = GridSpec::compact(64, 1.0, 40_000).unwrap();
        let coeffs = ModelCoefficients::symmetric(Coefficient::constant(1.0), Coefficient::Zero);
        let traj = run_relative_frame(
            CoupledState::zero(&g, 0.0),
            &coeffs,
            &BoundaryFunctional::zero(),
            SpdeConfig::default(),
            g,
            &ZeroNoise,
            RunOptions { record_stride: 1000, profile_stride: None },
        )
        .unwrap();
        let err = traj
            .final_state
            .v1
            .iter()
            .enumerate()
            .map(|(j, v)| (v - g.x(j) * (1.0 - g.x(j)) / 2.0).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2e-3, "err {err}");
    }

    #[test]
    fn weighted_norm_cases() {
        let g = GridSpec::half_line(4.0, 1.0, 256, 1e-5, 1).unwrap();
        assert_eq!(weighted_norm(&vec![0.0; 257], &g, 1.0), 0.0);
        let e: Vec<f64> = g.xs().iter().map(|x| x.exp()).collect();
        assert!((weighted_norm(&e, &g, 1.0) - 1.0).abs() < 1e-12);
        let lin = g.xs();
        assert!((weighted_norm(&lin, &g, 1.0) - (-1.0f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = GridSpec::compact(8, 0.01, 200).unwrap();
        assert!(CoupledState::new(vec![0.0, 1.0, 0.0], vec![0.0; 9], 0.0, &g).is_err());
        let mut v = vec![0.0; 9];
        v[3] = -1.0;
        assert!(CoupledState::new(v, vec![0.0; 9], 0.0, &g).is_err());
        let c = ModelCoefficients::zero();
        let s = CoupledState::zero(&g, 0.0);
        let short = vec![0.0; 4];
        let full = vec![0.0; 9];
        assert!(matches!(
            step_reflected(&s, &c, &BoundaryFunctional::zero(), SpdeConfig::default(), &short, &full, g),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut blown = s.clone();
        blown.blown_up = true;
        assert!(matches!(
            step_reflected(&blown, &c, &BoundaryFunctional::zero(), SpdeConfig::default(), &full, &full, g),
            Err(Error::AlreadyBlownUp(_))
        ));
        let bad = SpdeConfig { m: 10.0, m_max: 5.0, lap_scale: 1.0 };
        assert!(matches!(
            run_seeded(s.clone(), &c, &BoundaryFunctional::zero(), bad, g, 1, RunOptions::default()),
            Err(Error::Config(_))
        ));
        let mismatch = BoundaryFunctional::zero().with_truncation(3.0);
        assert!(matches!(
            run_seeded(s, &c, &mismatch, SpdeConfig::default(), g, 1, RunOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reflected_noise_run_stays_nonnegative() {
        let g = GridSpec::compact(32, 0.05, 4096).unwrap();
        let coeffs = ModelCoefficients::symmetric(Coefficient::Zero, Coefficient::constant(1.0));
        let traj = run_seeded(
            CoupledState::zero(&g, 0.0),
            &coeffs,
            &BoundaryFunctional::zero(),
            SpdeConfig::default(),
            g,
            5,
            RunOptions { record_stride: 1, profile_stride: Some(1) },
        )
        .unwrap();
        for s in &traj.profiles {
            assert!(s.v1.iter().chain(&s.v2).all(|&v| v >= 0.0));
            assert_eq!((s.v1[0], s.v1[g.nx], s.v2[0], s.v2[g.nx]), (0.0, 0.0, 0.0, 0.0));
        }
        assert!(traj.profiles.iter().any(|s| s.v1.iter().any(|&v| v > 0.0)));
    }

    #[test]
    fn maximum_principle_without_sources() {
        let g = GridSpec::compact(32, 0.05, 4096).unwrap();
        let traj = run_relative_frame(
            sine_state(&g),
            &ModelCoefficients::symmetric(Coefficient::constant(-0.5), Coefficient::Zero),
            &BoundaryFunctional::zero(),
            SpdeConfig::default(),
            g,
            &ZeroNoise,
            RunOptions::default(),
        )
        .unwrap();
        for w in traj.records.windows(2) {
            assert!(w[1].norm1 <= w[0].norm1);
        }
    }

    #[test]
    fn deterministic_runs() {
        let g = GridSpec::compact(16, 0.02, 1000).unwrap();
        let coeffs = ModelCoefficients::symmetric(Coefficient::constant(0.5), Coefficient::constant(1.0));
        let h = BoundaryFunctional::exp_imbalance(1.0, 10.0).with_clamp(5.0);
        let run = || {
            run_seeded(CoupledState::zero(&g, 0.0), &coeffs, &h, SpdeConfig::default(), g, 77, RunOptions::default())
                .unwrap()
        };
        let (a, b) = (run(), run());
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca, &[]).unwrap();
        b.write_csv(&mut cb, &[]).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn blow_up_is_flagged() {
        let g = GridSpec::compact(16, 1.0, 1000).unwrap();
        let coeffs = ModelCoefficients::symmetric(Coefficient::Affine { intercept: 10.0, slope: 20.0 }, Coefficient::Zero);
        let cfg = SpdeConfig { m: 5.0, m_max: 10.0, lap_scale: 1.0 };
        let t = run_relative_frame(
            CoupledState::zero(&g, 0.0),
            &coeffs,
            &BoundaryFunctional::zero(),
            cfg,
            g,
            &ZeroNoise,
            RunOptions::default(),
        )
        .unwrap();
        assert!(t.blown_up());
        let tau = t.tau_estimate().unwrap();
        assert!(tau > 0.0 && tau < 1.0);
        assert_eq!(t.records.last().unwrap().t, tau);
    }

    #[test]
    fn absolute_coordinates() {
        assert_eq!(absolute_position(0, 100.0, 0.25), 99.75);
        assert_eq!(absolute_position(1, 100.0, 0.25), 100.25);
    }
}
