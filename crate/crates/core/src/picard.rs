//! Picard iteration on the mild formulation.
//!
//! Each iterate evaluates the four-term mild form
//!
//! ```text
//! w(t, x) = ∫ K(t, x, y) v0(y) dy
//!         ± ∫∫ ∂y K(t - s, x, y) h_M(s) T_M(v_prev)(s, y) dy ds
//!         + ∫∫ K(t - s, x, y) f(y, v_prev) dy ds
//!         + ∫∫ K(t - s, x, y) σ(y, v_prev) W(dy, ds)
//! ```
//!
//! by cell quadrature (exact `erf` cell integrals in `y`, midpoint rule in
//! `s`, so the kernel is never evaluated at `t - s = 0`), then adds the
//! solution of the obstacle problem with obstacle `-w`.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{f_mr, BoundaryFunctional};
use crate::coefficients::ModelCoefficients;
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::heat_kernel::{cell_integral, default_images, kernel_unchecked, KernelKind};
use crate::noise::{NoiseField, NoisePair};
use crate::obstacle::ObstacleSolver;
use crate::spde::{run_relative_frame, CoupledState, RunOptions, SpdeConfig};

/// Increments below this are rounding noise.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Upper bound on the number of stored kernel-table entries (three tables).
const MAX_TABLE_ENTRIES: usize = 60_000_000;

/// Kernel tables for one grid, shared by every iterate.
pub struct MildSolver {
    grid: GridSpec,
    kind: KernelKind,
    lap_scale: f64,
    /// `[lag][j][k]`: cell integral of `K((lag + 1/2) dt)` over cell `k`.
    conv: Vec<f64>,
    /// `[lag][j][k]`: cell integral of `∂y K((lag + 1/2) dt)` over cell `k`.
    adv: Vec<f64>,
    /// `[i - 1][j][k]`: cell integral of `K(i dt)`.
    init: Vec<f64>,
}

impl MildSolver {
    pub fn new(grid: GridSpec, lap_scale: f64) -> Result<Self> {
        if !(lap_scale > 0.0) {
            return Err(Error::Config("lap_scale must be positive".into()));
        }
        let n = grid.nodes();
        let entries = 3 * grid.nt * n * n;
        if entries > MAX_TABLE_ENTRIES {
            return Err(Error::Config(format!(
                "grid too large for the mild-form tables ({entries} entries, limit {MAX_TABLE_ENTRIES})"
            )));
        }
        let kind = if grid.domain.is_half_line() { KernelKind::HalfLine } else { KernelKind::Compact };
        let length = grid.length();
        let cells: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let y = grid.x(k);
                ((y - 0.5 * grid.dx).max(0.0), (y + 0.5 * grid.dx).min(length))
            })
            .collect();
        let block = n * n;
        let fill = |tau: f64, conv: &mut [f64], adv: Option<&mut [f64]>| {
            let t = lap_scale * tau;
            let images = default_images(t);
            for j in 0..n {
                let x = grid.x(j);
                for (k, &(lo, hi)) in cells.iter().enumerate() {
                    conv[j * n + k] = cell_integral(kind, t, x, lo, hi, images);
                }
            }
            if let Some(adv) = adv {
                for j in 0..n {
                    let x = grid.x(j);
                    for (k, &(lo, hi)) in cells.iter().enumerate() {
                        adv[j * n + k] =
                            kernel_unchecked(kind, t, x, hi, images) - kernel_unchecked(kind, t, x, lo, images);
                    }
                }
            }
        };
        let mut conv = vec![0.0; grid.nt * block];
        let mut adv = vec![0.0; grid.nt * block];
        let mut init = vec![0.0; grid.nt * block];
        conv.par_chunks_mut(block).zip(adv.par_chunks_mut(block)).enumerate().for_each(|(lag, (c, a))| {
            fill((lag as f64 + 0.5) * grid.dt, c, Some(a));
        });
        init.par_chunks_mut(block).enumerate().for_each(|(i, c)| {
            fill((i + 1) as f64 * grid.dt, c, None);
        });
        Ok(Self { grid, kind, lap_scale, conv, adv, init })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn lap_scale(&self) -> f64 {
        self.lap_scale
    }

    /// Mild form of one side. `speed[m]` is `h_M` at level `m` of the previous
    /// iterate; `side` 0 transports with `-h ∂x`, side 1 with `+h ∂x`.
    pub fn solve_side(
        &self,
        side: usize,
        v_prev: &Field,
        speed: &[f64],
        coeffs: &ModelCoefficients,
        m: f64,
        xi: &NoiseField,
    ) -> Result<Field> {
        let g = self.grid;
        if v_prev.grid != g || xi.grid != g {
            return Err(Error::GridMismatch);
        }
        if speed.len() < g.nt {
            return Err(Error::DimensionMismatch { expected: g.nt, got: speed.len() });
        }
        let n = g.nodes();
        let block = n * n;
        let f = coeffs.drift(side);
        let sigma = coeffs.volatility(side);
        let sign = if side == 0 { 1.0 } else { -1.0 };

        // sources per time cell, already multiplied by dt
        let mut source = Array2::<f64>::zeros((g.nt, n));
        let mut transport = Array2::<f64>::zeros((g.nt, n));
        for mlev in 0..g.nt {
            let v = v_prev.row(mlev);
            let v = v.as_slice().expect("standard layout");
            for k in 0..n {
                let y = g.x(k);
                source[[mlev, k]] = g.dt * (f.eval(y, v[k]) + sigma.eval(y, v[k]) * xi.xi[[mlev, k]]);
            }
            let c = sign * speed[mlev];
            if c != 0.0 {
                let capped = truncate(v, &g, m);
                for k in 0..n {
                    transport[[mlev, k]] = g.dt * c * capped[k];
                }
            }
        }
        let v0 = v_prev.row(0).to_vec();
        let source = source.as_slice().expect("standard layout");
        let transport = transport.as_slice().expect("standard layout");

        let mut out = Array2::<f64>::zeros((g.levels(), n));
        out.row_mut(0).assign(&v_prev.row(0));
        out.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(n)
            .enumerate()
            .skip(1)
            .for_each(|(i, row)| {
                let init = &self.init[(i - 1) * block..i * block];
                for j in 0..n {
                    row[j] = dot(&init[j * n..(j + 1) * n], &v0);
                }
                for mlev in 0..i {
                    let lag = i - 1 - mlev;
                    let conv = &self.conv[lag * block..(lag + 1) * block];
                    let adv = &self.adv[lag * block..(lag + 1) * block];
                    let s = &source[mlev * n..(mlev + 1) * n];
                    let a = &transport[mlev * n..(mlev + 1) * n];
                    for j in 0..n {
                        row[j] += dot(&conv[j * n..(j + 1) * n], s) + dot(&adv[j * n..(j + 1) * n], a);
                    }
                }
            });
        let w = Field { grid: g, values: out };
        if !w.is_finite() {
            return Err(Error::NonFinite("mild-form iterate".into()));
        }
        Ok(w)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn truncate(v: &[f64], grid: &GridSpec, m: f64) -> Vec<f64> {
    if grid.domain.is_half_line() {
        f_mr(v, grid, m, grid.weight())
    } else {
        v.iter().map(|x| x.min(m)).collect()
    }
}

/// `h_M` along every level of a pair of fields.
fn speeds(v1: &Field, v2: &Field, boundary: &BoundaryFunctional) -> Result<Vec<f64>> {
    let g = v1.grid;
    (0..g.levels())
        .map(|i| {
            let a = v1.row(i);
            let b = v2.row(i);
            boundary.eval(a.as_slice().expect("standard layout"), b.as_slice().expect("standard layout"), &g)
        })
        .collect()
}

/// One evaluation of the mild form for both sides (builds fresh kernel tables).
pub fn mild_solve_w(
    v1_prev: &Field,
    v2_prev: &Field,
    coeffs: &ModelCoefficients,
    boundary: &BoundaryFunctional,
    m: f64,
    noise: &NoisePair,
    grid: GridSpec,
) -> Result<(Field, Field)> {
    let solver = MildSolver::new(grid, 1.0)?;
    let boundary = boundary.clone().with_truncation(m);
    let c = speeds(v1_prev, v2_prev, &boundary)?;
    Ok((
        solver.solve_side(0, v1_prev, &c, coeffs, m, &noise.bid)?,
        solver.solve_side(1, v2_prev, &c, coeffs, m, &noise.ask)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub n_iters: usize,
    /// `d_n` at or below this counts as converged.
    pub tol: f64,
    pub lap_scale: f64,
    /// Stop as soon as `d_n <= tol` instead of running all `n_iters`.
    pub stop_early: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { n_iters: 12, tol: 1e-4, lap_scale: 1.0, stop_early: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub schema: u32,
    /// `d[n - 1] = ||v1_n - v1_{n-1}|| + ||v2_n - v2_{n-1}||`.
    pub d: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub final_gap_vs_direct: Option<f64>,
}

impl IterationReport {
    /// Successive ratios `d_{n+1} / d_n`.
    pub fn ratios(&self) -> Vec<f64> {
        self.d.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Largest `d_{n+1} / d_n` over `n >= from`, ignoring pairs where `d_n` has
    /// already reached the round-off floor (ratios of rounding noise carry no
    /// information about contraction).
    pub fn worst_ratio(&self, from: usize, floor: f64) -> f64 {
        self.d
            .windows(2)
            .enumerate()
            .filter(|(i, w)| i + 1 >= from && w[0] > floor)
            .map(|(_, w)| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub report: IterationReport,
    pub v1: Field,
    pub v2: Field,
}

fn field_norm(f: &Field) -> f64 {
    if f.grid.domain.is_half_line() {
        f.weighted_sup_norm(f.grid.weight())
    } else {
        f.sup_norm()
    }
}

fn constant_in_time(grid: GridSpec, v0: &[f64]) -> Result<Field> {
    grid.check_profile(v0.len())?;
    if v0.iter().any(|v| !(*v >= 0.0)) || v0[0] != 0.0 || v0[grid.nx] != 0.0 {
        return Err(Error::Config("initial profiles must be nonnegative and vanish at Dirichlet nodes".into()));
    }
    let mut values = Array2::zeros((grid.levels(), grid.nodes()));
    for mut row in values.rows_mut() {
        row.as_slice_mut().expect("standard layout").copy_from_slice(v0);
    }
    Ok(Field { grid, values })
}

/// Picard scheme started from the initial data held constant in time. The same
/// noise drives every iterate.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate(
    v1_0: &[f64],
    v2_0: &[f64],
    coeffs: &ModelCoefficients,
    boundary: &BoundaryFunctional,
    m: f64,
    noise: &NoisePair,
    grid: GridSpec,
    opts: PicardOptions,
) -> Result<PicardOutcome> {
    if opts.n_iters < 2 {
        return Err(Error::Config(format!("n_iters must be at least 2, got {}", opts.n_iters)));
    }
    if !(m > 0.0) {
        return Err(Error::Config("truncation M must be positive".into()));
    }
    if noise.bid.grid != grid || noise.ask.grid != grid {
        return Err(Error::GridMismatch);
    }
    coeffs.validate()?;
    boundary.validate()?;
    let limit = 0.5 * grid.dx * grid.dx;
    if opts.lap_scale * grid.dt > limit {
        return Err(Error::CflViolation { dt: opts.lap_scale * grid.dt, limit });
    }
    let boundary = boundary.clone().with_truncation(m);
    let solver = MildSolver::new(grid, opts.lap_scale)?;
    let obstacle = ObstacleSolver::new(grid).with_lap_scale(opts.lap_scale);

    let mut v1 = constant_in_time(grid, v1_0)?;
    let mut v2 = constant_in_time(grid, v2_0)?;
    let mut d = Vec::with_capacity(opts.n_iters);
    for _ in 0..opts.n_iters {
        let c = speeds(&v1, &v2, &boundary)?;
        let mut next = Vec::with_capacity(2);
        for (side, (prev, xi)) in [(&v1, &noise.bid), (&v2, &noise.ask)].into_iter().enumerate() {
            let w = solver.solve_side(side, prev, &c, coeffs, m, xi)?;
            let neg = Field { grid, values: w.values.mapv(|x| -x) };
            let z = obstacle.solve_projected(&neg)?.z;
            // w + z is nonnegative up to rounding; clamp so the iterate is exactly admissible
            let mut v = Field { grid, values: &w.values + &z.values };
            v.values.mapv_inplace(|x| x.max(0.0));
            for mut row in v.values.rows_mut() {
                row[0] = 0.0;
                row[grid.nx] = 0.0;
            }
            next.push(v);
        }
        let n2 = next.pop().expect("two sides");
        let n1 = next.pop().expect("two sides");
        let dn = field_norm(&n1.sub(&v1)?) + field_norm(&n2.sub(&v2)?);
        if !dn.is_finite() {
            return Err(Error::NonFinite("Picard increment".into()));
        }
        d.push(dn);
        v1 = n1;
        v2 = n2;
        if opts.stop_early && dn <= opts.tol {
            break;
        }
    }
    let converged = d.last().is_some_and(|&x| x <= opts.tol);
    let report = IterationReport { schema: 1, iters: d.len(), d, converged, final_gap_vs_direct: None };
    Ok(PicardOutcome { report, v1, v2 })
}

/// Runs the forward-Euler scheme with the same noise and records the sup-norm
/// gap (over both sides and all levels) in the report.
pub fn compare_with_direct(
    outcome: &mut PicardOutcome,
    coeffs: &ModelCoefficients,
    boundary: &BoundaryFunctional,
    m: f64,
    noise: &NoisePair,
    lap_scale: f64,
) -> Result<f64> {
    let grid = outcome.v1.grid;
    let initial = CoupledState::new(outcome.v1.row(0).to_vec(), outcome.v2.row(0).to_vec(), 0.0, &grid)?;
    let cfg = SpdeConfig { m, m_max: f64::MAX, lap_scale };
    let traj = run_relative_frame(
        initial,
        coeffs,
        &boundary.clone().with_truncation(m),
        cfg,
        grid,
        noise,
        RunOptions { record_stride: 1, profile_stride: Some(1) },
    )?;
    let mut gap = 0.0f64;
    for (i, snap) in traj.profiles.iter().enumerate() {
        for j in 0..grid.nodes() {
            gap = gap.max((snap.v1[j] - outcome.v1.at(i, j)).abs());
            gap = gap.max((snap.v2[j] - outcome.v2.at(i, j)).abs());
        }
    }
    outcome.report.final_gap_vs_direct = Some(gap);
    Ok(gap)
}
