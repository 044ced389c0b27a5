//! Structure-function estimates of Hölder exponents.
//!
//! `S_q(l) = mean |v(. + l) - v(.)|^q` over dyadic lags; the exponent is the
//! least-squares slope of `log S_q` against `log l`, divided by `q`.

use ndarray::{ArrayView2, Axis as NdAxis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryFunctional;
use crate::coefficients::ModelCoefficients;
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::spde::{run_seeded, CoupledState, RunOptions, SpdeConfig};

/// Fewest increments accepted at the largest lag.
pub const MIN_INCREMENTS: usize = 100;
/// Default fraction trimmed at each end of a profile window.
pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Time,
    Space,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub axis: Axis,
    pub q: f64,
    pub exponent: f64,
    pub stderr: f64,
    /// Smallest and largest lag, in grid units.
    pub lag_range: (usize, usize),
    pub n_points: usize,
    pub n_paths: usize,
}

/// `[min, 2 min, 4 min, ..]` up to `max`.
pub fn dyadic_lags(min: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut l = min.max(1);
    while l <= max {
        out.push(l);
        l *= 2;
    }
    out
}

fn check_q(q: f64) -> Result<()> {
    if q == 1.0 || q == 2.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("moment order q must be 1 or 2, got {q}")))
    }
}

fn check_lags(lags: &[usize]) -> Result<()> {
    if lags.len() < 4 {
        return Err(Error::Config(format!("need at least 4 lags, got {}", lags.len())));
    }
    if lags.iter().any(|&l| l == 0) || lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("lags must be positive and increasing".into()));
    }
    Ok(())
}

/// Pooled sums of `|increment|^q` per lag, over any number of series and paths.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureAccumulator {
    pub lags: Vec<usize>,
    pub q: f64,
    sums: Vec<f64>,
    counts: Vec<usize>,
    pub n_paths: usize,
}

impl StructureAccumulator {
    pub fn new(lags: &[usize], q: f64) -> Result<Self> {
        check_q(q)?;
        if lags.is_empty() || lags.iter().any(|&l| l == 0) {
            return Err(Error::Config("lags must be positive".into()));
        }
        Ok(Self { lags: lags.to_vec(), q, sums: vec![0.0; lags.len()], counts: vec![0; lags.len()], n_paths: 0 })
    }

    fn power(&self, d: f64) -> f64 {
        if self.q == 2.0 {
            d * d
        } else {
            d.abs()
        }
    }

    pub fn add_series(&mut self, series: &[f64]) {
        for (k, &l) in self.lags.iter().enumerate() {
            if l >= series.len() {
                continue;
            }
            let s: f64 = series.windows(l + 1).map(|w| self.power(w[l] - w[0])).sum();
            self.sums[k] += s;
            self.counts[k] += series.len() - l;
        }
    }

    /// Adds increments of a `(time, space)` array along `axis`, restricted to the
    /// window that trims `margin` of each dimension at both ends.
    pub fn add_array(&mut self, values: ArrayView2<f64>, axis: Axis, margin: f64) {
        let (nt, nx) = values.dim();
        let window = |n: usize| {
            let cut = (margin * (n - 1) as f64).ceil() as usize;
            (cut, n.saturating_sub(cut))
        };
        let (t0, t1) = window(nt);
        let (x0, x1) = window(nx);
        if t1 <= t0 || x1 <= x0 {
            return;
        }
        let sub = values.slice(ndarray::s![t0..t1, x0..x1]);
        let along = match axis {
            Axis::Time => NdAxis(1),
            Axis::Space => NdAxis(0),
        };
        // each lane runs along the requested axis
        for lane in sub.axis_iter(along) {
            let lane = lane.to_vec();
            self.add_series(&lane);
        }
    }

    pub fn merge(&mut self, other: &StructureAccumulator) {
        for k in 0..self.lags.len() {
            self.sums[k] += other.sums[k];
            self.counts[k] += other.counts[k];
        }
        self.n_paths += other.n_paths;
    }

    /// `(lag, S_q(lag))` for every lag.
    pub fn values(&self) -> Result<Vec<(usize, f64)>> {
        let last = self.counts.last().copied().unwrap_or(0);
        if last < MIN_INCREMENTS {
            return Err(Error::InsufficientData(format!(
                "{last} increments at lag {} (need {MIN_INCREMENTS})",
                self.lags.last().copied().unwrap_or(0)
            )));
        }
        Ok(self.lags.iter().zip(self.sums.iter().zip(&self.counts)).map(|(&l, (&s, &c))| (l, s / c as f64)).collect())
    }

    pub fn estimate(&self, axis: Axis) -> Result<HolderEstimate> {
        check_lags(&self.lags)?;
        fit_power_law(&self.values()?, self.q, axis, self.n_paths.max(1))
    }
}

/// `S_q` of a one-dimensional series.
pub fn structure_function(series: &[f64], lags: &[usize], q: f64) -> Result<Vec<(usize, f64)>> {
    let mut acc = StructureAccumulator::new(lags, q)?;
    acc.add_series(series);
    acc.values()
}

/// `S_q` of a field along `axis`, pooled over the interior window.
pub fn structure_function_field(field: &Field, axis: Axis, lags: &[usize], q: f64, margin: f64) -> Result<Vec<(usize, f64)>> {
    let mut acc = StructureAccumulator::new(lags, q)?;
    acc.add_array(field.values.view(), axis, margin);
    acc.values()
}

/// Least-squares slope of `log S` against `log lag`, divided by `q`.
pub fn fit_power_law(sf: &[(usize, f64)], q: f64, axis: Axis, n_paths: usize) -> Result<HolderEstimate> {
    check_q(q)?;
    if sf.len() < 4 {
        return Err(Error::InsufficientData(format!("{} structure-function points (need 4)", sf.len())));
    }
    if sf.iter().any(|&(_, s)| !(s > 0.0)) {
        return Err(Error::Degenerate);
    }
    let n = sf.len() as f64;
    let xs: Vec<f64> = sf.iter().map(|&(l, _)| (l as f64).ln()).collect();
    let ys: Vec<f64> = sf.iter().map(|&(_, s)| s.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt() / q;
    Ok(HolderEstimate {
        axis,
        q,
        exponent: slope / q,
        stderr,
        lag_range: (sf[0].0, sf[sf.len() - 1].0),
        n_points: sf.len(),
        n_paths,
    })
}

/// Hölder exponent of a one-dimensional series.
pub fn estimate_holder(series: &[f64], q: f64, lags: &[usize]) -> Result<HolderEstimate> {
    check_lags(lags)?;
    fit_power_law(&structure_function(series, lags, q)?, q, Axis::Time, 1)
}

/// Hölder exponent of a field along `axis` (default interior window).
pub fn estimate_holder_field(field: &Field, axis: Axis, q: f64, lags: &[usize]) -> Result<HolderEstimate> {
    check_lags(lags)?;
    fit_power_law(&structure_function_field(field, axis, lags, q, DEFAULT_MARGIN)?, q, axis, 1)
}

/// Hölder exponent of the boundary velocity `p'`.
pub fn boundary_holder(p_prime: &[f64], q: f64, lags: &[usize]) -> Result<HolderEstimate> {
    estimate_holder(p_prime, q, lags)
}

/// Monte Carlo ensemble of direct runs analysed path by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEnsemble {
    pub grid: GridSpec,
    pub coeffs: ModelCoefficients,
    pub boundary: BoundaryFunctional,
    pub spde: SpdeConfig,
    pub seed: u64,
    pub n_paths: usize,
    pub q: f64,
    pub time_lags: Vec<usize>,
    pub space_lags: Vec<usize>,
    /// Boundary-velocity lags; `None` skips the estimate.
    pub boundary_lags: Option<Vec<usize>>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderSummary {
    pub time: HolderEstimate,
    pub space: HolderEstimate,
    pub boundary: Option<HolderEstimate>,
    pub blown_up_paths: usize,
}

struct PathStats {
    time: StructureAccumulator,
    space: StructureAccumulator,
    boundary: Option<StructureAccumulator>,
    blown_up: usize,
}

impl PathStats {
    fn merge(mut self, other: PathStats) -> PathStats {
        self.time.merge(&other.time);
        self.space.merge(&other.space);
        if let (Some(a), Some(b)) = (self.boundary.as_mut(), other.boundary.as_ref()) {
            a.merge(b);
        }
        self.blown_up += other.blown_up;
        self
    }
}

impl HolderEnsemble {
    fn empty(&self) -> Result<PathStats> {
        Ok(PathStats {
            time: StructureAccumulator::new(&self.time_lags, self.q)?,
            space: StructureAccumulator::new(&self.space_lags, self.q)?,
            boundary: self.boundary_lags.as_ref().map(|l| StructureAccumulator::new(l, self.q)).transpose()?,
            blown_up: 0,
        })
    }

    fn path(&self, k: usize) -> Result<PathStats> {
        let mut stats = self.empty()?;
        let traj = run_seeded(
            CoupledState::zero(&self.grid, 0.0),
            &self.coeffs,
            &self.boundary,
            self.spde,
            self.grid,
            self.seed.wrapping_add(k as u64),
            RunOptions { record_stride: 1, profile_stride: Some(1) },
        )?;
        if traj.blown_up() {
            stats.blown_up = 1;
            return Ok(stats);
        }
        for side in 0..2 {
            let m = traj.profile_matrix(side);
            stats.time.add_array(m.view(), Axis::Time, self.margin);
            stats.space.add_array(m.view(), Axis::Space, self.margin);
        }
        if let Some(acc) = stats.boundary.as_mut() {
            acc.add_series(&traj.p_prime_series()[1..]);
        }
        stats.time.n_paths = 1;
        stats.space.n_paths = 1;
        if let Some(acc) = stats.boundary.as_mut() {
            acc.n_paths = 1;
        }
        Ok(stats)
    }

    pub fn run(&self) -> Result<HolderSummary> {
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be positive".into()));
        }
        let stats = (0..self.n_paths)
            .into_par_iter()
            .map(|k| self.path(k))
            .try_reduce_with(|a, b| Ok(a.merge(b)))
            .expect("at least one path")?;
        Ok(HolderSummary {
            time: stats.time.estimate(Axis::Time)?,
            space: stats.space.estimate(Axis::Space)?,
            boundary: stats.boundary.as_ref().map(|b| b.estimate(Axis::Time)).transpose()?,
            blown_up_paths: stats.blown_up,
        })
    }
}
