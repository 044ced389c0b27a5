//! Deterministic parabolic obstacle problem: find `z >= v` with zero initial
//! and Dirichlet data solving the heat equation off the contact set, plus a
//! nonnegative measure `eta` supported on `{z = v}`.
//!
//! Two independent discretizations: projection (explicit heat step followed
//! by `max(., v)`) and penalization with `g_eps(d) = arctan((d ^ 0)^2) / eps`
//! treated implicitly pointwise.

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Penalized { epsilon: f64 },
    Projected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSolution {
    pub z: Field,
    pub obstacle: Field,
    /// Reflection mass per cell (value x space); row `i` is the mass added
    /// by the step ending at `t_i`.
    pub eta: Array2<f64>,
    pub method: Method,
}

impl ObstacleSolution {
    /// `sum (z - v) * eta`.
    pub fn complementarity(&self) -> f64 {
        self.pairing(|d| d)
    }

    /// `sum |z - v| * eta`, the quantity that vanishes in the penalization limit.
    pub fn abs_complementarity(&self) -> f64 {
        self.pairing(f64::abs)
    }

    fn pairing(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.z
            .values
            .iter()
            .zip(self.obstacle.values.iter())
            .zip(self.eta.iter())
            .map(|((z, v), e)| f(z - v) * e)
            .sum()
    }

    pub fn eta_mass(&self) -> f64 {
        self.eta.sum()
    }

    /// `min (z - v)` over all nodes.
    /// `min (z - v)` over interior nodes (the constraint is not imposed at Dirichlet nodes).
    pub fn min_gap(&self) -> f64 {
        let nx = self.z.grid.nx;
        self.z
            .values
            .slice(ndarray::s![.., 1..nx])
            .iter()
            .zip(self.obstacle.values.slice(ndarray::s![.., 1..nx]).iter())
            .map(|(z, v)| z - v)
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV dump with columns `t,x,z,v,eta_cell`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "z", "v", "eta_cell"])?;
        let g = self.z.grid;
        for i in 0..g.levels() {
            for j in 0..g.nodes() {
                w.write_record(&[
                    g.t(i).to_string(),
                    g.x(j).to_string(),
                    self.z.at(i, j).to_string(),
                    self.obstacle.at(i, j).to_string(),
                    self.eta[[i, j]].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Obstacle solver on a fixed grid.
#[derive(Debug, Clone)]
pub struct ObstacleSolver {
    pub grid: GridSpec,
    /// Diffusion coefficient in front of the Laplacian.
    pub lap_scale: f64,
    /// Optional source term added to the heat equation.
    pub forcing: Option<Field>,
}

impl ObstacleSolver {
    pub fn new(grid: GridSpec) -> Self {
        Self { grid, lap_scale: 1.0, forcing: None }
    }

    pub fn with_lap_scale(mut self, lap_scale: f64) -> Self {
        self.lap_scale = lap_scale;
        self
    }

    pub fn with_forcing(mut self, forcing: Field) -> Self {
        self.forcing = Some(forcing);
        self
    }

    fn check(&self, v: &Field) -> Result<()> {
        let g = &self.grid;
        if v.values.dim() != (g.levels(), g.nodes()) {
            return Err(Error::GridMismatch);
        }
        if let Some(f) = &self.forcing {
            if f.values.dim() != v.values.dim() {
                return Err(Error::GridMismatch);
            }
        }
        let limit = 0.5 * g.dx * g.dx;
        if self.lap_scale * g.dt > limit {
            return Err(Error::CflViolation { dt: self.lap_scale * g.dt, limit });
        }
        for (j, &value) in v.values.row(0).iter().enumerate() {
            if value > 0.0 {
                return Err(Error::ObstacleInitialPositive { node: j, value });
            }
        }
        Ok(())
    }

    /// Explicit heat step from row `i` into `out` (interior nodes; Dirichlet ends are 0).
    fn heat_step(&self, z: &[f64], i: usize, out: &mut [f64]) {
        let g = &self.grid;
        let mu = self.lap_scale * g.dt / (g.dx * g.dx);
        let n = z.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for j in 1..n - 1 {
            out[j] = z[j] + mu * (z[j - 1] - 2.0 * z[j] + z[j + 1]);
        }
        if let Some(f) = &self.forcing {
            let row = f.values.row(i);
            for j in 1..n - 1 {
                out[j] += g.dt * row[j];
            }
        }
    }

    pub fn solve_projected(&self, v: &Field) -> Result<ObstacleSolution> {
        self.check(v)?;
        let g = self.grid;
        let mut z = Array2::zeros((g.levels(), g.nodes()));
        let mut eta = Array2::zeros((g.levels(), g.nodes()));
        let mut prev = vec![0.0; g.nodes()];
        let mut next = vec![0.0; g.nodes()];
        for i in 0..g.nt {
            self.heat_step(&prev, i, &mut next);
            let obstacle = v.values.row(i + 1);
            for j in 1..g.nx {
                let deficit = obstacle[j] - next[j];
                if deficit > 0.0 {
                    eta[[i + 1, j]] = deficit * g.dx;
                    next[j] = obstacle[j];
                }
            }
            z.row_mut(i + 1).as_slice_mut().expect("standard layout").copy_from_slice(&next);
            std::mem::swap(&mut prev, &mut next);
        }
        Ok(ObstacleSolution { z: Field { grid: g, values: z }, obstacle: v.clone(), eta, method: Method::Projected })
    }

    pub fn solve_penalized(&self, v: &Field, epsilon: f64) -> Result<ObstacleSolution> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("penalty epsilon {epsilon} must be positive")));
        }
        self.check(v)?;
        let g = self.grid;
        let k = g.dt / epsilon;
        let mut z = Array2::zeros((g.levels(), g.nodes()));
        let mut eta = Array2::zeros((g.levels(), g.nodes()));
        let mut prev = vec![0.0; g.nodes()];
        let mut next = vec![0.0; g.nodes()];
        for i in 0..g.nt {
            self.heat_step(&prev, i, &mut next);
            let obstacle = v.values.row(i + 1);
            for j in 1..g.nx {
                let b = obstacle[j] - next[j];
                if b > 0.0 {
                    // z_new = z* + k * arctan((v - z_new)^2), i.e. d + k*arctan(d^2) = b
                    let d = penalty_root(b, k);
                    let z_new = obstacle[j] - d;
                    eta[[i + 1, j]] = (z_new - next[j]) * g.dx;
                    next[j] = z_new;
                }
            }
            z.row_mut(i + 1).as_slice_mut().expect("standard layout").copy_from_slice(&next);
            std::mem::swap(&mut prev, &mut next);
        }
        Ok(ObstacleSolution {
            z: Field { grid: g, values: z },
            obstacle: v.clone(),
            eta,
            method: Method::Penalized { epsilon },
        })
    }
}

/// Root `d in [0, b]` of `d + k * arctan(d^2) = b`; the left side is increasing in `d`.
fn penalty_root(b: f64, k: f64) -> f64 {
    let phi = |d: f64| d + k * (d * d).atan() - b;
    let (mut lo, mut hi) = (0.0f64, b);
    let mut d = b;
    for _ in 0..200 {
        let f = phi(d);
        if f > 0.0 {
            hi = d;
        } else {
            lo = d;
        }
        let d2 = d * d;
        let slope = 1.0 + 2.0 * k * d / (1.0 + d2 * d2);
        let mut step = d - f / slope;
        if !(step > lo && step < hi) {
            step = 0.5 * (lo + hi);
        }
        if (step - d).abs() <= 1e-17 + 1e-15 * d.abs() || hi - lo <= 1e-16 * b {
            return step;
        }
        d = step;
    }
    d
}

pub fn solve_projected(v: &Field, grid: GridSpec) -> Result<ObstacleSolution> {
    ObstacleSolver::new(grid).solve_projected(v)
}

pub fn solve_penalized(v: &Field, epsilon: f64, grid: GridSpec) -> Result<ObstacleSolution> {
    ObstacleSolver::new(grid).solve_penalized(v, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapNorm {
    Sup,
    Weighted { r: f64 },
}

impl GapNorm {
    pub fn of(&self, f: &Field) -> f64 {
        match *self {
            GapNorm::Sup => f.sup_norm(),
            GapNorm::Weighted { r } => f.weighted_sup_norm(r),
        }
    }
}

/// `(||z1 - z2||, ||v1 - v2||)` for the projected solutions of two obstacles.
pub fn stability_gap(v1: &Field, v2: &Field, grid: GridSpec, norm: GapNorm) -> Result<(f64, f64)> {
    let solver = ObstacleSolver::new(grid);
    let z1 = solver.solve_projected(v1)?;
    let z2 = solver.solve_projected(v2)?;
    Ok((norm.of(&z1.z.sub(&z2.z)?), norm.of(&v1.sub(v2)?)))
}

/// `5 sin(pi x) min(t, 0.02)` on the unit interval.
pub fn sine_obstacle(grid: GridSpec) -> Field {
    Field::from_fn(grid, |t, x| 5.0 * (std::f64::consts::PI * x).sin() * t.min(0.02))
}

/// A smooth random obstacle, nonpositive at `t = 0`: a few sine modes in
/// space with amplitudes growing linearly in time from a negative offset.
pub fn random_smooth_obstacle(grid: GridSpec, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let length = grid.length();
    let modes: Vec<(f64, f64, f64)> = (1..=4)
        .map(|k| (k as f64, rng.gen_range(-1.0..1.0) / k as f64, rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    let offset = rng.gen_range(0.0..0.5);
    let rate = rng.gen_range(5.0..40.0);
    Field::from_fn(grid, move |t, x| {
        let s = x / length;
        let shape: f64 = modes
            .iter()
            .map(|&(k, a, ph)| a * (std::f64::consts::PI * k * s + ph).sin())
            .sum();
        let envelope = (std::f64::consts::PI * s).sin();
        envelope * rate * t * (1.0 + shape) - offset * (1.0 - (-rate * t).exp())
    })
}

/// True when `e^{-rL} max|v| < 1e-6 * reference`, i.e. the artificial
/// Dirichlet node at `L` is invisible in the weighted norm.
pub fn truncation_length_ok(grid: &GridSpec, v: &Field, reference: f64) -> bool {
    let tail = (-grid.weight() * grid.length()).exp() * v.sup_norm();
    tail < 1e-6 * reference
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::compact(64, 0.1, 4096).unwrap()
    }

    #[test]
    fn inactive_obstacle_gives_zero() {
        let g = GridSpec::compact(32, 0.05, 2048).unwrap();
        let v = Field::from_fn(g, |_, _| -1.0);
        for sol in [solve_projected(&v, g).unwrap(), solve_penalized(&v, 1e-3, g).unwrap()] {
            assert!(sol.z.sup_norm() < 1e-12);
            assert!(sol.eta_mass().abs() < 1e-12);
        }
    }

    #[test]
    fn initial_positive_rejected() {
        let g = GridSpec::compact(16, 0.01, 200).unwrap();
        let v = Field::from_fn(g, |_, x| x * (1.0 - x));
        assert!(matches!(solve_projected(&v, g), Err(Error::ObstacleInitialPositive { .. })));
    }

    #[test]
    fn projected_lower_bound_with_negative_forcing() {
        let g = GridSpec::compact(32, 0.05, 2048).unwrap();
        let v = Field::zeros(g);
        let forcing = Field::from_fn(g, |_, x| -10.0 * (1.0 + x));
        let sol = ObstacleSolver::new(g).with_forcing(forcing).solve_projected(&v).unwrap();
        assert!(sol.z.values.iter().all(|&z| z >= 0.0));
        assert!(sol.eta_mass() > 0.0);
    }

    #[test]
    fn projected_exact_constraint_and_complementarity() {
        let g = grid();
        let v = sine_obstacle(g);
        let sol = solve_projected(&v, g).unwrap();
        assert!(sol.min_gap() >= 0.0);
        assert!(sol.eta.iter().all(|&e| e >= 0.0));
        assert!(sol.complementarity() <= 1e-6 * sol.eta_mass());
        for i in 0..g.levels() {
            assert_eq!(sol.z.at(i, 0), 0.0);
            assert_eq!(sol.z.at(i, g.nx), 0.0);
        }
    }

    #[test]
    fn eta_vanishes_off_contact_set() {
        let g = grid();
        let v = sine_obstacle(g);
        let sol = solve_projected(&v, g).unwrap();
        for ((z, o), e) in sol.z.values.iter().zip(sol.obstacle.values.iter()).zip(sol.eta.iter()) {
            if z - o > g.dx {
                assert_eq!(*e, 0.0);
            }
        }
    }

    #[test]
    fn penalized_monotone_in_epsilon() {
        let g = grid();
        let v = sine_obstacle(g);
        let a = solve_penalized(&v, 1e-3, g).unwrap();
        let b = solve_penalized(&v, 1e-4, g).unwrap();
        for (za, zb) in a.z.values.iter().zip(b.z.values.iter()) {
            assert!(*zb >= *za - 1e-9);
        }
        assert!(b.abs_complementarity() < a.abs_complementarity());
    }

    #[test]
    fn penalty_root_solves_equation() {
        for &(b, k) in &[(1e-3, 2.44), (0.5, 100.0), (2.0, 1e-3), (1e-9, 1e5)] {
            let d = penalty_root(b, k);
            assert!(d >= 0.0 && d <= b);
            assert!((d + k * (d * d).atan() - b).abs() <= 1e-14 * b.max(1.0), "{b} {k}");
        }
    }

    #[test]
    fn stability_identical_and_shifted() {
        let g = GridSpec::compact(32, 0.05, 2048).unwrap();
        let v1 = random_smooth_obstacle(g, 3);
        let (dz, dv) = stability_gap(&v1, &v1, g, GapNorm::Sup).unwrap();
        assert_eq!((dz, dv), (0.0, 0.0));
        // shift by a constant for t > 0 (keeps v(0) <= 0)
        let v2 = Field::from_fn(g, |t, x| {
            let i = (t / g.dt).round() as usize;
            let j = (x / g.dx).round() as usize;
            v1.at(i, j) - if i == 0 { 0.0 } else { 0.3 }
        });
        let (dz, dv) = stability_gap(&v1, &v2, g, GapNorm::Sup).unwrap();
        assert!(dz / dv <= 1.0 + 1e-6, "{dz} {dv}");
    }

    #[test]
    fn random_obstacles_start_nonpositive() {
        let g = GridSpec::compact(16, 0.01, 200).unwrap();
        for seed in 0..20 {
            let v = random_smooth_obstacle(g, seed);
            assert!(v.values.row(0).iter().all(|&x| x <= 0.0));
        }
    }
}
