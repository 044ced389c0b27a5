//! Space-time grids and fields sampled on them.
//!
//! Nodes are `x_j = j * dx` for `j = 0..=nx` and `t_i = i * dt` for
//! `i = 0..=nt`. Node 0 is always a Dirichlet node; node `nx` is the right
//! Dirichlet node on the unit interval and the artificial Dirichlet node at
//! the truncation length on the half-line.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible `dt / dx^2` for the explicit heat step.
pub const STABILITY_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// The unit interval `[0, 1]`.
    CompactUnit,
    /// `[0, inf)` truncated at `length`, with exponential weight `weight`.
    HalfLine { length: f64, weight: f64 },
}

impl Domain {
    pub fn length(&self) -> f64 {
        match *self {
            Domain::CompactUnit => 1.0,
            Domain::HalfLine { length, .. } => length,
        }
    }

    /// Exponential weight `r` of the half-line norm; zero on the unit interval.
    pub fn weight(&self) -> f64 {
        match *self {
            Domain::CompactUnit => 0.0,
            Domain::HalfLine { weight, .. } => weight,
        }
    }

    pub fn is_half_line(&self) -> bool {
        matches!(self, Domain::HalfLine { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain: Domain,
    pub nx: usize,
    pub nt: usize,
    pub horizon: f64,
    pub dx: f64,
    pub dt: f64,
}

impl GridSpec {
    /// Validated grid; rejects grids violating the explicit-scheme CFL bound.
    pub fn new(domain: Domain, nx: usize, horizon: f64, nt: usize) -> Result<Self> {
        if nx < 4 {
            return Err(Error::BadDimension(format!("nx = {nx} < 4")));
        }
        if nt < 1 {
            return Err(Error::BadDimension("nt = 0".into()));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::BadDimension(format!("horizon = {horizon} must be positive")));
        }
        if let Domain::HalfLine { length, weight } = domain {
            if !(length >= 1.0) || !length.is_finite() {
                return Err(Error::BadDimension(format!(
                    "half-line truncation length {length} must be >= 1"
                )));
            }
            if !weight.is_finite() {
                return Err(Error::BadDimension("half-line weight must be finite".into()));
            }
        }
        let dx = domain.length() / nx as f64;
        let dt = horizon / nt as f64;
        let limit = STABILITY_FACTOR * dx * dx;
        if dt > limit {
            return Err(Error::CflViolation { dt, limit });
        }
        Ok(Self { domain, nx, nt, horizon, dx, dt })
    }

    pub fn compact(nx: usize, horizon: f64, nt: usize) -> Result<Self> {
        Self::new(Domain::CompactUnit, nx, horizon, nt)
    }

    pub fn half_line(length: f64, weight: f64, nx: usize, horizon: f64, nt: usize) -> Result<Self> {
        Self::new(Domain::HalfLine { length, weight }, nx, horizon, nt)
    }

    /// Number of spatial nodes, `nx + 1`.
    pub fn nodes(&self) -> usize {
        self.nx + 1
    }

    /// Number of time levels, `nt + 1`.
    pub fn levels(&self) -> usize {
        self.nt + 1
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nodes()).map(|j| self.x(j)).collect()
    }

    pub fn length(&self) -> f64 {
        self.domain.length()
    }

    pub fn weight(&self) -> f64 {
        self.domain.weight()
    }

    /// Same domain and spacing, different horizon/step count.
    pub fn with_time(&self, horizon: f64, nt: usize) -> Result<Self> {
        Self::new(self.domain, self.nx, horizon, nt)
    }

    pub(crate) fn check_profile(&self, len: usize) -> Result<()> {
        if len != self.nodes() {
            return Err(Error::DimensionMismatch { expected: self.nodes(), got: len });
        }
        Ok(())
    }
}

/// A real function sampled on every node of a grid, indexed `(time, space)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub values: Array2<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: Array2::zeros((grid.levels(), grid.nodes())) }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.levels(), grid.nodes()), |(i, j)| {
            f(grid.t(i), grid.x(j))
        });
        Self { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != grid.levels() {
            return Err(Error::DimensionMismatch { expected: grid.levels(), got: rows });
        }
        grid.check_profile(cols)?;
        Ok(Self { grid, values })
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// Sup norm over all nodes and times.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup_{t,x} e^{-r x} |value|`.
    pub fn weighted_sup_norm(&self, r: f64) -> f64 {
        let mut m = 0.0f64;
        for row in self.values.rows() {
            for (j, v) in row.iter().enumerate() {
                m = m.max((-r * self.grid.x(j)).exp() * v.abs());
            }
        }
        m
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        if self.values.dim() != other.values.dim() {
            return Err(Error::GridMismatch);
        }
        Ok(Field { grid: self.grid, values: &self.values - &other.values })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
