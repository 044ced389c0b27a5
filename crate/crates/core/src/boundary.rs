//! Boundary functionals `h(v1, v2)` giving the speed of the moving boundary,
//! their truncations, and the Euler update of the boundary position.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryKind {
    /// `alpha * g_lambda(v1 - v2)`.
    ExpImbalance { alpha: f64, lambda: f64 },
    /// One-sided difference of `v1 - v2` at the boundary.
    StefanFd {
        #[serde(default)]
        second_order: bool,
    },
    Zero,
    /// Piecewise-linear map from the boundary imbalance `(v1 - v2)'(0)`
    /// (first-node difference) to a speed; clamps outside the table.
    Table { imbalance: Vec<f64>, speed: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunctional {
    #[serde(flatten)]
    pub kind: BoundaryKind,
    /// `|h| <= clamp` when set.
    #[serde(default)]
    pub clamp: Option<f64>,
    /// Inputs capped at `M` (unit interval) or by `F_{M,r}` (half-line).
    #[serde(default)]
    pub truncation_m: Option<f64>,
}

impl BoundaryFunctional {
    pub fn new(kind: BoundaryKind) -> Self {
        Self { kind, clamp: None, truncation_m: None }
    }

    pub fn zero() -> Self {
        Self::new(BoundaryKind::Zero)
    }

    pub fn exp_imbalance(alpha: f64, lambda: f64) -> Self {
        Self::new(BoundaryKind::ExpImbalance { alpha, lambda })
    }

    pub fn constant(speed: f64) -> Self {
        Self::new(BoundaryKind::Table { imbalance: vec![0.0], speed: vec![speed] })
    }

    pub fn with_clamp(mut self, clamp: f64) -> Self {
        self.clamp = Some(clamp);
        self
    }

    pub fn with_truncation(mut self, m: f64) -> Self {
        self.truncation_m = Some(m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            BoundaryKind::ExpImbalance { alpha, lambda } => {
                if !alpha.is_finite() || !(*lambda > 0.0) {
                    return Err(Error::Config("exp_imbalance needs finite alpha and lambda > 0".into()));
                }
            }
            BoundaryKind::Table { imbalance, speed } => {
                if imbalance.is_empty() || imbalance.len() != speed.len() {
                    return Err(Error::Config("boundary table needs matching non-empty columns".into()));
                }
                if imbalance.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("boundary table imbalance must be increasing".into()));
                }
            }
            _ => {}
        }
        if let Some(c) = self.clamp {
            if !(c >= 0.0) {
                return Err(Error::Config(format!("clamp {c} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Evaluates `h` on the two relative-frame profiles.
    pub fn eval(&self, v1: &[f64], v2: &[f64], grid: &GridSpec) -> Result<f64> {
        if v1.len() != v2.len() {
            return Err(Error::GridMismatch);
        }
        grid.check_profile(v1.len())?;
        let value = match self.truncation_m {
            Some(m) => {
                let a = truncate(v1, grid, m);
                let b = truncate(v2, grid, m);
                self.raw(&a, &b, grid)
            }
            None => self.raw(v1, v2, grid),
        };
        Ok(match self.clamp {
            Some(c) => value.clamp(-c, c),
            None => value,
        })
    }

    fn raw(&self, v1: &[f64], v2: &[f64], grid: &GridSpec) -> f64 {
        match &self.kind {
            BoundaryKind::Zero => 0.0,
            BoundaryKind::ExpImbalance { alpha, lambda } => {
                let weights = g_lambda_weights(grid, *lambda);
                alpha * v1.iter().zip(v2).zip(&weights).map(|((a, b), w)| w * (a - b)).sum::<f64>()
            }
            BoundaryKind::StefanFd { second_order } => stefan_difference(v1, v2, grid.dx, *second_order),
            BoundaryKind::Table { imbalance, speed } => {
                interpolate_clamped(imbalance, speed, stefan_difference(v1, v2, grid.dx, false))
            }
        }
    }
}

fn stefan_difference(v1: &[f64], v2: &[f64], dx: f64, second_order: bool) -> f64 {
    let d = |j: usize| v1[j] - v2[j];
    if second_order {
        (-3.0 * d(0) + 4.0 * d(1) - d(2)) / (2.0 * dx)
    } else {
        (d(1) - d(0)) / dx
    }
}

fn truncate(v: &[f64], grid: &GridSpec, m: f64) -> Vec<f64> {
    if grid.domain.is_half_line() {
        f_mr(v, grid, m, grid.weight())
    } else {
        v.iter().map(|x| x.min(m)).collect()
    }
}

/// Linear interpolation through `(xs, ys)`, constant beyond the end points.
pub fn interpolate_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 || x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&p| p <= x) - 1;
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + w * (ys[k + 1] - ys[k])
}

/// Quadrature weights `w_j` with `sum_j w_j k_j = int_0^L lambda^2 e^{-lambda x} k(x) dx`
/// exactly for the piecewise-linear interpolant of the nodal values `k_j`.
pub fn g_lambda_weights(grid: &GridSpec, lambda: f64) -> Vec<f64> {
    let n = grid.nodes();
    let dx = grid.dx;
    let a = lambda * dx;
    // On [x_j, x_{j+1}] with s = (x - x_j)/dx:
    //   int lambda^2 e^{-lambda x} (1 - s) dx = lambda^2 dx e^{-lambda x_j} * p(a)
    //   int lambda^2 e^{-lambda x} s dx       = lambda^2 dx e^{-lambda x_j} * q(a)
    // with p(a) = int_0^1 e^{-a s}(1 - s) ds and q(a) = int_0^1 e^{-a s} s ds.
    let (p, q) = if a < 1e-4 {
        (0.5 - a / 6.0 + a * a / 24.0, 0.5 - a / 3.0 + a * a / 8.0)
    } else {
        let e = (-a).exp();
        let em1 = -(-a).exp_m1(); // 1 - e^{-a}
        ((a - em1) / (a * a), (em1 - a * e) / (a * a))
    };
    let scale = lambda * lambda * dx;
    let mut w = vec![0.0; n];
    for j in 0..n - 1 {
        let base = scale * (-lambda * grid.x(j)).exp();
        w[j] += base * p;
        w[j + 1] += base * q;
    }
    w
}

/// `g_lambda(k) = int_0^1 lambda^2 e^{-lambda x} k(x) dx` for a nodal profile.
pub fn g_lambda(k: &[f64], grid: &GridSpec, lambda: f64) -> Result<f64> {
    grid.check_profile(k.len())?;
    Ok(g_lambda_weights(grid, lambda).iter().zip(k).map(|(w, v)| w * v).sum())
}

/// `F_{M,r}(u)(x) = e^{rx} min(e^{-rx} u(x), M)`.
pub fn f_mr(u: &[f64], grid: &GridSpec, m: f64, r: f64) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(j, &v)| {
            let g = (r * grid.x(j)).exp();
            if v <= m * g {
                v
            } else {
                g * (v / g).min(m)
            }
        })
        .collect()
}

/// Explicit Euler step of the boundary ODE.
pub fn advance_p(p: f64, p_prime: f64, dt: f64) -> f64 {
    p + dt * p_prime
}
