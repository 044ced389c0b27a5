//! Drift and volatility coefficients `f_i(x, u)`, `sigma_i(x, u)` of the
//! relative-frame equations.

use serde::{Deserialize, Serialize};

use crate::boundary::interpolate_clamped;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// A closed-form coefficient or a tabulated function of the relative coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Zero,
    Constant { value: f64 },
    /// `intercept + slope * u`
    Affine { intercept: f64, slope: f64 },
    /// `amplitude * e^{-rate x}`
    ExpDecay { amplitude: f64, rate: f64 },
    /// `offset + amplitude * sin(u)`
    Sine { offset: f64, amplitude: f64 },
    /// Linear interpolation in `x` through `(x, y)`, clamped at the ends.
    Table { x: Vec<f64>, y: Vec<f64> },
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Zero
    }
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        match self {
            Coefficient::Zero => 0.0,
            Coefficient::Constant { value } => *value,
            Coefficient::Affine { intercept, slope } => intercept + slope * u,
            Coefficient::ExpDecay { amplitude, rate } => amplitude * (-rate * x).exp(),
            Coefficient::Sine { offset, amplitude } => offset + amplitude * u.sin(),
            Coefficient::Table { x: xs, y: ys } => interpolate_clamped(xs, ys, x),
        }
    }

    /// Lipschitz constant in `u`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Coefficient::Affine { slope, .. } => slope.abs(),
            Coefficient::Sine { amplitude, .. } => amplitude.abs(),
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Coefficient::Table { x, y } = self {
            if x.is_empty() || x.len() != y.len() {
                return Err(Error::Config("coefficient table needs matching non-empty columns".into()));
            }
            if x.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("coefficient table x must be increasing".into()));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("coefficient table values must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ModelCoefficients {
    #[serde(default)]
    pub f1: Coefficient,
    #[serde(default)]
    pub f2: Coefficient,
    #[serde(default)]
    pub sigma1: Coefficient,
    #[serde(default)]
    pub sigma2: Coefficient,
    /// Growth weight of the half-line norm.
    #[serde(default)]
    pub r: f64,
    /// Decay rate of the volatility on the half-line.
    #[serde(default)]
    pub delta: f64,
    /// Declared Lipschitz constant (metadata).
    #[serde(default)]
    pub lipschitz_c: f64,
}

impl ModelCoefficients {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Same drift and volatility on both sides.
    pub fn symmetric(f: Coefficient, sigma: Coefficient) -> Self {
        let lipschitz_c = f.lipschitz() + sigma.lipschitz();
        Self { f1: f.clone(), f2: f, sigma1: sigma.clone(), sigma2: sigma, lipschitz_c, ..Self::default() }
    }

    pub fn drift(&self, side: usize) -> &Coefficient {
        if side == 0 {
            &self.f1
        } else {
            &self.f2
        }
    }

    pub fn volatility(&self, side: usize) -> &Coefficient {
        if side == 0 {
            &self.sigma1
        } else {
            &self.sigma2
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in [&self.f1, &self.f2, &self.sigma1, &self.sigma2] {
            c.validate()?;
        }
        if !(self.delta >= 0.0) || !self.r.is_finite() {
            return Err(Error::Config("coefficients need finite r and delta >= 0".into()));
        }
        Ok(())
    }

    /// Smallest `R` with `|sigma_i(x, u)| <= R e^{-delta x} (e^{r x} + |u|)` over the
    /// grid nodes and the sampled `u` values.
    pub fn volatility_growth_constant(&self, grid: &GridSpec, u_samples: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..grid.nodes() {
            let x = grid.x(j);
            for &u in u_samples {
                let envelope = (-self.delta * x).exp() * ((self.r * x).exp() + u.abs());
                for s in [&self.sigma1, &self.sigma2] {
                    worst = worst.max(s.eval(x, u).abs() / envelope);
                }
            }
        }
        worst
    }
}
