//! Two reflected stochastic heat equations sharing a moving boundary.
//!
//! The bid and ask order-density profiles live in the relative frame
//! `v1(t, x) = u1(t, p(t) - x)`, `v2(t, x) = u2(t, p(t) + x)`, where they solve
//!
//! ```text
//! dv1 = [Δv1 - h_M(v1, v2) ∂x(v1 ∧ M) + f1(x, v1)] dt + σ1(x, v1) dW  + dη1
//! dv2 = [Δv2 + h_M(v1, v2) ∂x(v2 ∧ M) + f2(x, v2)] dt + σ2(x, v2) dW⁻ + dη2
//! p'(t) = h_M(v1, v2)
//! ```
//!
//! with Dirichlet data at the boundary and reflection measures `η` keeping the
//! profiles nonnegative. The crate provides:
//!
//! - [`grid`] and [`noise`]: grids, fields and seeded white noise;
//! - [`heat_kernel`]: Dirichlet heat kernels and numerical checks of their estimates;
//! - [`obstacle`]: the deterministic obstacle problem (projection and penalization);
//! - [`spde`]: the direct forward-Euler integrator;
//! - [`picard`]: the mild-form Picard scheme, cross-checked against [`spde`];
//! - [`boundary`]: boundary functionals `h`, `g_λ`, truncations;
//! - [`regularity`]: structure-function Hölder estimates;
//! - [`lob`]: order-book event parsing, coefficient fitting and price simulation.

pub mod boundary;
pub mod coefficients;
pub mod error;
pub mod grid;
pub mod heat_kernel;
pub mod lob;
pub mod noise;
pub mod obstacle;
pub mod picard;
pub mod quadrature;
pub mod regularity;
pub mod spde;

pub use boundary::{BoundaryFunctional, BoundaryKind};
pub use coefficients::{Coefficient, ModelCoefficients};
pub use error::{Error, Result};
pub use grid::{Domain, Field, GridSpec};
pub use noise::{NoiseField, NoisePair, NoiseSource, SeededNoise, ZeroNoise};
