//! Dirichlet heat kernels on `[0, 1]` (image series) and `[0, inf)` (two
//! images), the exponentially weighted half-line kernel, their `y`
//! derivatives, and numerical checks of the standard kernel estimates.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::quadrature::Trapezoid;

const FRAC_1_SQRT_4PI: f64 = 0.28209479177387814;

/// Image count making the compact-kernel tail smaller than `tol` for times
/// up to `t`: `max(3, ceil(4 * sqrt(t * ln(1/tol))))`.
pub fn images_for(t: f64, tol: f64) -> usize {
    let n = (4.0 * (t.max(0.0) * (1.0 / tol).ln()).sqrt()).ceil();
    (n as usize).max(3)
}

/// Default image count for kernels evaluated up to time `t` at tolerance 1e-12.
pub fn default_images(t: f64) -> usize {
    images_for(t, 1e-12)
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

/// `H(t, x, y)` on `[0, 1]`, image sum over `n in [-n_images, n_images]`.
pub fn eval_h(t: f64, x: f64, y: f64, n_images: usize) -> Result<f64> {
    check_time(t)?;
    Ok(h_unchecked(t, x, y, n_images))
}

pub(crate) fn h_unchecked(t: f64, x: f64, y: f64, n_images: usize) -> f64 {
    let inv = 1.0 / (4.0 * t);
    let n = n_images as i64;
    let mut s = 0.0;
    for k in -n..=n {
        let shift = 2.0 * k as f64;
        let a = x - y + shift;
        let b = x + y + shift;
        s += (-a * a * inv).exp() - (-b * b * inv).exp();
    }
    s * FRAC_1_SQRT_4PI / t.sqrt()
}

/// `G(t, x, y)` on `[0, inf)`.
pub fn eval_g(t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    Ok(g_unchecked(t, x, y))
}

pub(crate) fn g_unchecked(t: f64, x: f64, y: f64) -> f64 {
    let inv = 1.0 / (4.0 * t);
    let a = x - y;
    let b = x + y;
    ((-a * a * inv).exp() - (-b * b * inv).exp()) * FRAC_1_SQRT_4PI / t.sqrt()
}

/// `G_r(t, x, y) = e^{-r (x - y)} G(t, x, y)`.
pub fn eval_g_r(t: f64, x: f64, y: f64, r: f64) -> Result<f64> {
    Ok((-r * (x - y)).exp() * eval_g(t, x, y)?)
}

/// The free-space Gaussian `F_1(t, x, y)`.
pub fn free_kernel(t: f64, x: f64, y: f64) -> f64 {
    let a = x - y;
    (-a * a / (4.0 * t)).exp() * FRAC_1_SQRT_4PI / t.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `H` on the unit interval.
    Compact,
    /// `G` on the half-line.
    HalfLine,
}

/// Analytic `y` derivative of `H` (term by term) or `G`.
pub fn deriv_y(kind: KernelKind, t: f64, x: f64, y: f64, n_images: usize) -> Result<f64> {
    check_time(t)?;
    Ok(deriv_y_unchecked(kind, t, x, y, n_images))
}

pub(crate) fn deriv_y_unchecked(kind: KernelKind, t: f64, x: f64, y: f64, n_images: usize) -> f64 {
    let inv = 1.0 / (4.0 * t);
    let term = |shift: f64| {
        let a = x - y + shift;
        let b = x + y + shift;
        a * (-a * a * inv).exp() + b * (-b * b * inv).exp()
    };
    let s = match kind {
        KernelKind::HalfLine => term(0.0),
        KernelKind::Compact => {
            let n = n_images as i64;
            (-n..=n).map(|k| term(2.0 * k as f64)).sum()
        }
    };
    s * FRAC_1_SQRT_4PI / t.sqrt() / (2.0 * t)
}

/// `int_lo^hi K(t, x, y) dy` in closed form via `erf`, for `K = H` or `G`.
pub fn cell_integral(kind: KernelKind, t: f64, x: f64, lo: f64, hi: f64, n_images: usize) -> f64 {
    let s = 1.0 / (2.0 * t.sqrt());
    // int_lo^hi F_1(t, c, y) dy
    let gauss = |c: f64| 0.5 * (erf((hi - c) * s) - erf((lo - c) * s));
    match kind {
        KernelKind::HalfLine => gauss(x) - gauss(-x),
        KernelKind::Compact => {
            let n = n_images as i64;
            (-n..=n)
                .map(|k| {
                    let shift = 2.0 * k as f64;
                    // images centred at x + 2k and -x - 2k
                    gauss(x + shift) - gauss(-x - shift)
                })
                .sum()
        }
    }
}

pub(crate) fn kernel_unchecked(kind: KernelKind, t: f64, x: f64, y: f64, n_images: usize) -> f64 {
    match kind {
        KernelKind::Compact => h_unchecked(t, x, y, n_images),
        KernelKind::HalfLine => g_unchecked(t, x, y),
    }
}

/// Result of a numerical kernel-estimate check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema: u32,
    pub estimate_name: String,
    /// Abscissae of the check: times, or spatial separations for the space modulus.
    pub t_values: Vec<f64>,
    /// Raw estimate per abscissa (already maximized over `x`).
    pub values: Vec<f64>,
    /// Per-abscissa value multiplied by the expected scaling factor.
    pub scaled_values: Vec<f64>,
    pub sup_value: f64,
    pub scaled_sup: f64,
    /// False when the scaled values grow by more than `growth_limit` across the range.
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelBoundConfig {
    pub t_values: Vec<f64>,
    pub x_samples: Vec<f64>,
    pub r: f64,
    pub quadrature: Trapezoid,
    /// Ratio of the largest to the smallest scaled value tolerated as "bounded".
    pub growth_limit: f64,
}

impl KernelBoundConfig {
    /// Log-spaced times in `[t_min, t_max]` and evenly spaced half-line samples in `[0, x_max]`.
    pub fn new(t_min: f64, t_max: f64, n_t: usize, x_max: f64, n_x: usize, r: f64) -> Result<Self> {
        check_time(t_min)?;
        if t_max < t_min || n_t < 1 || n_x < 1 {
            return Err(Error::Config("empty kernel-check range".into()));
        }
        let t_values = if n_t == 1 {
            vec![t_min]
        } else {
            (0..n_t)
                .map(|k| t_min * (t_max / t_min).powf(k as f64 / (n_t - 1) as f64))
                .collect()
        };
        let x_samples = if n_x == 1 {
            vec![x_max]
        } else {
            (0..n_x).map(|k| x_max * k as f64 / (n_x - 1) as f64).collect()
        };
        Ok(Self { t_values, x_samples, r, quadrature: Trapezoid::default(), growth_limit: 10.0 })
    }
}

fn finish(name: &str, t_values: Vec<f64>, values: Vec<f64>, scaled: Vec<f64>, limit: f64) -> BoundReport {
    let sup_value = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled_sup = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled_inf = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let bounded = scaled.iter().all(|v| v.is_finite()) && scaled_sup <= limit * scaled_inf.max(1e-300);
    BoundReport {
        schema: 1,
        estimate_name: name.to_string(),
        t_values,
        values,
        scaled_values: scaled,
        sup_value,
        scaled_sup,
        bounded,
    }
}

fn half_line_window(t: f64, x: f64, r: f64) -> (f64, f64) {
    let w = 12.0 * t.sqrt() + 12.0 * t * r.abs();
    ((x - w).max(0.0), x + w)
}

/// `sup_x int_0^inf e^{-r(x-y)} |dG/dy|(t, x, y) dy` for each `t`, scaled by `sqrt(t)`.
pub fn weighted_derivative_bound(cfg: &KernelBoundConfig) -> Result<BoundReport> {
    let r = cfg.r;
    let mut values = Vec::with_capacity(cfg.t_values.len());
    for &t in &cfg.t_values {
        check_time(t)?;
        let mut best = 0.0f64;
        for &x in &cfg.x_samples {
            let (lo, hi) = half_line_window(t, x, r);
            let f = |y: f64| (-r * (x - y)).exp() * deriv_y_unchecked(KernelKind::HalfLine, t, x, y, 0).abs();
            let v = cfg.quadrature.integrate_split(f, lo, hi, &[x])?;
            best = best.max(v);
        }
        values.push(best);
    }
    let scaled = cfg.t_values.iter().zip(&values).map(|(t, v)| v * t.sqrt()).collect();
    Ok(finish("half_line_weighted_derivative", cfg.t_values.clone(), values, scaled, cfg.growth_limit))
}

/// Compact analogue: `sup_x int_0^1 |dH/dy| dy`, scaled by `sqrt(t)`.
pub fn compact_derivative_bound(cfg: &KernelBoundConfig) -> Result<BoundReport> {
    let mut values = Vec::with_capacity(cfg.t_values.len());
    for &t in &cfg.t_values {
        check_time(t)?;
        let n = default_images(t);
        let mut best = 0.0f64;
        for &x in cfg.x_samples.iter().filter(|x| (0.0..=1.0).contains(*x)) {
            let f = |y: f64| deriv_y_unchecked(KernelKind::Compact, t, x, y, n).abs();
            let v = cfg.quadrature.integrate_split(f, 0.0, 1.0, &[x])?;
            best = best.max(v);
        }
        values.push(best);
    }
    let scaled = cfg.t_values.iter().zip(&values).map(|(t, v)| v * t.sqrt()).collect();
    Ok(finish("compact_derivative", cfg.t_values.clone(), values, scaled, cfg.growth_limit))
}

/// `sup_x int_0^t int_0^inf e^{-2r(x-z)} G(u, x, z)^2 dz du`, scaled by `t^{-1/2}`. The time
/// integral uses `u = s^2` to remove the `u^{-1/2}` singularity.
fn half_line_l2(cfg: &KernelBoundConfig) -> Result<BoundReport> {
    let r = cfg.r;
    let inner_q = Trapezoid { rel_tol: 1e-8, ..cfg.quadrature };
    let outer_q = Trapezoid { rel_tol: 1e-6, initial_intervals: 8, ..cfg.quadrature };
    let mut values = Vec::with_capacity(cfg.t_values.len());
    for &t in &cfg.t_values {
        check_time(t)?;
        let mut best = 0.0f64;
        for &x in &cfg.x_samples {
            // the kernel vanishes identically on the Dirichlet boundary
            if x <= 0.0 {
                continue;
            }
            let inner = |u: f64| -> Result<f64> {
                if u <= 0.0 {
                    return Ok(0.0);
                }
                let (lo, hi) = half_line_window(u, x, r);
                inner_q.integrate_split(
                    |z| {
                        let k = (-r * (x - z)).exp() * g_unchecked(u, x, z);
                        k * k
                    },
                    lo,
                    hi,
                    &[x],
                )
            };
            let failure = std::cell::Cell::new(None);
            let v = outer_q.integrate(
                |s| {
                    if s <= 0.0 {
                        // limit of 2 s * int K(s^2)^2 as s -> 0
                        return if x > 0.0 { 1.0 / (2.0 * std::f64::consts::PI).sqrt() } else { 0.0 };
                    }
                    match inner(s * s) {
                        Ok(v) => 2.0 * s * v,
                        Err(e) => {
                            failure.set(Some(e));
                            0.0
                        }
                    }
                },
                0.0,
                t.sqrt(),
            );
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            best = best.max(v?);
        }
        values.push(best);
    }
    let scaled = cfg.t_values.iter().zip(&values).map(|(t, v)| v / t.sqrt()).collect();
    Ok(finish("half_line_l2_time", cfg.t_values.clone(), values, scaled, cfg.growth_limit))
}

pub fn half_line_l2_time_bound(cfg: &KernelBoundConfig) -> Result<BoundReport> {
    half_line_l2(cfg)
}

/// Compact analogue without weight. Uses `int_0^1 H(u, x, z)^2 dz = H(2u, x, x)`
/// (symmetry plus the semigroup property), leaving a single time integral.
pub fn compact_l2_time_bound(cfg: &KernelBoundConfig) -> Result<BoundReport> {
    let q = Trapezoid { rel_tol: 1e-8, initial_intervals: 8, ..cfg.quadrature };
    let mut values = Vec::with_capacity(cfg.t_values.len());
    for &t in &cfg.t_values {
        check_time(t)?;
        let n = default_images(2.0 * t);
        let mut best = 0.0f64;
        for &x in cfg.x_samples.iter().filter(|&&x| x > 0.0 && x < 1.0) {
            let v = q.integrate(
                |s| if s <= 0.0 { 1.0 / (2.0 * std::f64::consts::PI).sqrt() } else { 2.0 * s * h_unchecked(2.0 * s * s, x, x, n) },
                0.0,
                t.sqrt(),
            )?;
            best = best.max(v);
        }
        values.push(best);
    }
    let scaled = cfg.t_values.iter().zip(&values).map(|(t, v)| v / t.sqrt()).collect();
    Ok(finish("compact_l2_time", cfg.t_values.clone(), values, scaled, cfg.growth_limit))
}

/// Space modulus on `[0, 1]`: for each separation `d` in `separations`,
/// `sup_x int_0^T int_0^1 (H(u, x, z) - H(u, x + d, z))^2 dz du`, scaled by `1/d`.
/// The space integral collapses to `H(2u, x, x) - 2 H(2u, x, x + d) + H(2u, x + d, x + d)`.
pub fn compact_space_modulus(horizon: f64, separations: &[f64], x_samples: &[f64]) -> Result<BoundReport> {
    check_time(horizon)?;
    let n = default_images(2.0 * horizon);
    let q = Trapezoid { rel_tol: 1e-8, abs_tol: 1e-16, initial_intervals: 8, ..Trapezoid::default() };
    let mut values = Vec::with_capacity(separations.len());
    for &d in separations {
        let mut best = 0.0f64;
        for &x in x_samples.iter().filter(|&&x| x >= 0.0 && x + d <= 1.0) {
            let y = x + d;
            // each interior point contributes 1/sqrt(2 pi) as s -> 0
            let interior = [x, y].iter().filter(|&&p| p > 0.0 && p < 1.0).count() as f64;
            let limit = interior / (2.0 * std::f64::consts::PI).sqrt();
            let v = q.integrate(
                |s| {
                    if s <= 0.0 {
                        return limit;
                    }
                    let u = 2.0 * s * s;
                    let sq = h_unchecked(u, x, x, n) - 2.0 * h_unchecked(u, x, y, n) + h_unchecked(u, y, y, n);
                    2.0 * s * sq.max(0.0)
                },
                0.0,
                horizon.sqrt(),
            )?;
            best = best.max(v);
        }
        values.push(best);
    }
    let scaled = separations.iter().zip(&values).map(|(d, v)| v / d).collect();
    Ok(finish("compact_l2_space_modulus", separations.to_vec(), values, scaled, 10.0))
}

/// Runs the default battery of estimates used by the `kernel-check` command.
pub fn verify_kernel_bounds(cfg: &KernelBoundConfig) -> Result<Vec<BoundReport>> {
    let mut reports = vec![weighted_derivative_bound(cfg)?, compact_derivative_bound(cfg)?];
    let t_max = cfg.t_values.iter().cloned().fold(0.0, f64::max);
    let coarse = KernelBoundConfig {
        t_values: cfg.t_values.iter().step_by(2).cloned().collect(),
        x_samples: cfg.x_samples.iter().step_by(2).cloned().collect(),
        ..cfg.clone()
    };
    reports.push(half_line_l2_time_bound(&coarse)?);
    reports.push(compact_l2_time_bound(&coarse)?);
    reports.push(compact_space_modulus(t_max, &[0.01, 0.02, 0.04, 0.08], &[0.1, 0.3, 0.5, 0.7])?);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn semigroup_square_identity() {
        // int_0^1 H(u, x, z) H(u, y, z) dz = H(2u, x, y)
        let q = Trapezoid::with_tol(1e-12);
        for &(u, x, y) in &[(1e-3, 0.3, 0.32), (0.02, 0.5, 0.5), (0.2, 0.1, 0.8)] {
            let lhs = q.integrate_split(|z| h_unchecked(u, x, z, 10) * h_unchecked(u, y, z, 10), 0.0, 1.0, &[x, y]).unwrap();
            let rhs = h_unchecked(2.0 * u, x, y, 10);
            assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0), "{lhs} {rhs}");
        }
    }

    #[test]
    fn dirichlet_boundary_vanishes() {
        assert!(eval_h(0.01, 0.0, 0.5, 10).unwrap().abs() < 1e-15);
        assert!(eval_h(0.3, 1.0, 0.2, 10).unwrap().abs() < 1e-14);
        assert_eq!(eval_g(0.05, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_in_space_arguments() {
        for &t in &[1e-3, 0.05, 0.7] {
            let a = eval_h(t, 0.3, 0.7, 10).unwrap();
            let b = eval_h(t, 0.7, 0.3, 10).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn small_time_peak() {
        let v = eval_h(1e-4, 0.5, 0.5, 10).unwrap();
        let exact = 1.0 / (4.0 * PI * 1e-4).sqrt();
        assert!((v / exact - 1.0).abs() < 1e-6);
        // high-order series oracle
        let hi = eval_h(1e-4, 0.5, 0.5, 200).unwrap();
        assert!((v - hi).abs() < 1e-12);
    }

    #[test]
    fn half_line_values() {
        let v = eval_g(0.05, 1.0, 1.0).unwrap();
        let exact = (1.0 - (-20.0f64).exp()) / (0.2 * PI).sqrt();
        assert!((v - exact).abs() < 1e-14);
        let q = Trapezoid::default();
        let mass = q.integrate(|y| g_unchecked(0.01, 2.0, y), 0.0, 2.0 + 12.0 * 0.1).unwrap();
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
    }

    #[test]
    fn weighted_kernel() {
        for &(t, x, y) in &[(0.05, 1.0, 2.0), (0.1, 0.3, 0.2)] {
            assert_eq!(eval_g_r(t, x, y, 0.0).unwrap(), eval_g(t, x, y).unwrap());
        }
        let v = eval_g_r(0.05, 1.0, 2.0, 0.5).unwrap();
        assert!((v - 0.5f64.exp() * eval_g(0.05, 1.0, 2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn drift_shift_identity() {
        for &t in &[0.01, 0.05, 0.2] {
            for &x in &[0.0, 0.4, 1.3] {
                for &y in &[0.1, 0.5, 2.0] {
                    for &r in &[-1.0f64, 0.5, 2.0] {
                        let lhs = (-r * (x - y)).exp() * free_kernel(t, x, y);
                        let rhs = (r * r * t).exp() * free_kernel(t, x + 2.0 * r * t, y);
                        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{t} {x} {y} {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn non_positive_time_rejected() {
        assert!(matches!(eval_h(0.0, 0.1, 0.1, 3), Err(Error::NonPositiveTime(_))));
        assert!(matches!(eval_g(-1.0, 0.1, 0.1), Err(Error::NonPositiveTime(_))));
        assert!(deriv_y(KernelKind::Compact, 0.0, 0.1, 0.1, 3).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let (t, x, y) = (0.05, 0.8, 0.6);
        let h = 1e-5;
        let fd = (eval_g(t, x, y + h).unwrap() - eval_g(t, x, y - h).unwrap()) / (2.0 * h);
        let an = deriv_y(KernelKind::HalfLine, t, x, y, 0).unwrap();
        assert!((fd - an).abs() < 1e-6);
        let n = 8;
        let fd = (eval_h(t, x, y + h, n).unwrap() - eval_h(t, x, y - h, n).unwrap()) / (2.0 * h);
        let an = deriv_y(KernelKind::Compact, t, x, y, n).unwrap();
        assert!((fd - an).abs() < 1e-6);
    }

    #[test]
    fn derivative_mirror_antisymmetry() {
        // H(t, 1-x, 1-y) = H(t, x, y)  =>  dH/dy(t, x, y) = -dH/dy(t, 1-x, 1-y)
        for &(t, x, y) in &[(0.02, 0.3, 0.45), (0.2, 0.1, 0.8)] {
            let a = deriv_y(KernelKind::Compact, t, x, y, 10).unwrap();
            let b = deriv_y(KernelKind::Compact, t, 1.0 - x, 1.0 - y, 10).unwrap();
            assert!((a + b).abs() < 1e-10);
            // and matches the x-derivative of H(t, y, x) by finite differences
            let h = 1e-6;
            let fd = (eval_h(t, y + h, x, 10).unwrap() - eval_h(t, y - h, x, 10).unwrap()) / (2.0 * h);
            assert!((fd - a).abs() < 1e-5 * a.abs().max(1.0));
        }
    }

    #[test]
    fn derivative_vanishes_on_diagonal() {
        let v = deriv_y(KernelKind::HalfLine, 1e-4, 0.5, 0.5, 0).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn nonnegative_kernels() {
        for &t in &[1e-4, 1e-2, 0.5] {
            for i in 0..=20 {
                for k in 0..=20 {
                    let x = i as f64 / 20.0;
                    let y = k as f64 / 20.0;
                    assert!(eval_h(t, x, y, default_images(t)).unwrap() >= -1e-12);
                    assert!(eval_g(t, 3.0 * x, 3.0 * y).unwrap() >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn image_series_doubling() {
        for &t in &[0.01, 0.1, 1.0] {
            let n = images_for(t, 1e-12);
            for &(x, y) in &[(0.1, 0.9), (0.5, 0.5), (0.95, 0.05)] {
                let a = eval_h(t, x, y, n).unwrap();
                let b = eval_h(t, x, y, 2 * n).unwrap();
                assert!((a - b).abs() <= 1e-12, "t {t}");
            }
        }
    }

    #[test]
    fn cell_integral_matches_quadrature() {
        let q = Trapezoid::with_tol(1e-12);
        for &(t, x, lo, hi) in &[(1e-3, 0.5, 0.48, 0.52), (0.05, 0.2, 0.0, 1.0), (0.01, 0.9, 0.7, 0.95)] {
            let n = default_images(t);
            let exact = q.integrate(|y| h_unchecked(t, x, y, n), lo, hi).unwrap();
            let ci = cell_integral(KernelKind::Compact, t, x, lo, hi, n);
            assert!((exact - ci).abs() < 1e-10, "{exact} {ci}");
            let exact = q.integrate(|y| g_unchecked(t, x, y), lo, hi).unwrap();
            let ci = cell_integral(KernelKind::HalfLine, t, x, lo, hi, 0);
            assert!((exact - ci).abs() < 1e-10);
        }
    }

    #[test]
    fn mass_at_most_one() {
        let q = Trapezoid::default();
        for &t in &[1e-3, 0.05, 0.5] {
            for &x in &[0.0, 0.1, 0.5, 0.99] {
                let n = default_images(t);
                let m = q.integrate_split(|y| h_unchecked(t, x, y, n), 0.0, 1.0, &[x]).unwrap();
                assert!(m <= 1.0 + 1e-9);
                let (lo, hi) = half_line_window(t, 2.0 * x, 0.0);
                let m = q.integrate_split(|y| g_unchecked(t, 2.0 * x, y), lo, hi, &[2.0 * x]).unwrap();
                assert!(m <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn bound_report_sup_monotone_in_range() {
        let full = KernelBoundConfig::new(1e-3, 0.1, 5, 2.0, 5, 0.0).unwrap();
        let sub = KernelBoundConfig { t_values: full.t_values[1..4].to_vec(), ..full.clone() };
        let a = weighted_derivative_bound(&full).unwrap();
        let b = weighted_derivative_bound(&sub).unwrap();
        assert!(b.scaled_sup <= a.scaled_sup);
        assert!(b.sup_value <= a.sup_value);
    }
}
