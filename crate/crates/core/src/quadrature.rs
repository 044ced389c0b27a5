//! Adaptive trapezoid rule with interval halving.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_intervals: usize,
    pub max_levels: u32,
}

impl Default for Trapezoid {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-14, initial_intervals: 16, max_levels: 24 }
    }
}

impl Trapezoid {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }

    /// Halves the step until two successive estimates agree to `rel_tol`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let mut n = self.initial_intervals.max(1);
        let mut h = (b - a) / n as f64;
        let mut sum = 0.5 * (f(a) + f(b)) + (1..n).map(|k| f(a + k as f64 * h)).sum::<f64>();
        let mut estimate = sum * h;
        for level in 1..=self.max_levels {
            // new midpoints only
            let mid: f64 = (0..n).map(|k| f(a + (k as f64 + 0.5) * h)).sum();
            sum += mid;
            n *= 2;
            h *= 0.5;
            let next = sum * h;
            let diff = (next - estimate).abs();
            estimate = next;
            if !estimate.is_finite() {
                return Err(Error::QuadratureFailure { levels: level, estimate });
            }
            if level >= 2 && diff <= self.rel_tol * estimate.abs() + self.abs_tol {
                return Ok(estimate);
            }
        }
        Err(Error::QuadratureFailure { levels: self.max_levels, estimate })
    }

    /// Integrates over consecutive pieces split at `breaks` (any order; points
    /// outside `(a, b)` are ignored).
    pub fn integrate_split(
        &self,
        f: impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        breaks: &[f64],
    ) -> Result<f64> {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        let mut lo = a;
        for c in cuts {
            total += self.integrate(&f, lo, c)?;
            lo = c;
        }
        total += self.integrate(&f, lo, b)?;
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_points_in_any_order() {
        let q = Trapezoid::default();
        let a = q.integrate_split(|x| x * x, 0.0, 1.0, &[0.7, 0.37, 0.7, 2.0]).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn polynomial_and_gaussian() {
        let q = Trapezoid::default();
        let v = q.integrate(|x| x * x, 0.0, 1.0).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-9);
        let s = 0.01f64;
        let g = q
            .integrate(|x| (-(x - 0.5).powi(2) / (2.0 * s * s)).exp(), 0.0, 1.0)
            .unwrap();
        let exact = s * (2.0 * std::f64::consts::PI).sqrt();
        assert!((g / exact - 1.0).abs() < 1e-8);
    }

    #[test]
    fn non_convergent_fails() {
        let q = Trapezoid { max_levels: 3, ..Trapezoid::default() };
        let r = q.integrate(|x| (1.0 / x.max(1e-300)).sin(), 0.0, 1.0);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn split_matches_plain() {
        let q = Trapezoid::default();
        let a = q.integrate(|x| (x - 0.3).abs(), 0.0, 1.0);
        let b = q.integrate_split(|x| (x - 0.3).abs(), 0.0, 1.0, &[0.3]).unwrap();
        assert!((b - (0.045 + 0.245)).abs() < 1e-12);
        if let Ok(a) = a {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
