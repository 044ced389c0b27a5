//! Discretized space-time white noise.
//!
//! Cell `(i, j)` covers `[t_i, t_{i+1}) x [x_j - dx/2, x_j + dx/2)` and holds
//! the cell average of the noise: a centered Gaussian with variance
//! `1 / (dx * dt)`. Samples come from a ChaCha8 keystream positioned at the
//! cell index, so any cell can be regenerated without replaying the ones
//! before it.

use ndarray::Array2;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::GridSpec;

/// Keystream words consumed per cell (two u64 uniforms for Box-Muller).
const WORDS_PER_CELL: u128 = 4;

/// Stream ids for the two profiles.
pub const STREAM_BID: u64 = 0;
pub const STREAM_ASK: u64 = 1;

/// Source of noise rows, one row per time step.
pub trait NoiseSource {
    /// Fills `out` (length `nx + 1`) with the noise row for time step `i`
    /// of the given stream.
    fn fill_row(&self, stream: u64, i: usize, out: &mut [f64]);
}

/// Noise generated on demand from `(seed, stream, i, j)`.
#[derive(Debug, Clone, Copy)]
pub struct SeededNoise {
    pub grid: GridSpec,
    pub seed: u64,
}

impl SeededNoise {
    pub fn new(grid: GridSpec, seed: u64) -> Self {
        Self { grid, seed }
    }

    fn scale(&self) -> f64 {
        1.0 / (self.grid.dx * self.grid.dt).sqrt()
    }
}

impl NoiseSource for SeededNoise {
    fn fill_row(&self, stream: u64, i: usize, out: &mut [f64]) {
        let nodes = self.grid.nodes();
        debug_assert_eq!(out.len(), nodes);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.set_word_pos((i as u128) * (nodes as u128) * WORDS_PER_CELL);
        let scale = self.scale();
        for v in out.iter_mut() {
            *v = scale * standard_normal(&mut rng);
        }
    }
}

/// Zero noise, for deterministic runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn fill_row(&self, _stream: u64, _i: usize, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Box-Muller from two 53-bit uniforms; consumes exactly four keystream words.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = 1.0 - (rng.next_u64() >> 11) as f64 * SCALE; // (0, 1]
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// One materialized realization of the noise, shape `(nt, nx + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub grid: GridSpec,
    pub seed: u64,
    pub stream: u64,
    pub xi: Array2<f64>,
}

impl NoiseField {
    pub fn sample(grid: GridSpec, seed: u64) -> Self {
        Self::sample_stream(grid, seed, STREAM_BID)
    }

    pub fn sample_stream(grid: GridSpec, seed: u64, stream: u64) -> Self {
        let source = SeededNoise::new(grid, seed);
        let mut xi = Array2::zeros((grid.nt, grid.nodes()));
        for (i, mut row) in xi.rows_mut().into_iter().enumerate() {
            source.fill_row(stream, i, row.as_slice_mut().expect("standard layout"));
        }
        Self { grid, seed, stream, xi }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, seed: 0, stream: 0, xi: Array2::zeros((grid.nt, grid.nodes())) }
    }

    /// Cell variance of the discretization, `1 / (dx * dt)`.
    pub fn cell_variance(&self) -> f64 {
        1.0 / (self.grid.dx * self.grid.dt)
    }
}

/// The pair of independent noises driving the bid and ask profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePair {
    pub bid: NoiseField,
    pub ask: NoiseField,
}

impl NoisePair {
    pub fn sample(grid: GridSpec, seed: u64) -> Self {
        Self {
            bid: NoiseField::sample_stream(grid, seed, STREAM_BID),
            ask: NoiseField::sample_stream(grid, seed, STREAM_ASK),
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { bid: NoiseField::zeros(grid), ask: NoiseField::zeros(grid) }
    }
}

impl NoiseSource for NoisePair {
    fn fill_row(&self, stream: u64, i: usize, out: &mut [f64]) {
        let field = if stream == STREAM_BID { &self.bid } else { &self.ask };
        out.copy_from_slice(field.xi.row(i).as_slice().expect("standard layout"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::compact(64, 0.1, 4096).unwrap()
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn deterministic_per_seed() {
        let a = NoiseField::sample(grid(), 42);
        let b = NoiseField::sample(grid(), 42);
        assert_eq!(a.xi, b.xi);
        let c = NoiseField::sample(grid(), 43);
        assert_ne!(a.xi, c.xi);
    }

    #[test]
    fn streams_differ() {
        let pair = NoisePair::sample(GridSpec::compact(8, 0.01, 400).unwrap(), 1);
        assert_ne!(pair.bid.xi, pair.ask.xi);
    }

    #[test]
    fn cell_addressable() {
        let g = grid();
        let field = NoiseField::sample(g, 9);
        let mut row = vec![0.0; g.nodes()];
        SeededNoise::new(g, 9).fill_row(STREAM_BID, 1234, &mut row);
        assert_eq!(field.xi.row(1234).to_vec(), row);
    }

    #[test]
    fn variance_and_mean() {
        let field = NoiseField::sample(grid(), 7);
        let xs: Vec<f64> = field.xi.iter().copied().collect();
        let (mean, var) = moments(&xs);
        let target = field.cell_variance();
        assert!((var / target - 1.0).abs() < 0.05, "var {var} target {target}");
        let bound = 4.0 * (target / xs.len() as f64).sqrt();
        assert!(mean.abs() <= bound, "mean {mean} bound {bound}");
    }

    #[test]
    fn variance_scales_with_dt() {
        let g1 = GridSpec::compact(64, 0.1, 4096).unwrap();
        let g2 = GridSpec::compact(64, 0.1, 8192).unwrap();
        let v1 = moments(&NoiseField::sample(g1, 3).xi.iter().copied().collect::<Vec<_>>()).1;
        let v2 = moments(&NoiseField::sample(g2, 3).xi.iter().copied().collect::<Vec<_>>()).1;
        assert!((v2 / v1 - 2.0).abs() < 0.1, "ratio {}", v2 / v1);
    }

    #[test]
    fn lag_one_autocorrelation_small() {
        let field = NoiseField::sample(grid(), 11);
        let xi = &field.xi;
        let var: f64 = xi.iter().map(|v| v * v).sum::<f64>();
        let (rows, cols) = xi.dim();
        let mut space = 0.0;
        let mut time = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                if j + 1 < cols {
                    space += xi[[i, j]] * xi[[i, j + 1]];
                }
                if i + 1 < rows {
                    time += xi[[i, j]] * xi[[i + 1, j]];
                }
            }
        }
        assert!((space / var).abs() <= 0.01, "space {}", space / var);
        assert!((time / var).abs() <= 0.01, "time {}", time / var);
    }
}
