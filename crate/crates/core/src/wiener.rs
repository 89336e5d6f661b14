//! Reproducible discretised Wiener paths.
//!
//! Increments are drawn from a ChaCha8 stream keyed on `(master_seed,
//! path_index)`: the seed selects the key, the path index selects the 64-bit
//! stream id. Each normal variate consumes exactly two 64-bit words (one
//! Box–Muller pair, cosine branch), so increment `(k, j)` sits at a fixed
//! position of its stream and can be regenerated in isolation.

use std::io::{self, Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridSpec;

#[derive(Debug, Error)]
pub enum WienerError {
    #[error("noise dimension must be >= 1")]
    ZeroNoiseDim,
    #[error("coarsening factor {factor} must be >= 2 and divide n_steps = {n_steps}")]
    BadFactor { factor: usize, n_steps: usize },
    #[error("coupling broken at level factor {factor}, step {step}, noise {noise}: coarse {coarse:e} != fine sum {fine:e}")]
    CouplingMismatch {
        factor: usize,
        step: usize,
        noise: usize,
        coarse: f64,
        fine: f64,
    },
    #[error("path dump: {0}")]
    Io(#[from] io::Error),
    #[error("path dump: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathProvenance {
    pub master_seed: u64,
    pub path_index: u64,
    /// Product of coarsening factors applied since generation.
    pub coarsening: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    grid: GridSpec,
    noise_dim: usize,
    /// Row-major `[n_steps × noise_dim]`.
    increments: Vec<f64>,
    provenance: PathProvenance,
}

impl WienerPath {
    /// Builds a path from explicit increments (row-major, `n_steps × noise_dim`).
    pub fn from_increments(
        grid: GridSpec,
        noise_dim: usize,
        increments: Vec<f64>,
        provenance: PathProvenance,
    ) -> Result<Self, WienerError> {
        if noise_dim == 0 {
            return Err(WienerError::ZeroNoiseDim);
        }
        if increments.len() != grid.n_steps() * noise_dim {
            return Err(WienerError::Format(format!(
                "expected {} increments, got {}",
                grid.n_steps() * noise_dim,
                increments.len()
            )));
        }
        Ok(Self {
            grid,
            noise_dim,
            increments,
            provenance,
        })
    }

    /// A path with every increment zero, for deterministic studies.
    pub fn zero(grid: GridSpec, noise_dim: usize, provenance: PathProvenance) -> Result<Self, WienerError> {
        Self::from_increments(grid, noise_dim, vec![0.0; grid.n_steps() * noise_dim], provenance)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn provenance(&self) -> PathProvenance {
        self.provenance
    }

    /// `W(t_{k+1}) − W(t_k)` for every noise component.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.noise_dim..(k + 1) * self.noise_dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.increments.chunks_exact(self.noise_dim)
    }

    /// Ascending-order sum of all increments of component `j`.
    pub fn total(&self, j: usize) -> f64 {
        self.rows().fold(0.0, |acc, row| acc + row[j])
    }

    /// Writes the debug dump: little-endian `u64` dim, m, N; `f64` T;
    /// `u64` master seed, path index; then row-major `f64` increments.
    pub fn write_binary<W: Write>(&self, dim: u64, mut w: W) -> Result<(), WienerError> {
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&(self.noise_dim as u64).to_le_bytes())?;
        w.write_all(&(self.n_steps() as u64).to_le_bytes())?;
        w.write_all(&self.grid.t_final().to_le_bytes())?;
        w.write_all(&self.provenance.master_seed.to_le_bytes())?;
        w.write_all(&self.provenance.path_index.to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump produced by [`WienerPath::write_binary`]; returns the
    /// recorded state dimension alongside the path.
    pub fn read_binary<R: Read>(mut r: R) -> Result<(u64, Self), WienerError> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8], WienerError> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let dim = u64::from_le_bytes(next(&mut r)?);
        let m = u64::from_le_bytes(next(&mut r)?) as usize;
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let t = f64::from_le_bytes(next(&mut r)?);
        let master_seed = u64::from_le_bytes(next(&mut r)?);
        let path_index = u64::from_le_bytes(next(&mut r)?);
        let grid = GridSpec::new(t, n).map_err(|e| WienerError::Format(e.to_string()))?;
        let mut increments = Vec::with_capacity(n * m);
        for _ in 0..n * m {
            increments.push(f64::from_le_bytes(next(&mut r)?));
        }
        let provenance = PathProvenance {
            master_seed,
            path_index,
            coarsening: 1,
        };
        Ok((dim, Self::from_increments(grid, m, increments, provenance)?))
    }
}

fn stream(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// two u64 per variate, two u32 words per u64
const WORDS_PER_NORMAL: u128 = 4;

pub fn generate_path(
    grid: GridSpec,
    noise_dim: usize,
    master_seed: u64,
    path_index: u64,
) -> Result<WienerPath, WienerError> {
    if noise_dim == 0 {
        return Err(WienerError::ZeroNoiseDim);
    }
    let sd = grid.step().sqrt();
    let mut rng = stream(master_seed, path_index);
    let increments = (0..grid.n_steps() * noise_dim)
        .map(|_| standard_normal(&mut rng) * sd)
        .collect();
    WienerPath::from_increments(
        grid,
        noise_dim,
        increments,
        PathProvenance {
            master_seed,
            path_index,
            coarsening: 1,
        },
    )
}

/// Regenerates increment `(k, j)` by seeking directly into its stream.
pub fn increment_at(grid: GridSpec, noise_dim: usize, master_seed: u64, path_index: u64, k: usize, j: usize) -> f64 {
    let mut rng = stream(master_seed, path_index);
    rng.set_word_pos(WORDS_PER_NORMAL * (k * noise_dim + j) as u128);
    standard_normal(&mut rng) * grid.step().sqrt()
}

/// Sums consecutive blocks of `factor` increments.
///
/// Power-of-two factors are applied as repeated pairwise (factor-2)
/// coarsening, so `coarsen(coarsen(p, 2), 2) == coarsen(p, 4)` bit for bit.
/// Other factors sum each block left to right.
pub fn coarsen_path(path: &WienerPath, factor: usize) -> Result<WienerPath, WienerError> {
    let n = path.n_steps();
    if factor < 2 || !n.is_multiple_of(factor) {
        return Err(WienerError::BadFactor { factor, n_steps: n });
    }
    if factor.is_power_of_two() {
        let mut current = halve(path);
        let mut remaining = factor / 2;
        while remaining > 1 {
            current = halve(&current);
            remaining /= 2;
        }
        Ok(current)
    } else {
        let m = path.noise_dim;
        let mut out = Vec::with_capacity(n / factor * m);
        for block in path.increments.chunks_exact(factor * m) {
            for j in 0..m {
                out.push(block.chunks_exact(m).fold(0.0, |acc, row| acc + row[j]));
            }
        }
        Ok(coarser(path, factor, out))
    }
}

fn halve(path: &WienerPath) -> WienerPath {
    let m = path.noise_dim;
    let mut out = Vec::with_capacity(path.increments.len() / 2);
    for pair in path.increments.chunks_exact(2 * m) {
        for j in 0..m {
            out.push(pair[j] + pair[m + j]);
        }
    }
    coarser(path, 2, out)
}

fn coarser(path: &WienerPath, factor: usize, increments: Vec<f64>) -> WienerPath {
    let grid = path
        .grid
        .coarsen(factor)
        .expect("factor checked against n_steps");
    WienerPath {
        grid,
        noise_dim: path.noise_dim,
        increments,
        provenance: PathProvenance {
            coarsening: path.provenance.coarsening * factor,
            ..path.provenance
        },
    }
}

/// Sum of `values[start..start + len]` in the order coarsening uses:
/// recursive halves for powers of two, left to right otherwise.
pub fn defined_order_sum(values: &[f64]) -> f64 {
    let len = values.len();
    if len == 0 {
        0.0
    } else if len == 1 {
        values[0]
    } else if len.is_power_of_two() {
        let (lo, hi) = values.split_at(len / 2);
        defined_order_sum(lo) + defined_order_sum(hi)
    } else {
        values.iter().fold(0.0, |acc, v| acc + v)
    }
}

/// Checks that every coarse increment equals the defined-order sum of the
/// fine increments it covers, with zero tolerance.
pub fn verify_coupling(fine: &WienerPath, coarse: &WienerPath) -> Result<(), WienerError> {
    let factor = fine.n_steps() / coarse.n_steps().max(1);
    if coarse.noise_dim != fine.noise_dim || coarse.n_steps() * factor != fine.n_steps() {
        return Err(WienerError::BadFactor {
            factor,
            n_steps: fine.n_steps(),
        });
    }
    let m = fine.noise_dim;
    let mut column = vec![0.0; factor];
    for k in 0..coarse.n_steps() {
        for j in 0..m {
            for (s, slot) in column.iter_mut().enumerate() {
                *slot = fine.increment(k * factor + s)[j];
            }
            let expected = defined_order_sum(&column);
            let got = coarse.increment(k)[j];
            if expected.to_bits() != got.to_bits() {
                return Err(WienerError::CouplingMismatch {
                    factor,
                    step: k,
                    noise: j,
                    coarse: got,
                    fine: expected,
                });
            }
        }
    }
    Ok(())
}
