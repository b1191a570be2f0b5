//! Seeded point samplers over the unit cube.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::sobol;
use super::NumError;

/// Point spacing strategy for unit-cube sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    Sobol,
    #[serde(alias = "lhs")]
    LatinHypercube,
    Uniform,
}

impl std::str::FromStr for SampleMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sobol" => Ok(Self::Sobol),
            "lhs" | "latin_hypercube" => Ok(Self::LatinHypercube),
            "uniform" => Ok(Self::Uniform),
            other => Err(format!("unknown spacing '{other}' (sobol|lhs|uniform)")),
        }
    }
}

impl std::fmt::Display for SampleMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sobol => "sobol",
            Self::LatinHypercube => "lhs",
            Self::Uniform => "uniform",
        })
    }
}

/// Deterministic sampler: identical `(method, seed, dimension, n)` always
/// yields identical output sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededSampler {
    pub method: SampleMethod,
    pub seed: u64,
    pub dimension: usize,
}

impl SeededSampler {
    pub fn new(method: SampleMethod, seed: u64, dimension: usize) -> Self {
        Self {
            method,
            seed,
            dimension,
        }
    }

    /// Draws `n` points in `[0,1)^d` as an `n x d` matrix.
    pub fn sample(&self, n: usize) -> Result<Matrix, NumError> {
        sample_unit_cube(self, n)
    }
}

/// Draws `n` points in `[0,1)^d`.
///
/// Sobol applies a seeded per-coordinate XOR digital shift; Latin hypercube
/// places exactly one point in each axis-aligned slab of width `1/n` per
/// coordinate; uniform draws i.i.d. coordinates.
pub fn sample_unit_cube(sampler: &SeededSampler, n: usize) -> Result<Matrix, NumError> {
    assert!(n >= 1, "need at least one sample");
    let d = sampler.dimension;
    assert!(d >= 1, "need dimension >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    match sampler.method {
        SampleMethod::Sobol => {
            let shift: Vec<u32> = (0..d).map(|_| rng.random()).collect();
            sobol::sobol_points(d, n, &shift)
        }
        SampleMethod::LatinHypercube => {
            let mut out = Matrix::zeros(n, d);
            let inv = 1.0 / n as f64;
            for j in 0..d {
                let mut slots: Vec<usize> = (0..n).collect();
                slots.shuffle(&mut rng);
                for (i, &slot) in slots.iter().enumerate() {
                    let jitter: f64 = rng.random();
                    out[(i, j)] = (slot as f64 + jitter) * inv;
                }
            }
            Ok(out)
        }
        SampleMethod::Uniform => {
            let mut out = Matrix::zeros(n, d);
            for v in out.data_mut() {
                *v = rng.random();
            }
            Ok(out)
        }
    }
}
