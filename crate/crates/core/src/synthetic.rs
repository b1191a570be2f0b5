//! Procedural benchmark generator: seeded inputs with controllable spacing
//! and skew, a response function with controllable variation, and the
//! sphere samplers used for interpolation/extrapolation queries.

use std::f64::consts::PI;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::numkit::{Matrix, NumError, SampleMethod, SeededSampler};

/// Generator parameters: dimension, sample count, spacing, seed, response
/// variation `omega`, and input skew `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub d: usize,
    pub n: usize,
    pub spacing: SampleMethod,
    pub seed: u64,
    pub omega: f64,
    pub alpha: f64,
}

/// Whether responses are evaluated at the skewed inputs (default) or at the
/// raw samples before skewing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewResponseMode {
    #[default]
    AfterSkew,
    BeforeSkew,
}

/// The benchmark response function.
///
/// `f(x) = 1/2 * ((1/d) * sum z_j^2 - prod cos(2 pi omega z_j))` with
/// `z_j = x_j - 1/2`. For `omega = 0` this is a paraboloid with minimum
/// value -1/2 at `(1/2, ..., 1/2)`; increasing `omega` shortens the cosine
/// period and adds variation.
pub fn response_function(x: &[f64], omega: f64) -> f64 {
    let d = x.len() as f64;
    let mut quad = 0.0;
    let mut prod = 1.0;
    for &xi in x {
        let z = xi - 0.5;
        quad += z * z;
        prod *= (2.0 * PI * omega * z).cos();
    }
    0.5 * (quad / d - prod)
}

/// Scales coordinate `j` (1-indexed) of every point by
/// `exp(-(j-1) * alpha / (d+1))`; the first coordinate is unchanged.
pub fn apply_skew(points: &Matrix, alpha: f64) -> Matrix {
    let d = points.cols();
    let factors: Vec<f64> = (0..d)
        .map(|j| (-(j as f64) * alpha / (d as f64 + 1.0)).exp())
        .collect();
    let mut out = points.clone();
    for i in 0..out.rows() {
        for (v, f) in out.row_mut(i).iter_mut().zip(&factors) {
            *v *= f;
        }
    }
    out
}

/// Generates the benchmark dataset for `spec` (responses at skewed inputs).
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Dataset, NumError> {
    generate_dataset_with(spec, SkewResponseMode::AfterSkew)
}

/// Generates the benchmark dataset with an explicit response-evaluation mode.
pub fn generate_dataset_with(
    spec: &SyntheticSpec,
    mode: SkewResponseMode,
) -> Result<Dataset, NumError> {
    assert!(spec.d >= 1 && spec.n >= 1, "need d >= 1 and n >= 1");
    assert!(
        spec.omega >= 0.0 && spec.alpha >= 0.0,
        "omega and alpha must be nonnegative"
    );
    let sampler = SeededSampler::new(spec.spacing, spec.seed, spec.d);
    let unit = sampler.sample(spec.n)?;
    // Affine map [0,1)^d -> [-1,1)^d.
    let mut raw = unit;
    for v in raw.data_mut() {
        *v = 2.0 * *v - 1.0;
    }
    let skewed = apply_skew(&raw, spec.alpha);
    let responses: Vec<f64> = match mode {
        SkewResponseMode::AfterSkew => (0..spec.n)
            .map(|i| response_function(skewed.row(i), spec.omega))
            .collect(),
        SkewResponseMode::BeforeSkew => (0..spec.n)
            .map(|i| response_function(raw.row(i), spec.omega))
            .collect(),
    };
    Ok(Dataset::new(skewed, responses).expect("generator output is finite"))
}

/// `count` points on the sphere of radius `radius` in `R^d`, drawn by
/// normalizing seeded standard Gaussian directions.
pub fn sample_sphere(d: usize, radius: f64, count: usize, seed: u64) -> Matrix {
    assert!(radius > 0.0 && count >= 1 && d >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Matrix::zeros(count, d);
    for i in 0..count {
        let row = out.row_mut(i);
        loop {
            let mut norm_sq = 0.0;
            for v in row.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *v = g;
                norm_sq += g * g;
            }
            if norm_sq > 0.0 {
                let scale = radius / norm_sq.sqrt();
                for v in row.iter_mut() {
                    *v *= scale;
                }
                break;
            }
        }
    }
    out
}
