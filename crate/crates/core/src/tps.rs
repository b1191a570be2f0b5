//! Thin-plate-spline RBF interpolation with a linear tail, plus the
//! distance-based practical error bound and its ingredients (pairwise
//! Lipschitz estimate, Monte Carlo fill distance).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::numkit::{dist, dot, lu_factor, Matrix, NumError};
use crate::par;

/// Pairs drawn when the exact pairwise Lipschitz scan would exceed this.
const LIPSCHITZ_PAIR_BUDGET: usize = 10_000_000;
/// Exact scan limit; `n <= 4500` keeps pairs under the budget.
const LIPSCHITZ_EXACT_LIMIT: usize = 4500;
const LIPSCHITZ_SAMPLE_SEED: u64 = 0x5ca1_ab1e;

#[derive(Debug, thiserror::Error)]
pub enum TpsError {
    /// Two training points coincide; interpolation is ill-posed.
    #[error("duplicate training points at indices {first} and {second}")]
    DuplicatePoints { first: usize, second: usize },
    /// The kernel system solve left a large residual, signalling severe
    /// clustering of the training points.
    #[error("kernel system is near-singular (relative residual {relative_residual:.3e})")]
    NearSingularSystem { relative_residual: f64 },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Thin-plate kernel, extended continuously with `phi(0) = 0`.
#[inline]
pub fn kernel(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

/// A fitted thin-plate-spline interpolant.
#[derive(Debug, Clone)]
pub struct TpsModel {
    centers: Matrix,
    coefficients: Vec<f64>,
    tail_linear: Vec<f64>,
    tail_constant: f64,
    responses: Vec<f64>,
}

/// Fits the interpolant: a linear tail by least squares first, then the
/// kernel system on the tail residuals via a pivoted factorization.
pub fn fit(data: &Dataset) -> Result<TpsModel, TpsError> {
    let n = data.len();
    let d = data.dim();
    assert!(n >= d + 2, "thin-plate fit needs at least d+2 points");

    // Tail: least squares of [X | 1] against responses.
    let design = Matrix::from_fn(n, d + 1, |i, j| {
        if j < d {
            data.point(i)[j]
        } else {
            1.0
        }
    });
    let tail = crate::numkit::least_squares(&design, data.responses());
    let tail_linear = tail.x[..d].to_vec();
    let tail_constant = tail.x[d];

    let residuals: Vec<f64> = (0..n)
        .map(|i| data.response(i) - dot(&tail_linear, data.point(i)) - tail_constant)
        .collect();

    // Kernel matrix; duplicate detection rides along with the distances.
    let mut a = Matrix::zeros(n, n);
    let mut min_pair = (f64::INFINITY, 0usize, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = dist(data.point(i), data.point(j));
            if r < min_pair.0 {
                min_pair = (r, i, j);
            }
            let v = kernel(r);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    if n > 1 && min_pair.0 <= 1e-12 {
        return Err(TpsError::DuplicatePoints {
            first: min_pair.1,
            second: min_pair.2,
        });
    }

    let factor = lu_factor(a.clone())?;
    let coefficients = factor.solve(&residuals);

    // Solve-quality check: a large relative residual signals the clustering
    // regime where the kernel system is effectively singular.
    let back = a.matvec(&coefficients);
    let rhs_norm = residuals.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rhs_norm > 0.0 {
        let err = back
            .iter()
            .zip(&residuals)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        let relative_residual = err / rhs_norm;
        if relative_residual > 1e-6 {
            return Err(TpsError::NearSingularSystem { relative_residual });
        }
    }

    Ok(TpsModel {
        centers: data.points().clone(),
        coefficients,
        tail_linear,
        tail_constant,
        responses: data.responses().to_vec(),
    })
}

impl TpsModel {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn tail(&self) -> (&[f64], f64) {
        (&self.tail_linear, self.tail_constant)
    }

    pub fn training_responses(&self) -> &[f64] {
        &self.responses
    }
}

/// Evaluates the interpolant at `q`.
pub fn predict(model: &TpsModel, q: &[f64]) -> f64 {
    assert_eq!(q.len(), model.centers.cols(), "query dimension mismatch");
    let mut acc = dot(&model.tail_linear, q) + model.tail_constant;
    for (i, &c) in model.coefficients.iter().enumerate() {
        acc += c * kernel(dist(q, model.centers.row(i)));
    }
    acc
}

/// Batch evaluation over query rows; parallel when enabled.
pub fn predict_batch(model: &TpsModel, queries: &Matrix) -> Vec<f64> {
    par::map_range(0..queries.rows(), |i| predict(model, queries.row(i)))
}

/// Pairwise Lipschitz estimate `max |y_i - y_j| / ||x_i - x_j||`.
///
/// Exact over all pairs up to `n = 4500`; above that, 10^7 seeded random
/// pairs are sampled. Shared by the Delaunay extrapolation term.
pub fn lipschitz_estimate(data: &Dataset) -> Result<f64, TpsError> {
    let n = data.len();
    assert!(n >= 2, "need at least two points");
    if n <= LIPSCHITZ_EXACT_LIMIT {
        let per_row = par::map_range(0..n, |i| {
            let mut best: f64 = 0.0;
            let xi = data.point(i);
            let yi = data.response(i);
            for j in (i + 1)..n {
                let r = dist(xi, data.point(j));
                if r <= 1e-12 {
                    return Err((i, j));
                }
                best = best.max((data.response(j) - yi).abs() / r);
            }
            Ok(best)
        });
        let mut best: f64 = 0.0;
        for row in per_row {
            match row {
                Ok(v) => best = best.max(v),
                Err((first, second)) => {
                    return Err(TpsError::DuplicatePoints { first, second })
                }
            }
        }
        Ok(best)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(LIPSCHITZ_SAMPLE_SEED);
        let mut best: f64 = 0.0;
        let mut drawn = 0usize;
        while drawn < LIPSCHITZ_PAIR_BUDGET {
            let i = (rng.random::<u64>() % n as u64) as usize;
            let j = (rng.random::<u64>() % n as u64) as usize;
            if i == j {
                continue;
            }
            drawn += 1;
            let r = dist(data.point(i), data.point(j));
            if r <= 1e-12 {
                return Err(TpsError::DuplicatePoints { first: i.min(j), second: i.max(j) });
            }
            best = best.max((data.response(j) - data.response(i)).abs() / r);
        }
        Ok(best)
    }
}

/// Axis-aligned query region for the fill-distance estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b), "empty region");
        Self { lo, hi }
    }

    /// The cube `[-1,1]^d` used by the synthetic studies.
    pub fn symmetric_unit(d: usize) -> Self {
        Self::new(vec![-1.0; d], vec![1.0; d])
    }

    /// Bounding box of the training inputs.
    pub fn bounding_box(data: &Dataset) -> Self {
        let d = data.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for i in 0..data.len() {
            for (j, &v) in data.point(i).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        Self::new(lo, hi)
    }
}

/// Monte Carlo fill distance: the max over `m` seeded-uniform samples of the
/// region of the distance to the nearest training point. Monotone
/// nondecreasing in `m` for nested sample sets; approaches the true fill
/// distance from below.
pub fn fill_distance(data: &Dataset, region: &Region, m: usize, seed: u64) -> f64 {
    assert!(m >= 1);
    assert_eq!(region.lo.len(), data.dim(), "region dimension mismatch");
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Matrix::zeros(m, d);
    for i in 0..m {
        let row = samples.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *v = region.lo[j] + u * (region.hi[j] - region.lo[j]);
        }
    }
    let nearest = par::map_range(0..m, |i| {
        let s = samples.row(i);
        let mut best = f64::INFINITY;
        for k in 0..data.len() {
            best = best.min(dist(s, data.point(k)));
        }
        best
    });
    nearest.into_iter().fold(0.0, f64::max)
}

/// Components of the practical distance-based bound.
#[derive(Debug, Clone, Serialize)]
pub struct TpsBoundParts {
    pub lipschitz: f64,
    pub fill_distance: f64,
    pub bound_value: f64,
}

/// The practical bound `L * h * max(1, sqrt(|log h|))`.
///
/// The `|log h|` form keeps the bound real for `h < 1` and reduces to a
/// plain Lipschitz scale near `h = 1` while preserving the asymptotic rate.
pub fn practical_bound(lipschitz: f64, fill: f64) -> TpsBoundParts {
    assert!(lipschitz >= 0.0 && fill > 0.0);
    let factor = fill.ln().abs().sqrt().max(1.0);
    TpsBoundParts {
        lipschitz,
        fill_distance: fill,
        bound_value: lipschitz * fill * factor,
    }
}
