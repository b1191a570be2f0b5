//! Piecewise-linear interpolation on the containing Delaunay simplex, with
//! a computable per-query error bound and full diagnostics.
//!
//! The bound combines a local curvature estimate (max three-point divided
//! difference over the simplex vertices), the mean singular value of the
//! simplex edge matrix, the simplex diameter, and — for extrapolation
//! queries — a Lipschitz term on the projection residual:
//!
//! ```text
//!   bound = (g/2) h^2 + (sqrt(d) g / 2) (k / s) h^2 + L * residual
//! ```
//!
//! This is an average-case estimate, not a certificate; it can be violated.

use serde::Serialize;

use crate::dataset::Dataset;
use crate::geometry::{delaunay_locate, GeometryError, SimplexLocation};
use crate::numkit::{dist, svd_values, Matrix};
use crate::par;

#[derive(Debug, thiserror::Error)]
pub enum DelaunayError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// The simplex edge matrix collapsed; the bound is undefined.
    #[error("degenerate simplex: mean singular value {sigma_hat:.3e}")]
    SingularSimplex { sigma_hat: f64 },
}

/// Which diameter feeds the squared term of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiameterExtent {
    /// Diameter of the containing simplex (per-query, the default).
    #[default]
    LocalSimplex,
    /// Diameter of the whole training set; the conservative global reading,
    /// available for comparison.
    GlobalData,
}

/// Components of the error bound, kept for interpretability.
#[derive(Debug, Clone, Serialize)]
pub struct DelaunayBoundParts {
    /// Local gradient-Lipschitz estimate from divided differences.
    pub gamma_hat: f64,
    /// Mean singular value of the simplex edge matrix.
    pub sigma_hat: f64,
    /// Longest edge from the base vertex.
    pub k: f64,
    /// Simplex diameter (or data diameter under `GlobalData`).
    pub h: f64,
    /// Global Lipschitz estimate scaling the extrapolation term.
    pub lipschitz: f64,
    /// Extrapolation residual; zero for interior queries.
    pub residual: f64,
    pub bound_value: f64,
}

/// A prediction with its bound and the contributing vertices.
#[derive(Debug, Clone)]
pub struct DelaunayPrediction {
    pub value: f64,
    pub location: SimplexLocation,
    pub bound: DelaunayBoundParts,
    /// `(data index, weight, response)` per contributing vertex.
    pub contributing: Vec<(usize, f64, f64)>,
}

/// Predicts at `q` as the barycentric combination of the located simplex's
/// responses. `lipschitz` scales the extrapolation term of the bound (see
/// [`crate::tps::lipschitz_estimate`], shared across methods).
pub fn predict(
    q: &[f64],
    data: &Dataset,
    lipschitz: f64,
) -> Result<DelaunayPrediction, DelaunayError> {
    let location = delaunay_locate(q, data)?;
    let value: f64 = location
        .vertex_indices
        .iter()
        .zip(&location.weights)
        .map(|(&i, &w)| w * data.response(i))
        .sum();
    let bound = error_bound(&location, data, lipschitz)?;
    let contributing = location
        .vertex_indices
        .iter()
        .zip(&location.weights)
        .map(|(&i, &w)| (i, w, data.response(i)))
        .collect();
    Ok(DelaunayPrediction {
        value,
        location,
        bound,
        contributing,
    })
}

/// Batch prediction over query rows; parallel when enabled.
pub fn predict_batch(
    queries: &Matrix,
    data: &Dataset,
    lipschitz: f64,
) -> Vec<Result<DelaunayPrediction, DelaunayError>> {
    par::map_range(0..queries.rows(), |i| predict(queries.row(i), data, lipschitz))
}

/// Local gradient-Lipschitz estimate: the max over ordered vertex triples
/// `(a, b, c)` of the three-point divided difference
/// `2 |(f(c)-f(b))/||c-b|| - (f(b)-f(a))/||b-a||| / ||c-a||`.
///
/// Degenerate triples (repeated points) are skipped; fewer than three
/// distinct vertices yield 0. A 1-D caller can append a neighboring data
/// index to obtain the single second divided difference.
pub fn local_gamma(vertex_indices: &[usize], data: &Dataset) -> f64 {
    let k = vertex_indices.len();
    if k < 3 {
        return 0.0;
    }
    let mut pair = vec![0.0; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            let dv = dist(
                data.point(vertex_indices[i]),
                data.point(vertex_indices[j]),
            );
            pair[i * k + j] = dv;
            pair[j * k + i] = dv;
        }
    }
    let f: Vec<f64> = vertex_indices.iter().map(|&i| data.response(i)).collect();
    let mut gamma: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            if b == a {
                continue;
            }
            let d_ab = pair[a * k + b];
            if d_ab == 0.0 {
                continue;
            }
            let slope_ab = (f[b] - f[a]) / d_ab;
            for c in 0..k {
                if c == a || c == b {
                    continue;
                }
                let d_bc = pair[b * k + c];
                let d_ac = pair[a * k + c];
                if d_bc == 0.0 || d_ac == 0.0 {
                    continue;
                }
                let slope_bc = (f[c] - f[b]) / d_bc;
                gamma = gamma.max(2.0 * (slope_bc - slope_ab).abs() / d_ac);
            }
        }
    }
    gamma
}

/// Evaluates the revised bound for a located simplex.
pub fn error_bound(
    location: &SimplexLocation,
    data: &Dataset,
    lipschitz: f64,
) -> Result<DelaunayBoundParts, DelaunayError> {
    error_bound_with(location, data, lipschitz, DiameterExtent::LocalSimplex)
}

/// Same as [`error_bound`] with an explicit diameter extent.
pub fn error_bound_with(
    location: &SimplexLocation,
    data: &Dataset,
    lipschitz: f64,
    extent: DiameterExtent,
) -> Result<DelaunayBoundParts, DelaunayError> {
    let idx = &location.vertex_indices;
    let k_count = idx.len();

    let h = match extent {
        DiameterExtent::LocalSimplex => max_pairwise(idx, data),
        DiameterExtent::GlobalData => {
            let all: Vec<usize> = (0..data.len()).collect();
            max_pairwise(&all, data)
        }
    };

    let base = location.base_vertex_index;
    let base_point = data.point(base);
    let mut k_edge: f64 = 0.0;
    for &i in idx {
        if i != base {
            k_edge = k_edge.max(dist(base_point, data.point(i)));
        }
    }

    // Edge matrix with columns x_j - base.
    let others: Vec<usize> = idx.iter().copied().filter(|&i| i != base).collect();
    let (sigma_hat, span_dim) = if others.is_empty() {
        (0.0, 0)
    } else {
        let a_t = Matrix::from_fn(data.dim(), others.len(), |r, c| {
            data.point(others[c])[r] - base_point[r]
        });
        let sv = svd_values(&a_t);
        let mean = sv.iter().sum::<f64>() / sv.len() as f64;
        (mean, others.len())
    };

    let gamma_hat = local_gamma(idx, data);
    let residual = location.residual;

    if k_count > 1 && sigma_hat < 1e-14 {
        return Err(DelaunayError::SingularSimplex { sigma_hat });
    }

    let interp_term = if span_dim == 0 {
        0.0
    } else {
        let dim_factor = (span_dim as f64).sqrt();
        0.5 * gamma_hat * h * h + 0.5 * dim_factor * gamma_hat * (k_edge / sigma_hat) * h * h
    };
    let bound_value = interp_term + lipschitz * residual;

    Ok(DelaunayBoundParts {
        gamma_hat,
        sigma_hat,
        k: k_edge,
        h,
        lipschitz,
        residual,
        bound_value,
    })
}

fn max_pairwise(indices: &[usize], data: &Dataset) -> f64 {
    let mut h: f64 = 0.0;
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            h = h.max(dist(data.point(i), data.point(j)));
        }
    }
    h
}
