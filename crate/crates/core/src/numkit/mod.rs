//! Deterministic numeric kernels: dense factorizations, singular values,
//! least squares, and seeded low-discrepancy sampling.

mod factor;
mod matrix;
mod sampler;
mod sobol;
mod svd;

pub use factor::{cholesky, lu_factor, solve_lower, solve_lower_transpose, LuFactor};
pub use matrix::{axpy_neg, dist, dot, norm2, Matrix};
pub use sampler::{sample_unit_cube, SampleMethod, SeededSampler};
pub use sobol::{sobol_points, sobol_unscrambled, MAX_SOBOL_DIMENSION};
pub use svd::{least_squares, svd_values, LeastSquaresSolution};

pub(crate) use factor::cholesky_in_place;
pub(crate) use svd::svd_right_vectors;

/// Errors from the numeric kernels.
#[derive(Debug, thiserror::Error)]
pub enum NumError {
    /// A Cholesky pivot was not positive; the matrix is not positive
    /// definite (often a sign of an ill-conditioned kernel matrix).
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// An LU pivot column was exactly zero.
    #[error("matrix is numerically singular (pivot {pivot})")]
    SingularMatrix { pivot: usize },

    /// Requested dimension exceeds the available Sobol direction numbers.
    #[error("dimension {requested} exceeds supported Sobol dimension {max}")]
    UnsupportedDimension { requested: usize, max: usize },
}
