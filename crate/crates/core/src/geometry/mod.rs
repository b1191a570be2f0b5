//! Convex-hull membership, hull projection, and Delaunay simplex location.

mod hull;
mod locate;
mod simplex_lp;

pub use hull::{hull_side, project_to_hull, HullProjection, HullQueryResult};
pub use locate::{barycentric_weights, delaunay_locate, SimplexLocation};

/// Errors from the geometric engine.
#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    /// Hull projection ran out of iterations before reaching the duality
    /// gap; the approximate projection is still usable with a warning.
    #[error("hull projection did not converge (achieved gap {achieved_gap:.3e})")]
    ConvergenceFailure {
        achieved_gap: f64,
        projection: Box<HullProjection>,
    },

    /// The simplex edge matrix is rank deficient.
    #[error("simplex is numerically singular (smallest/largest singular value {smallest:.3e}/{largest:.3e})")]
    SingularSimplex { smallest: f64, largest: f64 },

    /// The location LP stayed infeasible even after hull projection; only
    /// reachable through severe round-off.
    #[error("location LP infeasible after projection (artificial sum {artificial_sum:.3e})")]
    LocationInfeasible { artificial_sum: f64 },
}
