//! Scattered-data interpolation with computable error bounds.
//!
//! The crate provides three interpolants over scattered training data in
//! `R^d` — piecewise-linear barycentric interpolation on the (implicit)
//! Delaunay structure, thin-plate-spline RBF interpolation with a linear
//! tail, and a Gaussian-kernel interpolant with posterior variance — plus a
//! ReLU MLP regressor used as a comparison baseline. Each interpolant comes
//! with a computable error estimate, which is the point: predictions are
//! paired with bounds so that regression and surrogate models can be
//! verified and interpreted.
//!
//! Supporting modules:
//!
//! * [`numkit`] — dense factorizations, singular values, least squares, and
//!   seeded low-discrepancy samplers shared by everything else.
//! * [`dataset`] — the training/query data model, CSV ingestion, and input
//!   and output rescaling.
//! * [`synthetic`] — a procedural benchmark generator with controllable
//!   spacing, skew, and response-function variation.
//! * [`geometry`] — convex-hull membership, hull projection, and Delaunay
//!   simplex location for a query point.
//! * [`harness`] — study drivers, the validation workflow, and CSV/JSON/SVG
//!   report emission backing the `scatterbound` CLI.
//!
//! Batch entry points split work with rayon when the `parallel` feature
//! (default) is enabled; all reductions are index-ordered so results are
//! identical to the sequential fallback.

pub mod dataset;
pub mod delaunay;
pub mod geometry;
pub mod gp;
pub mod harness;
pub mod mlp;
pub mod numkit;
pub mod par;
pub mod synthetic;
pub mod tps;

pub use dataset::{Dataset, Rescaler};
pub use geometry::{HullQueryResult, SimplexLocation};
pub use synthetic::SyntheticSpec;
