//! Delaunay simplex location for a query point.
//!
//! The containing simplex is the support of an optimal basic solution to
//! the lifted linear program
//!
//! ```text
//!   min  sum_i w_i ||x_i - q||^2
//!   s.t. sum_i w_i (x_i - q) = 0,  sum_i w_i = 1,  w >= 0
//! ```
//!
//! which identifies the lower-convex-hull facet of the paraboloid lifting
//! pierced at `q`. Queries outside the hull are first projected onto it;
//! data spanning a lower-dimensional affine hull is detected and the
//! location runs inside that hull.

use crate::dataset::Dataset;
use crate::numkit::{dist, dot, least_squares, svd_right_vectors, Matrix};

use super::hull::{fw_project, translate_to_query, HULL_FEAS_TOL};
use super::simplex_lp::{solve_simplex_lp, LpOutcome};
use super::GeometryError;

/// Relative singular-value threshold for affine-rank detection.
const RANK_REL_TOL: f64 = 1e-10;

/// A located simplex: vertex indices, barycentric weights, and projection
/// diagnostics for extrapolation queries.
#[derive(Debug, Clone)]
pub struct SimplexLocation {
    /// Dataset indices of the simplex vertices, ascending. `d+1` entries for
    /// full-dimensional data, fewer when the data spans a lower-dimensional
    /// affine hull.
    pub vertex_indices: Vec<usize>,
    /// Barycentric weights aligned with `vertex_indices`.
    pub weights: Vec<f64>,
    /// Dataset index of the vertex chosen as the expansion base (the support
    /// vertex nearest the located point).
    pub base_vertex_index: usize,
    /// True when the query was projected (onto the hull, the data's affine
    /// hull, or both) before location.
    pub was_projected: bool,
    /// Extrapolation residual: distance from the query to the located point.
    pub residual: f64,
    /// Dimension of the affine hull the location ran in (`d` normally).
    pub effective_dim: usize,
    /// The point actually located: the query itself, or its projection.
    pub located_point: Vec<f64>,
}

/// Barycentric weights of `q` with respect to simplex `vertices` (rows).
///
/// Solves the edge-matrix system with columns `v_j - v_0` and sets
/// `w_0 = 1 - sum(w)`. Fails with [`GeometryError::SingularSimplex`] when
/// the smallest singular value falls below `1e-12` of the largest.
pub fn barycentric_weights(vertices: &Matrix, q: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let k = vertices.rows();
    let d = vertices.cols();
    assert!(k >= 1 && k <= d + 1, "need 1..=d+1 vertices");
    assert_eq!(q.len(), d, "query dimension mismatch");
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let base = vertices.row(0);
    let a_t = Matrix::from_fn(d, k - 1, |r, c| vertices[(c + 1, r)] - base[r]);
    let rhs: Vec<f64> = q.iter().zip(base).map(|(qi, b)| qi - b).collect();
    let sol = least_squares(&a_t, &rhs);
    let largest = sol.singular_values[0];
    let smallest = *sol.singular_values.last().unwrap();
    if smallest < 1e-12 * largest || largest == 0.0 {
        return Err(GeometryError::SingularSimplex { smallest, largest });
    }
    let mut weights = Vec::with_capacity(k);
    weights.push(1.0 - sol.x.iter().sum::<f64>());
    weights.extend_from_slice(&sol.x);
    Ok(weights)
}

/// Locates the Delaunay simplex containing `q` (or its hull projection).
pub fn delaunay_locate(q: &[f64], data: &Dataset) -> Result<SimplexLocation, GeometryError> {
    assert_eq!(q.len(), data.dim(), "query dimension mismatch");
    assert!(q.iter().all(|v| v.is_finite()), "query must be finite");
    let d = data.dim();
    let (rows, scale) = translate_to_query(q, data);

    // Affine-rank check on the centered data.
    let (rank, directions) = affine_rank(&rows);
    if rank == 0 {
        // All points coincide; locate on the lowest-index point.
        let located = data.point(0).to_vec();
        let residual = dist(&located, q);
        return Ok(SimplexLocation {
            vertex_indices: vec![0],
            weights: vec![1.0],
            base_vertex_index: 0,
            was_projected: residual > 0.0,
            residual,
            effective_dim: 0,
            located_point: located,
        });
    }

    let (local_rows, ortho_residual) = if rank < d {
        // Restrict to the affine hull spanned by the leading directions.
        let mut reduced = Matrix::zeros(rows.rows(), rank);
        for i in 0..rows.rows() {
            for r in 0..rank {
                reduced[(i, r)] = dot(directions.row(r), rows.row(i));
            }
        }
        // Offset of the translated query (origin) from the affine hull.
        let mut mean = vec![0.0; d];
        for i in 0..rows.rows() {
            for (m, v) in mean.iter_mut().zip(rows.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= rows.rows() as f64;
        }
        let mut perp = mean.clone();
        for r in 0..rank {
            let c = dot(directions.row(r), &mean);
            for (p, b) in perp.iter_mut().zip(directions.row(r)) {
                *p -= c * b;
            }
        }
        (reduced, dot(&perp, &perp).sqrt())
    } else {
        (rows, 0.0)
    };

    let core = locate_core(&local_rows)?;

    // Weights from a minimum-norm solve of the augmented system in local
    // coordinates; more accurate than the accumulated LP tableau.
    let k = core.basis.len();
    let aug = Matrix::from_fn(local_rows.cols() + 1, k, |r, c| {
        if r < local_rows.cols() {
            local_rows[(core.basis[c], r)]
        } else {
            1.0
        }
    });
    let mut rhs = core.target.clone();
    rhs.push(1.0);
    let weights = least_squares(&aug, &rhs).x;

    // Reassemble in original coordinates.
    let mut located = vec![0.0; d];
    for (&idx, &w) in core.basis.iter().zip(&weights) {
        for (l, x) in located.iter_mut().zip(data.point(idx)) {
            *l += w * x;
        }
    }
    let inplane = core.inplane_residual * scale;
    let ortho = ortho_residual * scale;
    let residual = (inplane * inplane + ortho * ortho).sqrt();
    let was_projected = core.projected || ortho > 1e-12 * scale;

    let mut base = core.basis[0];
    let mut base_dist = f64::INFINITY;
    for &idx in &core.basis {
        let dv = dist(data.point(idx), &located);
        if dv < base_dist {
            base_dist = dv;
            base = idx;
        }
    }

    Ok(SimplexLocation {
        vertex_indices: core.basis,
        weights,
        base_vertex_index: base,
        was_projected,
        residual: if was_projected { residual } else { 0.0 },
        effective_dim: rank,
        located_point: located,
    })
}

struct CoreLocation {
    basis: Vec<usize>,
    /// Location target in the local translated frame (origin, or the hull
    /// projection of the origin).
    target: Vec<f64>,
    projected: bool,
    inplane_residual: f64,
}

fn locate_core(rows: &Matrix) -> Result<CoreLocation, GeometryError> {
    let n = rows.rows();
    let cost: Vec<f64> = (0..n).map(|i| dot(rows.row(i), rows.row(i))).collect();
    match solve_simplex_lp(rows, &cost, HULL_FEAS_TOL) {
        LpOutcome::Optimal(sol) => Ok(CoreLocation {
            basis: sol.basis,
            target: vec![0.0; rows.cols()],
            projected: false,
            inplane_residual: 0.0,
        }),
        LpOutcome::Infeasible { .. } => {
            // Project the origin onto the hull, then locate the projection.
            // The recombined point is an exact convex combination, so the
            // second LP is feasible even if the gap tolerance was not met.
            let fw = fw_project(rows);
            let target = fw.point;
            let shifted = Matrix::from_fn(n, rows.cols(), |i, j| rows[(i, j)] - target[j]);
            let cost: Vec<f64> = (0..n)
                .map(|i| dot(shifted.row(i), shifted.row(i)))
                .collect();
            match solve_simplex_lp(&shifted, &cost, 1e-7) {
                LpOutcome::Optimal(sol) => Ok(CoreLocation {
                    basis: sol.basis,
                    inplane_residual: dot(&target, &target).sqrt(),
                    target,
                    projected: true,
                }),
                LpOutcome::Infeasible { artificial_sum } => {
                    Err(GeometryError::LocationInfeasible { artificial_sum })
                }
            }
        }
    }
}

/// Affine rank of the translated data plus the principal directions
/// (descending) of its centered Gram matrix.
fn affine_rank(rows: &Matrix) -> (usize, Matrix) {
    let n = rows.rows();
    let d = rows.cols();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(rows.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut gram = Matrix::zeros(d, d);
    let mut z = vec![0.0; d];
    for i in 0..n {
        for (zj, (v, m)) in z.iter_mut().zip(rows.row(i).iter().zip(&mean)) {
            *zj = v - m;
        }
        for r in 0..d {
            let zr = z[r];
            let grow = gram.row_mut(r);
            for (c, zc) in z.iter().enumerate() {
                grow[c] += zr * zc;
            }
        }
    }
    let (eigs, vt) = svd_right_vectors(&gram);
    let sigma1 = eigs[0].max(0.0).sqrt();
    if sigma1 == 0.0 {
        return (0, vt);
    }
    let rank = eigs
        .iter()
        .take_while(|&&e| e.max(0.0).sqrt() > RANK_REL_TOL * sigma1)
        .count();
    (rank.min(d), vt)
}
