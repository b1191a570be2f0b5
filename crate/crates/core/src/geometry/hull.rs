//! Convex-hull membership and projection onto the hull.

use crate::dataset::Dataset;
use crate::numkit::{dist, dot, Matrix};

use super::simplex_lp::{solve_simplex_lp, LpOutcome};
use super::GeometryError;

/// Hull feasibility tolerance for the membership LP.
pub(crate) const HULL_FEAS_TOL: f64 = 1e-9;
const FW_GAP_TOL: f64 = 1e-10;
const FW_MAX_ITERS: usize = 10_000;

/// Projection of a query onto the convex hull of the data.
#[derive(Debug, Clone)]
pub struct HullProjection {
    /// The projected point; equals the query when it lies inside.
    pub point: Vec<f64>,
    /// Distance from the query to the projection.
    pub residual: f64,
    /// Sparse convex weights over data indices expressing the projection.
    pub weights: Vec<(usize, f64)>,
}

/// Result of a hull membership query.
///
/// `hull_side` answers membership only; the projection is present for
/// inside queries (where it is trivial) and computed lazily via
/// [`project_to_hull`] otherwise.
#[derive(Debug, Clone)]
pub struct HullQueryResult {
    pub inside: bool,
    pub projection: Option<HullProjection>,
}

/// Translates points to the query and rescales; returns the scale.
pub(crate) fn translate_to_query(q: &[f64], data: &Dataset) -> (Matrix, f64) {
    let n = data.len();
    let d = data.dim();
    let mut a = Matrix::zeros(n, d);
    let mut scale = 0.0f64;
    for i in 0..n {
        let row = a.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = data.point(i)[j] - q[j];
            scale = scale.max(v.abs());
        }
    }
    if scale > 0.0 {
        let inv = 1.0 / scale;
        for v in a.data_mut() {
            *v *= inv;
        }
    } else {
        scale = 1.0;
    }
    (a, scale)
}

/// Decides whether `q` lies inside the convex hull of the data (boundary
/// counts as inside) via a feasibility linear program.
pub fn hull_side(q: &[f64], data: &Dataset) -> HullQueryResult {
    assert_eq!(q.len(), data.dim(), "query dimension mismatch");
    let (a, _) = translate_to_query(q, data);
    match solve_simplex_lp(&a, &vec![0.0; data.len()], HULL_FEAS_TOL) {
        LpOutcome::Optimal(sol) => {
            let weights: Vec<(usize, f64)> = sol
                .basis
                .iter()
                .copied()
                .zip(sol.weights.iter().copied())
                .filter(|&(_, w)| w > 0.0)
                .collect();
            HullQueryResult {
                inside: true,
                projection: Some(HullProjection {
                    point: q.to_vec(),
                    residual: 0.0,
                    weights,
                }),
            }
        }
        LpOutcome::Infeasible { .. } => HullQueryResult {
            inside: false,
            projection: None,
        },
    }
}

pub(crate) struct FwProjection {
    /// Convex weights over row indices, ascending, strictly positive.
    pub weights: Vec<(usize, f64)>,
    /// Projection point in the translated coordinates of `rows`.
    pub point: Vec<f64>,
    /// Final duality gap.
    pub gap: f64,
}

/// Minimizes `||sum_i w_i rows_i||` over the weight simplex by away-step
/// conditional gradient; the target is the origin of the translated frame.
pub(crate) fn fw_project(rows: &Matrix) -> FwProjection {
    let n = rows.rows();
    let d = rows.cols();

    let mut start = 0usize;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let ni = dot(rows.row(i), rows.row(i));
        if ni < best {
            best = ni;
            start = i;
        }
    }

    let mut w = vec![0.0f64; n];
    w[start] = 1.0;
    let mut active: Vec<usize> = vec![start];
    let mut p: Vec<f64> = rows.row(start).to_vec();
    let mut gap = f64::INFINITY;

    for iter in 0..FW_MAX_ITERS {
        if iter % 128 == 127 {
            // Refresh p and renormalize to absorb drift.
            let total: f64 = active.iter().map(|&i| w[i]).sum();
            for &i in &active {
                w[i] /= total;
            }
            p = vec![0.0; d];
            for &i in &active {
                let wi = w[i];
                for (pj, aj) in p.iter_mut().zip(rows.row(i)) {
                    *pj += wi * aj;
                }
            }
        }

        // Scores s_i = <rows_i, p>: the weight-space gradient of 1/2||p||^2.
        let scores: Vec<f64> = (0..n).map(|i| dot(rows.row(i), &p)).collect();
        let mut fw = 0usize;
        for i in 1..n {
            if scores[i] < scores[fw] {
                fw = i;
            }
        }
        let wg = dot(&p, &p);
        gap = wg - scores[fw];
        if gap < FW_GAP_TOL {
            break;
        }

        let mut away = active[0];
        for &i in &active {
            if scores[i] > scores[away] {
                away = i;
            }
        }
        let away_gap = scores[away] - wg;

        if gap >= away_gap {
            let dir: Vec<f64> = rows.row(fw).iter().zip(&p).map(|(x, pj)| x - pj).collect();
            let denom = dot(&dir, &dir);
            if denom <= 0.0 {
                break;
            }
            let gamma = (-dot(&p, &dir) / denom).clamp(0.0, 1.0);
            if gamma >= 1.0 {
                for &i in &active {
                    w[i] = 0.0;
                }
                active.clear();
                w[fw] = 1.0;
                active.push(fw);
                p = rows.row(fw).to_vec();
            } else {
                for &i in &active {
                    w[i] *= 1.0 - gamma;
                }
                if w[fw] == 0.0 {
                    active.push(fw);
                }
                w[fw] += gamma;
                for (pj, dj) in p.iter_mut().zip(&dir) {
                    *pj += gamma * dj;
                }
            }
        } else {
            let alpha = w[away];
            if alpha >= 1.0 {
                break;
            }
            let dir: Vec<f64> = p.iter().zip(rows.row(away)).map(|(pj, x)| pj - x).collect();
            let denom = dot(&dir, &dir);
            if denom <= 0.0 {
                break;
            }
            let gamma_max = alpha / (1.0 - alpha);
            let gamma = (-dot(&p, &dir) / denom).clamp(0.0, gamma_max);
            for &i in &active {
                w[i] *= 1.0 + gamma;
            }
            w[away] = alpha * (1.0 + gamma) - gamma;
            for (pj, dj) in p.iter_mut().zip(&dir) {
                *pj += gamma * dj;
            }
        }
        active.retain(|&i| {
            if w[i] > 1e-16 {
                true
            } else {
                w[i] = 0.0;
                false
            }
        });
        if active.is_empty() {
            w[fw] = 1.0;
            active.push(fw);
            p = rows.row(fw).to_vec();
        }
    }

    active.sort_unstable();
    let total: f64 = active.iter().map(|&i| w[i]).sum();
    let weights: Vec<(usize, f64)> = active
        .iter()
        .map(|&i| (i, w[i] / total))
        .filter(|&(_, wi)| wi > 0.0)
        .collect();
    let mut point = vec![0.0; d];
    for &(i, wi) in &weights {
        for (pj, xj) in point.iter_mut().zip(rows.row(i)) {
            *pj += wi * xj;
        }
    }
    FwProjection { weights, point, gap }
}

/// Projects `q` onto the convex hull of the data by away-step conditional
/// gradient over the weight simplex, to duality gap `1e-10` (in rescaled
/// coordinates) or 10,000 iterations.
///
/// On iteration exhaustion the achieved gap and the approximate projection
/// are reported through [`GeometryError::ConvergenceFailure`] so callers may
/// still use the result with a warning.
pub fn project_to_hull(q: &[f64], data: &Dataset) -> Result<HullProjection, GeometryError> {
    assert_eq!(q.len(), data.dim(), "query dimension mismatch");
    let (a, _) = translate_to_query(q, data);
    let fw = fw_project(&a);

    // Recombine in original coordinates for an exact convex expression.
    let mut point = vec![0.0; data.dim()];
    for &(i, wi) in &fw.weights {
        for (pj, xj) in point.iter_mut().zip(data.point(i)) {
            *pj += wi * xj;
        }
    }
    let residual = dist(&point, q);
    let projection = HullProjection {
        point,
        residual,
        weights: fw.weights,
    };
    if fw.gap < FW_GAP_TOL {
        Ok(projection)
    } else {
        Err(GeometryError::ConvergenceFailure {
            achieved_gap: fw.gap,
            projection: Box::new(projection),
        })
    }
}
