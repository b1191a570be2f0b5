//! Gaussian-kernel interpolant with a constant tail, maximum-likelihood
//! shape selection, and posterior-variance error estimates.
//!
//! The kernel is `exp(-||q - x||^2 / tau)`. No nugget is added: a failed
//! Cholesky marks a `tau` candidate infeasible instead of being regularized
//! away, preserving the interpolation property.

use serde::Serialize;

use crate::dataset::Dataset;
use crate::numkit::{cholesky_in_place, dist, dot, solve_lower, solve_lower_transpose, Matrix};
use crate::par;

const GRID_POINTS: usize = 32;
const REFINE_STARTS: usize = 3;
/// Relative tolerance of the golden-section refinement on tau.
const REFINE_REL_TOL: f64 = 1e-3;
const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, thiserror::Error)]
pub enum GpError {
    #[error("duplicate training points at indices {first} and {second}")]
    DuplicatePoints { first: usize, second: usize },
    /// No shape parameter in the search range admits a Cholesky
    /// factorization; the data is pathologically clustered.
    #[error("no feasible shape parameter in [{tau_lo:.3e}, {tau_hi:.3e}]")]
    AllInfeasible { tau_lo: f64, tau_hi: f64 },
}

/// Log-marginal likelihood outcome for one shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Likelihood {
    Value(f64),
    /// The kernel matrix is numerically singular at this `tau`; treated as
    /// negative infinity by the search. A value, not a fault.
    Infeasible,
}

/// A fitted Gaussian-kernel interpolant.
#[derive(Debug, Clone)]
pub struct GpModel {
    centers: Matrix,
    coefficients: Vec<f64>,
    tau: f64,
    tau_f: f64,
    t0: f64,
    cholesky_factor: Matrix,
    tau_range: (f64, f64),
}

/// Prediction with posterior variance and the 2-sigma interval half-width.
#[derive(Debug, Clone, Serialize)]
pub struct GpPrediction {
    pub mean: f64,
    /// Posterior variance, clamped at zero.
    pub variance: f64,
    /// `2 * sqrt(variance)`.
    pub bound_value: f64,
}

/// Squared distances between all training points (dense, symmetric).
fn squared_distances(data: &Dataset) -> Matrix {
    let n = data.len();
    let mut d2 = Matrix::zeros(n, n);
    let rows = par::map_range(0..n, |i| {
        let xi = data.point(i);
        let mut row = vec![0.0; n];
        for (j, r) in row.iter_mut().enumerate() {
            let dv = dist(xi, data.point(j));
            *r = dv * dv;
        }
        row
    });
    for (i, row) in rows.into_iter().enumerate() {
        d2.row_mut(i).copy_from_slice(&row);
    }
    d2
}

/// Kernel matrix for one `tau` from precomputed squared distances.
fn kernel_matrix(d2: &Matrix, tau: f64) -> Matrix {
    let n = d2.rows();
    let inv_tau = 1.0 / tau;
    let mut a = Matrix::zeros(n, n);
    {
        let src = d2.data();
        let dst = a.data_mut();
        par::for_each_row_chunk(dst, n, 8, |first_row, chunk| {
            let offset = first_row * n;
            let len = chunk.len();
            for (v, s) in chunk.iter_mut().zip(&src[offset..offset + len]) {
                *v = (-s * inv_tau).exp();
            }
        });
    }
    a
}

struct Evaluation {
    lml: f64,
    factor: Matrix,
    coefficients: Vec<f64>,
}

/// Factors the kernel matrix and evaluates the log-marginal likelihood of
/// the tail-removed responses; `None` when the Cholesky fails.
fn evaluate(d2: &Matrix, residuals: &[f64], tau: f64) -> Option<Evaluation> {
    let mut a = kernel_matrix(d2, tau);
    if cholesky_in_place(&mut a).is_err() {
        return None;
    }
    let n = residuals.len();
    let y = solve_lower(&a, residuals);
    let coefficients = solve_lower_transpose(&a, &y);
    let log_det_half: f64 = (0..n).map(|i| a[(i, i)].ln()).sum();
    let lml = -0.5 * dot(residuals, &coefficients)
        - log_det_half
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Some(Evaluation {
        lml,
        factor: a,
        coefficients,
    })
}

/// Log-marginal likelihood of the data at shape parameter `tau`.
pub fn log_marginal_likelihood(data: &Dataset, tau: f64) -> Likelihood {
    assert!(tau > 0.0, "tau must be positive");
    let d2 = squared_distances(data);
    let t0 = data.responses().iter().sum::<f64>() / data.len() as f64;
    let residuals: Vec<f64> = data.responses().iter().map(|y| y - t0).collect();
    match evaluate(&d2, &residuals, tau) {
        Some(e) => Likelihood::Value(e.lml),
        None => Likelihood::Infeasible,
    }
}

/// Fits the interpolant: the shape parameter maximizes the log-marginal
/// likelihood over `[min nonzero pairwise distance^2, 10 * max pairwise
/// distance^2]` via a 32-point logarithmic grid scan plus golden-section
/// refinement from the best three grid starts. Deterministic.
pub fn fit(data: &Dataset) -> Result<GpModel, GpError> {
    let n = data.len();
    assert!(n >= 2, "gp fit needs at least two points");
    let d2 = squared_distances(data);

    let mut min_d2 = f64::INFINITY;
    let mut max_d2 = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = d2[(i, j)];
            if v <= 0.0 {
                return Err(GpError::DuplicatePoints { first: i, second: j });
            }
            min_d2 = min_d2.min(v);
            max_d2 = max_d2.max(v);
        }
    }
    let tau_lo = min_d2;
    let tau_hi = 10.0 * max_d2;

    let t0 = data.responses().iter().sum::<f64>() / n as f64;
    let residuals: Vec<f64> = data.responses().iter().map(|y| y - t0).collect();
    let mean = t0;
    let tau_f = data
        .responses()
        .iter()
        .map(|y| (y - mean) * (y - mean))
        .sum::<f64>()
        / (n - 1) as f64;

    let ln_lo = tau_lo.ln();
    let ln_hi = tau_hi.ln();
    let mut best: Option<(f64, f64, Evaluation)> = None; // (lml, tau, eval)
    let try_tau = |tau: f64, best: &mut Option<(f64, f64, Evaluation)>| -> f64 {
        match evaluate(&d2, &residuals, tau) {
            Some(e) => {
                let lml = e.lml;
                if best.as_ref().is_none_or(|(b, _, _)| lml > *b) {
                    *best = Some((lml, tau, e));
                }
                lml
            }
            None => f64::NEG_INFINITY,
        }
    };

    // Grid scan.
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| {
            if GRID_POINTS == 1 {
                tau_lo
            } else {
                (ln_lo + (ln_hi - ln_lo) * k as f64 / (GRID_POINTS - 1) as f64).exp()
            }
        })
        .collect();
    let grid_lml: Vec<f64> = grid.iter().map(|&t| try_tau(t, &mut best)).collect();

    if best.is_none() {
        return Err(GpError::AllInfeasible { tau_lo, tau_hi });
    }

    // Golden-section refinement around the best three feasible grid points.
    let mut order: Vec<usize> = (0..GRID_POINTS).filter(|&k| grid_lml[k].is_finite()).collect();
    order.sort_by(|&a, &b| grid_lml[b].partial_cmp(&grid_lml[a]).unwrap());
    for &k in order.iter().take(REFINE_STARTS) {
        let mut a = if k == 0 { grid[0].ln() } else { grid[k - 1].ln() };
        let mut b = if k + 1 == GRID_POINTS {
            grid[GRID_POINTS - 1].ln()
        } else {
            grid[k + 1].ln()
        };
        if b <= a {
            continue;
        }
        let mut x1 = b - INV_GOLDEN * (b - a);
        let mut x2 = a + INV_GOLDEN * (b - a);
        let mut f1 = try_tau(x1.exp(), &mut best);
        let mut f2 = try_tau(x2.exp(), &mut best);
        while b - a > REFINE_REL_TOL {
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_GOLDEN * (b - a);
                f1 = try_tau(x1.exp(), &mut best);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_GOLDEN * (b - a);
                f2 = try_tau(x2.exp(), &mut best);
            }
        }
    }

    let (_, tau, eval) = best.expect("feasible evaluation exists");
    Ok(GpModel {
        centers: data.points().clone(),
        coefficients: eval.coefficients,
        tau,
        tau_f,
        t0,
        cholesky_factor: eval.factor,
        tau_range: (tau_lo, tau_hi),
    })
}

impl GpModel {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau_f(&self) -> f64 {
        self.tau_f
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tau_range(&self) -> (f64, f64) {
        self.tau_range
    }

    /// Builds a model directly from known parameters (no likelihood search);
    /// fails when the kernel matrix is not positive definite.
    pub fn with_tau(data: &Dataset, tau: f64, tau_f: f64) -> Option<GpModel> {
        let d2 = squared_distances(data);
        let t0 = data.responses().iter().sum::<f64>() / data.len() as f64;
        let residuals: Vec<f64> = data.responses().iter().map(|y| y - t0).collect();
        let eval = evaluate(&d2, &residuals, tau)?;
        Some(GpModel {
            centers: data.points().clone(),
            coefficients: eval.coefficients,
            tau,
            tau_f,
            t0,
            cholesky_factor: eval.factor,
            tau_range: (tau, tau),
        })
    }
}

/// Posterior mean, variance, and 2-sigma bound at `q`.
pub fn predict(model: &GpModel, q: &[f64]) -> GpPrediction {
    assert_eq!(q.len(), model.centers.cols(), "query dimension mismatch");
    let n = model.centers.rows();
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let r = dist(q, model.centers.row(i));
        *p = (-(r * r) / model.tau).exp();
    }
    let mean = dot(&model.coefficients, &phi) + model.t0;
    let v = solve_lower(&model.cholesky_factor, &phi);
    let variance = (model.tau_f * (1.0 - dot(&v, &v))).max(0.0);
    GpPrediction {
        mean,
        variance,
        bound_value: 2.0 * variance.sqrt(),
    }
}

/// Batch prediction over query rows; parallel when enabled.
pub fn predict_batch(model: &GpModel, queries: &Matrix) -> Vec<GpPrediction> {
    par::map_range(0..queries.rows(), |i| predict(model, queries.row(i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::cholesky;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn dataset(points: &[&[f64]], responses: &[f64]) -> Dataset {
        Dataset::new(Matrix::from_rows(points), responses.to_vec()).unwrap()
    }

    #[test]
    fn single_point_likelihood_closed_form() {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        // Tail removal sends the single response to zero, so the quadratic
        // term vanishes for any y; exercise the closed form directly.
        let data = dataset(&[&[0.0]], &[5.0]);
        match log_marginal_likelihood(&data, 1.0) {
            Likelihood::Value(v) => assert!((v + half_ln_2pi).abs() < 1e-12),
            other => panic!("{other:?}"),
        }

        // Raw formula with y = 2 and a unit matrix: -2 - 0 - half_ln_2pi.
        let d2 = Matrix::zeros(1, 1);
        let eval = evaluate(&d2, &[2.0], 1.0).unwrap();
        assert!((eval.lml - (-2.0 - half_ln_2pi)).abs() < 1e-12);
    }

    #[test]
    fn clustered_points_are_infeasible() {
        // Distance 1e-8 with tau = 1: the off-diagonal entry rounds to 1 and
        // the second pivot fails.
        let data = dataset(&[&[0.0], &[1e-8]], &[0.0, 1.0]);
        assert_eq!(log_marginal_likelihood(&data, 1.0), Likelihood::Infeasible);
    }

    #[test]
    fn likelihood_matches_brute_force_small_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in [2usize, 4, 8] {
            let pts = Matrix::from_fn(n, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let data = Dataset::new(pts, ys).unwrap();
            let tau = 0.8;
            let Likelihood::Value(lml) = log_marginal_likelihood(&data, tau) else {
                panic!("expected feasible");
            };

            // Brute force: explicit determinant (cofactor expansion) and
            // explicit inverse via Cramer solves.
            let t0 = data.responses().iter().sum::<f64>() / n as f64;
            let y: Vec<f64> = data.responses().iter().map(|v| v - t0).collect();
            let a = Matrix::from_fn(n, n, |i, j| {
                let r = dist(data.point(i), data.point(j));
                (-(r * r) / tau).exp()
            });
            let det = cofactor_det(&a);
            let mut quad = 0.0;
            for i in 0..n {
                // x_i from Cramer's rule: det(A with column i replaced by y).
                let mut ai = a.clone();
                for r in 0..n {
                    ai[(r, i)] = y[r];
                }
                quad += y[i] * cofactor_det(&ai) / det;
            }
            let brute =
                -0.5 * quad - 0.5 * det.ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            assert!((lml - brute).abs() < 1e-8, "n={n}: {lml} vs {brute}");
        }
    }

    fn cofactor_det(a: &Matrix) -> f64 {
        let n = a.rows();
        if n == 1 {
            return a[(0, 0)];
        }
        let mut det = 0.0;
        for j in 0..n {
            let minor = Matrix::from_fn(n - 1, n - 1, |r, c| {
                a[(r + 1, if c < j { c } else { c + 1 })]
            });
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * a[(0, j)] * cofactor_det(&minor);
        }
        det
    }

    #[test]
    fn fit_is_deterministic_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = Matrix::from_fn(24, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let ys: Vec<f64> = (0..24)
            .map(|i| (2.0 * pts.row(i)[0]).sin() + pts.row(i)[1])
            .collect();
        let data = Dataset::new(pts, ys).unwrap();
        let a = fit(&data).unwrap();
        let b = fit(&data).unwrap();
        assert_eq!(a.tau(), b.tau(), "refit must be bitwise identical");
        let (lo, hi) = a.tau_range();
        assert!(a.tau() >= lo && a.tau() <= hi);
    }

    #[test]
    fn two_point_search_range() {
        let data = dataset(&[&[0.0], &[1.0]], &[0.0, 1.0]);
        let model = fit(&data).unwrap();
        let (lo, hi) = model.tau_range();
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 10.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_known_shape_within_factor_three() {
        // Draw a sample from a known kernel via its Cholesky factor on a
        // 1-D grid, then check the MLE lands near the truth.
        let n = 64;
        let tau_star = 0.05;
        let pts = Matrix::from_fn(n, 1, |i, _| -1.0 + 2.0 * i as f64 / (n - 1) as f64);
        let a = Matrix::from_fn(n, n, |i, j| {
            let r = pts[(i, 0)] - pts[(j, 0)];
            (-(r * r) / tau_star).exp()
        });
        let l = cholesky(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let ys = {
            let mut y = vec![0.0; n];
            for i in 0..n {
                y[i] = dot(&l.row(i)[..=i], &xi[..=i]);
            }
            y
        };
        let data = Dataset::new(pts, ys).unwrap();
        let model = fit(&data).unwrap();
        let ratio = model.tau() / tau_star;
        assert!(
            (1.0 / 3.0..=3.0).contains(&ratio),
            "tau {} vs tau* {tau_star}",
            model.tau()
        );
    }

    #[test]
    fn interpolates_with_zero_variance_at_training_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let pts = Matrix::from_fn(20, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let ys: Vec<f64> = (0..20).map(|i| pts.row(i)[0] * pts.row(i)[1]).collect();
        let data = Dataset::new(pts, ys).unwrap();
        let model = fit(&data).unwrap();
        for i in 0..data.len() {
            let p = predict(&model, data.point(i));
            assert!((p.mean - data.response(i)).abs() < 1e-6, "mean at point {i}");
            assert!(p.variance < 1e-8 * model.tau_f(), "variance at point {i}");
        }
    }

    #[test]
    fn far_queries_trend_to_the_training_mean() {
        let data = dataset(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], &[1.0, 2.0, 3.0]);
        let model = fit(&data).unwrap();
        let p = predict(&model, &[500.0, -500.0]);
        assert!((p.mean - model.t0()).abs() < 1e-9);
        assert!((p.variance - model.tau_f()).abs() < 1e-9 * model.tau_f());
    }

    #[test]
    fn single_center_closed_form_variance() {
        let data = dataset(&[&[0.0]], &[3.0]);
        let model = GpModel {
            centers: data.points().clone(),
            coefficients: vec![0.0],
            tau: 0.5,
            tau_f: 2.0,
            t0: 3.0,
            cholesky_factor: Matrix::identity(1),
            tau_range: (0.5, 0.5),
        };
        for q in [0.1, 0.7, 2.0] {
            let p = predict(&model, &[q]);
            assert!((p.mean - 3.0).abs() < 1e-12);
            let want = 2.0 * (1.0 - (-2.0 * q * q / 0.5).exp());
            assert!((p.variance - want).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn variance_is_monotone_in_distance_for_one_center() {
        let data = dataset(&[&[0.0]], &[3.0]);
        let model = GpModel {
            centers: data.points().clone(),
            coefficients: vec![0.0],
            tau: 1.0,
            tau_f: 1.0,
            t0: 3.0,
            cholesky_factor: Matrix::identity(1),
            tau_range: (1.0, 1.0),
        };
        let mut prev = -1.0;
        for k in 0..20 {
            let p = predict(&model, &[0.1 * k as f64]);
            assert!(p.variance >= prev);
            assert!(p.variance <= 1.0 + 1e-12);
            prev = p.variance;
        }
    }

    #[test]
    fn duplicates_rejected() {
        let data = dataset(&[&[0.5], &[0.5], &[1.0]], &[1.0, 1.0, 2.0]);
        assert!(matches!(
            fit(&data),
            Err(GpError::DuplicatePoints { first: 0, second: 1 })
        ));
    }
}
