//! Singular values and least squares via one-sided Jacobi.
//!
//! One-sided Jacobi orthogonalizes matrix columns by plane rotations. It is
//! slower than bidiagonalization for large matrices but simple, accurate for
//! small singular values, and entirely adequate for the sizes used here
//! (simplex edge matrices, tails, Gram matrices; a few hundred at most).

use super::matrix::{dot, Matrix};

const ROTATION_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 100;
/// Relative threshold below which a singular value counts as zero.
const RANK_TOL: f64 = 1e-10;

/// Singular values in descending order; always defined for finite input.
///
/// Returns `min(rows, cols)` nonnegative values.
pub fn svd_values(m: &Matrix) -> Vec<f64> {
    let (mut values, _) = jacobi(m, false);
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    values
}

/// Singular values (descending) with matching right singular vectors.
///
/// Row `k` of the returned matrix is the right singular vector for value `k`
/// of the *tall orientation* of `m` (the input is transposed first when
/// `rows < cols`, so vectors always have length `min(rows, cols)`).
pub(crate) fn svd_right_vectors(m: &Matrix) -> (Vec<f64>, Matrix) {
    let (values, vt) = jacobi(m, true);
    let vt = vt.expect("vectors requested");
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    let sorted_values: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let mut sorted_vt = Matrix::zeros(vt.rows(), vt.cols());
    for (dst, &src) in order.iter().enumerate() {
        sorted_vt.row_mut(dst).copy_from_slice(vt.row(src));
    }
    (sorted_values, sorted_vt)
}

/// Runs one-sided Jacobi on the tall orientation of `m`.
///
/// Returns unsorted singular values; when `want_v` is set, also the rotated
/// identity whose rows are right singular vectors (unsorted).
fn jacobi(m: &Matrix, want_v: bool) -> (Vec<f64>, Option<Matrix>) {
    // Rows of `w` are the columns of the tall orientation.
    let mut w = if m.rows() >= m.cols() {
        m.transpose()
    } else {
        m.clone()
    };
    let c = w.rows();
    let mut vt = want_v.then(|| Matrix::identity(c));

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in (p + 1)..c {
                let app = dot(w.row(p), w.row(p));
                let aqq = dot(w.row(q), w.row(q));
                let apq = dot(w.row(p), w.row(q));
                if apq == 0.0 || apq * apq <= ROTATION_EPS * ROTATION_EPS * app * aqq {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = cos * t;
                rotate_rows(&mut w, p, q, cos, sin);
                if let Some(v) = vt.as_mut() {
                    rotate_rows(v, p, q, cos, sin);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let values: Vec<f64> = (0..c).map(|k| dot(w.row(k), w.row(k)).sqrt()).collect();
    (values, vt)
}

fn rotate_rows(w: &mut Matrix, p: usize, q: usize, cos: f64, sin: f64) {
    let cols = w.cols();
    let (lo, hi, flip) = if p < q { (p, q, false) } else { (q, p, true) };
    let (head, tail) = w.data_mut().split_at_mut(hi * cols);
    let row_lo = &mut head[lo * cols..(lo + 1) * cols];
    let row_hi = &mut tail[..cols];
    let (rp, rq): (&mut [f64], &mut [f64]) = if flip { (row_hi, row_lo) } else { (row_lo, row_hi) };
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = cos * x - sin * y;
        *b = sin * x + cos * y;
    }
}

/// Result of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquaresSolution {
    /// Minimizer of `||a x - b||_2`; minimum-norm when rank deficient.
    pub x: Vec<f64>,
    /// Detected numerical column rank.
    pub rank: usize,
    /// True when rank < cols; the solution is then the minimum-norm one.
    pub rank_deficient: bool,
    /// Singular values of `a`, descending.
    pub singular_values: Vec<f64>,
}

/// Solves `min ||a x - b||_2` for a tall (or square) matrix `a`.
pub fn least_squares(a: &Matrix, b: &[f64]) -> LeastSquaresSolution {
    assert!(
        a.rows() >= a.cols(),
        "least_squares needs rows >= cols ({}x{})",
        a.rows(),
        a.cols()
    );
    assert_eq!(a.rows(), b.len(), "rhs length differs from rows");
    let cols = a.cols();

    // Rows of `w` are columns of `a` rotated into A*V; row norms are the
    // singular values and `vt` accumulates V.
    let mut w = a.transpose();
    let mut vt = Matrix::identity(cols);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let app = dot(w.row(p), w.row(p));
                let aqq = dot(w.row(q), w.row(q));
                let apq = dot(w.row(p), w.row(q));
                if apq == 0.0 || apq * apq <= ROTATION_EPS * ROTATION_EPS * app * aqq {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = cos * t;
                rotate_rows(&mut w, p, q, cos, sin);
                rotate_rows(&mut vt, p, q, cos, sin);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..cols).map(|k| dot(w.row(k), w.row(k)).sqrt()).collect();
    let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
    let mut x = vec![0.0; cols];
    let mut rank = 0;
    for k in 0..cols {
        if sigma[k] > RANK_TOL * sigma_max && sigma[k] > 0.0 {
            rank += 1;
            // (A v_k)^T b / sigma_k^2 weights right vector v_k.
            let coef = dot(w.row(k), b) / (sigma[k] * sigma[k]);
            for (xj, &vkj) in x.iter_mut().zip(vt.row(k)) {
                *xj += coef * vkj;
            }
        }
    }
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    LeastSquaresSolution {
        x,
        rank,
        rank_deficient: rank < cols,
        singular_values: sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal_values() {
        assert_eq!(svd_values(&Matrix::identity(2)), vec![1.0, 1.0]);
        let d = Matrix::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(svd_values(&d), vec![3.0, 1.0]);
        assert_eq!(svd_values(&Matrix::zeros(2, 2)), vec![0.0, 0.0]);
    }

    #[test]
    fn rectangular_value_count() {
        let a = Matrix::from_fn(5, 3, |i, j| (i + 2 * j) as f64);
        assert_eq!(svd_values(&a).len(), 3);
        assert_eq!(svd_values(&a.transpose()).len(), 3);
    }

    #[test]
    fn orthogonal_similarity_preserves_diagonal() {
        // Q D Q^T has singular values equal to |diag| entries.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 12;
        let g = Matrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let q = orthogonalize(&g);
        let diag: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let d = Matrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 });
        let m = q.matmul(&d).matmul(&q.transpose());
        let mut vals = svd_values(&m);
        vals.reverse();
        for (v, want) in vals.iter().zip(&diag) {
            assert!((v - want).abs() < 1e-8, "{v} vs {want}");
        }
    }

    #[test]
    fn least_squares_exact_square() {
        let a = Matrix::identity(2);
        let sol = least_squares(&a, &[3.0, 4.0]);
        assert!((sol.x[0] - 3.0).abs() < 1e-12 && (sol.x[1] - 4.0).abs() < 1e-12);
        assert!(!sol.rank_deficient);
    }

    #[test]
    fn least_squares_mean_of_b() {
        let a = Matrix::from_rows(&[&[1.0], &[1.0], &[1.0]]);
        let sol = least_squares(&a, &[1.0, 2.0, 3.0]);
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_consistent_overdetermined() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let sol = least_squares(&a, &[1.0, 1.0, 2.0]);
        assert!((sol.x[0] - 1.0).abs() < 1e-10 && (sol.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn least_squares_residual_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Matrix::from_fn(20, 4, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let b: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let sol = least_squares(&a, &b);
        let ax = a.matvec(&sol.x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        for j in 0..4 {
            let col: Vec<f64> = (0..20).map(|i| a[(i, j)]).collect();
            assert!(dot(&col, &r).abs() < 1e-8);
        }
    }

    #[test]
    fn least_squares_flags_rank_deficiency() {
        // Second column is twice the first.
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]);
        let sol = least_squares(&a, &[1.0, 2.0, 3.0]);
        assert!(sol.rank_deficient);
        assert_eq!(sol.rank, 1);
        // Minimum-norm solution of x1 + 2 x2 = 1 under the column space.
        assert!((sol.x[0] - 0.2).abs() < 1e-10);
        assert!((sol.x[1] - 0.4).abs() < 1e-10);
    }

    fn orthogonalize(g: &Matrix) -> Matrix {
        // Gram-Schmidt over rows, then transpose: good enough for tests.
        let n = g.rows();
        let mut q = g.clone();
        for i in 0..n {
            for j in 0..i {
                let proj = dot(q.row(i), q.row(j));
                let rj = q.row(j).to_vec();
                for (a, b) in q.row_mut(i).iter_mut().zip(&rj) {
                    *a -= proj * b;
                }
            }
            let norm = dot(q.row(i), q.row(i)).sqrt();
            for a in q.row_mut(i) {
                *a /= norm;
            }
        }
        q.transpose()
    }
}
