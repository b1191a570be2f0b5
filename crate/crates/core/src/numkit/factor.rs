//! Dense Cholesky and LU factorizations.
//!
//! Both factorizations are right-looking and blocked; the trailing update is
//! the O(n^3) part and is split across rows with [`crate::par`], each row
//! owned by one task with a fixed accumulation order.

use super::matrix::{axpy_neg, dot, Matrix};
use super::NumError;
use crate::par;

const BLOCK: usize = 64;
/// Rows per parallel task in trailing updates.
const CHUNK_ROWS: usize = 16;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// The input is symmetrized as `(M + M^T) / 2` first to absorb round-off in
/// symmetric constructions. Fails with [`NumError::NotPositiveDefinite`] at
/// the first non-positive pivot.
pub fn cholesky(m: &Matrix) -> Result<Matrix, NumError> {
    assert_eq!(m.rows(), m.cols(), "cholesky needs a square matrix");
    let mut a = m.clone();
    a.symmetrize();
    cholesky_in_place(&mut a)?;
    Ok(a)
}

/// In-place Cholesky on the lower triangle; the strict upper triangle is
/// zeroed on success. The caller is responsible for symmetry.
pub(crate) fn cholesky_in_place(a: &mut Matrix) -> Result<(), NumError> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut k0 = 0;
    while k0 < n {
        let kb = BLOCK.min(n - k0);
        let k1 = k0 + kb;

        // Factor the diagonal block, columns k0..k1.
        for j in k0..k1 {
            let row_j = a.row(j);
            let s = row_j[j] - dot(&row_j[k0..j], &row_j[k0..j]);
            if s <= 0.0 || !s.is_finite() {
                return Err(NumError::NotPositiveDefinite { pivot: j });
            }
            let ljj = s.sqrt();
            a[(j, j)] = ljj;
            let pivot_seg: Vec<f64> = a.row(j)[k0..j].to_vec();
            for i in (j + 1)..k1 {
                let row_i = a.row_mut(i);
                let s2 = row_i[j] - dot(&row_i[k0..j], &pivot_seg);
                row_i[j] = s2 / ljj;
            }
        }
        if k1 == n {
            break;
        }

        // Panel solve: L21 = A21 * L11^{-T}, rows k1..n.
        let mut diag = vec![0.0; kb * kb];
        for j in 0..kb {
            diag[j * kb..j * kb + j + 1].copy_from_slice(&a.row(k0 + j)[k0..k0 + j + 1]);
        }
        {
            let cols = a.cols();
            let below = &mut a.data_mut()[k1 * cols..];
            par::for_each_row_chunk(below, cols, CHUNK_ROWS, |_, chunk| {
                for row in chunk.chunks_mut(cols) {
                    for j in 0..kb {
                        let s = row[k0 + j] - dot(&row[k0..k0 + j], &diag[j * kb..j * kb + j]);
                        row[k0 + j] = s / diag[j * kb + j];
                    }
                }
            });
        }

        // Copy the panel so the trailing update reads only finalized data.
        let below_rows = n - k1;
        let mut panel = vec![0.0; below_rows * kb];
        for r in 0..below_rows {
            panel[r * kb..(r + 1) * kb].copy_from_slice(&a.row(k1 + r)[k0..k1]);
        }

        // Trailing update: A22 -= L21 * L21^T on the lower triangle.
        let cols = a.cols();
        let below = &mut a.data_mut()[k1 * cols..];
        par::for_each_row_chunk(below, cols, CHUNK_ROWS, |first, chunk| {
            for (r, row) in chunk.chunks_mut(cols).enumerate() {
                let i = first + r; // row k1 + i globally
                let pi = &panel[i * kb..(i + 1) * kb];
                let mut j = 0;
                while j + 4 <= i + 1 {
                    let d = dot4(
                        pi,
                        &panel[j * kb..(j + 1) * kb],
                        &panel[(j + 1) * kb..(j + 2) * kb],
                        &panel[(j + 2) * kb..(j + 3) * kb],
                        &panel[(j + 3) * kb..(j + 4) * kb],
                    );
                    row[k1 + j] -= d[0];
                    row[k1 + j + 1] -= d[1];
                    row[k1 + j + 2] -= d[2];
                    row[k1 + j + 3] -= d[3];
                    j += 4;
                }
                while j <= i {
                    row[k1 + j] -= dot(pi, &panel[j * kb..(j + 1) * kb]);
                    j += 1;
                }
            }
        });

        k0 = k1;
    }

    for i in 0..n {
        for j in (i + 1)..n {
            a[(i, j)] = 0.0;
        }
    }
    Ok(())
}

/// Four simultaneous dot products sharing the left operand.
#[inline]
fn dot4(a: &[f64], b0: &[f64], b1: &[f64], b2: &[f64], b3: &[f64]) -> [f64; 4] {
    let mut acc = [0.0f64; 4];
    for ((((&av, &v0), &v1), &v2), &v3) in
        a.iter().zip(b0).zip(b1).zip(b2).zip(b3)
    {
        acc[0] += av * v0;
        acc[1] += av * v1;
        acc[2] += av * v2;
        acc[3] += av * v3;
    }
    acc
}

/// Solves `L x = b` by forward substitution (`L` lower triangular).
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut x = vec![0.0; n];
    for i in 0..n {
        let row = l.row(i);
        x[i] = (b[i] - dot(&row[..i], &x[..i])) / row[i];
    }
    x
}

/// Solves `L^T x = b` by backward substitution (`L` lower triangular).
pub fn solve_lower_transpose(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut x = b.to_vec();
    for j in (0..n).rev() {
        let xj = x[j] / l[(j, j)];
        x[j] = xj;
        let (head, _) = x.split_at_mut(j);
        axpy_neg(head, &l.row(j)[..j], xj);
    }
    x
}

/// LU factorization with partial pivoting.
pub struct LuFactor {
    lu: Matrix,
    perm: Vec<usize>,
}

/// Factors `a` as `P A = L U` with row pivoting.
pub fn lu_factor(mut a: Matrix) -> Result<LuFactor, NumError> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "lu_factor needs a square matrix");
    let mut perm: Vec<usize> = (0..n).collect();

    let mut k0 = 0;
    while k0 < n {
        let kb = BLOCK.min(n - k0);
        let k1 = k0 + kb;

        // Panel factorization with partial pivoting, columns k0..k1.
        for j in k0..k1 {
            let mut piv_row = j;
            let mut piv_val = a[(j, j)].abs();
            for i in (j + 1)..n {
                let v = a[(i, j)].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val < f64::MIN_POSITIVE {
                return Err(NumError::SingularMatrix { pivot: j });
            }
            if piv_row != j {
                perm.swap(j, piv_row);
                swap_rows(&mut a, j, piv_row);
            }
            let piv = a[(j, j)];
            let pivot_seg: Vec<f64> = a.row(j)[j + 1..k1].to_vec();
            let cols = a.cols();
            let below = &mut a.data_mut()[(j + 1) * cols..];
            par::for_each_row_chunk(below, cols, CHUNK_ROWS, |_, chunk| {
                for row in chunk.chunks_mut(cols) {
                    let lij = row[j] / piv;
                    row[j] = lij;
                    axpy_neg(&mut row[j + 1..k1], &pivot_seg, lij);
                }
            });
        }
        if k1 == n {
            break;
        }

        // U12: solve L11 * U12 = A12 row by row (L11 unit lower).
        for j in k0..k1 {
            let cols = a.cols();
            let (head, tail) = a.data_mut().split_at_mut(j * cols);
            let row_j = &mut tail[..cols];
            for t in k0..j {
                let ljt = row_j[t];
                if ljt != 0.0 {
                    axpy_neg(&mut row_j[k1..], &head[t * cols + k1..(t + 1) * cols], ljt);
                }
            }
        }

        // Trailing update: A22 -= L21 * U12.
        let right = a.cols() - k1;
        let mut u12 = vec![0.0; kb * right];
        for t in 0..kb {
            u12[t * right..(t + 1) * right].copy_from_slice(&a.row(k0 + t)[k1..]);
        }
        let below_rows = n - k1;
        let mut l21 = vec![0.0; below_rows * kb];
        for r in 0..below_rows {
            l21[r * kb..(r + 1) * kb].copy_from_slice(&a.row(k1 + r)[k0..k1]);
        }
        let cols = a.cols();
        let below = &mut a.data_mut()[k1 * cols..];
        par::for_each_row_chunk(below, cols, CHUNK_ROWS, |first, chunk| {
            for (r, row) in chunk.chunks_mut(cols).enumerate() {
                let li = &l21[(first + r) * kb..(first + r + 1) * kb];
                for (t, &lit) in li.iter().enumerate() {
                    if lit != 0.0 {
                        axpy_neg(&mut row[k1..], &u12[t * right..(t + 1) * right], lit);
                    }
                }
            }
        });

        k0 = k1;
    }

    Ok(LuFactor { lu: a, perm })
}

impl LuFactor {
    /// Solves `A x = b` using the stored factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // Forward: L y = P b, unit diagonal.
        for i in 1..n {
            let row = self.lu.row(i);
            x[i] -= dot(&row[..i], &x[..i]);
        }
        // Backward: U x = y.
        for j in (0..n).rev() {
            let xj = x[j] / self.lu[(j, j)];
            x[j] = xj;
            let (head, _) = x.split_at_mut(j);
            for (i, h) in head.iter_mut().enumerate() {
                *h -= self.lu[(i, j)] * xj;
            }
        }
        x
    }
}

fn swap_rows(a: &mut Matrix, i: usize, j: usize) {
    if i == j {
        return;
    }
    let cols = a.cols();
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let (head, tail) = a.data_mut().split_at_mut(hi * cols);
    head[lo * cols..(lo + 1) * cols].swap_with_slice(&mut tail[..cols]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let mut spd = a.matmul(&a.transpose());
        for i in 0..n {
            spd[(i, i)] += n as f64;
        }
        spd
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(l, Matrix::identity(3));
    }

    #[test]
    fn cholesky_two_by_two_known() {
        // [[4,2],[2,3]] factors as [[2,0],[1,sqrt(2)]]; checked by L*L^T below.
        let m = Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = cholesky(&m).unwrap();
        assert!((l[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((l[(1, 0)] - 1.0).abs() < 1e-14);
        assert!((l[(1, 1)] - 2.0f64.sqrt()).abs() < 1e-14);
        assert!(l[(0, 1)] == 0.0);
        let rec = l.matmul(&l.transpose());
        assert!(rec.frobenius_distance(&m) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        // Eigenvalues of [[1,2],[2,1]] are 3 and -1.
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        match cholesky(&m) {
            Err(NumError::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        for (n, seed) in [(1, 1), (5, 2), (64, 3), (65, 4), (130, 5), (200, 6)] {
            let m = random_spd(n, seed);
            let l = cholesky(&m).unwrap();
            let rec = l.matmul(&l.transpose());
            let rel = rec.frobenius_distance(&m) / m.frobenius_distance(&Matrix::zeros(n, n));
            assert!(rel < 1e-10, "n={n} rel={rel}");
        }
    }

    #[test]
    fn triangular_solves_invert_factor() {
        let m = random_spd(37, 9);
        let l = cholesky(&m).unwrap();
        let b: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let y = solve_lower(&l, &b);
        let x = solve_lower_transpose(&l, &y);
        let back = m.matvec(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn lu_solves_random_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 3, 17, 64, 65, 129, 200] {
            let a = Matrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
            let b = a.matvec(&x_true);
            let f = lu_factor(a).unwrap();
            let x = f.solve(&b);
            for (u, v) in x.iter().zip(&x_true) {
                assert!((u - v).abs() < 1e-8, "n={n}");
            }
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            lu_factor(a),
            Err(NumError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn parallel_and_sequential_factors_agree_bitwise() {
        let m = random_spd(150, 21);
        let l_par = cholesky(&m).unwrap();
        let l_seq = crate::par::sequential(|| cholesky(&m).unwrap());
        assert_eq!(l_par.data(), l_seq.data());
    }
}
