//! Dense two-phase simplex solver for convex-combination programs.
//!
//! Solves `min c^T w` subject to `sum_i w_i a_i = 0`, `sum_i w_i = 1`,
//! `w >= 0`, where the `a_i` are rows of a (pre-translated, pre-scaled)
//! point matrix. Pivoting follows Bland's rule — lowest eligible entering
//! index, ties in the ratio test broken by lowest basic-variable index — so
//! the solver terminates and repeated calls agree exactly.

use crate::numkit::Matrix;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    /// Basic columns (point indices), ascending.
    pub basis: Vec<usize>,
    /// Basic weights aligned with `basis`; zero entries are kept.
    pub weights: Vec<f64>,
    /// Objective value at the returned basic solution.
    #[allow(dead_code)]
    pub objective: f64,
}

#[derive(Debug)]
pub(crate) enum LpOutcome {
    Optimal(LpSolution),
    /// No convex combination matches within tolerance; carries the residual
    /// artificial sum as a diagnostic.
    Infeasible { artificial_sum: f64 },
}

struct Tableau {
    t: Matrix,
    obj: Vec<f64>,
    basis: Vec<usize>,
    active: Vec<bool>,
    n: usize,
    rhs: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[(row, col)];
        let inv = 1.0 / piv;
        for v in self.t.row_mut(row) {
            *v *= inv;
        }
        // Snapshot the pivot row so other rows can be updated in place.
        let prow: Vec<f64> = self.t.row(row).to_vec();
        for r in 0..self.t.rows() {
            if r == row {
                continue;
            }
            let factor = self.t[(r, col)];
            if factor != 0.0 {
                for (v, p) in self.t.row_mut(r).iter_mut().zip(&prow) {
                    *v -= factor * p;
                }
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&prow) {
                *v -= factor * p;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations with Bland's rule until optimality.
    fn iterate(&mut self) {
        for _ in 0..MAX_PIVOTS {
            // Entering: lowest real column with negative reduced cost.
            let Some(enter) = (0..self.n).find(|&j| self.obj[j] < -COST_TOL) else {
                return;
            };
            // Ratio test over active rows.
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for r in 0..self.t.rows() {
                if !self.active[r] {
                    continue;
                }
                let a = self.t[(r, enter)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(r, self.rhs)] / a;
                    let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                    if (ratio < best && !tie)
                        || (tie && leave.is_some_and(|l| self.basis[r] < self.basis[l]))
                    {
                        best = ratio;
                        leave = Some(r);
                    } else if leave.is_none() && ratio < best {
                        best = ratio;
                        leave = Some(r);
                    }
                }
            }
            // A bounded feasible region always yields a leaving row; bail out
            // with the current basic solution if round-off says otherwise.
            let Some(leave) = leave else { return };
            self.pivot(leave, enter);
        }
    }
}

/// Solves the convex-combination LP over the rows of `points`.
pub(crate) fn solve_simplex_lp(points: &Matrix, cost: &[f64], feas_tol: f64) -> LpOutcome {
    let n = points.rows();
    let d = points.cols();
    let m = d + 1;
    assert_eq!(cost.len(), n);
    let ncols = n + m + 1;
    let rhs = n + m;

    let mut t = Matrix::zeros(m, ncols);
    for i in 0..n {
        for r in 0..d {
            t[(r, i)] = points[(i, r)];
        }
        t[(d, i)] = 1.0;
    }
    for r in 0..m {
        t[(r, n + r)] = 1.0;
    }
    t[(d, rhs)] = 1.0;

    // Phase 1: minimize the artificial sum. Reduced costs start as the
    // negated constraint-row sums for real columns.
    let mut obj = vec![0.0; ncols];
    for r in 0..m {
        for j in 0..n {
            obj[j] -= t[(r, j)];
        }
        obj[rhs] -= t[(r, rhs)];
    }
    let mut tab = Tableau {
        t,
        obj,
        basis: (n..n + m).collect(),
        active: vec![true; m],
        n,
        rhs,
    };
    tab.iterate();
    let artificial_sum = -tab.obj[rhs];
    if artificial_sum > feas_tol {
        return LpOutcome::Infeasible { artificial_sum };
    }

    // Drive remaining artificials out of the basis; rows with no usable real
    // column are redundant constraints and get dropped.
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| tab.t[(r, j)].abs() > PIVOT_TOL) {
                tab.pivot(r, j);
            } else {
                tab.active[r] = false;
            }
        }
    }

    // Phase 2: true objective, eliminated against the current basis.
    let mut obj = vec![0.0; ncols];
    obj[..n].copy_from_slice(cost);
    for r in 0..m {
        if !tab.active[r] || tab.basis[r] >= n {
            continue;
        }
        let cj = obj[tab.basis[r]];
        if cj != 0.0 {
            for (v, p) in obj.iter_mut().zip(tab.t.row(r)) {
                *v -= cj * p;
            }
        }
    }
    tab.obj = obj;
    tab.iterate();

    let mut pairs: Vec<(usize, f64)> = (0..m)
        .filter(|&r| tab.active[r] && tab.basis[r] < n)
        .map(|r| (tab.basis[r], tab.t[(r, tab.rhs)]))
        .collect();
    pairs.sort_by_key(|&(j, _)| j);
    let objective = -tab.obj[tab.rhs];
    LpOutcome::Optimal(LpSolution {
        basis: pairs.iter().map(|&(j, _)| j).collect(),
        weights: pairs.iter().map(|&(_, w)| w).collect(),
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn translated(points: &[&[f64]], q: &[f64]) -> Matrix {
        Matrix::from_fn(points.len(), q.len(), |i, j| points[i][j] - q[j])
    }

    #[test]
    fn centroid_of_square_is_feasible() {
        let pts = [
            &[0.0, 0.0][..],
            &[1.0, 0.0][..],
            &[0.0, 1.0][..],
            &[1.0, 1.0][..],
        ];
        let a = translated(&pts, &[0.5, 0.5]);
        match solve_simplex_lp(&a, &vec![0.0; 4], 1e-9) {
            LpOutcome::Optimal(sol) => {
                let total: f64 = sol.weights.iter().sum();
                assert!((total - 1.0).abs() < 1e-9);
                assert!(sol.weights.iter().all(|&w| w >= -1e-9));
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn outside_point_is_infeasible() {
        let pts = [
            &[0.0, 0.0][..],
            &[1.0, 0.0][..],
            &[0.0, 1.0][..],
            &[1.0, 1.0][..],
        ];
        let a = translated(&pts, &[2.0, 0.0]);
        assert!(matches!(
            solve_simplex_lp(&a, &vec![0.0; 4], 1e-9),
            LpOutcome::Infeasible { .. }
        ));
    }

    #[test]
    fn lifted_objective_picks_the_delaunay_simplex() {
        // Dataset from the locate example: the triangle containing (1.0, 0.5)
        // under the empty-circumball rule is {(0,0), (2,0), (1.2,1.2)}.
        let pts = [
            &[0.0, 0.0][..],
            &[2.0, 0.0][..],
            &[0.0, 2.0][..],
            &[1.2, 1.2][..],
        ];
        let q = [1.0, 0.5];
        let a = translated(&pts, &q);
        let cost: Vec<f64> = (0..4)
            .map(|i| a.row(i).iter().map(|v| v * v).sum())
            .collect();
        match solve_simplex_lp(&a, &cost, 1e-9) {
            LpOutcome::Optimal(sol) => {
                assert_eq!(sol.basis, vec![0, 1, 3]);
                let expect = [1.0 / 3.0, 0.25, 5.0 / 12.0];
                for (w, e) in sol.weights.iter().zip(expect) {
                    assert!((w - e).abs() < 1e-9, "{w} vs {e}");
                }
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn collinear_data_on_segment_is_feasible() {
        let pts = [&[0.0, 0.0][..], &[1.0, 1.0][..]];
        let a = translated(&pts, &[0.5, 0.5]);
        match solve_simplex_lp(&a, &vec![0.0; 2], 1e-9) {
            LpOutcome::Optimal(sol) => {
                assert_eq!(sol.basis.len(), 2);
                for w in &sol.weights {
                    assert!((w - 0.5).abs() < 1e-9);
                }
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }
}
