//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Greedy selection of linearly independent rows, in order.
///
/// Rows are orthogonalized against the kept set (two Gram–Schmidt passes) and
/// kept when the residual exceeds `rel_tol` times the row's own norm.
pub(crate) fn independent_rows(a: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let n = a.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for i in 0..a.nrows() {
        let row: DVector<f64> = a.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut r = row.clone();
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&r);
                r.axpy(-d, q, 1.0);
            }
        }
        let rn = r.norm();
        if rn > rel_tol * norm {
            basis.push(r / rn);
            kept.push(i);
        }
    }
    debug_assert!(kept.len() <= n);
    kept
}

pub(crate) fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Thin singular value decomposition `a = U diag(s) Vᵀ`.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn smax(&self) -> f64 {
        self.s.iter().copied().fold(0.0, f64::max)
    }

    pub fn recompose(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose()
    }

    /// Pseudo-inverse applied to `b`, ignoring singular values `<= eps`.
    pub fn solve(&self, b: &DVector<f64>, eps: f64) -> DVector<f64> {
        let mut coef = self.u.transpose() * b;
        for (c, s) in coef.iter_mut().zip(self.s.iter()) {
            *c = if *s > eps { *c / s } else { 0.0 };
        }
        &self.v * coef
    }
}

/// Thin SVD via faer, whose divide-and-conquer routine stays accurate on the
/// rank-deficient matrices produced by redundant assets (nalgebra's does not
/// always).
pub(crate) fn svd(a: &DMatrix<f64>) -> Option<Svd> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Some(Svd {
            u: DMatrix::zeros(m, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(n, 0),
        });
    }
    let f = faer::Mat::from_fn(m, n, |i, j| a[(i, j)]);
    let d = f.thin_svd().ok()?;
    let (u, s, v) = (d.U(), d.S().column_vector(), d.V());
    Some(Svd {
        u: DMatrix::from_fn(m, k, |i, j| u[(i, j)]),
        s: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(n, k, |i, j| v[(i, j)]),
    })
}

/// Minimum-norm least-squares solution of `a x = b`.
pub(crate) fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let d = svd(a)?;
    let smax = d.smax();
    if smax == 0.0 {
        return Some(DVector::zeros(a.ncols()));
    }
    let eps = smax * 1e-12 * (a.nrows().max(a.ncols()) as f64);
    Some(d.solve(b, eps))
}

/// Solves a square system that is expected to be consistent.
///
/// LU first; when the pivots reveal numerical singularity the minimum-norm
/// solution is returned instead, so directions the system leaves free get zero
/// weight.
pub(crate) fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let u = lu.u();
    let diag = u.diagonal();
    let dmax = diag.amax();
    let dmin = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if dmax > 0.0 && dmin > 1e-11 * dmax {
        if let Some(mut x) = lu.solve(b) {
            // one step of iterative refinement
            if let Some(dx) = lu.solve(&(b - a * &x)) {
                x += dx;
            }
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
    }
    min_norm_solve(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_independent_rows() {
        let a = DMatrix::from_row_slice(4, 3, &[1., 0., 0., 2., 0., 0., 0., 1., 1., 0., 1., 0.]);
        assert_eq!(independent_rows(&a, 1e-10), vec![0, 2, 3]);
    }

    #[test]
    fn rank_one_block_reconstructs() {
        // nalgebra's SVD reconstructs this weighted increment matrix with error ~1e-3
        let p = [0.40997545662863394f64, 0.590024543371366];
        let g = [
            [0.0018870682671383587, -0.17389265810866428],
            [-0.0027533047555747814, 0.25371603712895396],
        ];
        let a = DMatrix::from_fn(2, 2, |i, j| p[i].sqrt() * g[i][j]);
        let d = svd(&a).unwrap();
        assert!((d.recompose() - &a).amax() < 1e-14);
        let b = DVector::from_iterator(2, p.iter().map(|q| q.sqrt()));
        let x = min_norm_solve(&a, &b).unwrap();
        assert!((x[0] + 0.01688762).abs() < 1e-7 && (x[1] - 1.55618788).abs() < 1e-7);
    }

    #[test]
    fn singular_system_gets_min_norm() {
        // x + y = 2 twice; min-norm solution (1, 1)
        let a = DMatrix::from_row_slice(2, 2, &[1., 1., 1., 1.]);
        let b = DVector::from_vec(vec![2., 2.]);
        let x = solve_square(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
