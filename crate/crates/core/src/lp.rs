//! Revised two-phase simplex.
//!
//! Solves `max c·x  s.t.  A x = b, x >= 0`. The basis matrix is refactorized
//! with LU at every iteration, so rounding does not accumulate the way it does
//! in a tableau. Pricing uses the largest reduced cost and falls back to
//! Bland's smallest-index rule during runs of degenerate pivots, which
//! guarantees termination. Artificial variables left in the
//! basis after phase 1 are held at zero: any pivot that would move them blocks
//! with ratio 0.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots after which pricing falls back from the
/// largest reduced cost to Bland's rule.
const DEGENERATE_SWITCH: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

fn singular() -> Error {
    Error::SolverFailure("singular simplex basis".into())
}

struct Simplex {
    /// `[A | I]` with rows scaled and signed so that `b >= 0`.
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// Number of structural columns; the rest are artificial.
    n: usize,
    basis: Vec<usize>,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Simplex {
    fn basis_matrix(&self) -> DMatrix<f64> {
        let m = self.b.len();
        DMatrix::from_fn(m, m, |i, k| self.a[(i, self.basis[k])])
    }

    fn basic_solution(&self) -> Result<DVector<f64>> {
        self.basis_matrix().lu().solve(&self.b).ok_or_else(singular)
    }

    /// Maximizes `cost·x`; only columns below `allowed` may enter. With
    /// `pin_artificials`, basic artificials are held at zero.
    fn optimize(
        &mut self,
        cost: &[f64],
        allowed: usize,
        pin_artificials: bool,
        max_iter: usize,
    ) -> Result<Step> {
        let m = self.b.len();
        let mut degenerate_run = 0;
        for _ in 0..max_iter {
            let bmat = self.basis_matrix();
            let lu = bmat.clone().lu();
            let xb = lu.solve(&self.b).ok_or_else(singular)?;
            let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| cost[j]));
            let y = bmat.transpose().lu().solve(&cb).ok_or_else(singular)?;
            let candidates = (0..allowed)
                .filter(|j| !self.basis.contains(j))
                .map(|j| (j, cost[j] - self.a.column(j).dot(&y)))
                .filter(|&(_, d)| d > COST_TOL);
            let entering = if degenerate_run > DEGENERATE_SWITCH {
                candidates.map(|(j, _)| j).next()
            } else {
                candidates
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(j, _)| j)
            };
            let Some(col) = entering else {
                return Ok(Step::Optimal);
            };
            let u = lu
                .solve(&self.a.column(col).into_owned())
                .ok_or_else(singular)?;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let ratio = if pin_artificials && self.basis[r] >= self.n {
                    if u[r].abs() > PIVOT_TOL {
                        0.0
                    } else {
                        continue;
                    }
                } else if u[r] > PIVOT_TOL {
                    xb[r].max(0.0) / u[r]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - 1e-12 * (1.0 + lratio)
                            || (ratio <= lratio + 1e-12 * (1.0 + lratio)
                                && self.basis[r] < self.basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            match leave {
                Some((r, ratio)) => {
                    self.basis[r] = col;
                    degenerate_run = if ratio <= 1e-14 {
                        degenerate_run + 1
                    } else {
                        0
                    };
                }
                None => return Ok(Step::Unbounded),
            }
        }
        Err(Error::SolverFailure("simplex iteration limit".into()))
    }
}

pub(crate) fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpOutcome> {
    let n = c.len();
    let m = a.len();
    let width = n + m;
    let mut mat = DMatrix::zeros(m, width);
    let mut rhs = DVector::zeros(m);
    for (i, (ai, &bi)) in a.iter().zip(b).enumerate() {
        debug_assert_eq!(ai.len(), n);
        let scale = ai.iter().fold(bi.abs(), |s, v| s.max(v.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in ai.iter().enumerate() {
            mat[(i, j)] = sign * v / scale;
        }
        mat[(i, n + i)] = 1.0;
        rhs[i] = sign * bi / scale;
    }
    let mut lp = Simplex {
        a: mat,
        b: rhs,
        n,
        basis: (n..width).collect(),
    };
    let max_iter = 50 * (width + 10);

    let mut phase1 = vec![0.0; width];
    for v in phase1.iter_mut().skip(n) {
        *v = -1.0;
    }
    lp.optimize(&phase1, width, false, max_iter)?;
    let xb = lp.basic_solution()?;
    let infeasibility: f64 = (0..m)
        .filter(|&r| lp.basis[r] >= n)
        .map(|r| xb[r].abs())
        .sum();
    if infeasibility > 1e-9 {
        return Ok(LpOutcome::Infeasible);
    }

    let mut phase2 = vec![0.0; width];
    phase2[..n].copy_from_slice(c);
    if let Step::Unbounded = lp.optimize(&phase2, n, true, max_iter)? {
        return Ok(LpOutcome::Unbounded);
    }
    let xb = lp.basic_solution()?;
    let mut x = vec![0.0; n];
    for (r, &bj) in lp.basis.iter().enumerate() {
        if bj < n {
            x[bj] = xb[r].max(0.0);
        }
    }
    let residual = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| {
            let lhs: f64 = ai.iter().zip(&x).map(|(u, v)| u * v).sum();
            (lhs - bi).abs() / ai.iter().fold(bi.abs().max(1.0), |m, v| m.max(v.abs()))
        })
        .fold(0.0, f64::max);
    if residual > 1e-8 {
        return Err(Error::SolverFailure(format!(
            "simplex lost accuracy (residual {residual:e})"
        )));
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpOutcome::Optimal { x, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // max x + y  s.t.  x + 2y + s1 = 4, 3x + y + s2 = 6
        let out = maximize(
            &[1.0, 1.0, 0.0, 0.0],
            &[vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]],
            &[4.0, 6.0],
        )
        .unwrap();
        match out {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 2.8).abs() < 1e-12);
                assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        assert_eq!(
            maximize(&[1.0], &[vec![1.0], vec![1.0]], &[1.0, 2.0]).unwrap(),
            LpOutcome::Infeasible
        );
        assert_eq!(
            maximize(&[1.0, 0.0], &[vec![1.0, -1.0]], &[1.0]).unwrap(),
            LpOutcome::Unbounded
        );
    }

    #[test]
    fn redundant_rows() {
        let out = maximize(
            &[-1.0, -1.0],
            &[vec![1.0, 1.0], vec![2.0, 2.0]],
            &[1.0, 2.0],
        )
        .unwrap();
        assert!(matches!(out, LpOutcome::Optimal { value, .. } if (value + 1.0).abs() < 1e-12));
    }
}
