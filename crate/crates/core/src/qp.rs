//! Primal active-set method for convex quadratic programs
//!
//! ```text
//!     minimize    ½ xᵀ H x + cᵀ x
//!     subject to  E x  = f
//!                 A x <= b
//! ```
//!
//! with `H` positive semidefinite, started from a feasible point. Each
//! iteration solves the equality-constrained subproblem on the working set
//! through its KKT system; flat directions of a singular subproblem get the
//! minimum-norm treatment so that an optimal iterate is recognised as such.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{independent_rows, select_rows, solve_square};

#[derive(Debug, Clone)]
pub(crate) struct QuadraticProgram {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub eq: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub x: DVector<f64>,
    /// Inequalities in the final working set.
    pub active: Vec<usize>,
    /// Multipliers of the independent equality rows kept by the solver, in
    /// order, with the convention `Hx + c + Eᵀλ + A_Wᵀμ = 0`.
    pub eq_multipliers: Vec<f64>,
}

impl QuadraticProgram {
    #[cfg(test)]
    fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.c.dot(x)
    }

    pub fn solve(
        &self,
        start: DVector<f64>,
        initial_working: &[usize],
        max_iter: usize,
    ) -> Result<QpSolution> {
        let n = self.h.nrows();
        let eq_rows = independent_rows(&self.eq, 1e-10);
        let eq = select_rows(&self.eq, &eq_rows);
        let me = eq.nrows();

        let eq_residual = (&self.eq * &start - &self.eq_rhs).amax();
        if eq_residual > 1e-8 * (1.0 + self.eq_rhs.amax()) {
            return Err(Error::SolverFailure(format!(
                "starting point violates the equality constraints by {eq_residual:e}"
            )));
        }
        let mut x = start;
        let mut working: Vec<usize> = initial_working.to_vec();
        // Set after a full step without blocking: x then minimizes on the
        // working set and only the multipliers need checking.
        let mut stationary = false;

        for _ in 0..max_iter {
            let mw = working.len();
            let size = n + me + mw;
            let mut kkt = DMatrix::zeros(size, size);
            kkt.view_mut((0, 0), (n, n)).copy_from(&self.h);
            for r in 0..me {
                for j in 0..n {
                    kkt[(n + r, j)] = eq[(r, j)];
                    kkt[(j, n + r)] = eq[(r, j)];
                }
            }
            for (k, &i) in working.iter().enumerate() {
                for j in 0..n {
                    let v = self.ineq[(i, j)];
                    kkt[(n + me + k, j)] = v;
                    kkt[(j, n + me + k)] = v;
                }
            }
            let grad = &self.h * &x + &self.c;
            let mut rhs = DVector::zeros(size);
            rhs.rows_mut(0, n).copy_from(&(-&grad));
            let sol = solve_square(&kkt, &rhs)
                .ok_or_else(|| Error::SolverFailure("singular active-set KKT system".into()))?;
            let p = sol.rows(0, n).into_owned();

            let scale = 1.0 + x.amax();
            if stationary || p.amax() <= 1e-12 * scale {
                stationary = false;
                let lambdas: Vec<f64> = (0..mw).map(|k| sol[n + me + k]).collect();
                let lmax = lambdas.iter().fold(grad.amax(), |m, l| m.max(l.abs()));
                let worst = lambdas
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l < -1e-11 * (1.0 + lmax))
                    .min_by(|a, b| a.1.total_cmp(b.1));
                match worst {
                    None => {
                        return Ok(QpSolution {
                            x,
                            active: working,
                            eq_multipliers: (0..me).map(|r| sol[n + r]).collect(),
                        })
                    }
                    Some((k, _)) => {
                        working.remove(k);
                    }
                }
                continue;
            }

            let mut step = 1.0;
            let mut blocking = None;
            for i in 0..self.ineq.nrows() {
                if working.contains(&i) {
                    continue;
                }
                let row = self.ineq.row(i);
                let ap = row.dot(&p.transpose());
                if ap > 1e-14 * (1.0 + row.amax() * p.amax()) {
                    let slack = (self.ineq_rhs[i] - row.dot(&x.transpose())).max(0.0);
                    let t = slack / ap;
                    if t < step {
                        step = t;
                        blocking = Some(i);
                    }
                }
            }
            x.axpy(step, &p, 1.0);
            match blocking {
                Some(i) => working.push(i),
                None => stationary = true,
            }
        }
        Err(Error::IterationLimit(max_iter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_constrained_projection() {
        // min ½|x - (2, -1)|² s.t. x <= 1 componentwise, x1 + x2 = 0.5
        let qp = QuadraticProgram {
            h: DMatrix::identity(2, 2),
            c: DVector::from_vec(vec![-2.0, 1.0]),
            eq: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            eq_rhs: DVector::from_vec(vec![0.5]),
            ineq: DMatrix::identity(2, 2),
            ineq_rhs: DVector::from_vec(vec![1.0, 1.0]),
        };
        let sol = qp
            .solve(DVector::from_vec(vec![0.25, 0.25]), &[], 20)
            .unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] + 0.5).abs() < 1e-12);
        assert_eq!(sol.active, vec![0]);
    }

    #[test]
    fn semidefinite_objective() {
        // min ½ w² - w s.t. w - t <= 0.5, w <= 2; t is free with zero curvature.
        let qp = QuadraticProgram {
            h: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            c: DVector::from_vec(vec![0.0, -1.0]),
            eq: DMatrix::zeros(0, 2),
            eq_rhs: DVector::zeros(0),
            ineq: DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 1.0]),
            ineq_rhs: DVector::from_vec(vec![0.5, 2.0]),
        };
        let sol = qp
            .solve(DVector::from_vec(vec![0.0, -1.0]), &[], 20)
            .unwrap();
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
        assert!((qp.objective(&sol.x) + 0.5).abs() < 1e-12);
    }
}
