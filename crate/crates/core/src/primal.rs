//! Optimal strategies for the quadratic and truncated quadratic utilities.
//!
//! With `U(y) = y - y²/2` the problem `sup_θ E[U(x0 + Gθ)]` is a weighted
//! least-squares fit of `(1 - x0)·1` by the span of the path increments. The
//! truncated utility `U_m(y) = U(y ∧ 1)` is handled in the lifted form
//!
//! ```text
//!     maximize    E[w - w²/2]
//!     subject to  w <= x0 + Gθ,  w <= 1
//! ```
//!
//! which is a convex QP because `U` is increasing below 1. Optimal holdings
//! are not unique under redundant assets; both solvers report the
//! minimum-norm holdings, so the scaling in the initial capital is exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{min_norm_solve, svd};
use crate::market::{check_viability, terminal_wealth, ScenarioTree, Strategy};
use crate::prob::{self, RandomVariable};
use crate::qp::QuadraticProgram;

/// Atoms with optimal wealth within this of 1 count as truncated.
const TRUNCATION_TOL: f64 = 1e-10;

/// Relative singular-value cut separating genuine from redundant trading
/// directions.
const RANK_TOL: f64 = 1e-10;

/// Below this the truncated value is treated as "no opportunity".
pub const NO_OPPORTUNITY_TOL: f64 = 1e-20;

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub strategy: Strategy,
    /// Terminal wealth `x0 + θ·S_T`.
    pub payoff: RandomVariable,
    pub value: f64,
    pub x0: f64,
}

fn require_viable(tree: &ScenarioTree) -> Result<()> {
    if check_viability(tree)? {
        Ok(())
    } else {
        Err(Error::NotViable)
    }
}

fn solution(
    tree: &ScenarioTree,
    holdings: Vec<f64>,
    x0: f64,
    f: fn(&RandomVariable) -> f64,
) -> Result<PrimalSolution> {
    let strategy = Strategy::from_flat(tree, holdings)?;
    let payoff = terminal_wealth(tree, &strategy, x0)?;
    let value = f(&payoff);
    Ok(PrimalSolution {
        strategy,
        payoff,
        value,
        x0,
    })
}

/// Path increments with numerically redundant directions removed.
///
/// Assets that are collinear in exact arithmetic leave singular values at
/// rounding level in `diag(√P) G`; left in place, the truncated solver would
/// exploit them with huge offsetting holdings. Both solvers therefore work
/// with the rank-truncated matrix, cut at [`RANK_TOL`] relative to the
/// largest singular value.
fn effective_increments(tree: &ScenarioTree) -> Result<DMatrix<f64>> {
    let g = tree.increments();
    if g.ncols() == 0 {
        return Ok(g.clone());
    }
    let sqrt_p: Vec<f64> = tree.leaf_probs().iter().map(|p| p.sqrt()).collect();
    let weighted = DMatrix::from_fn(g.nrows(), g.ncols(), |w, c| sqrt_p[w] * g[(w, c)]);
    let mut d = svd(&weighted)
        .ok_or_else(|| Error::SolverFailure("singular value decomposition failed".into()))?;
    let smax = d.smax();
    if d.s.iter().all(|&s| s > RANK_TOL * smax) {
        return Ok(g.clone());
    }
    for s in d.s.iter_mut() {
        if *s <= RANK_TOL * smax {
            *s = 0.0;
        }
    }
    let truncated = d.recompose();
    Ok(DMatrix::from_fn(g.nrows(), g.ncols(), |w, c| {
        truncated[(w, c)] / sqrt_p[w]
    }))
}

/// Minimum-norm `θ` minimizing `E[(Gθ - target)²]`.
fn weighted_fit(tree: &ScenarioTree, g: &DMatrix<f64>, target: f64) -> Result<Vec<f64>> {
    let sqrt_p: Vec<f64> = tree.leaf_probs().iter().map(|p| p.sqrt()).collect();
    let a = DMatrix::from_fn(g.nrows(), g.ncols(), |w, c| sqrt_p[w] * g[(w, c)]);
    let b = DVector::from_iterator(sqrt_p.len(), sqrt_p.iter().map(|s| s * target));
    let theta = min_norm_solve(&a, &b)
        .ok_or_else(|| Error::SolverFailure("least-squares fit failed".into()))?;
    Ok(theta.iter().copied().collect())
}

/// `argmax_θ E[U(x0 + θ·S_T)]`.
pub fn optimal_quadratic(tree: &ScenarioTree, x0: f64) -> Result<PrimalSolution> {
    require_viable(tree)?;
    let g = effective_increments(tree)?;
    let theta = weighted_fit(tree, &g, 1.0 - x0)?;
    solution(tree, theta, x0, prob::eval_f)
}

/// `argmax_θ E[U_m(x0 + θ·S_T)]`.
pub fn optimal_truncated(tree: &ScenarioTree, x0: f64) -> Result<PrimalSolution> {
    require_viable(tree)?;
    if x0 >= 1.0 {
        return solution(tree, vec![0.0; tree.num_holdings()], x0, prob::eval_fm);
    }
    let g = effective_increments(tree)?;
    let (theta, w) = lifted_solve(tree, &g, x0)?;
    let theta = min_norm_polish(&g, x0, theta, &w)?;
    solution(tree, theta, x0, prob::eval_fm)
}

/// Optimal `(θ, w)` of the lifted QP, warm-started from the quadratic
/// optimum.
fn lifted_solve(tree: &ScenarioTree, g: &DMatrix<f64>, x0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = tree.num_leaves();
    let k = tree.num_holdings();
    let n = k + l;
    let probs = tree.leaf_probs();

    let mut h = DMatrix::zeros(n, n);
    let mut c = DVector::zeros(n);
    for w in 0..l {
        h[(k + w, k + w)] = probs[w];
        c[k + w] = -probs[w];
    }
    // rows 0..l: w - Gθ <= x0; rows l..2l: w <= 1
    let mut ineq = DMatrix::zeros(2 * l, n);
    let mut ineq_rhs = DVector::zeros(2 * l);
    for w in 0..l {
        for j in 0..k {
            ineq[(w, j)] = -g[(w, j)];
        }
        ineq[(w, k + w)] = 1.0;
        ineq_rhs[w] = x0;
        ineq[(l + w, k + w)] = 1.0;
        ineq_rhs[l + w] = 1.0;
    }
    let qp = QuadraticProgram {
        h,
        c,
        eq: DMatrix::zeros(0, n),
        eq_rhs: DVector::zeros(0),
        ineq,
        ineq_rhs,
    };

    let theta = weighted_fit(tree, g, 1.0 - x0)?;
    let mut start = DVector::zeros(n);
    let mut working = Vec::with_capacity(l);
    for w in 0..l {
        let y = x0 + (0..k).map(|j| g[(w, j)] * theta[j]).sum::<f64>();
        start[k + w] = y.min(1.0);
        working.push(if y < 1.0 { w } else { l + w });
    }
    for (j, t) in theta.iter().enumerate() {
        start[j] = *t;
    }
    let sol = qp.solve(start, &working, 10 * (n + l) + 50)?;
    Ok((
        sol.x.rows(0, k).iter().copied().collect(),
        sol.x.rows(k, l).iter().copied().collect(),
    ))
}

/// Minimum-norm holdings reproducing the optimal capped wealth: exact on
/// non-truncated atoms, at least 1 on truncated ones. The lifted solution's
/// own holdings start the search.
fn min_norm_polish(g: &DMatrix<f64>, x0: f64, theta: Vec<f64>, w: &[f64]) -> Result<Vec<f64>> {
    let k = g.ncols();
    let (truncated, exact): (Vec<usize>, Vec<usize>) =
        (0..w.len()).partition(|&i| w[i] >= 1.0 - TRUNCATION_TOL);
    let qp = QuadraticProgram {
        h: DMatrix::identity(k, k),
        c: DVector::zeros(k),
        eq: DMatrix::from_fn(exact.len(), k, |r, j| g[(exact[r], j)]),
        eq_rhs: DVector::from_iterator(exact.len(), exact.iter().map(|&i| w[i] - x0)),
        ineq: DMatrix::from_fn(truncated.len(), k, |r, j| -g[(truncated[r], j)]),
        ineq_rhs: DVector::from_element(truncated.len(), x0 - 1.0),
    };
    let sol = qp.solve(DVector::from_vec(theta), &[], 10 * (k + w.len()) + 50)?;
    Ok(sol.x.iter().copied().collect())
}

/// Closed forms of the monotone mean-variance problem, built on the two
/// primal solutions at zero initial capital.
#[derive(Debug, Clone)]
pub struct MmvAllocation {
    /// `(1 - 2u_m)⁻¹ θ̂⁰_m`.
    pub strategy: Strategy,
    /// Optimal cash shift `(1 - 2u_m)⁻¹ - 1`.
    pub c_hat_m: f64,
    pub u_mmv: f64,
    pub u_mv: f64,
    pub u: f64,
    pub u_m: f64,
    pub quadratic: PrimalSolution,
    pub truncated: PrimalSolution,
}

impl MmvAllocation {
    /// `(1 - 2u_m)⁻¹`.
    pub fn leverage(&self) -> f64 {
        1.0 + self.c_hat_m
    }
}

pub fn mmv_allocation(tree: &ScenarioTree) -> Result<MmvAllocation> {
    let quadratic = optimal_quadratic(tree, 0.0)?;
    let truncated = optimal_truncated(tree, 0.0)?;
    let u = quadratic.value;
    let u_m = truncated.value;
    if u_m.partial_cmp(&0.5) != Some(std::cmp::Ordering::Less)
        || u.partial_cmp(&0.5) != Some(std::cmp::Ordering::Less)
    {
        return Err(Error::SolverFailure(format!(
            "optimal values u = {u}, u_m = {u_m} reach the bliss level"
        )));
    }
    let leverage = 1.0 / (1.0 - 2.0 * u_m);
    Ok(MmvAllocation {
        strategy: truncated.strategy.scale(leverage),
        c_hat_m: leverage - 1.0,
        u_mmv: (leverage - 1.0) / 2.0,
        u_mv: (1.0 / (1.0 - 2.0 * u) - 1.0) / 2.0,
        u,
        u_m,
        quadratic,
        truncated,
    })
}

/// Checks `E[(θ̂_MMV·S_T - ĉ_m - 1)⁻] = 1` within 1e-8; vacuously true when
/// there is no opportunity.
pub fn verify_cash_shift_foc(tree: &ScenarioTree, alloc: &MmvAllocation) -> bool {
    if alloc.u_m <= NO_OPPORTUNITY_TOL {
        return true;
    }
    let Ok(x) = terminal_wealth(tree, &alloc.strategy, 0.0) else {
        return false;
    };
    let level = 1.0 + alloc.c_hat_m;
    let lhs = x.law().expect_with(x.values(), |v| (level - v).max(0.0));
    (lhs - 1.0).abs() <= 1e-8
}
