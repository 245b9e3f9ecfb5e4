//! No-arbitrage check: existence of a strictly positive martingale density.
//!
//! Writing `z = t + s` with `s >= 0`, the linear program
//!
//! ```text
//!     max t   s.t.   t + E[s] = 1,   t E[ΔS_n] + E[s ΔS_n] = 0 for every node n,   t, s >= 0
//! ```
//!
//! has a positive optimum exactly when some density is bounded below by `t > 0`.

use nalgebra::DVector;

use super::ScenarioTree;
use crate::error::{Error, Result};
use crate::linalg::min_norm_solve;
use crate::lp::{maximize, LpOutcome};

/// Optimal `t` below which a market is treated as having no positive density.
pub const VIABILITY_TOL: f64 = 1e-10;

/// A strictly positive martingale density, if one exists.
pub fn strictly_positive_density(tree: &ScenarioTree) -> Result<Option<Vec<f64>>> {
    let l = tree.num_leaves();
    let probs = tree.leaf_probs();
    let g = tree.increments();
    let n = l + 1;
    let mut rows = Vec::with_capacity(1 + g.ncols());
    let mut rhs = Vec::with_capacity(1 + g.ncols());

    let mut mass = vec![1.0; n];
    mass[1..].copy_from_slice(probs);
    rows.push(mass);
    rhs.push(1.0);
    for c in 0..g.ncols() {
        let mut row = vec![0.0; n];
        for w in 0..l {
            row[1 + w] = probs[w] * g[(w, c)];
        }
        row[0] = row[1..].iter().sum();
        rows.push(row);
        rhs.push(0.0);
    }
    let mut cost = vec![0.0; n];
    cost[0] = 1.0;
    match maximize(&cost, &rows, &rhs)? {
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::SolverFailure("viability LP unbounded".into())),
        LpOutcome::Optimal { x, value } => {
            if value > VIABILITY_TOL {
                let z: Vec<f64> = x[1..].iter().map(|s| value + s).collect();
                Ok(Some(project(tree, z, value)))
            } else {
                Ok(None)
            }
        }
    }
}

/// Removes the simplex's rounding residual from the martingale conditions by
/// a minimum-norm correction, kept only while it preserves positivity.
fn project(tree: &ScenarioTree, z: Vec<f64>, floor: f64) -> Vec<f64> {
    let a = tree.martingale_constraints();
    let mut target = DVector::zeros(a.nrows());
    target[0] = 1.0;
    let zv = DVector::from_vec(z);
    let residual = &target - &a * &zv;
    match min_norm_solve(&a, &residual) {
        Some(dz) if dz.amax() < 0.5 * floor => (zv + dz).iter().copied().collect(),
        _ => zv.iter().copied().collect(),
    }
}

pub fn check_viability(tree: &ScenarioTree) -> Result<bool> {
    Ok(strictly_positive_density(tree)?.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::parse_market;

    fn one_period(prices: &[f64], probs: &[f64]) -> ScenarioTree {
        let mut nodes = vec![r#"{"id":"r","parent":null,"t":0,"prices":[1.0]}"#.to_string()];
        for (i, (s, p)) in prices.iter().zip(probs).enumerate() {
            nodes.push(format!(
                r#"{{"id":"c{i}","parent":"r","t":1,"p":{p},"prices":[{s}]}}"#
            ));
        }
        parse_market(&format!(
            r#"{{"assets":1,"periods":1,"nodes":[{}]}}"#,
            nodes.join(",")
        ))
        .unwrap()
    }

    #[test]
    fn viable_markets() {
        let tri = one_period(&[11.0, 2.0, 0.0], &[0.1, 0.8, 0.1]);
        let z = strictly_positive_density(&tri).unwrap().unwrap();
        assert!(z.iter().all(|&v| v > 0.0));
        assert!(tri.martingale_residual(&z) < 1e-12);
        assert!(check_viability(&one_period(&[2.0, 0.5], &[0.5, 0.5])).unwrap());
    }

    #[test]
    fn arbitrage_detected() {
        assert!(!check_viability(&one_period(&[2.0, 1.5], &[0.5, 0.5])).unwrap());
        // weak arbitrage: nonnegative, somewhere positive
        assert!(!check_viability(&one_period(&[2.0, 1.0], &[0.5, 0.5])).unwrap());
    }

    #[test]
    fn flat_asset_is_viable() {
        assert!(check_viability(&one_period(&[1.0, 1.0, 1.0], &[0.2, 0.3, 0.5])).unwrap());
    }
}
