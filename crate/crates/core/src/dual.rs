//! Variance-optimal martingale densities.
//!
//! Both problems minimize `E[z²]` over densities with `E[z] = 1` and
//! `E[z ΔS_n] = 0` at every node; the nonnegative one adds `z >= 0`.
//!
//! The signed problem is a single KKT solve of
//!
//! ```text
//!     [ diag(P)  Aᵀ ] [ z ]   [ 0  ]
//!     [ A        0  ] [ ν ] = [ e₁ ]
//! ```
//!
//! after dropping dependent rows of `A`. Stationarity gives `P z = Aᵀ λ` with
//! `λ = -ν`, hence `E[z²] = λ₀`, the multiplier on `E[z] = 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{independent_rows, select_rows, solve_square};
use crate::market::{strictly_positive_density, MeasureDensity, ScenarioTree};
use crate::qp::QuadraticProgram;

/// Densities below this are reported as taking negative values.
pub const SIGNED_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub density: MeasureDensity,
    pub second_moment: f64,
    pub signed: bool,
    /// Leaves where the nonnegativity constraint binds; empty for the signed problem.
    pub active_set: Vec<String>,
    /// `E[z²]` read off the multiplier of `E[z] = 1`.
    pub multiplier_second_moment: f64,
}

impl DualSolution {
    fn build(
        tree: &ScenarioTree,
        z: Vec<f64>,
        multiplier: f64,
        active_set: Vec<String>,
    ) -> Result<Self> {
        let density = MeasureDensity::new(tree, z)?;
        let second_moment = density.second_moment();
        let signed = density.z().min_value() < -SIGNED_TOL;
        Ok(DualSolution {
            density,
            second_moment,
            signed,
            active_set,
            multiplier_second_moment: multiplier,
        })
    }
}

fn reduced_constraints(tree: &ScenarioTree) -> DMatrix<f64> {
    let a = tree.martingale_constraints();
    let rows = independent_rows(&a, 1e-10);
    debug_assert_eq!(rows.first(), Some(&0));
    select_rows(&a, &rows)
}

fn require_viable(tree: &ScenarioTree) -> Result<Vec<f64>> {
    strictly_positive_density(tree)?.ok_or(Error::NotViable)
}

fn signed_solve(tree: &ScenarioTree) -> Result<(Vec<f64>, f64)> {
    let l = tree.num_leaves();
    let a = reduced_constraints(tree);
    let m = a.nrows();
    let mut kkt = DMatrix::zeros(l + m, l + m);
    for (w, &p) in tree.leaf_probs().iter().enumerate() {
        kkt[(w, w)] = p;
    }
    kkt.view_mut((l, 0), (m, l)).copy_from(&a);
    kkt.view_mut((0, l), (l, m)).copy_from(&a.transpose());
    let mut rhs = DVector::zeros(l + m);
    rhs[l] = 1.0;
    let sol = solve_square(&kkt, &rhs)
        .ok_or_else(|| Error::SolverFailure("singular KKT system".into()))?;
    Ok((sol.rows(0, l).iter().copied().collect(), -sol[l]))
}

/// `argmin E[z²]` over signed martingale densities.
pub fn variance_optimal_signed(tree: &ScenarioTree) -> Result<DualSolution> {
    require_viable(tree)?;
    let (z, multiplier) = signed_solve(tree)?;
    DualSolution::build(tree, z, multiplier, Vec::new())
}

/// `argmin E[z²]` over nonnegative martingale densities.
///
/// Primal active-set QP started from the strictly positive density that
/// certifies viability; the signed minimizer is returned directly when it is
/// already nonnegative.
pub fn variance_optimal_nonneg(tree: &ScenarioTree) -> Result<DualSolution> {
    let start = require_viable(tree)?;
    let (signed, multiplier) = signed_solve(tree)?;
    if signed.iter().all(|&v| v >= 0.0) {
        return DualSolution::build(tree, signed, multiplier, Vec::new());
    }

    let l = tree.num_leaves();
    let a = reduced_constraints(tree);
    let mut eq_rhs = DVector::zeros(a.nrows());
    eq_rhs[0] = 1.0;
    let qp = QuadraticProgram {
        h: DMatrix::from_diagonal(&DVector::from_column_slice(tree.leaf_probs())),
        c: DVector::zeros(l),
        eq: a,
        eq_rhs,
        ineq: -DMatrix::identity(l, l),
        ineq_rhs: DVector::zeros(l),
    };
    let sol = qp.solve(DVector::from_vec(start), &[], 3 * l + 10)?;
    let mut z: Vec<f64> = sol.x.iter().copied().collect();
    let mut active = sol.active.clone();
    active.sort_unstable();
    for &i in &active {
        z[i] = 0.0;
    }
    let ids: Vec<String> = tree.leaves().map(|n| n.id.clone()).collect();
    let active_set = active.iter().map(|&i| ids[i].clone()).collect();
    // P z = -Eᵀλ + μ with μ supported where z = 0, so E[z²] = -λ₀.
    let multiplier = -sol.eq_multipliers[0];
    DualSolution::build(tree, z, multiplier, active_set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::parse_market;
    use approx::assert_abs_diff_eq;

    const TRINOMIAL: &str = include_str!("../fixtures/trinomial.json");
    const BINOMIAL: &str = include_str!("../fixtures/binomial.json");
    const FLAT: &str = include_str!("../fixtures/flat.json");

    #[test]
    fn trinomial_signed() {
        let tree = parse_market(TRINOMIAL).unwrap();
        let sol = variance_optimal_signed(&tree).unwrap();
        // z = a + bΔS with a = E[ΔS²]/Var(ΔS), b = -a E[ΔS]/E[ΔS²]
        let a = 10.9 / 8.01;
        let b = -a * 1.7 / 10.9;
        for (z, ds) in sol.density.values().iter().zip([10.0, 1.0, -1.0]) {
            assert_abs_diff_eq!(*z, a + b * ds, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sol.second_moment, a, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.multiplier_second_moment, a, epsilon = 1e-10);
        assert!(sol.signed);
    }

    #[test]
    fn trinomial_nonneg() {
        let tree = parse_market(TRINOMIAL).unwrap();
        let sol = variance_optimal_nonneg(&tree).unwrap();
        let z = sol.density.values();
        assert_abs_diff_eq!(z[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[1], 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(z[2], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.second_moment, 2.8125, epsilon = 1e-12);
        assert_eq!(sol.active_set, vec!["up".to_string()]);
        assert!(!sol.signed);
    }

    #[test]
    fn binomial_unique_density() {
        let tree = parse_market(BINOMIAL).unwrap();
        for sol in [
            variance_optimal_signed(&tree).unwrap(),
            variance_optimal_nonneg(&tree).unwrap(),
        ] {
            assert_abs_diff_eq!(sol.density.values()[0], 2.0 / 3.0, epsilon = 1e-13);
            assert_abs_diff_eq!(sol.density.values()[1], 4.0 / 3.0, epsilon = 1e-13);
            assert_abs_diff_eq!(sol.second_moment, 10.0 / 9.0, epsilon = 1e-13);
            assert!(!sol.signed);
        }
    }

    #[test]
    fn flat_asset_gives_unit_density() {
        let tree = parse_market(FLAT).unwrap();
        for sol in [
            variance_optimal_signed(&tree).unwrap(),
            variance_optimal_nonneg(&tree).unwrap(),
        ] {
            assert!(sol
                .density
                .values()
                .iter()
                .all(|&z| (z - 1.0).abs() < 1e-13));
            assert_abs_diff_eq!(sol.second_moment, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn arbitrage_is_rejected() {
        let text = BINOMIAL.replace("0.5]", "1.5]");
        let tree = parse_market(&text).unwrap();
        assert!(matches!(
            variance_optimal_signed(&tree),
            Err(Error::NotViable)
        ));
        assert!(matches!(
            variance_optimal_nonneg(&tree),
            Err(Error::NotViable)
        ));
    }
}
