//! Monotone hull of the Sharpe ratio.
//!
//! For `E[X] > 0` with downside, `SR_m(X) = SR(X ∧ 1/α̂)` where `α̂` maximizes
//! `α ↦ F_m(αX)`, i.e. solves
//!
//! ```text
//!     E[X 1{α̂X ≤ 1}] = α̂ E[X² 1{α̂X ≤ 1}]
//! ```
//!
//! The left minus right side is strictly decreasing and piecewise linear in
//! `α` with breakpoints `1/x_i` over the positive atoms, so the root is found
//! exactly by scanning segments.

use crate::error::{Error, Result};
use crate::prob::{self, CompensatedSum, ExtendedReal, RandomVariable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// `E[X] > 0` and `P(X < 0) > 0`.
    Standard,
    /// `X >= 0` on every atom.
    NoDownside,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::Standard => "standard",
            CaseTag::NoDownside => "no-downside",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneSharpeResult {
    pub sr_m: ExtendedReal,
    pub alpha_hat: Option<f64>,
    pub truncation_level: Option<f64>,
    pub case: CaseTag,
}

fn check_standard(x: &RandomVariable) -> Result<()> {
    let m = prob::mean(x);
    if m <= 0.0 {
        return Err(Error::NonpositiveMean { mean: m });
    }
    if x.min_value() >= 0.0 {
        return Err(Error::NoDownside);
    }
    Ok(())
}

/// `f'(α) = E[X 1{αX ≤ 1}] - α E[X² 1{αX ≤ 1}]`.
pub fn alpha_foc(x: &RandomVariable, alpha: f64) -> f64 {
    let mut first = CompensatedSum::default();
    let mut second = CompensatedSum::default();
    for (&p, &v) in x.probs().iter().zip(x.values()) {
        if alpha * v <= 1.0 {
            first.add(p * v);
            second.add(p * v * v);
        }
    }
    first.value() - alpha * second.value()
}

/// Unique maximizer of `α ↦ F_m(αX)` on `α >= 0`.
pub fn solve_alpha_hat(x: &RandomVariable) -> Result<f64> {
    check_standard(x)?;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x.values()[a].total_cmp(&x.values()[b]));

    // prefix[k] = (E[X; k smallest], E[X²; k smallest])
    let mut prefix = Vec::with_capacity(order.len() + 1);
    let (mut first, mut second) = (CompensatedSum::default(), CompensatedSum::default());
    prefix.push((0.0, 0.0));
    for &i in &order {
        let (p, v) = (x.probs()[i], x.values()[i]);
        first.add(p * v);
        second.add(p * v * v);
        prefix.push((first.value(), second.value()));
    }

    // Segment with the `k` smallest atoms included spans
    // (1/x_(k+1), 1/x_(k)] in α, taking the excluded atoms' breakpoints from above.
    let mut k = order.len();
    let mut lower = 0.0;
    while k > 0 {
        let top = x.values()[order[k - 1]];
        if top <= 0.0 {
            break;
        }
        // include every atom tied with `top`
        let upper = 1.0 / top;
        let (m, s) = prefix[k];
        let alpha = m / s;
        if alpha >= lower && alpha <= upper {
            return Ok(alpha);
        }
        while k > 0 && x.values()[order[k - 1]] == top {
            k -= 1;
        }
        lower = upper;
    }
    Err(Error::SolverFailure(
        "first-order condition for the monotone Sharpe scaling has no root".into(),
    ))
}

/// Bisection on `f'`, kept as an independent path for [`solve_alpha_hat`].
pub fn solve_alpha_hat_bisection(x: &RandomVariable) -> Result<f64> {
    check_standard(x)?;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while alpha_foc(x, hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alpha_foc(x, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn monotone_sharpe(x: &RandomVariable) -> Result<MonotoneSharpeResult> {
    if x.min_value() >= 0.0 {
        let sr_m = if x.max_value() == 0.0 {
            ExtendedReal::Finite(0.0)
        } else {
            let at_zero = x.prob_where(|v| v == 0.0);
            if at_zero == 0.0 {
                ExtendedReal::PosInfinity
            } else {
                ExtendedReal::Finite(((1.0 - at_zero) / at_zero).sqrt())
            }
        };
        return Ok(MonotoneSharpeResult {
            sr_m,
            alpha_hat: None,
            truncation_level: None,
            case: CaseTag::NoDownside,
        });
    }
    let alpha = solve_alpha_hat(x)?;
    let level = 1.0 / alpha;
    Ok(MonotoneSharpeResult {
        sr_m: prob::sharpe_ratio(&x.min_with(level)),
        alpha_hat: Some(alpha),
        truncation_level: Some(level),
        case: CaseTag::Standard,
    })
}

/// `g(z) = z² / (2(1 + z²))`, the best quadratic-utility value of a payoff
/// whose Sharpe ratio is `z`.
pub fn sr_to_value(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.5;
    }
    let z2 = z * z;
    z2 / (2.0 * (1.0 + z2))
}

/// Inverse of [`sr_to_value`] on `[0, 1/2)`.
pub fn value_to_sr(y: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&y) {
        return Err(Error::Domain(format!("value {y} outside [0, 1/2)")));
    }
    Ok((1.0 / (1.0 - 2.0 * y) - 1.0).sqrt())
}

/// `max_{α >= 0} F(αZ)`, attained at `α* = E[Z]/E[Z²]` when `E[Z] > 0`.
pub fn max_scaled_quadratic(z: &RandomVariable) -> f64 {
    let m = prob::mean(z);
    if m <= 0.0 {
        return 0.0;
    }
    let second = z.law().expect_with(z.values(), |v| v * v);
    m * m / (2.0 * second)
}

/// `max_{K in grid} SR(X ∧ K)`: brute-force testing oracle.
pub fn oracle_grid_sr(x: &RandomVariable, k_grid: &[f64]) -> f64 {
    k_grid
        .iter()
        .map(|&k| prob::sharpe_ratio(&x.min_with(k)).to_f64())
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trinomial() -> RandomVariable {
        RandomVariable::from_pairs(&[10.0, 1.0, -1.0], &[0.1, 0.8, 0.1]).unwrap()
    }

    #[test]
    fn alpha_hat_examples() {
        let two = RandomVariable::from_pairs(&[2.0, -1.0], &[0.5, 0.5]).unwrap();
        let a = solve_alpha_hat(&two).unwrap();
        assert_abs_diff_eq!(a, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha_foc(&two, a), 0.0, epsilon = 1e-15);

        let a = solve_alpha_hat(&trinomial()).unwrap();
        assert_abs_diff_eq!(a, 7.0 / 9.0, epsilon = 1e-15);
        let t = trinomial().scale(a).min_with(1.0);
        let m = crate::prob::mean(&t);
        let s = t.law().expect_with(t.values(), |v| v * v);
        assert_abs_diff_eq!(m, s, epsilon = 1e-15);
        assert_abs_diff_eq!(m, 0.6444444444444444, epsilon = 1e-15);

        let a3 = solve_alpha_hat(&trinomial().scale(3.0)).unwrap();
        assert_abs_diff_eq!(a3, 7.0 / 27.0, epsilon = 1e-15);
    }

    #[test]
    fn alpha_hat_matches_bisection() {
        for x in [trinomial(), trinomial().scale(0.01)] {
            let exact = solve_alpha_hat(&x).unwrap();
            let bis = solve_alpha_hat_bisection(&x).unwrap();
            assert_abs_diff_eq!(exact, bis, epsilon = 1e-11 * exact);
        }
    }

    #[test]
    fn alpha_hat_errors() {
        let neg = RandomVariable::from_pairs(&[1.0, -2.0], &[0.5, 0.5]).unwrap();
        assert!(matches!(
            solve_alpha_hat(&neg),
            Err(Error::NonpositiveMean { .. })
        ));
        let pos = RandomVariable::from_pairs(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!(matches!(solve_alpha_hat(&pos), Err(Error::NoDownside)));
    }

    #[test]
    fn monotone_sharpe_examples() {
        let r = monotone_sharpe(&trinomial()).unwrap();
        assert_eq!(r.case, CaseTag::Standard);
        assert_abs_diff_eq!(r.sr_m.to_f64(), 1.8125f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.truncation_level.unwrap(), 9.0 / 7.0, epsilon = 1e-14);

        let two = RandomVariable::from_pairs(&[2.0, -1.0], &[0.5, 0.5]).unwrap();
        let r = monotone_sharpe(&two).unwrap();
        assert_abs_diff_eq!(r.sr_m.to_f64(), 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.truncation_level.unwrap(), 5.0, epsilon = 1e-13);

        let flat = RandomVariable::from_pairs(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        let r = monotone_sharpe(&flat).unwrap();
        assert_eq!(r.case, CaseTag::NoDownside);
        assert_abs_diff_eq!(r.sr_m.to_f64(), 1.0, epsilon = 1e-15);
        assert!(r.alpha_hat.is_none());

        let pos = RandomVariable::from_pairs(&[1.0, 3.0], &[0.5, 0.5]).unwrap();
        assert_eq!(
            monotone_sharpe(&pos).unwrap().sr_m,
            ExtendedReal::PosInfinity
        );
        let zero = RandomVariable::from_pairs(&[0.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_eq!(
            monotone_sharpe(&zero).unwrap().sr_m,
            ExtendedReal::Finite(0.0)
        );

        let bad = RandomVariable::from_pairs(&[1.0, -3.0], &[0.5, 0.5]).unwrap();
        assert!(matches!(
            monotone_sharpe(&bad),
            Err(Error::NonpositiveMean { .. })
        ));
    }

    #[test]
    fn value_sharpe_bijection() {
        assert_eq!(sr_to_value(0.0), 0.0);
        let big = sr_to_value(1e6);
        assert!(big > 0.4999999 && big < 0.5);
        assert_abs_diff_eq!(sr_to_value(0.600666), 0.132569, epsilon = 1e-6);
        assert_eq!(value_to_sr(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            value_to_sr(29.0 / 90.0).unwrap(),
            1.8125f64.sqrt(),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(value_to_sr(0.05).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
        assert!(value_to_sr(-0.1).is_err());
        assert!(value_to_sr(0.5).is_err());
        for z in [0.0, 0.1, 1.0, 3.7, 40.0] {
            assert_abs_diff_eq!(
                value_to_sr(sr_to_value(z)).unwrap(),
                z,
                epsilon = 1e-10 * (1.0 + z)
            );
        }
    }

    #[test]
    fn grid_oracle_examples() {
        let two = RandomVariable::from_pairs(&[2.0, -1.0], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            oracle_grid_sr(&two, &[0.5, 2.0, 3.0]),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        let law = two.law().clone();
        let one = RandomVariable::constant(law, 1.0);
        assert_eq!(oracle_grid_sr(&one, &[1.0]), f64::INFINITY);
    }
}
