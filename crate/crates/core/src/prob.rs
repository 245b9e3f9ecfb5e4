//! Finite probability laws, random variables on them, and the preference
//! functionals built from quadratic utility `U(x) = x - x²/2`.
//!
//! * `F(X)    = E[U(X)]`
//! * `F_m(X)  = F(X ∧ 1)`, the monotone hull of `F`
//! * `F_MV(X) = E[X] - Var(X)/2`, the cash-invariant hull of `F`
//! * `F_MMV(X) = sup_c { E[U_m(X - c)] + c }`, the monotone mean-variance
//!   functional, with `U_m(x) = (x ∧ 1) - (x ∧ 1)²/2`.
//!
//! Every variable lives on a [`DiscreteLaw`] with strictly positive atoms, so
//! all of these are finite everywhere.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`DiscreteLaw`].
pub const MASS_TOL: f64 = 1e-12;

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

/// A finite probability space with strictly positive atom weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    atoms: Vec<String>,
    probs: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if atoms.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: probs.len(),
            });
        }
        if probs.is_empty() {
            return Err(Error::validation("law", "no atoms"));
        }
        for (id, &p) in atoms.iter().zip(&probs) {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::validation(
                    format!("atom {id}"),
                    format!("probability must be strictly positive, got {p}"),
                ));
            }
        }
        let mass = compensated_sum(probs.iter().copied());
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::validation(
                "law",
                format!("probabilities sum to {mass}, not 1"),
            ));
        }
        Ok(DiscreteLaw { atoms, probs })
    }

    /// Law with atoms named `0..n`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let atoms = (0..probs.len()).map(|i| i.to_string()).collect();
        DiscreteLaw::new(atoms, probs)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        DiscreteLaw::from_probs(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `Σ p_i f_i`, compensated.
    pub fn expect(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.probs.len());
        compensated_sum(self.probs.iter().zip(values).map(|(p, x)| p * x))
    }

    pub fn expect_with(&self, values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.probs.iter().zip(values).map(|(p, &x)| p * f(x)))
    }
}

/// A real number or one of the two infinities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

impl ExtendedReal {
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInfinity => f64::INFINITY,
            ExtendedReal::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtendedReal::PosInfinity
        } else if v == f64::NEG_INFINITY {
            ExtendedReal::NegInfinity
        } else {
            ExtendedReal::Finite(v)
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => write!(f, "inf"),
            ExtendedReal::NegInfinity => write!(f, "-inf"),
        }
    }
}

/// One real value per atom of a shared [`DiscreteLaw`].
#[derive(Debug, Clone)]
pub struct RandomVariable {
    law: Arc<DiscreteLaw>,
    values: Vec<f64>,
}

impl PartialEq for RandomVariable {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.law, &other.law) || self.law == other.law) && self.values == other.values
    }
}

impl RandomVariable {
    pub fn new(law: Arc<DiscreteLaw>, values: Vec<f64>) -> Result<Self> {
        if values.len() != law.len() {
            return Err(Error::DimensionMismatch {
                expected: law.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                format!("atom {}", law.atoms()[i]),
                "value is not finite",
            ));
        }
        Ok(RandomVariable { law, values })
    }

    pub fn constant(law: Arc<DiscreteLaw>, c: f64) -> Self {
        let n = law.len();
        RandomVariable {
            law,
            values: vec![c; n],
        }
    }

    /// Convenience constructor for a fresh law: `(values, probs)`.
    pub fn from_pairs(values: &[f64], probs: &[f64]) -> Result<Self> {
        let law = Arc::new(DiscreteLaw::from_probs(probs.to_vec())?);
        RandomVariable::new(law, values.to_vec())
    }

    pub fn law(&self) -> &Arc<DiscreteLaw> {
        &self.law
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        self.law.probs()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RandomVariable {
            law: Arc::clone(&self.law),
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if other.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(RandomVariable {
            law: Arc::clone(&self.law),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `X ∧ k`, atomwise.
    pub fn min_with(&self, k: f64) -> Self {
        self.map(|x| x.min(k))
    }

    pub fn scale(&self, lambda: f64) -> Self {
        self.map(|x| lambda * x)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|x| x + c)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_degenerate(&self) -> bool {
        self.min_value() == self.max_value()
    }

    /// `P(pred(X))`.
    pub fn prob_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        compensated_sum(
            self.probs()
                .iter()
                .zip(&self.values)
                .filter(|(_, &x)| pred(x))
                .map(|(p, _)| *p),
        )
    }
}

/// First and second central moments from one weighted pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

pub fn moments(x: &RandomVariable) -> Moments {
    // Weighted Welford update for the variance, Neumaier sum for the mean.
    let mut weight = 0.0;
    let mut running_mean = 0.0;
    let mut m2 = CompensatedSum::default();
    let mut mean = CompensatedSum::default();
    for (&p, &v) in x.probs().iter().zip(x.values()) {
        mean.add(p * v);
        weight += p;
        let delta = v - running_mean;
        running_mean += (p / weight) * delta;
        m2.add(p * delta * (v - running_mean));
    }
    let variance = if x.is_degenerate() {
        0.0
    } else {
        (m2.value() / weight).max(0.0)
    };
    Moments {
        mean: mean.value(),
        variance,
    }
}

pub fn mean(x: &RandomVariable) -> f64 {
    x.law().expect(x.values())
}

pub fn variance(x: &RandomVariable) -> f64 {
    moments(x).variance
}

/// `E[X]/sqrt(Var X)`, with `1/0 = +inf`, `-1/0 = -inf` and `0/0 = 0`.
pub fn sharpe_ratio(x: &RandomVariable) -> ExtendedReal {
    let m = moments(x);
    if m.variance == 0.0 {
        if m.mean > 0.0 {
            ExtendedReal::PosInfinity
        } else if m.mean < 0.0 {
            ExtendedReal::NegInfinity
        } else {
            ExtendedReal::Finite(0.0)
        }
    } else {
        ExtendedReal::Finite(m.mean / m.variance.sqrt())
    }
}

pub fn quadratic_utility(x: f64) -> f64 {
    x - 0.5 * x * x
}

/// Quadratic utility flattened above its bliss point 1.
pub fn truncated_utility(x: f64) -> f64 {
    quadratic_utility(x.min(1.0))
}

/// `F(X) = E[X] - E[X²]/2`.
pub fn eval_f(x: &RandomVariable) -> f64 {
    x.law().expect_with(x.values(), quadratic_utility)
}

/// `F_m(X) = E[X ∧ 1] - E[(X ∧ 1)²]/2`.
pub fn eval_fm(x: &RandomVariable) -> f64 {
    eval_f(&x.min_with(1.0))
}

/// `F_MV(X) = E[X] - Var(X)/2`.
pub fn eval_fmv(x: &RandomVariable) -> f64 {
    let m = moments(x);
    m.mean - 0.5 * m.variance
}

/// Value and optimal cash level of the monotone mean-variance functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmvValue {
    pub value: f64,
    pub c_hat: f64,
}

/// `c ↦ E[(1 - X + c)⁺]`, the derivative of `c ↦ -E[U_m(X - c)]`.
pub fn cash_foc(x: &RandomVariable, c: f64) -> f64 {
    x.law().expect_with(x.values(), |v| (1.0 - v + c).max(0.0))
}

/// Exact root of `E[(1 - X + c)⁺] = 1`.
///
/// The left side is piecewise linear in `c` with kinks at `x_i - 1`; on the
/// segment where the `k` smallest atoms are active it equals
/// `P_k (1 + c) - E[X; first k]`, so each segment is solved in closed form.
pub fn cash_root(x: &RandomVariable) -> f64 {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x.values()[a].total_cmp(&x.values()[b]));
    let mut mass = CompensatedSum::default();
    let mut first = CompensatedSum::default();
    for (k, &i) in order.iter().enumerate() {
        let (p, v) = (x.probs()[i], x.values()[i]);
        mass.add(p);
        first.add(p * v);
        let c = (1.0 + first.value()) / mass.value() - 1.0;
        let next_kink = order
            .get(k + 1)
            .map_or(f64::INFINITY, |&j| x.values()[j] - 1.0);
        if c <= next_kink {
            return c.max(v - 1.0);
        }
    }
    unreachable!("E[(1 - X + c)+] is unbounded in c")
}

/// Bracketing bisection for the same root; used as a cross-check of
/// [`cash_root`].
pub fn cash_root_bisection(x: &RandomVariable) -> f64 {
    let mut lo = x.min_value() - 2.0;
    let mut hi = x.max_value() + 2.0;
    let mut step = 1.0;
    while cash_foc(x, lo) > 1.0 {
        lo -= step;
        step *= 2.0;
    }
    step = 1.0;
    while cash_foc(x, hi) < 1.0 {
        hi += step;
        step *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cash_foc(x, mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `F_MMV(X) = sup_c { E[U_m(X - c)] + c }` together with its maximizer.
pub fn eval_fmmv(x: &RandomVariable) -> MmvValue {
    let c_hat = cash_root(x);
    debug_assert!(
        (c_hat - cash_root_bisection(x)).abs() <= 1e-9 * (1.0 + c_hat.abs()),
        "exact and bisection cash roots disagree"
    );
    let value = x
        .law()
        .expect_with(x.values(), |v| truncated_utility(v - c_hat))
        + c_hat;
    MmvValue { value, c_hat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trinomial() -> RandomVariable {
        RandomVariable::from_pairs(&[10.0, 1.0, -1.0], &[0.1, 0.8, 0.1]).unwrap()
    }

    #[test]
    fn law_rejects_zero_atom() {
        assert!(DiscreteLaw::from_probs(vec![0.5, 0.5, 0.0]).is_err());
        assert!(DiscreteLaw::from_probs(vec![0.5, 0.4]).is_err());
        assert!(DiscreteLaw::from_probs(vec![]).is_err());
    }

    #[test]
    fn rejects_nonfinite_values() {
        let law = Arc::new(DiscreteLaw::uniform(2).unwrap());
        assert!(RandomVariable::new(law.clone(), vec![1.0, f64::NAN]).is_err());
        assert!(RandomVariable::new(law, vec![1.0]).is_err());
    }

    #[test]
    fn mean_examples() {
        let law = Arc::new(DiscreteLaw::uniform(3).unwrap());
        assert_abs_diff_eq!(
            mean(&RandomVariable::constant(law, 4.5)),
            4.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(mean(&trinomial()), 1.7, epsilon = 1e-14);
        let sym = RandomVariable::from_pairs(&[1.0, -1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(mean(&sym), 0.0);
    }

    #[test]
    fn sharpe_conventions() {
        let law = Arc::new(DiscreteLaw::uniform(3).unwrap());
        assert_eq!(
            sharpe_ratio(&RandomVariable::constant(law.clone(), 1.0)),
            ExtendedReal::PosInfinity
        );
        assert_eq!(
            sharpe_ratio(&RandomVariable::constant(law.clone(), -2.0)),
            ExtendedReal::NegInfinity
        );
        assert_eq!(
            sharpe_ratio(&RandomVariable::constant(law, 0.0)),
            ExtendedReal::Finite(0.0)
        );
        let sr = sharpe_ratio(&trinomial()).to_f64();
        assert_abs_diff_eq!(sr, 1.7 / 8.01f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(sr, 0.600666, epsilon = 1e-6);
    }

    #[test]
    fn functional_examples() {
        let law = Arc::new(DiscreteLaw::uniform(2).unwrap());
        assert_eq!(eval_f(&RandomVariable::constant(law.clone(), 1.0)), 0.5);
        assert_eq!(eval_f(&RandomVariable::constant(law.clone(), 0.0)), 0.0);
        assert_abs_diff_eq!(eval_f(&trinomial()), -3.75, epsilon = 1e-13);

        assert_eq!(eval_fm(&RandomVariable::constant(law.clone(), 5.0)), 0.5);
        assert_eq!(eval_fm(&RandomVariable::constant(law.clone(), 0.0)), 0.0);
        let scaled = trinomial().scale(7.0 / 9.0);
        // E[X ∧ 1] = E[(X ∧ 1)²] = 0.644444... at the optimal scaling
        assert_abs_diff_eq!(eval_fm(&scaled), 0.644444444444444 / 2.0, epsilon = 1e-12);

        assert_abs_diff_eq!(
            eval_fmv(&RandomVariable::constant(law, 3.25)),
            3.25,
            epsilon = 1e-15
        );
        let sym = RandomVariable::from_pairs(&[1.0, -1.0], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(eval_fmv(&sym), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_fmv(&trinomial()), -2.305, epsilon = 1e-13);
    }

    #[test]
    fn fmmv_constant() {
        let law = Arc::new(DiscreteLaw::uniform(4).unwrap());
        for c0 in [-3.0, 0.0, 0.7, 12.0] {
            let v = eval_fmmv(&RandomVariable::constant(law.clone(), c0));
            assert_abs_diff_eq!(v.value, c0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.c_hat, c0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fmmv_scaled_trinomial() {
        let x = trinomial().scale(2.1875);
        let v = eval_fmmv(&x);
        assert_abs_diff_eq!(v.c_hat, 1.8125, epsilon = 1e-12);
        assert_abs_diff_eq!(v.value, 0.90625, epsilon = 1e-12);
        assert_abs_diff_eq!(cash_foc(&x, v.c_hat), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fmmv_dominates_mv_on_symmetric_coin() {
        let x = RandomVariable::from_pairs(&[1.0, -1.0], &[0.5, 0.5]).unwrap();
        assert!(eval_fmmv(&x).value >= eval_fmv(&x) - 1e-15);
    }

    #[test]
    fn cash_root_handles_ties() {
        let x = RandomVariable::from_pairs(&[2.0, 2.0, -1.0, -1.0], &[0.25; 4]).unwrap();
        let c = cash_root(&x);
        assert_abs_diff_eq!(cash_foc(&x, c), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(c, cash_root_bisection(&x), epsilon = 1e-10);
    }

    #[test]
    fn extended_real_display() {
        assert_eq!(ExtendedReal::PosInfinity.to_string(), "inf");
        assert_eq!(
            ExtendedReal::from(f64::NEG_INFINITY),
            ExtendedReal::NegInfinity
        );
        assert_eq!(ExtendedReal::Finite(0.5).finite(), Some(0.5));
    }
}
