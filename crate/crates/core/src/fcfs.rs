//! Free cash-flow streams and the maximal Sharpe ratios.
//!
//! A free cash-flow stream exists when some optimal mean-variance investor
//! could withdraw a nonnegative, nonzero amount and still reach the
//! mean-variance frontier value. On a finite tree the following are
//! equivalent, and all fail exactly when such a stream exists:
//!
//! * (a) `u_MV = u_MMV`;
//! * (b) `u = u_m`;
//! * (c) the quadratic optimum `θ̂⁰·S_T` never exceeds 1;
//! * (d) the signed variance-optimal density is nonnegative.
//!
//! The maximal Sharpe ratio is `√(2u_MV)` and the maximal monotone Sharpe
//! ratio is `√(2u_MMV)`; their gap is strictly positive exactly when (a)-(d)
//! fail.

use crate::dual::{variance_optimal_nonneg, variance_optimal_signed, DualSolution};
use crate::error::{Error, Result};
use crate::market::{terminal_wealth, ScenarioTree, Strategy};
use crate::primal::{mmv_allocation, MmvAllocation, NO_OPPORTUNITY_TOL};
use crate::prob::{self, RandomVariable};
use crate::sharpe::monotone_sharpe;

/// Tolerance of (a) and (b).
pub const VALUE_TOL: f64 = 1e-8;
/// Tolerance of (c) and (d).
pub const PAYOFF_TOL: f64 = 1e-9;
/// Margin by which the certificate must beat the frontier value.
pub const CERTIFICATE_MARGIN: f64 = 1e-10;

/// Disagreements within these bands of the boundary are reported as
/// marginal rather than as a solver inconsistency.
const VALUE_BAND: f64 = 1e-6;
const PAYOFF_BAND: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Equivalence {
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
}

impl Equivalence {
    pub fn all(&self) -> bool {
        self.a && self.b && self.c && self.d
    }

    pub fn none(&self) -> bool {
        !(self.a || self.b || self.c || self.d)
    }

    pub fn consistent(&self) -> bool {
        self.all() || self.none()
    }
}

#[derive(Debug, Clone)]
pub struct FcfsReport {
    pub u: f64,
    pub u_m: f64,
    pub u_mv: f64,
    pub u_mmv: f64,
    pub sr_max: f64,
    pub sr_m_max: f64,
    /// `sharpe_ratio(min(θ̂⁰_m·S_T, 1))`, which equals `sr_m_max`.
    pub sr_truncated: f64,
    pub equiv: Equivalence,
    pub fcfs_exists: bool,
    /// `(1 - θ̂⁰_m·S_T)⁺` when a stream exists.
    pub fcfs_payoff: Option<RandomVariable>,
    /// Amount `(1 - 2u_m)⁻¹ (θ̂⁰_m·S_T - 1)⁺` withdrawn from the MMV investor.
    pub extracted_flow: Option<RandomVariable>,
    pub signed: DualSolution,
    pub nonneg: DualSolution,
    pub allocation: MmvAllocation,
    pub gap: f64,
    /// The booleans disagree, but only within a band of the boundary.
    pub marginal: bool,
}

impl FcfsReport {
    pub fn c_hat_m(&self) -> f64 {
        self.allocation.c_hat_m
    }

    /// The MMV strategy `θ̂⁰_MMV`.
    pub fn strategy(&self) -> &Strategy {
        &self.allocation.strategy
    }
}

fn opportunity_sharpe(x: &RandomVariable, value: f64) -> f64 {
    if value <= NO_OPPORTUNITY_TOL {
        0.0
    } else {
        prob::sharpe_ratio(x).to_f64()
    }
}

pub fn analyze(tree: &ScenarioTree) -> Result<FcfsReport> {
    let signed = variance_optimal_signed(tree)?;
    let nonneg = variance_optimal_nonneg(tree)?;
    let allocation = mmv_allocation(tree)?;
    let (u, u_m, u_mv, u_mmv) = (
        allocation.u,
        allocation.u_m,
        allocation.u_mv,
        allocation.u_mmv,
    );
    let x = &allocation.quadratic.payoff;
    let x_m = &allocation.truncated.payoff;

    let sr_max = opportunity_sharpe(x, u);
    let (sr_m_max, sr_truncated) = if u_m <= NO_OPPORTUNITY_TOL {
        (0.0, 0.0)
    } else {
        let sr_m = monotone_sharpe(x_m)?.sr_m.to_f64();
        (sr_m, prob::sharpe_ratio(&x_m.min_with(1.0)).to_f64())
    };

    let da = (u_mv - u_mmv).abs();
    let db = (u - u_m).abs();
    let dc = x.max_value() - 1.0;
    let dd = -signed.density.z().min_value();
    let equiv = Equivalence {
        a: da <= VALUE_TOL,
        b: db <= VALUE_TOL,
        c: dc <= PAYOFF_TOL,
        d: dd <= PAYOFF_TOL,
    };
    let marginal = !equiv.consistent();
    if marginal {
        let near = [
            equiv.a || da <= VALUE_BAND,
            equiv.b || db <= VALUE_BAND,
            equiv.c || dc <= PAYOFF_BAND,
            equiv.d || dd <= PAYOFF_BAND,
        ];
        if !near.iter().all(|&b| b) {
            return Err(Error::InconsistentEquivalence(format!(
                "a={} b={} c={} d={} (|Δu_MMV|={da:e}, |Δu|={db:e}, max X-1={dc:e}, -min z={dd:e})",
                equiv.a, equiv.b, equiv.c, equiv.d
            )));
        }
    }

    let fcfs_exists = !equiv.a;
    let (fcfs_payoff, extracted_flow) = if fcfs_exists && u_m > NO_OPPORTUNITY_TOL {
        let leverage = allocation.leverage();
        (
            Some(x_m.map(|v| (1.0 - v).max(0.0))),
            Some(x_m.map(|v| leverage * (v - 1.0).max(0.0))),
        )
    } else {
        (None, None)
    };

    Ok(FcfsReport {
        u,
        u_m,
        u_mv,
        u_mmv,
        sr_max,
        sr_m_max,
        sr_truncated,
        equiv,
        fcfs_exists,
        fcfs_payoff,
        extracted_flow,
        signed,
        nonneg,
        gap: sr_m_max - sr_max,
        marginal,
        allocation,
    })
}

/// Checks that withdrawing `flow` from the terminal wealth of `strategy`
/// leaves a mean-variance value strictly above `u_mv`.
pub fn check_fcfs_certificate(
    tree: &ScenarioTree,
    strategy: &Strategy,
    flow: &RandomVariable,
    u_mv: f64,
) -> Result<()> {
    if flow.min_value() < 0.0 {
        return Err(Error::CertificateInvalid(format!(
            "Z takes the negative value {}",
            flow.min_value()
        )));
    }
    if flow.prob_where(|v| v > 0.0) == 0.0 {
        return Err(Error::CertificateInvalid("P(Z > 0) = 0".into()));
    }
    let wealth = terminal_wealth(tree, strategy, 0.0)?;
    let left = wealth.zip_with(flow, |w, z| w - z)?;
    let value = prob::eval_fmv(&left);
    if value < u_mv + CERTIFICATE_MARGIN {
        return Err(Error::CertificateInvalid(format!(
            "F_MV of the left-over wealth is {value}, not above u_MV = {u_mv}"
        )));
    }
    Ok(())
}

/// Applies [`check_fcfs_certificate`] to the MMV strategy and the flow the
/// report extracts from it.
pub fn verify_fcfs_certificate(tree: &ScenarioTree, report: &FcfsReport) -> Result<bool> {
    let flow = match (&report.extracted_flow, report.fcfs_exists) {
        (Some(flow), true) => flow,
        _ => {
            return Err(Error::CertificateInvalid(
                "the report has no free cash-flow stream".into(),
            ))
        }
    };
    check_fcfs_certificate(tree, report.strategy(), flow, report.u_mv)?;
    Ok(true)
}
