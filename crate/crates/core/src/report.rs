//! Serialized analysis reports.
//!
//! JSON numbers carry 12 significant digits. The CSV form is one row per
//! leaf, meant for plotting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fcfs::FcfsReport;
use crate::market::ScenarioTree;
use crate::prob::RandomVariable;
use crate::sharpe;

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn round_all(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(round12).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivJson {
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub u: f64,
    pub u_m: f64,
    pub u_mv: f64,
    pub u_mmv: f64,
    pub sr_max: f64,
    pub sr_m_max: f64,
    pub c_hat_m: f64,
    pub equiv: EquivJson,
    pub fcfs_exists: bool,
    pub fcfs_payoff: Vec<f64>,
    pub signed_density: Vec<f64>,
    pub nonneg_density: Vec<f64>,
    /// MMV holdings by node id.
    pub strategy: BTreeMap<String, Vec<f64>>,
    pub marginal: bool,
}

impl AnalysisReport {
    pub fn new(tree: &ScenarioTree, report: &FcfsReport) -> Self {
        AnalysisReport {
            u: round12(report.u),
            u_m: round12(report.u_m),
            u_mv: round12(report.u_mv),
            u_mmv: round12(report.u_mmv),
            sr_max: round12(report.sr_max),
            sr_m_max: round12(report.sr_m_max),
            c_hat_m: round12(report.c_hat_m()),
            equiv: EquivJson {
                a: report.equiv.a,
                b: report.equiv.b,
                c: report.equiv.c,
                d: report.equiv.d,
            },
            fcfs_exists: report.fcfs_exists,
            fcfs_payoff: report
                .fcfs_payoff
                .as_ref()
                .map(|z| round_all(z.values()))
                .unwrap_or_default(),
            signed_density: round_all(report.signed.density.values()),
            nonneg_density: round_all(report.nonneg.density.values()),
            strategy: report
                .strategy()
                .by_node(tree)
                .into_iter()
                .map(|(id, h)| (id, round_all(&h)))
                .collect(),
            marginal: report.marginal,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Leaf table: id, probability, the three optimal payoffs, both densities and
/// the free cash-flow payoff (empty when absent).
pub fn leaf_table(
    tree: &ScenarioTree,
    report: &FcfsReport,
    source: Option<&str>,
) -> Vec<Vec<String>> {
    let fcfs = report.fcfs_payoff.as_ref().map(|z| z.values().to_vec());
    let mmv = report
        .allocation
        .truncated
        .payoff
        .values()
        .iter()
        .map(|v| v * report.allocation.leverage())
        .collect::<Vec<_>>();
    tree.leaves()
        .enumerate()
        .map(|(w, leaf)| {
            let mut row = Vec::new();
            if let Some(s) = source {
                row.push(s.to_string());
            }
            row.push(leaf.id.clone());
            let nums = [
                tree.leaf_probs()[w],
                report.allocation.quadratic.payoff.values()[w],
                report.allocation.truncated.payoff.values()[w],
                mmv[w],
                report.signed.density.values()[w],
                report.nonneg.density.values()[w],
            ];
            row.extend(nums.iter().map(|v| round12(*v).to_string()));
            row.push(
                fcfs.as_ref()
                    .map(|z| round12(z[w]).to_string())
                    .unwrap_or_default(),
            );
            row
        })
        .collect()
}

pub fn leaf_table_header(with_source: bool) -> Vec<&'static str> {
    let mut h = Vec::new();
    if with_source {
        h.push("file");
    }
    h.extend([
        "leaf",
        "prob",
        "payoff_quadratic",
        "payoff_truncated",
        "payoff_mmv",
        "signed_density",
        "nonneg_density",
        "fcfs_payoff",
    ]);
    h
}

/// Rows `(K, SR(X ∧ K))` over `points` levels spanning the atoms of `X`.
pub fn truncation_table(x: &RandomVariable, points: usize) -> Vec<(f64, f64)> {
    let lo = x.min_value().max(0.0);
    let hi = x.max_value();
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let k = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (k, sharpe::oracle_grid_sr(x, &[k]))
        })
        .collect()
}
