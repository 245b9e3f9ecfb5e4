//! Built-in regression battery behind `mmv selftest`.
//!
//! Reproduces the worked trinomial and binomial examples and runs reduced
//! versions of the randomized duality, equivalence and scaling checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{variance_optimal_nonneg, variance_optimal_signed};
use crate::error::Result;
use crate::fcfs::{analyze, verify_fcfs_certificate};
use crate::market::{generate_random_market, parse_market, GeneratorParams, ScenarioTree};
use crate::primal::{mmv_allocation, optimal_quadratic, optimal_truncated, verify_cash_shift_foc};
use crate::prob::{self, RandomVariable};
use crate::sharpe::{alpha_foc, monotone_sharpe, oracle_grid_sr, value_to_sr};

const TRINOMIAL: &str = include_str!("../fixtures/trinomial.json");
const BINOMIAL: &str = include_str!("../fixtures/binomial.json");

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn outcome(name: &'static str, result: Result<std::result::Result<(), String>>) -> CheckOutcome {
    let (passed, detail) = match result {
        Ok(Ok(())) => (true, String::new()),
        Ok(Err(msg)) => (false, msg),
        Err(e) => (false, e.to_string()),
    };
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn trinomial_chain() -> Result<std::result::Result<(), String>> {
    let tree = parse_market(TRINOMIAL)?;
    let r = analyze(&tree)?;
    let z = [-0.7615480649188514, 1.1485642946317103, 1.5730337078651686];
    let mut bad = Vec::new();
    let checks = [
        ("u", r.u, 0.13256880733944956),
        ("u_m", r.u_m, 0.3222222222222222),
        ("u_mv", r.u_mv, 0.18039950062421972),
        ("u_mmv", r.u_mmv, 0.90625),
        ("c_hat_m", r.c_hat_m(), 1.8125),
        ("sr_max", r.sr_max, 0.6006654653369373),
        ("sr_m_max", r.sr_m_max, 1.3462912017836262),
        ("signed E[z²]", r.signed.second_moment, 1.3607990012484392),
        ("nonneg E[z²]", r.nonneg.second_moment, 2.8125),
    ];
    for (name, got, want) in checks {
        if !close(got, want, 1e-6) {
            bad.push(format!("{name}: {got} vs {want}"));
        }
    }
    for (w, want) in z.iter().enumerate() {
        if !close(r.signed.density.values()[w], *want, 1e-6) {
            bad.push(format!("signed z[{w}]"));
        }
    }
    let payoff = r
        .fcfs_payoff
        .as_ref()
        .map(|x| x.values().to_vec())
        .unwrap_or_default();
    if payoff.len() != 3
        || !payoff
            .iter()
            .zip([0.0, 2.0 / 9.0, 16.0 / 9.0])
            .all(|(a, b)| close(*a, b, 1e-6))
    {
        bad.push("fcfs payoff".into());
    }
    if !r.equiv.none() || !r.fcfs_exists {
        bad.push("equivalence booleans".into());
    }
    if !verify_fcfs_certificate(&tree, &r)? {
        bad.push("certificate".into());
    }
    Ok(if bad.is_empty() {
        Ok(())
    } else {
        Err(bad.join("; "))
    })
}

fn binomial_chain() -> Result<std::result::Result<(), String>> {
    let tree = parse_market(BINOMIAL)?;
    let r = analyze(&tree)?;
    let z = r.nonneg.density.values();
    let ok = close(z[0], 2.0 / 3.0, 1e-8)
        && close(z[1], 4.0 / 3.0, 1e-8)
        && close(r.u, 0.05, 1e-8)
        && close(r.u_m, 0.05, 1e-8)
        && close(r.sr_max, 1.0 / 3.0, 1e-8)
        && close(r.sr_m_max, 1.0 / 3.0, 1e-8)
        && r.equiv.all()
        && !r.fcfs_exists;
    Ok(if ok { Ok(()) } else { Err(format!("{r:?}")) })
}

fn random_tree(seed: u64) -> Result<ScenarioTree> {
    let params = GeneratorParams {
        periods: 1 + (seed % 3) as usize,
        branching: 2 + (seed / 3 % 3) as usize,
        assets: 1 + (seed / 9 % 2) as usize,
        spread: 0.3,
    };
    generate_random_market(seed, &params)
}

fn duality(trees: u64) -> Result<std::result::Result<(), String>> {
    for seed in 0..trees {
        let tree = random_tree(seed)?;
        let a = variance_optimal_signed(&tree)?.second_moment;
        let b = variance_optimal_nonneg(&tree)?.second_moment;
        let u = optimal_quadratic(&tree, 0.0)?.value;
        let u_m = optimal_truncated(&tree, 0.0)?.value;
        if !close(u, 0.5 - 0.5 / a, 1e-8) || !close(u_m, 0.5 - 0.5 / b, 1e-8) {
            return Ok(Err(format!("seed {seed}: u={u} a={a} u_m={u_m} b={b}")));
        }
    }
    Ok(Ok(()))
}

fn equivalence(trees: u64) -> Result<std::result::Result<(), String>> {
    for seed in 0..trees {
        let tree = random_tree(1000 + seed)?;
        let r = analyze(&tree)?;
        let consistent = r.equiv.consistent() && (r.gap > 1e-7) == r.equiv.none();
        if !consistent || !verify_cash_shift_foc(&tree, &r.allocation) {
            return Ok(Err(format!(
                "seed {}: {:?} gap {}",
                1000 + seed,
                r.equiv,
                r.gap
            )));
        }
    }
    Ok(Ok(()))
}

fn random_law(rng: &mut ChaCha8Rng) -> RandomVariable {
    loop {
        let n = rng.random_range(2..=8);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..3.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let x = RandomVariable::from_pairs(&values, &probs).expect("valid law");
        if prob::mean(&x) > 0.05 && x.min_value() < 0.0 {
            return x;
        }
    }
}

fn monotone_sharpe_oracle(laws: usize) -> Result<std::result::Result<(), String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..laws {
        let x = random_law(&mut rng);
        let r = monotone_sharpe(&x)?;
        let alpha = r.alpha_hat.unwrap_or(f64::NAN);
        let hi = x.max_value();
        let grid: Vec<f64> = (1..=4000).map(|k| hi * k as f64 / 4000.0).collect();
        let oracle = oracle_grid_sr(&x, &grid);
        if !close(r.sr_m.to_f64(), oracle, 2e-3) || alpha_foc(&x, alpha).abs() > 1e-10 {
            return Ok(Err(format!("law {i}: SR_m {} vs grid {oracle}", r.sr_m)));
        }
    }
    Ok(Ok(()))
}

fn scaling() -> Result<std::result::Result<(), String>> {
    let tree = parse_market(TRINOMIAL)?;
    let base_q = optimal_quadratic(&tree, 0.0)?;
    let base_m = optimal_truncated(&tree, 0.0)?;
    for x in [-1.0, 0.0, 0.5, 1.0, 2.0] {
        let q = optimal_quadratic(&tree, x)?;
        let m = optimal_truncated(&tree, x)?;
        let pos = f64::max(1.0 - x, 0.0);
        let ok = q.strategy.max_abs_diff(&base_q.strategy.scale(1.0 - x)) <= 1e-8
            && m.strategy.max_abs_diff(&base_m.strategy.scale(pos)) <= 1e-8
            && close(m.value, 0.5 + pos * pos * (base_m.value - 0.5), 1e-8);
        if !ok {
            return Ok(Err(format!("x = {x}")));
        }
    }
    Ok(Ok(()))
}

fn normalization() -> Result<std::result::Result<(), String>> {
    let tree = parse_market(TRINOMIAL)?;
    let alloc = mmv_allocation(&tree)?;
    let sr = value_to_sr(alloc.u_m)?;
    Ok(if close(sr, (2.0 * alloc.u_mmv).sqrt(), 1e-8) {
        Ok(())
    } else {
        Err(format!("{sr} vs {}", (2.0 * alloc.u_mmv).sqrt()))
    })
}

pub fn run() -> Vec<CheckOutcome> {
    vec![
        outcome("trinomial chain", trinomial_chain()),
        outcome("binomial chain", binomial_chain()),
        outcome("strong duality", duality(40)),
        outcome("equivalence and dichotomy", equivalence(60)),
        outcome("monotone Sharpe oracle", monotone_sharpe_oracle(100)),
        outcome("scaling in initial capital", scaling()),
        outcome("normalization", normalization()),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn battery_passes() {
        for c in super::run() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
