//! Independent brute-force oracles shared by the integration tests.
//!
//! None of these call into the solvers they check; they only use the crate's
//! data types to read trees and laws.

#![allow(dead_code)]

use monotone_mv::market::{generate_random_market, parse_market, GeneratorParams, ScenarioTree};
use monotone_mv::prob::RandomVariable;
use nalgebra::{DMatrix, DVector};

pub const TRINOMIAL: &str = include_str!("../../fixtures/trinomial.json");
pub const BINOMIAL: &str = include_str!("../../fixtures/binomial.json");
pub const FLAT: &str = include_str!("../../fixtures/flat.json");

pub fn trinomial() -> ScenarioTree {
    parse_market(TRINOMIAL).unwrap()
}

pub fn binomial() -> ScenarioTree {
    parse_market(BINOMIAL).unwrap()
}

pub fn flat() -> ScenarioTree {
    parse_market(FLAT).unwrap()
}

/// Random viable tree with 1-3 periods, 2-4 branches and 1-2 assets.
pub fn random_tree(seed: u64) -> ScenarioTree {
    let params = GeneratorParams {
        periods: 1 + (seed % 3) as usize,
        branching: 2 + (seed / 3 % 3) as usize,
        assets: 1 + (seed / 9 % 2) as usize,
        spread: [0.1, 0.2, 0.3, 0.45][(seed / 18 % 4) as usize],
    };
    generate_random_market(seed, &params).unwrap()
}

pub fn expect(p: &[f64], v: impl Iterator<Item = f64>) -> f64 {
    p.iter().zip(v).map(|(p, v)| p * v).sum()
}

/// Plain two-pass mean and variance.
pub fn mean_var(values: &[f64], probs: &[f64]) -> (f64, f64) {
    let m = expect(probs, values.iter().copied());
    let v = expect(probs, values.iter().map(|x| (x - m) * (x - m)));
    (m, v)
}

pub fn sharpe(values: &[f64], probs: &[f64]) -> f64 {
    let (m, v) = mean_var(values, probs);
    if v == 0.0 {
        return if m > 0.0 {
            f64::INFINITY
        } else if m < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        };
    }
    m / v.sqrt()
}

/// Golden-section maximization of a unimodal function.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// `max_K SR(X ∧ K)` over `n` equally spaced levels up to the largest atom.
pub fn grid_monotone_sharpe(values: &[f64], probs: &[f64], n: usize) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..=n)
        .map(|i| {
            let k = hi * i as f64 / n as f64;
            let capped: Vec<f64> = values.iter().map(|v| v.min(k)).collect();
            sharpe(&capped, probs)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `sup_c E[U_m(X - c)] + c` by enumerating which atoms lie below the
/// truncation point: with the set `S = {X - c < 1}` fixed, the optimal `c`
/// solves `E[(1 - X + c) 1_S] = 1`, and the candidate is kept when it is
/// consistent with `S`.
pub fn fmmv_by_enumeration(values: &[f64], probs: &[f64]) -> f64 {
    let n = values.len();
    let um = |y: f64| {
        let t = y.min(1.0);
        t - t * t / 2.0
    };
    let objective = |c: f64| expect(probs, values.iter().map(|x| um(x - c))) + c;
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << n) {
        let ps: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| probs[i])
            .sum();
        let e: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| probs[i] * (1.0 - values[i]))
            .sum();
        let c = (1.0 - e) / ps;
        let consistent = (0..n).all(|i| (mask >> i & 1 == 1) == (values[i] - c < 1.0 + 1e-12));
        if consistent {
            best = best.max(objective(c));
        }
    }
    best
}

/// `E[U_m(x0 + Gθ)]` and its gradient.
pub fn truncated_objective(
    g: &DMatrix<f64>,
    p: &[f64],
    x0: f64,
    theta: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let y = g * theta;
    let mut value = 0.0;
    let mut grad = DVector::zeros(theta.len());
    for w in 0..p.len() {
        let wealth = x0 + y[w];
        let t = wealth.min(1.0);
        value += p[w] * (t - t * t / 2.0);
        if wealth < 1.0 {
            grad += g.row(w).transpose() * (p[w] * (1.0 - wealth));
        }
    }
    (value, grad)
}

/// Damped Newton ascent on the piecewise-quadratic `θ ↦ E[U_m(x0 + Gθ)]`,
/// with a small ridge on the Hessian and Armijo backtracking.
pub fn newton_truncated(tree: &ScenarioTree, x0: f64) -> f64 {
    let g = tree.increments().clone();
    let p = tree.leaf_probs();
    let k = g.ncols();
    let mut theta = DVector::zeros(k);
    let (mut value, mut grad) = truncated_objective(&g, p, x0, &theta);
    for _ in 0..500 {
        if grad.amax() < 1e-13 {
            break;
        }
        let y = &g * &theta;
        let mut h = DMatrix::identity(k, k) * 1e-12;
        for w in 0..p.len() {
            if x0 + y[w] < 1.0 {
                let row = g.row(w).transpose();
                h += &row * row.transpose() * p[w];
            }
        }
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let cand = &theta + &step * t;
            let (v, gr) = truncated_objective(&g, p, x0, &cand);
            if v >= value + 1e-4 * t * slope || t < 1e-12 {
                if v >= value {
                    theta = cand;
                    value = v;
                    grad = gr;
                }
                break;
            }
            t *= 0.5;
        }
        if t < 1e-12 {
            break;
        }
    }
    value
}

/// For a one-period single-asset tree with three leaves, the martingale
/// densities form a line `z₀ + t v`; the nonnegative variance-optimal one is
/// found by golden-section search over the feasible segment.
pub fn trinomial_nonneg_density(ds: [f64; 3], p: [f64; 3]) -> ([f64; 3], f64) {
    // v spans {v : E[v] = 0, E[v ΔS] = 0}
    let a = [p, [p[0] * ds[0], p[1] * ds[1], p[2] * ds[2]]];
    let v = [
        a[0][1] * a[1][2] - a[0][2] * a[1][1],
        a[0][2] * a[1][0] - a[0][0] * a[1][2],
        a[0][0] * a[1][1] - a[0][1] * a[1][0],
    ];
    // a particular density supported on the two leaves straddling zero
    let (i, j) = if ds[0] > 0.0 { (0, 2) } else { (2, 0) };
    let mut z0 = [0.0; 3];
    // p_i z_i + p_j z_j = 1, p_i z_i ds_i + p_j z_j ds_j = 0
    let det = p[i] * p[j] * (ds[j] - ds[i]);
    z0[i] = p[j] * ds[j] / det;
    z0[j] = -p[i] * ds[i] / det;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for w in 0..3 {
        if v[w] > 0.0 {
            lo = lo.max(-z0[w] / v[w]);
        } else if v[w] < 0.0 {
            hi = hi.min(-z0[w] / v[w]);
        }
    }
    let second = |t: f64| {
        -(0..3)
            .map(|w| p[w] * (z0[w] + t * v[w]).powi(2))
            .sum::<f64>()
    };
    let (t, m) = golden_max(second, lo, hi, 200);
    ([z0[0] + t * v[0], z0[1] + t * v[1], z0[2] + t * v[2]], -m)
}

pub fn values_of(x: &RandomVariable) -> (Vec<f64>, Vec<f64>) {
    (x.values().to_vec(), x.probs().to_vec())
}
