//! Seeded random scenario trees for property testing.
//!
//! Each node draws a risk-neutral branch law `q` and a physical law `P`
//! independently, then centres the raw asset returns under `q`, so the tree
//! is viable by construction. Rejection against [`check_viability`] guards the
//! construction anyway.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_viability, NodeSpec, ScenarioTree};
use crate::error::{Error, Result};

const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub periods: usize,
    pub branching: usize,
    pub assets: usize,
    /// Raw per-step returns are drawn from `[-spread, spread]`.
    pub spread: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            periods: 1,
            branching: 3,
            assets: 1,
            spread: 0.2,
        }
    }
}

impl GeneratorParams {
    fn validate(&self) -> Result<()> {
        if self.branching < 2 {
            return Err(Error::Domain(format!(
                "branching must be >= 2, got {}",
                self.branching
            )));
        }
        if self.periods == 0 || self.assets == 0 {
            return Err(Error::Domain("periods and assets must be >= 1".into()));
        }
        if !(self.spread > 0.0 && self.spread < 0.5) {
            return Err(Error::Domain(format!(
                "spread must lie in (0, 0.5), got {}",
                self.spread
            )));
        }
        Ok(())
    }
}

fn branch_law(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn draw_tree(rng: &mut ChaCha8Rng, params: &GeneratorParams) -> Result<ScenarioTree> {
    let d = params.assets;
    let b = params.branching;
    let mut specs = vec![NodeSpec {
        id: "n0".into(),
        parent: None,
        t: 0,
        p: None,
        prices: vec![1.0; d],
    }];
    let mut frontier = vec![0usize];
    for t in 1..=params.periods {
        let mut next = Vec::with_capacity(frontier.len() * b);
        for &parent in &frontier {
            let q = branch_law(rng, b);
            let p = branch_law(rng, b);
            let raw: Vec<Vec<f64>> = (0..b)
                .map(|_| {
                    (0..d)
                        .map(|_| rng.random_range(-params.spread..params.spread))
                        .collect()
                })
                .collect();
            let drift: Vec<f64> = (0..d)
                .map(|a| (0..b).map(|j| q[j] * raw[j][a]).sum())
                .collect();
            let parent_prices = specs[parent].prices.clone();
            let parent_id = specs[parent].id.clone();
            for j in 0..b {
                let prices = (0..d)
                    .map(|a| parent_prices[a] * (1.0 + raw[j][a] - drift[a]))
                    .collect();
                next.push(specs.len());
                specs.push(NodeSpec {
                    id: format!("n{}", specs.len()),
                    parent: Some(parent_id.clone()),
                    t,
                    p: Some(p[j]),
                    prices,
                });
            }
        }
        frontier = next;
    }
    ScenarioTree::new(d, params.periods, specs)
}

/// Deterministic in `seed`; every returned tree passes [`check_viability`].
pub fn generate_random_market(seed: u64, params: &GeneratorParams) -> Result<ScenarioTree> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let tree = draw_tree(&mut rng, params)?;
        if check_viability(&tree)? {
            return Ok(tree);
        }
    }
    Err(Error::GenerationFailure(MAX_ATTEMPTS))
}
