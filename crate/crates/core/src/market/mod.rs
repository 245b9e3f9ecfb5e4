//! Finite multi-period scenario-tree markets.
//!
//! A tree carries `d` risky assets and an implicit bond with constant price 1.
//! Positions are fixed at each non-terminal node for the step to its children,
//! so terminal wealth along a path is `x0 + Σ_t θ_t · (S_{t+1} - S_t)`.
//!
//! On a finite tree every strategy is tame and every σ-martingale is a
//! martingale; martingale densities are characterised by node-wise
//! conditions `Σ_{ω below n} P(ω) z(ω) ΔS_n(ω) = 0`.

mod generate;
mod json;
mod viability;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::prob::{compensated_sum, DiscreteLaw, RandomVariable};

pub use generate::{generate_random_market, GeneratorParams};
pub use json::{load_market, market_to_json, parse_market, write_market};
pub use viability::{check_viability, strictly_positive_density};

/// Tolerance on children's conditional probabilities in input files.
pub const BRANCH_MASS_TOL: f64 = 1e-9;

/// A node as supplied by a caller, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: String,
    pub parent: Option<String>,
    pub t: usize,
    /// Conditional probability of reaching this node from its parent.
    pub p: Option<f64>,
    pub prices: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub parent: Option<usize>,
    pub t: usize,
    pub prob: f64,
    pub prices: Vec<f64>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ScenarioTree {
    nodes: Vec<Node>,
    assets: usize,
    horizon: usize,
    root: usize,
    leaves: Vec<usize>,
    internal: Vec<usize>,
    law: Arc<DiscreteLaw>,
    /// Leaf × (internal node, asset) matrix of price increments along each path.
    increments: DMatrix<f64>,
}

impl ScenarioTree {
    pub fn new(assets: usize, horizon: usize, specs: Vec<NodeSpec>) -> Result<Self> {
        if assets == 0 {
            return Err(Error::validation("market", "assets must be >= 1"));
        }
        if horizon == 0 {
            return Err(Error::validation("market", "periods must be >= 1"));
        }
        let mut index = HashMap::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::validation(format!("node {}", s.id), "duplicate id"));
            }
        }
        let mut nodes = Vec::with_capacity(specs.len());
        let mut roots = Vec::new();
        for (i, s) in specs.iter().enumerate() {
            let at = || format!("node {}", s.id);
            if s.prices.len() != assets {
                return Err(Error::validation(
                    at(),
                    format!("expected {assets} prices, got {}", s.prices.len()),
                ));
            }
            if s.prices.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(at(), "prices must be finite"));
            }
            if s.t > horizon {
                return Err(Error::validation(
                    at(),
                    format!("t = {} beyond horizon {horizon}", s.t),
                ));
            }
            let parent =
                match &s.parent {
                    None => {
                        roots.push(i);
                        None
                    }
                    Some(pid) => Some(*index.get(pid).ok_or_else(|| {
                        Error::validation(at(), format!("unknown parent {pid:?}"))
                    })?),
                };
            let prob = match (parent, s.p) {
                (None, None) => 1.0,
                (None, Some(1.0)) => 1.0,
                (None, Some(p)) => {
                    return Err(Error::validation(
                        at(),
                        format!("root probability must be 1, got {p}"),
                    ))
                }
                (Some(_), None) => {
                    return Err(Error::validation(at(), "missing conditional probability"))
                }
                (Some(_), Some(p)) => {
                    if !(p.is_finite() && p > 0.0 && p <= 1.0 + BRANCH_MASS_TOL) {
                        return Err(Error::validation(
                            at(),
                            format!("branch probability must lie in (0, 1], got {p}"),
                        ));
                    }
                    p
                }
            };
            nodes.push(Node {
                id: s.id.clone(),
                parent,
                t: s.t,
                prob,
                prices: s.prices.clone(),
                children: Vec::new(),
            });
        }
        if roots.len() != 1 {
            return Err(Error::validation(
                "market",
                format!("expected exactly one root, found {}", roots.len()),
            ));
        }
        let root = roots[0];
        if nodes[root].t != 0 {
            return Err(Error::validation(
                format!("node {}", nodes[root].id),
                "root must have t = 0",
            ));
        }
        for i in 0..nodes.len() {
            if let Some(p) = nodes[i].parent {
                if nodes[i].t != nodes[p].t + 1 {
                    return Err(Error::validation(
                        format!("node {}", nodes[i].id),
                        format!("t = {} but parent has t = {}", nodes[i].t, nodes[p].t),
                    ));
                }
                nodes[p].children.push(i);
            }
        }
        // t increases strictly along parent links, so there are no cycles;
        // every node is reachable from the single root.
        for i in 0..nodes.len() {
            let at = format!("node {}", nodes[i].id);
            if nodes[i].children.is_empty() {
                if nodes[i].t != horizon {
                    return Err(Error::validation(
                        at,
                        format!("leaf at t = {} before horizon {horizon}", nodes[i].t),
                    ));
                }
                continue;
            }
            let mass = compensated_sum(nodes[i].children.iter().map(|&c| nodes[c].prob));
            if (mass - 1.0).abs() > BRANCH_MASS_TOL {
                return Err(Error::validation(
                    at,
                    format!("children probabilities sum to {mass}"),
                ));
            }
            let children = nodes[i].children.clone();
            for c in children {
                nodes[c].prob /= mass;
            }
        }

        let leaves: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].children.is_empty())
            .collect();
        let internal: Vec<usize> = (0..nodes.len())
            .filter(|&i| !nodes[i].children.is_empty())
            .collect();
        let mut internal_pos = vec![None; nodes.len()];
        for (k, &i) in internal.iter().enumerate() {
            internal_pos[i] = Some(k);
        }

        let path_prob = |mut i: usize| {
            let mut p = 1.0;
            while let Some(par) = nodes[i].parent {
                p *= nodes[i].prob;
                i = par;
            }
            p
        };
        let mut probs: Vec<f64> = leaves.iter().map(|&l| path_prob(l)).collect();
        let mass = compensated_sum(probs.iter().copied());
        for p in &mut probs {
            *p /= mass;
        }
        let law = Arc::new(DiscreteLaw::new(
            leaves.iter().map(|&l| nodes[l].id.clone()).collect(),
            probs,
        )?);

        let mut increments = DMatrix::zeros(leaves.len(), internal.len() * assets);
        for (row, &leaf) in leaves.iter().enumerate() {
            let mut child = leaf;
            while let Some(par) = nodes[child].parent {
                let k = internal_pos[par].expect("parent is internal");
                for a in 0..assets {
                    increments[(row, k * assets + a)] =
                        nodes[child].prices[a] - nodes[par].prices[a];
                }
                child = par;
            }
        }

        Ok(ScenarioTree {
            nodes,
            assets,
            horizon,
            root,
            leaves,
            internal,
            law,
            increments,
        })
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[self.root]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Leaves in input order; defines the atom order of [`Self::law`].
    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.leaves.iter().map(|&i| &self.nodes[i])
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Non-terminal nodes in input order; defines the layout of a [`Strategy`].
    pub fn internal_nodes(&self) -> impl Iterator<Item = &Node> {
        self.internal.iter().map(|&i| &self.nodes[i])
    }

    pub fn num_internal(&self) -> usize {
        self.internal.len()
    }

    pub fn law(&self) -> &Arc<DiscreteLaw> {
        &self.law
    }

    pub fn leaf_probs(&self) -> &[f64] {
        self.law.probs()
    }

    /// Number of stacked holdings, `internal nodes × assets`.
    pub fn num_holdings(&self) -> usize {
        self.internal.len() * self.assets
    }

    /// Path increments `G`, so that terminal wealth is `x0 + G θ`.
    pub fn increments(&self) -> &DMatrix<f64> {
        &self.increments
    }

    /// Martingale constraint matrix: the first row is `P` (for `E[z] = 1`),
    /// then one row `P ∘ G_{·,(n,i)}` per internal node and asset.
    pub fn martingale_constraints(&self) -> DMatrix<f64> {
        let l = self.num_leaves();
        let k = self.num_holdings();
        let probs = self.leaf_probs();
        DMatrix::from_fn(1 + k, l, |r, w| {
            if r == 0 {
                probs[w]
            } else {
                probs[w] * self.increments[(w, r - 1)]
            }
        })
    }

    /// Largest `|Σ P z ΔS|` over node-wise martingale conditions.
    pub fn martingale_residual(&self, z: &[f64]) -> f64 {
        let probs = self.leaf_probs();
        (0..self.num_holdings())
            .map(|c| {
                compensated_sum(
                    (0..self.num_leaves()).map(|w| probs[w] * z[w] * self.increments[(w, c)]),
                )
                .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Same tree with every price of `asset` multiplied by `factor`.
    pub fn rescale_asset(&self, asset: usize, factor: f64) -> Result<Self> {
        let specs = self.node_specs().into_iter().map(|mut s| {
            s.prices[asset] *= factor;
            s
        });
        ScenarioTree::new(self.assets, self.horizon, specs.collect())
    }

    pub fn node_specs(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .map(|n| NodeSpec {
                id: n.id.clone(),
                parent: n.parent.map(|p| self.nodes[p].id.clone()),
                t: n.t,
                p: n.parent.map(|_| n.prob),
                prices: n.prices.clone(),
            })
            .collect()
    }
}

/// Predictable holdings: one position per asset at every non-terminal node.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    assets: usize,
    holdings: Vec<f64>,
}

impl Strategy {
    pub fn zeros(tree: &ScenarioTree) -> Self {
        Strategy {
            assets: tree.assets(),
            holdings: vec![0.0; tree.num_holdings()],
        }
    }

    /// Flat holdings in internal-node-major order.
    pub fn from_flat(tree: &ScenarioTree, holdings: Vec<f64>) -> Result<Self> {
        if holdings.len() != tree.num_holdings() {
            return Err(Error::DimensionMismatch {
                expected: tree.num_holdings(),
                got: holdings.len(),
            });
        }
        Ok(Strategy {
            assets: tree.assets(),
            holdings,
        })
    }

    /// The same position at every non-terminal node.
    pub fn constant(tree: &ScenarioTree, position: &[f64]) -> Result<Self> {
        if position.len() != tree.assets() {
            return Err(Error::DimensionMismatch {
                expected: tree.assets(),
                got: position.len(),
            });
        }
        Strategy::from_flat(tree, position.repeat(tree.num_internal()))
    }

    pub fn flat(&self) -> &[f64] {
        &self.holdings
    }

    /// Position at the `k`-th internal node.
    pub fn holding(&self, k: usize) -> &[f64] {
        &self.holdings[k * self.assets..(k + 1) * self.assets]
    }

    pub fn scale(&self, lambda: f64) -> Self {
        Strategy {
            assets: self.assets,
            holdings: self.holdings.iter().map(|h| lambda * h).collect(),
        }
    }

    pub fn add(&self, other: &Strategy) -> Result<Self> {
        if other.holdings.len() != self.holdings.len() {
            return Err(Error::DimensionMismatch {
                expected: self.holdings.len(),
                got: other.holdings.len(),
            });
        }
        Ok(Strategy {
            assets: self.assets,
            holdings: self
                .holdings
                .iter()
                .zip(&other.holdings)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn norm(&self) -> f64 {
        self.holdings.iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Strategy) -> f64 {
        self.holdings
            .iter()
            .zip(&other.holdings)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Node id → holdings.
    pub fn by_node(&self, tree: &ScenarioTree) -> BTreeMap<String, Vec<f64>> {
        tree.internal_nodes()
            .enumerate()
            .map(|(k, n)| (n.id.clone(), self.holding(k).to_vec()))
            .collect()
    }
}

/// `x0 + θ·S_T` on the leaf law.
pub fn terminal_wealth(
    tree: &ScenarioTree,
    strategy: &Strategy,
    x0: f64,
) -> Result<RandomVariable> {
    if strategy.holdings.len() != tree.num_holdings() || strategy.assets != tree.assets() {
        return Err(Error::DimensionMismatch {
            expected: tree.num_holdings(),
            got: strategy.holdings.len(),
        });
    }
    let g = tree.increments();
    let values = (0..tree.num_leaves())
        .map(|w| x0 + compensated_sum((0..g.ncols()).map(|c| g[(w, c)] * strategy.holdings[c])))
        .collect();
    RandomVariable::new(Arc::clone(tree.law()), values)
}

pub const DENSITY_MEAN_TOL: f64 = 1e-10;
pub const DENSITY_MARTINGALE_TOL: f64 = 1e-9;

/// Terminal density `dQ/dP` of a (possibly signed) martingale measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDensity {
    z: RandomVariable,
    expectation: f64,
    nonnegative: bool,
}

impl MeasureDensity {
    pub fn new(tree: &ScenarioTree, z: Vec<f64>) -> Result<Self> {
        let z = RandomVariable::new(Arc::clone(tree.law()), z)?;
        let expectation = crate::prob::mean(&z);
        if (expectation - 1.0).abs() > DENSITY_MEAN_TOL {
            return Err(Error::validation(
                "density",
                format!("E[z] = {expectation}, not 1"),
            ));
        }
        let residual = tree.martingale_residual(z.values());
        if residual > DENSITY_MARTINGALE_TOL {
            return Err(Error::validation(
                "density",
                format!("martingale condition violated by {residual:e}"),
            ));
        }
        let nonnegative = z.min_value() >= -1e-12;
        Ok(MeasureDensity {
            z,
            expectation,
            nonnegative,
        })
    }

    pub fn z(&self) -> &RandomVariable {
        &self.z
    }

    pub fn values(&self) -> &[f64] {
        self.z.values()
    }

    pub fn expectation(&self) -> f64 {
        self.expectation
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn second_moment(&self) -> f64 {
        self.z.law().expect_with(self.z.values(), |v| v * v)
    }
}
