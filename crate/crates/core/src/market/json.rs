//! Market file format:
//!
//! ```json
//! {"assets": 1, "periods": 1, "nodes": [
//!   {"id": "root", "parent": null, "t": 0, "prices": [2.0]},
//!   {"id": "up", "parent": "root", "t": 1, "p": 0.1, "prices": [12.0]}, ...]}
//! ```
//!
//! `p` is the conditional branch probability (omitted or 1.0 on the root).
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NodeSpec, ScenarioTree};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketFile {
    assets: usize,
    periods: usize,
    nodes: Vec<NodeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    parent: Option<String>,
    t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    prices: Vec<f64>,
}

pub fn parse_market(text: &str) -> Result<ScenarioTree> {
    let file: MarketFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    market_from_json(file)
}

fn market_from_json(file: MarketFile) -> Result<ScenarioTree> {
    let specs = file
        .nodes
        .into_iter()
        .map(|n| NodeSpec {
            id: n.id,
            parent: n.parent,
            t: n.t,
            p: n.p,
            prices: n.prices,
        })
        .collect();
    ScenarioTree::new(file.assets, file.periods, specs)
}

pub fn load_market(path: &Path) -> Result<ScenarioTree> {
    let text = std::fs::read_to_string(path)?;
    parse_market(&text)
}

pub fn market_to_json(tree: &ScenarioTree) -> String {
    let file = MarketFile {
        assets: tree.assets(),
        periods: tree.horizon(),
        nodes: tree
            .node_specs()
            .into_iter()
            .map(|s| NodeRecord {
                id: s.id,
                parent: s.parent,
                t: s.t,
                p: s.p,
                prices: s.prices,
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("market serializes");
    out.push('\n');
    out
}

pub fn write_market(tree: &ScenarioTree, path: &Path) -> Result<()> {
    std::fs::write(path, market_to_json(tree))?;
    Ok(())
}
