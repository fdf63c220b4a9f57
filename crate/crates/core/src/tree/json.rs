//! Stable JSON form of a tree.
//!
//! ```text
//! { "format": "urp-tree/1", "response", "regressor",
//!   "variables": [{ "name", "kind", "levels"? }],
//!   "strategy": { "name", "use_scores", "dichotomize", "split_mode", "alpha", "min_segment" },
//!   "control": { "alpha", "min_node_size", "min_segment", "max_depth", "prepruning" },
//!   "root": node }
//! node = { "id", "depth", "n_node", "coefficients": { "intercept", "slope" }, "rss",
//!          "p_values": [{ "variable", "statistic", "p_value", "law", ... }],
//!          "split"?: { "variable", "point" } | { "variable", "levels_left", "levels_right" },
//!          "children"?: [node, node] }
//! ```
//!
//! Residuals are not stored: loading routes a dataset through the splits
//! and refits every node, checking that node sizes agree.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitColumn};
use crate::error::{Error, Result};
use crate::inference::{StrategyConfig, TestOutcome};
use crate::linmod::{fit_ols, Coefficients};

use super::{GrowControl, Split, Tree, TreeNode, VariableInfo};

pub const TREE_FORMAT: &str = "urp-tree/1";

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    format: String,
    response: String,
    regressor: String,
    variables: Vec<VariableInfo>,
    strategy: StrategyDoc,
    control: GrowControl,
    root: NodeDoc,
}

#[derive(Serialize, Deserialize)]
struct StrategyDoc {
    name: String,
    #[serde(flatten)]
    config: StrategyConfig,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    depth: usize,
    n_node: usize,
    coefficients: Coefficients,
    rss: f64,
    p_values: Vec<TestOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<NodeDoc>,
}

impl NodeDoc {
    fn from_node(n: &TreeNode) -> Self {
        Self {
            id: n.id,
            depth: n.depth,
            n_node: n.n_node,
            coefficients: n.fit.coefficients(),
            rss: n.fit.rss,
            p_values: n.outcomes.clone(),
            split: n.split.clone(),
            children: n.children.iter().map(NodeDoc::from_node).collect(),
        }
    }
}

impl Tree {
    pub fn to_json(&self) -> String {
        let doc = TreeDoc {
            format: TREE_FORMAT.into(),
            response: self.response.clone(),
            regressor: self.regressor.clone(),
            variables: self.variables.clone(),
            strategy: StrategyDoc {
                name: self.strategy.label(),
                config: self.strategy.clone(),
            },
            control: self.control.clone(),
            root: NodeDoc::from_node(&self.root),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("tree documents always serialize");
        s.push('\n');
        s
    }

    /// Column roles recorded in a tree document, without loading it.
    pub fn schema_of_json(text: &str) -> Result<crate::dataset::Schema> {
        let doc: TreeDoc = serde_json::from_str(text)?;
        check_format(&doc)?;
        let split: Vec<&str> = doc.variables.iter().map(|v| v.name.as_str()).collect();
        let categorical: Vec<&str> = doc
            .variables
            .iter()
            .filter(|v| v.kind == crate::dataset::ColumnKind::Categorical)
            .map(|v| v.name.as_str())
            .collect();
        Ok(crate::dataset::Schema::new(&doc.response, &doc.regressor, &split).with_categorical(&categorical))
    }

    /// Parses a tree document and refits its nodes on `data`.
    pub fn from_json(text: &str, data: &Dataset) -> Result<Tree> {
        let doc: TreeDoc = serde_json::from_str(text)?;
        check_format(&doc)?;
        if doc.response != data.response || doc.regressor != data.regressor {
            return Err(Error::SchemaMismatch(format!(
                "tree models {} ~ {}, data provides {} ~ {}",
                doc.response, doc.regressor, data.response, data.regressor
            )));
        }
        let mut cols: HashMap<&str, &SplitColumn> = HashMap::new();
        for v in &doc.variables {
            match data.column(&v.name) {
                Some((_, c)) if c.kind() == v.kind => {
                    cols.insert(v.name.as_str(), c);
                }
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "data lacks {:?} split variable `{}`",
                        v.kind, v.name
                    )))
                }
            }
        }
        let root = rebuild(&doc.root, (0..data.n()).collect(), data, &cols)?;
        Ok(Tree {
            response: doc.response,
            regressor: doc.regressor,
            variables: doc.variables,
            strategy: doc.strategy.config,
            control: doc.control,
            root,
        })
    }
}

fn check_format(doc: &TreeDoc) -> Result<()> {
    if doc.format != TREE_FORMAT {
        return Err(Error::SchemaMismatch(format!(
            "unsupported tree format `{}` (expected `{TREE_FORMAT}`)",
            doc.format
        )));
    }
    Ok(())
}

fn rebuild(doc: &NodeDoc, rows: Vec<usize>, data: &Dataset, cols: &HashMap<&str, &SplitColumn>) -> Result<TreeNode> {
    if rows.len() != doc.n_node {
        return Err(Error::SchemaMismatch(format!(
            "node {} holds {} rows of the data but was grown on {}",
            doc.id,
            rows.len(),
            doc.n_node
        )));
    }
    let y: Vec<f64> = rows.iter().map(|&i| data.y[i]).collect();
    let x: Vec<f64> = rows.iter().map(|&i| data.x[i]).collect();
    let fit = fit_ols(&y, &x)?;
    let mut node = TreeNode::leaf(doc.depth, fit, rows);
    node.id = doc.id;
    node.outcomes = doc.p_values.clone();
    match (&doc.split, doc.children.as_slice()) {
        (None, []) => {}
        (Some(split), [l, r]) => {
            let col = cols.get(split.variable.as_str()).ok_or_else(|| {
                Error::SchemaMismatch(format!("split on undeclared variable `{}`", split.variable))
            })?;
            if col.kind() != split.kind() {
                return Err(Error::SchemaMismatch(format!(
                    "split on `{}` does not match its kind",
                    split.variable
                )));
            }
            let majority_left = l.n_node >= r.n_node;
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &row in &node.rows {
                if split.goes_left(col, row).unwrap_or(majority_left) {
                    left.push(row);
                } else {
                    right.push(row);
                }
            }
            node.children = vec![rebuild(l, left, data, cols)?, rebuild(r, right, data, cols)?];
            node.split = Some(split.clone());
        }
        _ => {
            return Err(Error::SchemaMismatch(format!(
                "node {} must have a split and two children, or neither",
                doc.id
            )))
        }
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::grow;

    fn data() -> Dataset {
        let n = 80;
        let z: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| ((i * 13) % 7) as f64).collect();
        let y = (0..n)
            .map(|i| if z[i] < 0.5 { x[i] } else { 3.0 - x[i] } + 0.01 * ((i * 31 % 11) as f64))
            .collect();
        let g: Vec<u32> = (0..n).map(|i| (i % 3) as u32).collect();
        Dataset::new(
            y,
            x,
            vec![
                SplitColumn::numeric("z", z),
                SplitColumn::categorical("g", g, vec!["p".into(), "q".into(), "r".into()]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let d = data();
        let tree = grow(&d, &StrategyConfig::mob(), &GrowControl::default()).unwrap();
        assert!(tree.n_leaves() >= 2);
        let text = tree.to_json();
        let back = Tree::from_json(&text, &d).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.to_json(), text);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format"], TREE_FORMAT);
        assert_eq!(v["strategy"]["name"], "mob");
        assert_eq!(v["root"]["split"]["variable"], "z");
        assert!(v["root"]["split"]["point"].is_f64());
        assert!(v["root"]["p_values"][0]["p_value"].is_f64());
    }

    #[test]
    fn schema_is_recoverable() {
        let d = data();
        let tree = grow(&d, &StrategyConfig::ctree(), &GrowControl::default()).unwrap();
        let s = Tree::schema_of_json(&tree.to_json()).unwrap();
        assert_eq!(s.split, vec!["z".to_string(), "g".to_string()]);
        assert_eq!(s.categorical, vec!["g".to_string()]);
    }

    #[test]
    fn mismatched_data_is_rejected() {
        let d = data();
        let tree = grow(&d, &StrategyConfig::ctree(), &GrowControl::default()).unwrap();
        let text = tree.to_json();
        let fewer = d.subset(&(0..60).collect::<Vec<_>>());
        assert!(matches!(Tree::from_json(&text, &fewer), Err(Error::SchemaMismatch(_))));
        let renamed = Dataset::with_names("w", "x", d.y.clone(), d.x.clone(), d.z.clone()).unwrap();
        assert!(matches!(Tree::from_json(&text, &renamed), Err(Error::SchemaMismatch(_))));
        assert!(Tree::from_json("{\"format\": \"other\"}", &d).is_err());
    }
}
