//! Recursive partitioning: fit the node model, pick a split variable by
//! minimum p-value, search its split point exhaustively, recurse.

mod json;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{sort_order, ColumnKind, Dataset, SplitColumn, SplitValues};
use crate::error::{Error, Result};
use crate::inference::{select_variable, StrategyConfig, TestOutcome};
use crate::linmod::{fit_ols, ols_rss, LinearFit};

pub use json::TREE_FORMAT;

/// Categorical split search enumerates all binary level partitions up to
/// this many levels present in a node.
pub const MAX_SPLIT_LEVELS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowControl {
    /// Significance level for pre-pruning.
    pub alpha: f64,
    pub min_node_size: usize,
    /// Trimming for supLM and split-indicator transforms; `None` uses
    /// `max(10, ⌈0.1·n⌉)` of each node.
    pub min_segment: Option<usize>,
    pub max_depth: usize,
    pub prepruning: bool,
}

impl Default for GrowControl {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            min_node_size: 20,
            min_segment: None,
            max_depth: 5,
            prepruning: true,
        }
    }
}

impl GrowControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.min_node_size < 3 {
            return Err(Error::InvalidConfig(format!(
                "min_node_size must be at least 3, got {}",
                self.min_node_size
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
        }
        if self.min_segment == Some(0) {
            return Err(Error::InvalidConfig("min_segment must be at least 1".into()));
        }
        Ok(())
    }

    /// Grow large for post-pruning.
    pub fn unpruned(mut self) -> Self {
        self.prepruning = false;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitRule {
    /// `value ≤ point` goes left.
    Point { point: f64 },
    /// Levels seen at the node on each side; other levels follow the larger child.
    Levels {
        levels_left: Vec<String>,
        levels_right: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub variable: String,
    #[serde(flatten)]
    pub rule: SplitRule,
}

impl Split {
    /// `None` for a categorical level the split has never seen.
    fn goes_left(&self, col: &SplitColumn, row: usize) -> Option<bool> {
        match (&self.rule, &col.values) {
            (SplitRule::Point { point }, SplitValues::Numeric(v)) => Some(v[row] <= *point),
            (
                SplitRule::Levels {
                    levels_left,
                    levels_right,
                },
                SplitValues::Categorical { codes, levels },
            ) => {
                let level = &levels[codes[row] as usize];
                if levels_left.contains(level) {
                    Some(true)
                } else if levels_right.contains(level) {
                    Some(false)
                } else {
                    None
                }
            }
            // kinds are checked before routing
            _ => None,
        }
    }

    fn kind(&self) -> ColumnKind {
        match self.rule {
            SplitRule::Point { .. } => ColumnKind::Numeric,
            SplitRule::Levels { .. } => ColumnKind::Categorical,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            SplitRule::Point { point } => write!(f, "{} <= {point:.6}", self.variable),
            SplitRule::Levels { levels_left, .. } => {
                write!(f, "{} in {{{}}}", self.variable, levels_left.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    /// Pre-order index within the grown tree; pruning keeps ids.
    pub id: usize,
    pub depth: usize,
    pub n_node: usize,
    pub fit: LinearFit,
    /// Per-variable tests; empty when the node was never eligible to split.
    pub outcomes: Vec<TestOutcome>,
    pub split: Option<Split>,
    /// Either empty or `[left, right]`.
    pub children: Vec<TreeNode>,
    /// Training rows of this node, ascending.
    pub rows: Vec<usize>,
}

impl TreeNode {
    fn leaf(depth: usize, fit: LinearFit, rows: Vec<usize>) -> Self {
        Self {
            id: 0,
            depth,
            n_node: rows.len(),
            fit,
            outcomes: Vec::new(),
            split: None,
            children: Vec::new(),
            rows,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn n_leaves(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children.iter().map(TreeNode::n_leaves).sum()
        }
    }

    pub fn n_nodes(&self) -> usize {
        1 + self.children.iter().map(TreeNode::n_nodes).sum::<usize>()
    }

    /// Depth of the deepest leaf, relative to the tree root.
    pub fn max_depth(&self) -> usize {
        self.children
            .iter()
            .map(TreeNode::max_depth)
            .max()
            .unwrap_or(self.depth)
    }

    /// Sum of leaf RSS below (and including) this node.
    pub fn subtree_rss(&self) -> f64 {
        if self.is_leaf() {
            self.fit.rss
        } else {
            self.children.iter().map(TreeNode::subtree_rss).sum()
        }
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if n.is_leaf() {
                out.push(n)
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a TreeNode)) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    pub fn find(&self, id: usize) -> Option<&TreeNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    pub fn find_mut(&mut self, id: usize) -> Option<&mut TreeNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    /// Turns the node into a leaf. Its tests are kept.
    pub fn collapse(&mut self) {
        self.children.clear();
        self.split = None;
    }

    fn majority_left(&self) -> bool {
        self.children[0].n_node >= self.children[1].n_node
    }
}

/// Name, kind and levels of a split variable at growth time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableInfo {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub response: String,
    pub regressor: String,
    pub variables: Vec<VariableInfo>,
    pub strategy: StrategyConfig,
    pub control: GrowControl,
    pub root: TreeNode,
}

impl Tree {
    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }

    pub fn depth(&self) -> usize {
        self.root.max_depth()
    }

    /// Leaf id of every training row.
    pub fn training_labels(&self) -> Vec<usize> {
        let n = self.root.n_node;
        let mut labels = vec![0; n];
        for leaf in self.root.leaves() {
            for &r in &leaf.rows {
                labels[r] = leaf.id;
            }
        }
        labels
    }

    fn resolve_columns<'d>(&self, data: &'d Dataset) -> Result<HashMap<String, &'d SplitColumn>> {
        let mut cols = HashMap::new();
        let mut missing = None;
        self.root.visit(&mut |n| {
            if let Some(s) = &n.split {
                match data.column(&s.variable) {
                    Some((_, c)) if c.kind() == s.kind() => {
                        cols.insert(s.variable.clone(), c);
                    }
                    Some(_) => {
                        missing.get_or_insert_with(|| format!("split variable `{}` changed kind", s.variable));
                    }
                    None => {
                        missing.get_or_insert_with(|| format!("split variable `{}` is absent", s.variable));
                    }
                }
            }
        });
        match missing {
            Some(m) => Err(Error::SchemaMismatch(m)),
            None => Ok(cols),
        }
    }

    fn route<'t>(&'t self, cols: &HashMap<String, &SplitColumn>, row: usize) -> &'t TreeNode {
        let mut node = &self.root;
        while let Some(split) = &node.split {
            let left = split
                .goes_left(cols[&split.variable], row)
                .unwrap_or_else(|| node.majority_left());
            node = &node.children[if left { 0 } else { 1 }];
        }
        node
    }

    /// Leaf id of every row of `data`.
    pub fn partition_labels(&self, data: &Dataset) -> Result<Vec<usize>> {
        let cols = self.resolve_columns(data)?;
        Ok((0..data.n()).map(|i| self.route(&cols, i).id).collect())
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        let cols = self.resolve_columns(data)?;
        Ok((0..data.n())
            .map(|i| self.route(&cols, i).fit.coefficients().predict_one(data.x[i]))
            .collect())
    }

    /// Squared prediction error summed over `data`.
    pub fn sse(&self, data: &Dataset) -> Result<f64> {
        Ok(self
            .predict(data)?
            .iter()
            .zip(&data.y)
            .map(|(p, y)| (y - p).powi(2))
            .sum())
    }

    pub fn summary(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} ~ {} | strategy {} | {} leaves, depth {}",
            self.response,
            self.regressor,
            self.strategy.label(),
            self.n_leaves(),
            self.depth()
        )?;
        let mut result = Ok(());
        self.root.visit(&mut |n| {
            if result.is_err() {
                return;
            }
            let indent = "  ".repeat(n.depth);
            let c = n.fit.coefficients();
            let mut line = format!(
                "{indent}[{}] n={} {} = {:.4} + {:.4}*{} rss={:.4}",
                n.id, n.n_node, self.response, c.intercept, c.slope, self.regressor, n.fit.rss
            );
            if let Some(best) = n
                .outcomes
                .iter()
                .filter(|o| !o.is_degenerate())
                .min_by(|a, b| a.p_value.total_cmp(&b.p_value))
            {
                line.push_str(&format!(" min p={:.3e} ({})", best.p_value, best.variable));
            }
            if let Some(s) = &n.split {
                line.push_str(&format!(" split {s}"));
            }
            result = writeln!(f, "{line}");
        });
        result
    }
}

pub fn partition_labels(tree: &Tree, data: &Dataset) -> Result<Vec<usize>> {
    tree.partition_labels(data)
}

pub fn predict_tree(tree: &Tree, data: &Dataset) -> Result<Vec<f64>> {
    tree.predict(data)
}

/// Midpoint split minimizing `RSS_left + RSS_right` of separate OLS fits.
/// Both children need `min_node_size` rows and a non-constant regressor.
/// Ties go to the smallest point.
pub fn best_split_point(y: &[f64], x: &[f64], z: &[f64], min_node_size: usize) -> Option<(f64, f64)> {
    let n = z.len();
    if n < 2 * min_node_size.max(1) {
        return None;
    }
    let order = sort_order(z);
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let zs: Vec<f64> = order.iter().map(|&i| z[i]).collect();
    let mut best: Option<(f64, f64)> = None;
    for left in min_node_size.max(1)..=n - min_node_size.max(1) {
        if zs[left - 1] >= zs[left] {
            continue;
        }
        let (Some(rl), Some(rr)) = (ols_rss(&ys[..left], &xs[..left]), ols_rss(&ys[left..], &xs[left..]))
        else {
            continue;
        };
        let total = rl + rr;
        if best.is_none_or(|(_, b)| total < b) {
            best = Some((0.5 * (zs[left - 1] + zs[left]), total));
        }
    }
    best
}

/// Binary partition of the levels present minimizing child RSS. Returns the
/// level codes sent left and the total RSS. Exhaustive over
/// `2^(L-1) - 1` partitions; `None` beyond [`MAX_SPLIT_LEVELS`] levels.
pub fn best_level_partition(
    y: &[f64],
    x: &[f64],
    codes: &[u32],
    min_node_size: usize,
) -> Option<(Vec<u32>, f64)> {
    let mut present: Vec<u32> = codes.to_vec();
    present.sort_unstable();
    present.dedup();
    let l = present.len();
    if l < 2 {
        return None;
    }
    if l > MAX_SPLIT_LEVELS {
        log::warn!("categorical split with {l} levels exceeds the supported {MAX_SPLIT_LEVELS}");
        return None;
    }
    let mut best: Option<(Vec<u32>, f64)> = None;
    // level present[0] always goes left; the all-left mask is excluded
    for mask in 0..(1u32 << (l - 1)) - 1 {
        let left: Vec<u32> = std::iter::once(present[0])
            .chain((1..l).filter(|b| mask >> (b - 1) & 1 == 1).map(|b| present[b]))
            .collect();
        let (mut yl, mut xl, mut yr, mut xr) = (vec![], vec![], vec![], vec![]);
        for (i, c) in codes.iter().enumerate() {
            if left.contains(c) {
                yl.push(y[i]);
                xl.push(x[i]);
            } else {
                yr.push(y[i]);
                xr.push(x[i]);
            }
        }
        if yl.len() < min_node_size || yr.len() < min_node_size {
            continue;
        }
        let (Some(rl), Some(rr)) = (ols_rss(&yl, &xl), ols_rss(&yr, &xr)) else {
            continue;
        };
        let total = rl + rr;
        if best.as_ref().is_none_or(|(_, b)| total < *b) {
            best = Some((left, total));
        }
    }
    best
}

struct Grower<'a> {
    data: &'a Dataset,
    strategy: StrategyConfig,
    control: &'a GrowControl,
}

impl Grower<'_> {
    fn node(&self, rows: Vec<usize>, depth: usize) -> Result<TreeNode> {
        let sub = self.data.subset(&rows);
        let fit = fit_ols(&sub.y, &sub.x)?;
        let mut node = TreeNode::leaf(depth, fit, rows);
        if depth >= self.control.max_depth || node.n_node < 2 * self.control.min_node_size {
            return Ok(node);
        }
        let selection = select_variable(&self.strategy, &node.fit, &sub)?;
        let target = if self.control.prepruning {
            selection.chosen
        } else {
            selection.argmin
        };
        node.outcomes = selection.outcomes;
        let Some(j) = target else {
            return Ok(node);
        };
        let Some((split, goes_left)) = self.find_split(&sub, j) else {
            return Ok(node);
        };
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (k, &row) in node.rows.iter().enumerate() {
            if goes_left[k] {
                left.push(row);
            } else {
                right.push(row);
            }
        }
        let (l, r) = rayon::join(|| self.node(left, depth + 1), || self.node(right, depth + 1));
        match (l, r) {
            (Ok(l), Ok(r)) => {
                node.split = Some(split);
                node.children = vec![l, r];
            }
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("node at depth {depth} kept terminal: child failed with {e}");
            }
        }
        Ok(node)
    }

    fn find_split(&self, sub: &Dataset, j: usize) -> Option<(Split, Vec<bool>)> {
        let col = &sub.z[j];
        let min = self.control.min_node_size;
        match &col.values {
            SplitValues::Numeric(z) => {
                let (point, _) = best_split_point(&sub.y, &sub.x, z, min)?;
                let split = Split {
                    variable: col.name.clone(),
                    rule: SplitRule::Point { point },
                };
                Some((split, z.iter().map(|&v| v <= point).collect()))
            }
            SplitValues::Categorical { codes, levels } => {
                let (left, _) = best_level_partition(&sub.y, &sub.x, codes, min)?;
                let mut present: Vec<u32> = codes.clone();
                present.sort_unstable();
                present.dedup();
                let name = |c: &u32| levels[*c as usize].clone();
                let split = Split {
                    variable: col.name.clone(),
                    rule: SplitRule::Levels {
                        levels_left: left.iter().map(name).collect(),
                        levels_right: present.iter().filter(|c| !left.contains(c)).map(name).collect(),
                    },
                };
                Some((split, codes.iter().map(|c| left.contains(c)).collect()))
            }
        }
    }
}

fn assign_ids(node: &mut TreeNode, next: &mut usize) {
    node.id = *next;
    *next += 1;
    for c in &mut node.children {
        assign_ids(c, next);
    }
}

/// Grows a tree. Fails only when the root model cannot be fitted; any
/// degeneracy further down leaves the node terminal.
pub fn grow(data: &Dataset, strategy: &StrategyConfig, control: &GrowControl) -> Result<Tree> {
    control.validate()?;
    strategy.validate()?;
    let mut strategy = strategy.clone();
    strategy.alpha = control.alpha;
    if control.min_segment.is_some() {
        strategy.min_segment = control.min_segment;
    }
    let grower = Grower {
        data,
        strategy: strategy.clone(),
        control,
    };
    let mut root = grower.node((0..data.n()).collect(), 0)?;
    assign_ids(&mut root, &mut 0);
    Ok(Tree {
        response: data.response.clone(),
        regressor: data.regressor.clone(),
        variables: data
            .z
            .iter()
            .map(|c| VariableInfo {
                name: c.name.clone(),
                kind: c.kind(),
                levels: c.levels().map(<[String]>::to_vec),
            })
            .collect(),
        strategy,
        control: control.clone(),
        root,
    })
}
