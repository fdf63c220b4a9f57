//! Post-pruning: weakest-link cost-complexity pruning chosen by k-fold
//! cross-validation, and bottom-up pruning by AIC or BIC.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inference::StrategyConfig;
use crate::rng::RngStream;
use crate::tree::{grow, GrowControl, Tree, TreeNode};

/// One knot of the cost-complexity sequence: the subtree optimal for every
/// complexity parameter in `[alpha, next alpha)`.
#[derive(Clone, Debug)]
pub struct PathStep {
    pub alpha: f64,
    pub tree: Tree,
}

impl PathStep {
    pub fn leaves(&self) -> usize {
        self.tree.n_leaves()
    }
}

/// `(R(t) − R(T_t)) / (|T_t| − 1)` for every internal node, pre-order.
fn link_strengths(node: &TreeNode, out: &mut Vec<(usize, f64)>) {
    if node.is_leaf() {
        return;
    }
    let g = (node.fit.rss - node.subtree_rss()) / (node.n_leaves() as f64 - 1.0);
    out.push((node.id, g));
    for c in &node.children {
        link_strengths(c, out);
    }
}

/// Weakest-link sequence, starting with the full tree at alpha 0 and ending
/// with the root. Nodes tying for the weakest link collapse together.
pub fn cost_complexity_path(tree: &Tree) -> Vec<PathStep> {
    let mut current = tree.clone();
    let mut path = vec![PathStep {
        alpha: 0.0,
        tree: current.clone(),
    }];
    let scale = tree.root.fit.rss.max(f64::MIN_POSITIVE);
    while !current.root.is_leaf() {
        let mut links = Vec::new();
        link_strengths(&current.root, &mut links);
        let weakest = links.iter().map(|&(_, g)| g).fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * scale;
        // collapse outermost first; a collapsed ancestor removes its descendants
        for &(id, g) in &links {
            if g <= weakest + tol {
                if let Some(node) = current.root.find_mut(id) {
                    node.collapse();
                }
            }
        }
        let alpha = weakest.max(path.last().map_or(0.0, |s| s.alpha));
        path.push(PathStep {
            alpha,
            tree: current.clone(),
        });
    }
    path
}

/// Subtree of a path optimal at complexity `alpha`.
pub fn subtree_at(path: &[PathStep], alpha: f64) -> &Tree {
    let k = path.partition_point(|s| s.alpha <= alpha).max(1);
    &path[k - 1].tree
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    /// Pick the simplest subtree within one standard error of the minimum.
    pub one_se: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 1,
            one_se: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPathEntry {
    /// Knot of the full-data path.
    pub alpha: f64,
    /// Value used inside the folds: geometric midpoint to the next knot
    /// (infinity for the last one).
    pub alpha_eval: f64,
    pub leaves: usize,
    /// Mean squared prediction error over held-out rows.
    pub cv_loss: f64,
    /// Standard error of the per-fold mean squared errors.
    pub cv_se: f64,
}

#[derive(Clone, Debug)]
pub struct PruneResult {
    pub tree: Tree,
    pub alpha_path: Vec<AlphaPathEntry>,
    pub chosen_alpha: f64,
    pub usable_folds: usize,
}

/// Fold of every row: position in a seeded permutation modulo `folds`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let perm = RngStream::new(seed, 0xF01D).permutation(n);
    let mut fold = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold[row] = pos % folds;
    }
    fold
}

/// Grows a large tree (pre-pruning off) and prunes it by cross-validation.
pub fn cv_prune(
    data: &Dataset,
    strategy: &StrategyConfig,
    control: &GrowControl,
    options: &CvOptions,
) -> Result<PruneResult> {
    let control = control.clone().unpruned();
    let main = grow(data, strategy, &control)?;
    cv_prune_tree(&main, data, options)
}

/// Prunes `main`, grown on `data`, by cross-validating its own strategy and
/// control (with pre-pruning off) over `folds` folds.
pub fn cv_prune_tree(main: &Tree, data: &Dataset, options: &CvOptions) -> Result<PruneResult> {
    if options.folds < 2 || options.folds > data.n() {
        return Err(Error::InvalidConfig(format!(
            "folds must lie in [2, n = {}], got {}",
            data.n(),
            options.folds
        )));
    }
    let path = cost_complexity_path(main);
    let k = path.len();
    let eval: Vec<f64> = (0..k)
        .map(|i| {
            if i + 1 < k {
                (path[i].alpha * path[i + 1].alpha).sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect();
    if k == 1 {
        return Ok(PruneResult {
            tree: main.clone(),
            alpha_path: vec![AlphaPathEntry {
                alpha: 0.0,
                alpha_eval: f64::INFINITY,
                leaves: 1,
                cv_loss: f64::NAN,
                cv_se: f64::NAN,
            }],
            chosen_alpha: 0.0,
            usable_folds: 0,
        });
    }

    let fold = fold_assignment(data.n(), options.folds, options.seed);
    let control = main.control.clone().unpruned();
    let per_fold: Vec<Option<(Vec<f64>, usize)>> = (0..options.folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..data.n()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..data.n()).filter(|&i| fold[i] == f).collect();
            let grown = match grow(&data.subset(&train), &main.strategy, &control) {
                Ok(t) => t,
                Err(e) => {
                    log::warn!("fold {f} skipped: {e}");
                    return None;
                }
            };
            let fold_path = cost_complexity_path(&grown);
            let held_out = data.subset(&test);
            let sse = eval
                .iter()
                .map(|&a| subtree_at(&fold_path, a).sse(&held_out))
                .collect::<Result<Vec<f64>>>();
            match sse {
                Ok(s) => Some((s, test.len())),
                Err(e) => {
                    log::warn!("fold {f} skipped: {e}");
                    None
                }
            }
        })
        .collect();
    let usable: Vec<&(Vec<f64>, usize)> = per_fold.iter().flatten().collect();
    let needed = options.folds.div_ceil(2);
    if usable.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: usable.len(),
        });
    }
    let total_test: usize = usable.iter().map(|(_, m)| m).sum();
    let f = usable.len() as f64;
    let alpha_path: Vec<AlphaPathEntry> = (0..k)
        .map(|i| {
            let loss = usable.iter().map(|(s, _)| s[i]).sum::<f64>() / total_test as f64;
            let mses: Vec<f64> = usable.iter().map(|(s, m)| s[i] / *m as f64).collect();
            let mean = mses.iter().sum::<f64>() / f;
            let var = mses.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (f - 1.0).max(1.0);
            AlphaPathEntry {
                alpha: path[i].alpha,
                alpha_eval: eval[i],
                leaves: path[i].leaves(),
                cv_loss: loss,
                cv_se: (var / f).sqrt(),
            }
        })
        .collect();

    // minimum loss; exact ties go to the simpler tree
    let mut best = 0;
    for i in 1..k {
        if alpha_path[i].cv_loss <= alpha_path[best].cv_loss {
            best = i;
        }
    }
    if options.one_se {
        let bound = alpha_path[best].cv_loss + alpha_path[best].cv_se;
        best = (best..k).rev().find(|&i| alpha_path[i].cv_loss <= bound).unwrap_or(best);
    }
    Ok(PruneResult {
        tree: path[best].tree.clone(),
        chosen_alpha: path[best].alpha,
        alpha_path,
        usable_folds: usable.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoCriterion {
    Aic,
    Bic,
}

impl FromStr for InfoCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Self::Aic),
            "bic" => Ok(Self::Bic),
            other => Err(Error::InvalidConfig(format!("unknown criterion `{other}`"))),
        }
    }
}

impl fmt::Display for InfoCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Aic => "aic",
            Self::Bic => "bic",
        })
    }
}

/// Parameter counts of the information criteria.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcOptions {
    /// Intercept, slope and error variance.
    pub params_per_leaf: f64,
    pub params_per_split: f64,
}

impl Default for IcOptions {
    fn default() -> Self {
        Self {
            params_per_leaf: 3.0,
            params_per_split: 1.0,
        }
    }
}

/// Gaussian profile log-likelihood of a leaf, `−(n/2)(log(2π·RSS/n) + 1)`.
fn leaf_loglik(node: &TreeNode, rss_floor_per_obs: f64) -> f64 {
    let n = node.n_node as f64;
    let rss = node.fit.rss.max(rss_floor_per_obs * n);
    -0.5 * n * ((2.0 * std::f64::consts::PI * rss / n).ln() + 1.0)
}

/// Collapses, bottom-up, every internal node whose subtree does not lower
/// the criterion. BIC uses `log` of the root sample size.
pub fn ic_prune(tree: &Tree, criterion: InfoCriterion, options: &IcOptions) -> Tree {
    let n_root = tree.root.n_node as f64;
    let penalty = match criterion {
        InfoCriterion::Aic => 2.0,
        InfoCriterion::Bic => n_root.ln(),
    };
    let floor = (tree.root.fit.rss / n_root * 1e-12).max(f64::MIN_POSITIVE);
    // returns the criterion contribution of the pruned subtree
    fn walk(node: &mut TreeNode, penalty: f64, floor: f64, o: &IcOptions) -> f64 {
        let as_leaf = -2.0 * leaf_loglik(node, floor) + penalty * o.params_per_leaf;
        if node.is_leaf() {
            return as_leaf;
        }
        let sub: f64 = node
            .children
            .iter_mut()
            .map(|c| walk(c, penalty, floor, o))
            .sum::<f64>()
            + penalty * o.params_per_split;
        if as_leaf <= sub {
            node.collapse();
            as_leaf
        } else {
            sub
        }
    }
    let mut out = tree.clone();
    walk(&mut out.root, penalty, floor, options);
    out
}
