//! Weighted CART: Gini growth, cost-complexity pruning, cross-validated cp.

use serde::{Deserialize, Serialize};

use crate::data::{check_dim, cv_folds, gather, split_fold, weighted_risk, Problem};
use ceitr_core::error::{Error, Result};

fn default_max_depth() -> usize {
    30
}
fn default_min_split() -> usize {
    20
}
fn default_min_bucket() -> usize {
    7
}
fn default_folds() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    /// Minimum number of subjects in a node for a split to be tried.
    #[serde(default = "default_min_split")]
    pub min_split: usize,
    /// Minimum number of subjects in each leaf.
    #[serde(default = "default_min_bucket")]
    pub min_bucket: usize,
    /// Candidate complexity parameters, relative to the root risk; `None`
    /// uses the critical values of the fully grown tree.
    #[serde(default)]
    pub cp_grid: Option<Vec<f64>>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: default_max_depth(),
            min_split: default_min_split(),
            min_bucket: default_min_bucket(),
            cp_grid: None,
            cv_folds: default_folds(),
            seed: 0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidArgument("cv_folds must be at least 2".into()));
        }
        if self.min_bucket == 0 {
            return Err(Error::InvalidArgument("min_bucket must be at least 1".into()));
        }
        if let Some(g) = &self.cp_grid {
            if g.is_empty() || g.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                return Err(Error::InvalidArgument("cp_grid must be non-empty and non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
}

/// Node of a binary tree stored as an array; `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub split: Option<Split>,
    pub left: usize,
    pub right: usize,
    pub label: u8,
    /// Weighted class totals `[w0, w1]` of the training subjects in the node.
    pub weight: [f64; 2],
    pub count: usize,
}

impl Node {
    fn leaf(weight: [f64; 2], count: usize) -> Self {
        Self { split: None, left: 0, right: 0, label: majority(weight), weight, count }
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// Misclassification risk if the node were a leaf.
    pub fn risk(&self) -> f64 {
        self.weight[0].min(self.weight[1])
    }
}

/// Weighted majority, ties to 0.
pub(crate) fn majority(w: [f64; 2]) -> u8 {
    u8::from(w[1] > w[0])
}

/// Tree as a node array rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl NodeTree {
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut k = 0;
        while let Some(s) = self.nodes[k].split {
            k = if x[s.feature] <= s.threshold { self.nodes[k].left } else { self.nodes[k].right };
        }
        k
    }

    pub fn predict_one(&self, x: &[f64]) -> u8 {
        self.nodes[self.leaf_of(x)].label
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<u8>> {
        check_dim(x, self.n_features)?;
        Ok(x.iter().map(|r| self.predict_one(r)).collect())
    }

    pub fn n_leaves(&self) -> usize {
        self.reachable().into_iter().filter(|&k| self.nodes[k].is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &NodeTree, k: usize) -> usize {
            match t.nodes[k].split {
                None => 0,
                Some(_) => 1 + go(t, t.nodes[k].left).max(go(t, t.nodes[k].right)),
            }
        }
        go(self, 0)
    }

    fn reachable(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(k) = stack.pop() {
            out.push(k);
            if !self.nodes[k].is_leaf() {
                stack.push(self.nodes[k].right);
                stack.push(self.nodes[k].left);
            }
        }
        out
    }

    /// Split points used per feature, sorted and deduplicated.
    pub fn cut_points(&self, feature: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .reachable()
            .into_iter()
            .filter_map(|k| self.nodes[k].split)
            .filter(|s| s.feature == feature)
            .map(|s| s.threshold)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        !self.cut_points(feature).is_empty()
    }

    /// Copy with subtrees of internal nodes flagged in `collapse` replaced by leaves.
    fn compact(&self, collapse: &[bool]) -> Self {
        let mut nodes = Vec::new();
        fn copy(t: &NodeTree, k: usize, collapse: &[bool], out: &mut Vec<Node>) -> usize {
            let idx = out.len();
            let n = &t.nodes[k];
            out.push(Node::leaf(n.weight, n.count));
            if !n.is_leaf() && !collapse[k] {
                let l = copy(t, n.left, collapse, out);
                let r = copy(t, n.right, collapse, out);
                out[idx] = Node { split: n.split, left: l, right: r, ..n.clone() };
            }
            idx
        }
        copy(self, 0, collapse, &mut nodes);
        Self { nodes, n_features: self.n_features }
    }

    /// Optimal subtree for complexity `alpha` (absolute): minimizes risk + alpha * leaves,
    /// preferring the smaller tree on ties.
    pub fn prune(&self, alpha: f64) -> Self {
        let mut collapse = vec![false; self.nodes.len()];
        fn go(t: &NodeTree, k: usize, alpha: f64, collapse: &mut [bool]) -> f64 {
            let n = &t.nodes[k];
            let as_leaf = n.risk() + alpha;
            if n.is_leaf() {
                return as_leaf;
            }
            let sub = go(t, n.left, alpha, collapse) + go(t, n.right, alpha, collapse);
            if as_leaf <= sub * (1.0 + 1e-12) {
                collapse[k] = true;
                as_leaf
            } else {
                sub
            }
        }
        go(self, 0, alpha, &mut collapse);
        self.compact(&collapse)
    }

    /// Per internal node, `(R(node) - R(subtree)) / (leaves - 1)`.
    fn critical_alphas(&self) -> Vec<f64> {
        fn go(t: &NodeTree, k: usize, out: &mut Vec<f64>) -> (f64, usize) {
            let n = &t.nodes[k];
            if n.is_leaf() {
                return (n.risk(), 1);
            }
            let (rl, ll) = go(t, n.left, out);
            let (rr, lr) = go(t, n.right, out);
            let (r, l) = (rl + rr, ll + lr);
            out.push(((n.risk() - r) / (l - 1) as f64).max(0.0));
            (r, l)
        }
        let mut out = Vec::new();
        go(self, 0, &mut out);
        out
    }
}

fn gini_mass(w0: f64, w1: f64) -> f64 {
    let t = w0 + w1;
    if t > 0.0 {
        2.0 * w0 * w1 / t
    } else {
        0.0
    }
}

/// Best Gini split of the subjects `idx`: `(split, gain)`; ties go to the
/// lowest feature, then the lowest threshold.
pub fn best_gini_split(prob: &Problem, idx: &[usize], min_bucket: usize) -> Option<(Split, f64)> {
    let mut tot = [0.0; 2];
    for &i in idx {
        tot[prob.z[i] as usize] += prob.w[i];
    }
    let parent = gini_mass(tot[0], tot[1]);
    let mut best: Option<(Split, f64)> = None;
    let mut order = idx.to_vec();
    for f in 0..prob.p() {
        order.sort_by(|&a, &b| prob.x[a][f].total_cmp(&prob.x[b][f]));
        let mut left = [0.0; 2];
        for pos in 0..order.len() - 1 {
            let i = order[pos];
            left[prob.z[i] as usize] += prob.w[i];
            let (xl, xr) = (prob.x[i][f], prob.x[order[pos + 1]][f]);
            if xl == xr || pos + 1 < min_bucket || order.len() - pos - 1 < min_bucket {
                continue;
            }
            let gain = parent - gini_mass(left[0], left[1]) - gini_mass(tot[0] - left[0], tot[1] - left[1]);
            // gains equal up to rounding count as ties
            if best.is_none_or(|(_, g)| gain > g + 1e-10 * parent) {
                best = Some((Split { feature: f, threshold: 0.5 * (xl + xr) }, gain));
            }
        }
    }
    best.filter(|(_, g)| *g > 1e-12 * parent.max(f64::MIN_POSITIVE))
}

/// Fully grown tree (no pruning).
pub fn grow_tree(prob: &Problem, idx: &[usize], cfg: &TreeConfig) -> NodeTree {
    let mut nodes = Vec::new();
    fn grow(prob: &Problem, idx: &[usize], depth: usize, cfg: &TreeConfig, nodes: &mut Vec<Node>) -> usize {
        let mut w = [0.0; 2];
        for &i in idx {
            w[prob.z[i] as usize] += prob.w[i];
        }
        let k = nodes.len();
        nodes.push(Node::leaf(w, idx.len()));
        if depth >= cfg.max_depth || idx.len() < cfg.min_split || w[0] == 0.0 || w[1] == 0.0 {
            return k;
        }
        let Some((split, _)) = best_gini_split(prob, idx, cfg.min_bucket) else {
            return k;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| prob.x[i][split.feature] <= split.threshold);
        let left = grow(prob, &l, depth + 1, cfg, nodes);
        let right = grow(prob, &r, depth + 1, cfg, nodes);
        nodes[k].split = Some(split);
        nodes[k].left = left;
        nodes[k].right = right;
        k
    }
    grow(prob, idx, 0, cfg, &mut nodes);
    NodeTree { nodes, n_features: prob.p() }
}

/// Pruned weighted tree with its cross-validation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTree {
    pub tree: NodeTree,
    pub config: TreeConfig,
    pub cp: f64,
    /// `(cp, cross-validated weighted misclassification)` per candidate.
    pub cv_table: Vec<(f64, f64)>,
}

impl WeightedTree {
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<u8>> {
        self.tree.predict(x)
    }
}

fn default_cp_grid(full: &NodeTree, root_risk: f64) -> Vec<f64> {
    let mut a: Vec<f64> = full.critical_alphas().into_iter().map(|v| v / root_risk).collect();
    a.push(0.0);
    a.sort_by(f64::total_cmp);
    a.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs().max(1e-300));
    // geometric means between consecutive critical values, as representatives of each interval
    let mut grid = vec![0.0];
    for w in a.windows(2) {
        grid.push(if w[0] > 0.0 { (w[0] * w[1]).sqrt() } else { 0.5 * w[1] });
    }
    grid.push(a.last().copied().unwrap_or(0.0) * 1.01 + 1e-12);
    grid.dedup();
    grid
}

/// Grows a weighted Gini tree and prunes it at the cp with the smallest
/// cross-validated weighted misclassification (ties to the larger cp).
pub fn fit_weighted_tree(x: &[Vec<f64>], z: &[u8], w: &[f64], cfg: &TreeConfig) -> Result<WeightedTree> {
    cfg.validate()?;
    let prob = Problem::new(x, z, w)?;
    let all: Vec<usize> = (0..prob.n()).collect();
    let full = grow_tree(&prob, &all, cfg);
    let root_risk = full.nodes[0].risk();
    if root_risk <= 0.0 || full.nodes[0].is_leaf() {
        return Ok(WeightedTree { tree: full.prune(f64::INFINITY), config: cfg.clone(), cp: 0.0, cv_table: Vec::new() });
    }
    let grid = cfg.cp_grid.clone().unwrap_or_else(|| default_cp_grid(&full, root_risk));
    let (cp, cv_table) = if grid.len() == 1 {
        (grid[0], Vec::new())
    } else {
        let folds = cv_folds(prob.n(), cfg.cv_folds.min(prob.n()), cfg.seed);
        let mut err = vec![0.0; grid.len()];
        for f in 0..cfg.cv_folds.min(prob.n()) {
            let (train, test) = split_fold(&folds, f);
            if train.is_empty() || test.is_empty() {
                continue;
            }
            let tw: f64 = train.iter().map(|&i| w[i]).sum();
            if tw <= 0.0 {
                continue;
            }
            let t = grow_tree(&prob, &train, cfg);
            let r = t.nodes[0].risk();
            let xt = gather(x, &test);
            let zt = gather(z, &test);
            let wt = gather(w, &test);
            for (e, &cp) in err.iter_mut().zip(&grid) {
                let pred = t.prune(cp * r).predict(&xt)?;
                *e += weighted_risk(&pred, &zt, &wt);
            }
        }
        let mut best = 0;
        for k in 1..grid.len() {
            if err[k] <= err[best] {
                best = k;
            }
        }
        (grid[best], grid.iter().copied().zip(err).collect())
    };
    Ok(WeightedTree { tree: full.prune(cp * root_risk), config: cfg.clone(), cp, cv_table })
}
