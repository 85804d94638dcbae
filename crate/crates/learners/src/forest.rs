//! Conditional inference forest: permutation-test variable selection,
//! standardized two-sample split search, unweighted majority vote.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::{check_dim, Problem};
use crate::tree::{majority, Node, NodeTree, Split};
use ceitr_core::error::{Error, Result};
use ceitr_core::rng;

fn default_trees() -> usize {
    50
}
fn default_depth() -> usize {
    5
}
fn default_fraction() -> f64 {
    0.632
}
fn default_min_split() -> usize {
    20
}
fn default_min_bucket() -> usize {
    7
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    #[serde(default = "default_trees")]
    pub n_trees: usize,
    /// Candidate features per node; `None` picks it by cross-validation.
    #[serde(default)]
    pub mtry: Option<usize>,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    /// Subsample drawn without replacement per tree.
    #[serde(default = "default_fraction")]
    pub subsample_fraction: f64,
    /// Required `1 - adjusted p-value` to split; 0 always splits.
    #[serde(default)]
    pub mincriterion: f64,
    #[serde(default = "default_min_split")]
    pub min_split: usize,
    #[serde(default = "default_min_bucket")]
    pub min_bucket: usize,
    /// Use the case weights in the association tests as well as in the leaves.
    #[serde(default = "default_true")]
    pub weighted_tests: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: default_trees(),
            mtry: None,
            max_depth: default_depth(),
            subsample_fraction: default_fraction(),
            mincriterion: 0.0,
            min_split: default_min_split(),
            min_bucket: default_min_bucket(),
            weighted_tests: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1".into());
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > p {
                return bad(format!("mtry must be in 1..={p}, got {m}"));
            }
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return bad(format!("subsample_fraction must be in (0, 1], got {}", self.subsample_fraction));
        }
        if !(0.0..1.0).contains(&self.mincriterion) {
            return bad(format!("mincriterion must be in [0, 1), got {}", self.mincriterion));
        }
        if self.min_bucket == 0 {
            return bad("min_bucket must be at least 1".into());
        }
        Ok(())
    }
}

/// Conditional expectation and covariance of `T = sum w x z` under permutations
/// of `z` with `w` as frequency weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationMoments {
    pub statistic: f64,
    pub mean: f64,
    pub variance: f64,
}

impl PermutationMoments {
    pub fn compute(x: &[f64], z: &[f64], w: &[f64]) -> Self {
        let nw: f64 = w.iter().sum();
        let swz: f64 = w.iter().zip(z).map(|(a, b)| a * b).sum();
        let eh = swz / nw;
        let vh = w.iter().zip(z).map(|(a, b)| a * (b - eh).powi(2)).sum::<f64>() / nw;
        let swx: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        let swx2: f64 = w.iter().zip(x).map(|(a, b)| a * b * b).sum();
        let statistic = w.iter().zip(x).zip(z).map(|((a, b), c)| a * b * c).sum();
        let variance = if nw > 1.0 { nw / (nw - 1.0) * vh * swx2 - vh * swx * swx / (nw - 1.0) } else { 0.0 };
        Self { statistic, mean: swx * eh, variance }
    }

    /// Standardized statistic; 0 when the null variance vanishes.
    pub fn standardized(&self) -> f64 {
        if self.variance > 1e-12 * (self.mean.abs() + 1.0).powi(2) {
            (self.statistic - self.mean) / self.variance.sqrt()
        } else {
            0.0
        }
    }
}

/// Two-sided normal p-value of a standardized statistic.
pub fn two_sided_p(c: f64) -> f64 {
    erfc(c.abs() / std::f64::consts::SQRT_2)
}

/// One conditional inference tree with the subjects it was grown on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTree {
    pub tree: NodeTree,
    pub in_bag: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalForest {
    pub trees: Vec<ConditionalTree>,
    pub config: ForestConfig,
    pub mtry: usize,
    pub n_train: usize,
}

impl ConditionalForest {
    pub fn n_features(&self) -> usize {
        self.trees[0].tree.n_features
    }

    pub fn predict_one(&self, x: &[f64]) -> u8 {
        let votes = self.trees.iter().filter(|t| t.tree.predict_one(x) == 1).count();
        u8::from(2 * votes > self.trees.len())
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<u8>> {
        check_dim(x, self.n_features())?;
        Ok(x.par_iter().map(|r| self.predict_one(r)).collect())
    }

    /// Subjects not used to grow tree `t`.
    pub fn out_of_bag(&self, t: usize) -> Vec<usize> {
        let mut in_bag = vec![false; self.n_train];
        for &i in &self.trees[t].in_bag {
            in_bag[i] = true;
        }
        (0..self.n_train).filter(|&i| !in_bag[i]).collect()
    }
}

struct Grower<'a> {
    prob: Problem<'a>,
    /// Case weights rescaled to sum to the number of subjects.
    w: Vec<f64>,
    cfg: &'a ForestConfig,
    mtry: usize,
}

impl Grower<'_> {
    fn test_weights(&self, idx: &[usize]) -> Vec<f64> {
        if self.cfg.weighted_tests {
            idx.iter().map(|&i| self.w[i]).collect()
        } else {
            vec![1.0; idx.len()]
        }
    }

    /// Selected variable and its criterion `1 - p_adj`, if any variable is testable.
    fn select_variable<R: Rng>(&self, idx: &[usize], rng: &mut R) -> Option<(usize, f64)> {
        let p = self.prob.p();
        let mut vars: Vec<usize> = sample(rng, p, self.mtry).into_vec();
        vars.sort_unstable();
        let w = self.test_weights(idx);
        let z: Vec<f64> = idx.iter().map(|&i| f64::from(self.prob.z[i])).collect();
        let mut best: Option<(usize, f64)> = None;
        for &k in &vars {
            let x: Vec<f64> = idx.iter().map(|&i| self.prob.x[i][k]).collect();
            let c = PermutationMoments::compute(&x, &z, &w).standardized().abs();
            if c > 0.0 && best.is_none_or(|(_, b)| c > b) {
                best = Some((k, c));
            }
        }
        best.map(|(k, c)| (k, 1.0 - (self.mtry as f64 * two_sided_p(c)).min(1.0)))
    }

    /// Threshold maximizing the standardized indicator statistic.
    fn split_point(&self, idx: &[usize], k: usize) -> Option<f64> {
        let w = self.test_weights(idx);
        let z: Vec<f64> = idx.iter().map(|&i| f64::from(self.prob.z[i])).collect();
        let mut order: Vec<usize> = (0..idx.len()).collect();
        order.sort_by(|&a, &b| self.prob.x[idx[a]][k].total_cmp(&self.prob.x[idx[b]][k]));
        let nw: f64 = w.iter().sum();
        let swz: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
        let eh = swz / nw;
        let vh = w.iter().zip(&z).map(|(a, b)| a * (b - eh).powi(2)).sum::<f64>() / nw;
        let mut best: Option<(f64, f64)> = None;
        let (mut sw, mut swzl) = (0.0, 0.0);
        for pos in 0..order.len() - 1 {
            let a = order[pos];
            sw += w[a];
            swzl += w[a] * z[a];
            let (xl, xr) = (self.prob.x[idx[a]][k], self.prob.x[idx[order[pos + 1]]][k]);
            if xl == xr || pos + 1 < self.cfg.min_bucket || order.len() - pos - 1 < self.cfg.min_bucket {
                continue;
            }
            // indicator covariate: sum w g = sum w g^2 = sw
            let var = if nw > 1.0 { nw / (nw - 1.0) * vh * sw - vh * sw * sw / (nw - 1.0) } else { 0.0 };
            if var <= 0.0 {
                continue;
            }
            let c = ((swzl - sw * eh) / var.sqrt()).abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((0.5 * (xl + xr), c));
            }
        }
        best.map(|(s, _)| s)
    }

    fn grow<R: Rng>(&self, idx: &[usize], depth: usize, rng: &mut R, nodes: &mut Vec<Node>) -> usize {
        let mut wsum = [0.0; 2];
        for &i in idx {
            wsum[self.prob.z[i] as usize] += self.w[i];
        }
        let k = nodes.len();
        nodes.push(Node {
            split: None,
            left: 0,
            right: 0,
            label: majority(wsum),
            weight: wsum,
            count: idx.len(),
        });
        if depth >= self.cfg.max_depth || idx.len() < self.cfg.min_split || wsum[0] == 0.0 || wsum[1] == 0.0 {
            return k;
        }
        let Some((var, crit)) = self.select_variable(idx, rng) else {
            return k;
        };
        if crit < self.cfg.mincriterion {
            return k;
        }
        let Some(threshold) = self.split_point(idx, var) else {
            return k;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.prob.x[i][var] <= threshold);
        let left = self.grow(&l, depth + 1, rng, nodes);
        let right = self.grow(&r, depth + 1, rng, nodes);
        nodes[k].split = Some(Split { feature: var, threshold });
        nodes[k].left = left;
        nodes[k].right = right;
        k
    }
}

/// Fits a conditional inference forest with a fixed `mtry`
/// (`config.mtry`, defaulting to `ceil(sqrt(p))` when unset).
pub fn fit_conditional_forest(x: &[Vec<f64>], z: &[u8], w: &[f64], cfg: &ForestConfig) -> Result<ConditionalForest> {
    let prob = Problem::new(x, z, w)?;
    cfg.validate(prob.p())?;
    let mtry = cfg.mtry.unwrap_or_else(|| (prob.p() as f64).sqrt().ceil() as usize);
    let n = prob.n();
    let total: f64 = w.iter().sum();
    let grower = Grower { prob, w: w.iter().map(|v| v * n as f64 / total).collect(), cfg, mtry };
    let size = ((cfg.subsample_fraction * n as f64).round() as usize).clamp(1, n);
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(cfg.seed, t as u64);
            let mut in_bag: Vec<usize> = if size == n { (0..n).collect() } else { sample(&mut r, n, size).into_vec() };
            in_bag.sort_unstable();
            let mut nodes = Vec::new();
            grower.grow(&in_bag, 0, &mut r, &mut nodes);
            ConditionalTree { tree: NodeTree { nodes, n_features: grower.prob.p() }, in_bag }
        })
        .collect();
    Ok(ConditionalForest { trees, config: cfg.clone(), mtry, n_train: n })
}
