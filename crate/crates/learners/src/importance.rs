//! Conditional permutation importance on out-of-bag subjects.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Problem;
use crate::forest::ConditionalForest;
use ceitr_core::error::{Error, Result};
use ceitr_core::rng;

fn default_threshold() -> f64 {
    0.2
}
fn default_repeats() -> usize {
    1
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceConfig {
    /// Covariates with `|Pearson r|` above this condition the permutation.
    #[serde(default = "default_threshold")]
    pub cor_threshold: f64,
    /// `false` permutes marginally.
    #[serde(default = "default_true")]
    pub conditional: bool,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self { cor_threshold: default_threshold(), conditional: true, repeats: default_repeats(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    /// Mean drop in weighted out-of-bag accuracy per variable.
    pub mean: Vec<f64>,
    /// Monte Carlo standard error across repeats (0 with a single repeat).
    pub se: Vec<f64>,
    pub per_repeat: Vec<Vec<f64>>,
}

/// Pearson correlation matrix of the columns of `x`.
pub fn correlation_matrix(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len() as f64;
    let p = x[0].len();
    let mean: Vec<f64> = (0..p).map(|k| x.iter().map(|r| r[k]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..p)
        .map(|k| x.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>().sqrt())
        .collect();
    (0..p)
        .map(|a| {
            (0..p)
                .map(|b| {
                    if sd[a] == 0.0 || sd[b] == 0.0 {
                        return if a == b { 1.0 } else { 0.0 };
                    }
                    x.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (sd[a] * sd[b])
                })
                .collect()
        })
        .collect()
}

fn weighted_accuracy(pred: &[u8], idx: &[usize], prob: &Problem) -> f64 {
    let tot: f64 = idx.iter().map(|&i| prob.w[i]).sum();
    let hit: f64 = idx.iter().zip(pred).filter(|(&i, &g)| prob.z[i] == g).map(|(&i, _)| prob.w[i]).sum();
    hit / tot
}

/// Importance of every variable: the drop in weighted out-of-bag accuracy when
/// `x_k` is permuted within cells of the tree's cut points on the covariates
/// correlated with `x_k`, averaged over trees.
pub fn conditional_importance(
    forest: &ConditionalForest,
    x: &[Vec<f64>],
    z: &[u8],
    w: &[f64],
    cfg: &ImportanceConfig,
) -> Result<Importance> {
    let prob = Problem::new(x, z, w)?;
    if prob.n() != forest.n_train || prob.p() != forest.n_features() {
        return Err(Error::InvalidArgument("importance needs the forest's training data".into()));
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let p = prob.p();
    let cor = correlation_matrix(x);
    let conditioning: Vec<Vec<usize>> = (0..p)
        .map(|k| (0..p).filter(|&j| j != k && cor[j][k].abs() > cfg.cor_threshold).collect())
        .collect();
    let oob: Vec<Vec<usize>> = (0..forest.trees.len()).map(|t| forest.out_of_bag(t)).collect();
    if oob.iter().all(|o| o.iter().map(|&i| w[i]).sum::<f64>() <= 0.0) {
        return Err(Error::InvalidArgument("importance needs out-of-bag subjects with positive weight".into()));
    }

    let mut per_repeat = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let drops: Vec<Option<Vec<f64>>> = (0..forest.trees.len())
            .into_par_iter()
            .map(|t| {
                let idx = &oob[t];
                if idx.iter().map(|&i| w[i]).sum::<f64>() <= 0.0 {
                    return None;
                }
                let tree = &forest.trees[t].tree;
                let base: Vec<u8> = idx.iter().map(|&i| tree.predict_one(&x[i])).collect();
                let acc0 = weighted_accuracy(&base, idx, &prob);
                let mut g = rng::stream(rng::derive_seed(cfg.seed, r as u64), t as u64);
                let out = (0..p)
                    .map(|k| {
                        if !tree.uses_feature(k) {
                            return 0.0;
                        }
                        let cuts: Vec<(usize, Vec<f64>)> = if cfg.conditional {
                            conditioning[k].iter().map(|&j| (j, tree.cut_points(j))).filter(|(_, c)| !c.is_empty()).collect()
                        } else {
                            Vec::new()
                        };
                        if cfg.conditional && cuts.is_empty() {
                            log::debug!("variable {k}, tree {t}: no conditioning cut points, permuting marginally");
                        }
                        let mut cells: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
                        for (pos, &i) in idx.iter().enumerate() {
                            let key = cuts.iter().map(|(j, c)| c.partition_point(|&s| s < x[i][*j])).collect();
                            cells.entry(key).or_default().push(pos);
                        }
                        let mut keys: Vec<&Vec<usize>> = cells.keys().collect();
                        keys.sort();
                        let mut permuted: Vec<f64> = idx.iter().map(|&i| x[i][k]).collect();
                        for key in keys {
                            let members = &cells[key];
                            let mut vals: Vec<f64> = members.iter().map(|&m| permuted[m]).collect();
                            vals.shuffle(&mut g);
                            for (&m, v) in members.iter().zip(vals) {
                                permuted[m] = v;
                            }
                        }
                        let pred: Vec<u8> = idx
                            .iter()
                            .zip(&permuted)
                            .map(|(&i, &v)| {
                                let mut row = x[i].clone();
                                row[k] = v;
                                tree.predict_one(&row)
                            })
                            .collect();
                        acc0 - weighted_accuracy(&pred, idx, &prob)
                    })
                    .collect();
                Some(out)
            })
            .collect();
        let used: Vec<&Vec<f64>> = drops.iter().flatten().collect();
        let m = used.len() as f64;
        per_repeat.push((0..p).map(|k| used.iter().map(|d| d[k]).sum::<f64>() / m).collect::<Vec<f64>>());
    }
    let reps = per_repeat.len() as f64;
    let mean: Vec<f64> = (0..p).map(|k| per_repeat.iter().map(|v| v[k]).sum::<f64>() / reps).collect();
    let se = (0..p)
        .map(|k| {
            if per_repeat.len() < 2 {
                0.0
            } else {
                let var = per_repeat.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / (reps - 1.0);
                (var / reps).sqrt()
            }
        })
        .collect();
    Ok(Importance { mean, se, per_repeat })
}
