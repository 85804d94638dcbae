use rand::seq::SliceRandom;

use ceitr_core::error::{Error, Result};
use ceitr_core::rng;

/// Borrowed weighted classification problem: rows of `x`, labels `z`, weights `w`.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub x: &'a [Vec<f64>],
    pub z: &'a [u8],
    pub w: &'a [f64],
}

impl<'a> Problem<'a> {
    pub fn new(x: &'a [Vec<f64>], z: &'a [u8], w: &'a [f64]) -> Result<Self> {
        let n = x.len();
        if n == 0 || z.len() != n || w.len() != n {
            return Err(Error::InvalidArgument(format!(
                "x, z and w must be non-empty and of equal length (got {}, {}, {})",
                n,
                z.len(),
                w.len()
            )));
        }
        let p = x[0].len();
        if p == 0 || x.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("every row needs the same, positive number of features".into()));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("features must be finite".into()));
        }
        if z.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("all weights are zero".into()));
        }
        Ok(Self { x, z, w })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn p(&self) -> usize {
        self.x[0].len()
    }
}

/// Weighted misclassification `sum_i w_i I{g_i != z_i}`.
pub fn weighted_risk(pred: &[u8], z: &[u8], w: &[f64]) -> f64 {
    pred.iter().zip(z).zip(w).filter(|((g, z), _)| g != z).map(|(_, w)| w).sum()
}

/// Fold id per subject: a seeded shuffle dealt round-robin into `k` folds.
pub fn cv_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

/// Train and test indices of fold `f`.
pub fn split_fold(fold: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..fold.len()).partition(|&i| fold[i] != f)
}

pub(crate) fn gather<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

pub(crate) fn check_dim(x: &[Vec<f64>], p: usize) -> Result<()> {
    match x.iter().find(|r| r.len() != p) {
        Some(r) => Err(Error::InvalidArgument(format!("rule expects {p} features, got a row with {}", r.len()))),
        None => Ok(()),
    }
}
