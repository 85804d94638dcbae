use crate::data::{cv_folds, gather, split_fold, weighted_risk, Problem};
use crate::forest::{fit_conditional_forest, ConditionalForest, ForestConfig};
use ceitr_core::error::{Error, Result};
use ceitr_core::rng::derive_seed;

/// `{1, 2, ceil(p/2), p}` restricted to `1..=p`, sorted and deduplicated.
pub fn default_mtry_candidates(p: usize) -> Vec<usize> {
    let mut c: Vec<usize> = [1, 2, p.div_ceil(2), p].into_iter().filter(|&m| m >= 1 && m <= p).collect();
    c.sort_unstable();
    c.dedup();
    c
}

/// Cross-validated weighted misclassification per candidate `mtry`.
#[derive(Debug, Clone, PartialEq)]
pub struct MtrySelection {
    pub mtry: usize,
    pub cv_error: Vec<(usize, f64)>,
}

/// Candidate with the smallest cross-validated weighted misclassification,
/// ties to the smallest `mtry`. Folds and per-fold forest seeds are shared
/// across candidates.
pub fn select_mtry_cv(
    x: &[Vec<f64>],
    z: &[u8],
    w: &[f64],
    candidates: &[usize],
    folds: usize,
    cfg: &ForestConfig,
) -> Result<MtrySelection> {
    let prob = Problem::new(x, z, w)?;
    if candidates.is_empty() || candidates.iter().any(|&m| m == 0 || m > prob.p()) {
        return Err(Error::InvalidArgument(format!("mtry candidates must lie in 1..={}", prob.p())));
    }
    if candidates.len() == 1 {
        return Ok(MtrySelection { mtry: candidates[0], cv_error: Vec::new() });
    }
    if folds < 2 {
        return Err(Error::InvalidArgument("at least two folds are needed".into()));
    }
    let k = folds.min(prob.n());
    let fold = cv_folds(prob.n(), k, derive_seed(cfg.seed, u64::MAX));
    let mut cv_error = Vec::with_capacity(candidates.len());
    for &m in candidates {
        let mut err = 0.0;
        for f in 0..k {
            let (train, test) = split_fold(&fold, f);
            let wt = gather(w, &train);
            if test.is_empty() || wt.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            let fcfg = ForestConfig { mtry: Some(m), seed: derive_seed(cfg.seed, f as u64), ..cfg.clone() };
            let forest = fit_conditional_forest(&gather(x, &train), &gather(z, &train), &wt, &fcfg)?;
            let pred = forest.predict(&gather(x, &test))?;
            err += weighted_risk(&pred, &gather(z, &test), &gather(w, &test));
        }
        cv_error.push((m, err));
    }
    let mut best = cv_error[0];
    for &(m, e) in &cv_error[1..] {
        if e < best.1 || (e == best.1 && m < best.0) {
            best = (m, e);
        }
    }
    Ok(MtrySelection { mtry: best.0, cv_error })
}

/// Forest with `mtry` from the config, or chosen by cross-validation over the
/// default candidates when unset.
pub fn fit_forest_auto(x: &[Vec<f64>], z: &[u8], w: &[f64], cfg: &ForestConfig, folds: usize) -> Result<ConditionalForest> {
    let cfg = match cfg.mtry {
        Some(_) => cfg.clone(),
        None => {
            let p = x.first().map_or(0, Vec::len);
            let sel = select_mtry_cv(x, z, w, &default_mtry_candidates(p), folds, cfg)?;
            ForestConfig { mtry: Some(sel.mtry), ..cfg.clone() }
        }
    };
    fit_conditional_forest(x, z, w, &cfg)
}
