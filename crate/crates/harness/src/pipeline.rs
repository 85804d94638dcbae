use ceitr_core::error::{Error, Result};
use ceitr_core::nuisance::{fit_nuisance, ModelSpec, NuisanceFit};
use ceitr_core::rng::derive_seed;
use ceitr_core::weights::compute_weights;
use ceitr_core::{CeConfig, Cohort, WeightVector};
use ceitr_learners::{fit_forest_auto, fit_weighted_tree, ForestConfig, FittedRule, NaiveRule, TreeConfig};

use crate::method::{Learner, MethodSpec};

/// Classifier settings shared by every method.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSettings {
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub mtry_folds: usize,
}

pub fn fit_cohort_nuisance(cohort: &Cohort, ce: &CeConfig, spec: &ModelSpec) -> Result<NuisanceFit> {
    fit_nuisance(cohort, ce.tau, cohort.grid.as_ref(), spec)
}

pub fn check_method_inputs(method: MethodSpec, cohort: &Cohort) -> Result<()> {
    if method.weight().is_partitioned() && !cohort.has_cost_history() {
        return Err(Error::InvalidArgument(format!(
            "{method} needs per-interval cost history: supply a cohort file with m_1..m_J columns and a matching grid (--intervals or --grid)"
        )));
    }
    Ok(())
}

pub fn method_weights(method: MethodSpec, cohort: &Cohort, nuisance: &NuisanceFit, ce: &CeConfig) -> Result<WeightVector> {
    check_method_inputs(method, cohort)?;
    compute_weights(method.weight(), cohort, cohort.grid.as_ref(), nuisance, ce)
}

/// Trains the classifier of `method` on already computed weights.
pub fn train_on_weights(
    method: MethodSpec,
    cohort: &Cohort,
    weights: &WeightVector,
    nuisance: &NuisanceFit,
    ce: &CeConfig,
    settings: &LearnerSettings,
    seed: u64,
) -> Result<FittedRule> {
    let x = cohort.covariates();
    match method.learner() {
        None => Ok(FittedRule::Naive(NaiveRule { nuisance: nuisance.clone(), lambda: ce.lambda, n_features: cohort.p() })),
        Some(Learner::Tree) => {
            let cfg = TreeConfig { seed: derive_seed(seed, 1), ..settings.tree.clone() };
            Ok(FittedRule::Tree(fit_weighted_tree(&x, &weights.z, &weights.abs_w, &cfg)?))
        }
        Some(Learner::Forest) => {
            let cfg = ForestConfig { seed: derive_seed(seed, 2), ..settings.forest.clone() };
            Ok(FittedRule::Forest(fit_forest_auto(&x, &weights.z, &weights.abs_w, &cfg, settings.mtry_folds)?))
        }
    }
}

/// Nuisance fit, weights and classifier for one cohort.
pub fn train_rule(
    method: MethodSpec,
    cohort: &Cohort,
    ce: &CeConfig,
    spec: &ModelSpec,
    settings: &LearnerSettings,
    seed: u64,
) -> Result<FittedRule> {
    check_method_inputs(method, cohort)?;
    let nuisance = fit_cohort_nuisance(cohort, ce, spec)?;
    let w = method_weights(method, cohort, &nuisance, ce)?;
    train_on_weights(method, cohort, &w, &nuisance, ce, settings, seed)
}
