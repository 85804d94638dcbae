//! Learners for the weighted classification problem
//! `min_g sum_i |W_i| I{g(X_i) != Z_i}`.

pub mod data;
pub mod forest;
pub mod importance;
pub mod rule;
pub mod tree;
pub mod tuning;

pub use data::{cv_folds, split_fold, weighted_risk, Problem};
pub use forest::{fit_conditional_forest, ConditionalForest, ForestConfig, PermutationMoments};
pub use importance::{conditional_importance, Importance, ImportanceConfig};
pub use rule::{predict_rule, rule_from_json, rule_to_json, FittedRule, NaiveRule};
pub use tree::{fit_weighted_tree, TreeConfig, WeightedTree};
pub use tuning::{default_mtry_candidates, fit_forest_auto, select_mtry_cv, MtrySelection};
