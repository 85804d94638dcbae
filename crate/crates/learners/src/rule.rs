use serde::{Deserialize, Serialize};

use crate::data::check_dim;
use crate::forest::ConditionalForest;
use crate::tree::WeightedTree;
use ceitr_core::error::{Error, Result};
use ceitr_core::nuisance::{Nuisance, NuisanceFit};

pub const RULE_FORMAT: &str = "ceitr-rule";
pub const RULE_VERSION: u32 = 1;

/// Sign of the regression-based NMB contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveRule {
    pub nuisance: NuisanceFit,
    pub lambda: f64,
    pub n_features: usize,
}

impl NaiveRule {
    pub fn contrast(&self, x: &[f64]) -> Result<f64> {
        let nz = &self.nuisance;
        let dt = nz.restricted_mean(1, x)? - nz.restricted_mean(0, x)?;
        let dm = nz.total_cost(1, x)? - nz.total_cost(0, x)?;
        Ok(self.lambda * dt - dm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedRule {
    Tree(WeightedTree),
    Forest(ConditionalForest),
    Naive(NaiveRule),
    /// Treat everyone (1) or no one (0).
    Constant { label: u8, n_features: usize },
}

impl FittedRule {
    pub fn n_features(&self) -> usize {
        match self {
            Self::Tree(t) => t.tree.n_features,
            Self::Forest(f) => f.n_features(),
            Self::Naive(r) => r.n_features,
            Self::Constant { n_features, .. } => *n_features,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Tree(_) => "tree",
            Self::Forest(_) => "forest",
            Self::Naive(_) => "naive",
            Self::Constant { .. } => "constant",
        }
    }
}

/// Labels in `{0, 1}` for every row of `x`.
pub fn predict_rule(rule: &FittedRule, x: &[Vec<f64>]) -> Result<Vec<u8>> {
    check_dim(x, rule.n_features())?;
    match rule {
        FittedRule::Tree(t) => t.predict(x),
        FittedRule::Forest(f) => f.predict(x),
        FittedRule::Naive(r) => x.iter().map(|row| Ok(u8::from(r.contrast(row)? > 0.0))).collect(),
        FittedRule::Constant { label, .. } => Ok(vec![*label; x.len()]),
    }
}

#[derive(Serialize, Deserialize)]
struct RuleFile {
    format: String,
    version: u32,
    rule: FittedRule,
}

pub fn rule_to_json(rule: &FittedRule) -> Result<String> {
    let file = RuleFile { format: RULE_FORMAT.into(), version: RULE_VERSION, rule: rule.clone() };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))
}

pub fn rule_from_json(s: &str) -> Result<FittedRule> {
    let file: RuleFile = serde_json::from_str(s).map_err(|e| Error::Parse(format!("rule file: {e}")))?;
    if file.format != RULE_FORMAT {
        return Err(Error::Parse(format!("not a rule file (format '{}')", file.format)));
    }
    if file.version != RULE_VERSION {
        return Err(Error::Parse(format!("unsupported rule version {} (expected {RULE_VERSION})", file.version)));
    }
    Ok(file.rule)
}
