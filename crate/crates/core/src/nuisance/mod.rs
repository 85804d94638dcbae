//! Nuisance models feeding the weight estimators: propensity score, censoring
//! survivor, exponential survival regression and gamma cost regressions.

mod censoring;
mod fit;
mod glm;
pub(crate) mod linalg;
mod logistic;
mod survival;

use serde::{Deserialize, Serialize};

pub use censoring::{fit_censor_exponential, fit_censor_survivor, CensorModel, CensoringKind, StepSurvivor};
pub use fit::{MIN_INTERVAL_SUBJECTS, MIN_SUBJECTS_PER_COEFFICIENT, fit_cost_outcome, fit_interval_cost, fit_nuisance, IntervalCostModel, NuisanceFit};
pub use glm::{GammaGlm, GlmOptions};
pub use logistic::{fit_propensity, LogisticFit};
pub use survival::{fit_survival_outcome, ExponentialRegression};

use crate::error::Result;

/// Per-subject nuisance quantities consumed by the weight estimators.
pub trait Nuisance: Sync {
    /// `P(A = 1 | x)`, already clipped where applicable.
    fn propensity(&self, x: &[f64]) -> Result<f64>;
    /// Censoring survivor `K_a(t-)` (left limit).
    fn censor_survivor(&self, arm: u8, t: f64, x: &[f64]) -> Result<f64>;
    /// Restricted mean survival `h_a(x)`.
    fn restricted_mean(&self, arm: u8, x: &[f64]) -> Result<f64>;
    /// Mean total cost `m_a(x)`.
    fn total_cost(&self, arm: u8, x: &[f64]) -> Result<f64>;
    /// Mean cost accrued in interval `j`, `m_a^j(x)`.
    fn interval_cost(&self, arm: u8, j: usize, x: &[f64]) -> Result<f64>;
}

/// `int_0^tau exp(-rate t) dt`, with a series expansion for tiny rates.
pub fn restricted_mean_exponential(rate: f64, tau: f64) -> f64 {
    let rt = rate * tau;
    if rt < 1e-8 {
        tau * (1.0 - rt / 2.0 + rt * rt / 6.0)
    } else {
        -(-rt).exp_m1() / rate
    }
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_true() -> bool {
    true
}

/// Covariate design of the outcome and treatment models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Main-effect columns; `None` uses every covariate.
    #[serde(default)]
    pub covariates: Option<Vec<usize>>,
    /// Columns interacting with treatment; `None` uses every covariate.
    #[serde(default)]
    pub interactions: Option<Vec<usize>>,
    /// Include a treatment main effect in the outcome models.
    #[serde(default = "default_true")]
    pub treatment_main: bool,
    /// Drop the treatment-by-first-covariate interaction from the outcome models.
    #[serde(default)]
    pub misspecified: bool,
    /// Propensity clip bound.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub censoring: CensoringKind,
    #[serde(default)]
    pub glm: GlmOptions,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            covariates: None,
            interactions: None,
            treatment_main: true,
            misspecified: false,
            epsilon: default_epsilon(),
            censoring: CensoringKind::default(),
            glm: GlmOptions::default(),
        }
    }
}

impl ModelSpec {
    /// Correct outcome design for the simulation study: all main effects plus
    /// treatment interactions with the first two covariates.
    pub fn simulation(misspecified: bool) -> Self {
        Self { interactions: Some(vec![0, 1]), misspecified, ..Self::default() }
    }

    fn main_columns(&self, p: usize) -> Vec<usize> {
        self.covariates.clone().unwrap_or_else(|| (0..p).collect())
    }

    fn interaction_columns(&self, p: usize) -> Vec<usize> {
        let cols = self.interactions.clone().unwrap_or_else(|| (0..p).collect());
        cols.into_iter().filter(|&k| !(self.misspecified && k == 0)).collect()
    }

    /// `[1, x_main]`.
    pub fn propensity_row(&self, x: &[f64]) -> Vec<f64> {
        let mut row = vec![1.0];
        row.extend(self.main_columns(x.len()).into_iter().map(|k| x[k]));
        row
    }

    /// `[1, x_main, a, a * x_inter]`.
    pub fn outcome_row(&self, x: &[f64], arm: u8) -> Vec<f64> {
        let a = f64::from(arm);
        let mut row = self.propensity_row(x);
        if self.treatment_main {
            row.push(a);
        }
        row.extend(self.interaction_columns(x.len()).into_iter().map(|k| a * x[k]));
        row
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |cols: &Option<Vec<usize>>| cols.as_ref().is_some_and(|c| c.iter().any(|&k| k >= p));
        if bad(&self.covariates) || bad(&self.interactions) {
            return crate::error::invalid(format!("model spec references a column beyond the {p} covariates"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return crate::error::invalid(format!("epsilon must be in (0, 0.5), got {}", self.epsilon));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restricted_mean_limits() {
        let h = restricted_mean_exponential(0.1, 20.0);
        assert!((h - (1.0 - (-2.0f64).exp()) / 0.1).abs() < 1e-12);
        assert!((h - 8.6466).abs() < 1e-4);
        assert!((restricted_mean_exponential(1e-12, 20.0) - 20.0).abs() < 1e-9);
        assert!(restricted_mean_exponential(1e9, 20.0) < 1e-8);
        let mut prev = 20.0;
        for k in -12..6 {
            let h = restricted_mean_exponential(10f64.powi(k), 20.0);
            assert!(h > 0.0 && h < 20.0 && h < prev);
            prev = h;
        }
        // both branches agree near the switch point
        for r in [0.99e-9, 1.01e-9] {
            let exact = -(-r * 10.0f64).exp_m1() / r;
            assert!((restricted_mean_exponential(r, 10.0) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn design_rows() {
        let spec = ModelSpec::simulation(false);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spec.outcome_row(&x, 1), vec![1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 1.0, 1.0, 2.0]);
        assert_eq!(spec.outcome_row(&x, 0), vec![1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0, 0.0]);
        let mis = ModelSpec::simulation(true);
        assert_eq!(mis.outcome_row(&x, 1), vec![1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 1.0, 2.0]);
        assert_eq!(spec.propensity_row(&x).len(), 6);
        assert!(ModelSpec { interactions: Some(vec![7]), ..ModelSpec::default() }.validate(5).is_err());
    }
}
