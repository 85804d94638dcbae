use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::censoring::{fit_censor_exponential, fit_censor_survivor, CensorModel, CensoringKind};
use super::glm::GammaGlm;
use super::logistic::{fit_propensity, LogisticFit};
use super::survival::{fit_survival_outcome, ExponentialRegression};
use super::{ModelSpec, Nuisance};
use crate::cohort::Cohort;
use crate::error::{invalid, Error, Result};
use crate::grid::{interval_quantities, PartitionGrid};

/// Minimum number of positive costs per arm for an interval regression.
pub const MIN_INTERVAL_SUBJECTS: usize = 10;
/// Minimum number of positive costs per design column for an interval regression.
pub const MIN_SUBJECTS_PER_COEFFICIENT: usize = 10;

/// Model for the cost accrued in one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IntervalCostModel {
    /// Gamma GLM for the cost of subjects alive at the interval start `start`;
    /// the mean is scaled by the survival probability to that point.
    Glm { glm: GammaGlm, start: f64 },
    /// Stratified sample means, used when the interval is too sparse to fit.
    Fallback { means: [f64; 2] },
}

impl IntervalCostModel {
    /// `m_a^j(x)`, with `survival` supplying `S_a(start | x)` for the GLM variant.
    pub fn predict(&self, x: &[f64], arm: u8, survival: Option<&ExponentialRegression>) -> f64 {
        match self {
            Self::Glm { glm, start } => {
                let log_alive = match survival {
                    Some(s) if *start > 0.0 => -s.rate(x, arm) * start,
                    _ => 0.0,
                };
                (log_alive + glm.linear_predictor(x, arm)).exp()
            }
            Self::Fallback { means } => means[arm as usize],
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, Self::Fallback { .. })
    }
}

/// All fitted nuisance components; each is optional so that partial fits
/// (e.g. regression only) can be represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceFit {
    pub tau: f64,
    pub spec: ModelSpec,
    pub propensity: Option<LogisticFit>,
    pub censoring: Option<CensorModel>,
    pub survival: Option<ExponentialRegression>,
    pub total_cost: Option<GammaGlm>,
    pub interval_cost: Option<Vec<IntervalCostModel>>,
    pub grid: Option<PartitionGrid>,
}

fn missing<T>(what: &str) -> Result<T> {
    Err(Error::InvalidState(format!("nuisance fit has no {what} model")))
}

impl Nuisance for NuisanceFit {
    fn propensity(&self, x: &[f64]) -> Result<f64> {
        match &self.propensity {
            Some(m) => Ok(m.predict(x)),
            None => missing("propensity"),
        }
    }

    fn censor_survivor(&self, arm: u8, t: f64, x: &[f64]) -> Result<f64> {
        match &self.censoring {
            Some(m) => Ok(m.survivor(arm, t, x)),
            None => missing("censoring"),
        }
    }

    fn restricted_mean(&self, arm: u8, x: &[f64]) -> Result<f64> {
        match &self.survival {
            Some(m) => Ok(m.restricted_mean(arm, x, self.tau)),
            None => missing("survival"),
        }
    }

    fn total_cost(&self, arm: u8, x: &[f64]) -> Result<f64> {
        match &self.total_cost {
            Some(m) => Ok(m.predict(x, arm)),
            None => missing("total cost"),
        }
    }

    fn interval_cost(&self, arm: u8, j: usize, x: &[f64]) -> Result<f64> {
        match &self.interval_cost {
            Some(ms) => match ms.get(j) {
                Some(m @ IntervalCostModel::Glm { start, .. }) if *start > 0.0 => match &self.survival {
                    Some(s) => Ok(m.predict(x, arm, Some(s))),
                    None => missing("survival"),
                },
                Some(m) => Ok(m.predict(x, arm, None)),
                None => invalid(format!("interval {j} out of range ({} intervals)", ms.len())),
            },
            None => missing("interval cost"),
        }
    }
}

/// Gamma GLM for total cost on the uncensored subjects.
pub fn fit_cost_outcome(x: &[Vec<f64>], a: &[u8], m: &[f64], delta: &[bool], spec: &ModelSpec) -> Result<GammaGlm> {
    if m.iter().any(|&v| v < 0.0) {
        return invalid("costs must be non-negative");
    }
    let idx: Vec<usize> = (0..x.len()).filter(|&i| delta[i]).collect();
    if idx.is_empty() {
        return invalid("total cost model needs uncensored subjects");
    }
    let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
    let as_: Vec<u8> = idx.iter().map(|&i| a[i]).collect();
    let ms: Vec<f64> = idx.iter().map(|&i| m[i]).collect();
    GammaGlm::fit(&xs, &as_, &ms, spec)
}

fn fallback(a: &[u8], y: &[f64]) -> IntervalCostModel {
    let pooled = if y.is_empty() { 0.0 } else { y.iter().sum::<f64>() / y.len() as f64 };
    let means = std::array::from_fn(|arm| {
        let v: Vec<f64> = a.iter().zip(y).filter(|(&ai, _)| ai as usize == arm).map(|(_, &c)| c).collect();
        if v.is_empty() { pooled } else { v.iter().sum::<f64>() / v.len() as f64 }
    });
    IntervalCostModel::Fallback { means }
}

/// One cost model per interval. Subjects observed through the interval with a
/// positive cost feed a gamma GLM; zero costs come from deaths before the
/// interval and enter through the survival model at prediction time. Sparse
/// intervals fall back to arm means over all observed subjects.
pub fn fit_interval_cost(cohort: &Cohort, grid: &PartitionGrid, spec: &ModelSpec) -> Result<Vec<IntervalCostModel>> {
    let obs = cohort
        .subjects
        .iter()
        .map(|s| interval_quantities(s, grid))
        .collect::<Result<Vec<_>>>()?;
    if obs.iter().flatten().any(|o| o.cost < 0.0) {
        return invalid("interval costs must be non-negative");
    }
    let models = (0..grid.n_intervals())
        .into_par_iter()
        .map(|j| {
            let idx: Vec<usize> = (0..obs.len()).filter(|&i| obs[i][j].delta).collect();
            let a: Vec<u8> = idx.iter().map(|&i| cohort.subjects[i].a).collect();
            let y: Vec<f64> = idx.iter().map(|&i| obs[i][j].cost).collect();
            let pos: Vec<usize> = idx.iter().copied().filter(|&i| obs[i][j].cost > 0.0).collect();
            let per_arm = |arm: u8| pos.iter().filter(|&&i| cohort.subjects[i].a == arm).count();
            let dim = spec.outcome_row(&cohort.subjects[0].x, 1).len();
            if per_arm(0) < MIN_INTERVAL_SUBJECTS
                || per_arm(1) < MIN_INTERVAL_SUBJECTS
                || pos.len() < MIN_SUBJECTS_PER_COEFFICIENT * dim
            {
                return fallback(&a, &y);
            }
            let x: Vec<Vec<f64>> = pos.iter().map(|&i| cohort.subjects[i].x.clone()).collect();
            let ap: Vec<u8> = pos.iter().map(|&i| cohort.subjects[i].a).collect();
            let yp: Vec<f64> = pos.iter().map(|&i| obs[i][j].cost).collect();
            match GammaGlm::fit(&x, &ap, &yp, spec) {
                Ok(g) if g.beta.iter().all(|b| b.is_finite()) => IntervalCostModel::Glm { glm: g, start: grid.interval(j).0 },
                _ => {
                    log::warn!("interval {j}: cost regression failed, using arm means");
                    fallback(&a, &y)
                }
            }
        })
        .collect();
    Ok(models)
}

/// Fits every nuisance model the cohort supports; interval cost models are
/// fitted when `grid` is given.
pub fn fit_nuisance(cohort: &Cohort, tau: f64, grid: Option<&PartitionGrid>, spec: &ModelSpec) -> Result<NuisanceFit> {
    if cohort.is_empty() {
        return invalid("cannot fit nuisance models on an empty cohort");
    }
    spec.validate(cohort.p())?;
    let x = cohort.covariates();
    let a: Vec<u8> = cohort.subjects.iter().map(|s| s.a).collect();
    let u: Vec<f64> = cohort.subjects.iter().map(|s| s.u).collect();
    let delta: Vec<bool> = cohort.subjects.iter().map(|s| s.delta).collect();
    let death: Vec<bool> = cohort.subjects.iter().map(|s| s.death_observed).collect();
    let m: Vec<f64> = cohort.subjects.iter().map(|s| s.total_cost).collect();

    let ((prop, cens), ((surv, cost), intervals)) = rayon::join(
        || {
            rayon::join(
                || fit_propensity(&x, &a, spec),
                || match spec.censoring {
                    CensoringKind::ProductLimit => fit_censor_survivor(&u, &delta, &a),
                    CensoringKind::Exponential => {
                        if delta.iter().all(|&d| d) {
                            fit_censor_survivor(&u, &delta, &a)
                        } else {
                            fit_censor_exponential(&x, &u, &delta, &a, spec)
                        }
                    }
                },
            )
        },
        || {
            rayon::join(
                || rayon::join(|| fit_survival_outcome(&x, &a, &u, &death, spec), || fit_cost_outcome(&x, &a, &m, &delta, spec)),
                || grid.map(|g| fit_interval_cost(cohort, g, spec)).transpose(),
            )
        },
    );
    Ok(NuisanceFit {
        tau,
        spec: spec.clone(),
        propensity: Some(prop?),
        censoring: Some(cens?),
        survival: Some(surv?),
        total_cost: Some(cost?),
        interval_cost: intervals?,
        grid: grid.cloned(),
    })
}
