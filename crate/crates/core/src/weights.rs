//! Per-subject NMB classification weights `W = lambda * dT - dM`, the labels
//! `Z = I{W > 0}` and the classification weights `|W|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Subject};
use crate::config::CeConfig;
use crate::error::{invalid, Error, Result};
use crate::grid::{interval_quantities, PartitionGrid};
use crate::nuisance::Nuisance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightMethod {
    RegBased,
    AipwNp,
    IpwP,
    AipwP,
}

impl WeightMethod {
    pub const ALL: [WeightMethod; 4] = [Self::RegBased, Self::AipwNp, Self::IpwP, Self::AipwP];

    pub fn label(self) -> &'static str {
        match self {
            Self::RegBased => "reg",
            Self::AipwNp => "aipw-np",
            Self::IpwP => "ipw-p",
            Self::AipwP => "aipw-p",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "reg" | "reg-based" => Ok(Self::RegBased),
            "aipw-np" => Ok(Self::AipwNp),
            "ipw-p" => Ok(Self::IpwP),
            "aipw-p" => Ok(Self::AipwP),
            other => invalid(format!("unknown weight method '{other}'")),
        }
    }

    pub fn is_partitioned(self) -> bool {
        matches!(self, Self::IpwP | Self::AipwP)
    }
}

impl std::fmt::Display for WeightMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub ids: Vec<u64>,
    pub delta_t: Vec<f64>,
    pub delta_m: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<u8>,
    pub abs_w: Vec<f64>,
}

impl WeightVector {
    pub fn from_parts(ids: Vec<u64>, delta_t: Vec<f64>, delta_m: Vec<f64>, lambda: f64) -> Self {
        let w: Vec<f64> = delta_t.iter().zip(&delta_m).map(|(t, m)| lambda * t - m).collect();
        Self::from_w(ids, delta_t, delta_m, w)
    }

    fn from_w(ids: Vec<u64>, delta_t: Vec<f64>, delta_m: Vec<f64>, w: Vec<f64>) -> Self {
        let z = sign_labels(&w);
        let abs_w = w.iter().map(|v| v.abs()).collect();
        Self { ids, delta_t, delta_m, w, z, abs_w }
    }

    /// Weights built directly from NMB contrasts, e.g. the oracle `dY`.
    pub fn from_contrast(ids: Vec<u64>, w: Vec<f64>) -> Self {
        let n = w.len();
        Self::from_w(ids, vec![f64::NAN; n], vec![f64::NAN; n], w)
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn mean_w(&self) -> f64 {
        self.w.iter().sum::<f64>() / self.w.len() as f64
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            delta_t: idx.iter().map(|&i| self.delta_t[i]).collect(),
            delta_m: idx.iter().map(|&i| self.delta_m[i]).collect(),
            w: idx.iter().map(|&i| self.w[i]).collect(),
            z: idx.iter().map(|&i| self.z[i]).collect(),
            abs_w: idx.iter().map(|&i| self.abs_w[i]).collect(),
        }
    }
}

/// `I{w > 0}`, ties to 0.
pub fn sign_labels(w: &[f64]) -> Vec<u8> {
    w.iter().map(|&v| u8::from(v > 0.0)).collect()
}

/// The rule of the naive regression method: treat iff the weight is positive.
pub fn reg_naive_rule(weights: &WeightVector) -> Vec<u8> {
    sign_labels(&weights.w)
}

fn per_subject<F>(cohort: &Cohort, lambda: f64, f: F) -> Result<WeightVector>
where
    F: Fn(&Subject) -> Result<(f64, f64)> + Sync,
{
    if cohort.is_empty() {
        return invalid("cannot compute weights for an empty cohort");
    }
    let parts: Vec<(f64, f64)> = cohort.subjects.par_iter().map(&f).collect::<Result<_>>()?;
    let ids = cohort.subjects.iter().map(|s| s.id).collect();
    let (dt, dm) = parts.into_iter().unzip();
    Ok(WeightVector::from_parts(ids, dt, dm, lambda))
}

/// Regression contrasts `h_1 - h_0` and `m_1 - m_0`.
pub fn reg_based_weights<N: Nuisance>(cohort: &Cohort, nuisance: &N, ce: &CeConfig) -> Result<WeightVector> {
    per_subject(cohort, ce.lambda, |s| {
        let dt = nuisance.restricted_mean(1, &s.x)? - nuisance.restricted_mean(0, &s.x)?;
        let dm = nuisance.total_cost(1, &s.x)? - nuisance.total_cost(0, &s.x)?;
        Ok((dt, dm))
    })
}

fn checked_k<N: Nuisance>(nuisance: &N, arm: u8, t: f64, x: &[f64], id: u64) -> Result<f64> {
    let k = nuisance.censor_survivor(arm, t, x)?;
    if k > 0.0 && k.is_finite() {
        Ok(k)
    } else {
        Err(Error::DegenerateWeight(format!("censoring survivor of arm {arm} is {k} at t = {t} for subject {id}")))
    }
}

/// One AIPW contrast term; `k` is the censoring survivor of the subject's own arm.
fn aipw_term(a: f64, e: f64, y: f64, mu1: f64, mu0: f64, k: f64) -> f64 {
    (a * y / (e * k) - (a - e) * mu1 / (e * k)) - ((1.0 - a) * y / ((1.0 - e) * k) + (a - e) * mu0 / ((1.0 - e) * k))
}

/// Non-partitioned AIPW weights on total cost and restricted survival.
pub fn aipw_np_weights<N: Nuisance>(cohort: &Cohort, nuisance: &N, ce: &CeConfig) -> Result<WeightVector> {
    per_subject(cohort, ce.lambda, |s| {
        if !s.delta {
            return Ok((0.0, 0.0));
        }
        let e = nuisance.propensity(&s.x)?;
        let a = f64::from(s.a);
        let k = checked_k(nuisance, s.a, s.u, &s.x, s.id)?;
        let dm = aipw_term(a, e, s.total_cost, nuisance.total_cost(1, &s.x)?, nuisance.total_cost(0, &s.x)?, k);
        let dt = aipw_term(a, e, s.u, nuisance.restricted_mean(1, &s.x)?, nuisance.restricted_mean(0, &s.x)?, k);
        Ok((dt, dm))
    })
}

/// Survival part of the partitioned estimators: inverse weighting or
/// augmentation for uncensored subjects, regression imputation otherwise.
fn survival_contrast<N: Nuisance>(nuisance: &N, s: &Subject, e: f64, augmented: bool) -> Result<f64> {
    let a = f64::from(s.a);
    let h1 = nuisance.restricted_mean(1, &s.x)?;
    let h0 = nuisance.restricted_mean(0, &s.x)?;
    if !s.delta {
        return Ok(a * h1 - (1.0 - a) * h0);
    }
    Ok(if augmented {
        (a * s.u / e - (a - e) * h1 / e) - ((1.0 - a) * s.u / (1.0 - e) + (a - e) * h0 / (1.0 - e))
    } else {
        a * s.u / e - (1.0 - a) * s.u / (1.0 - e)
    })
}

fn partitioned<N: Nuisance>(
    cohort: &Cohort,
    grid: &PartitionGrid,
    nuisance: &N,
    ce: &CeConfig,
    augmented: bool,
) -> Result<WeightVector> {
    if !cohort.has_cost_history() {
        return invalid("partitioned weights need a cost history for every subject");
    }
    per_subject(cohort, ce.lambda, |s| {
        let e = nuisance.propensity(&s.x)?;
        let a = f64::from(s.a);
        let mut dm = 0.0;
        for (j, obs) in interval_quantities(s, grid)?.into_iter().enumerate() {
            if !obs.delta {
                continue;
            }
            let k = nuisance.censor_survivor(s.a, obs.u, &s.x)?;
            if !(k > 0.0 && k.is_finite()) {
                log::warn!("subject {}: dropping interval {j}, censoring survivor is zero at {}", s.id, obs.u);
                continue;
            }
            dm += if augmented {
                let mu1 = nuisance.interval_cost(1, j, &s.x)?;
                let mu0 = nuisance.interval_cost(0, j, &s.x)?;
                aipw_term(a, e, obs.cost, mu1, mu0, k)
            } else {
                a * obs.cost / (e * k) - (1.0 - a) * obs.cost / ((1.0 - e) * k)
            };
        }
        Ok((survival_contrast(nuisance, s, e, augmented)?, dm))
    })
}

/// Partitioned IPW cost weights with the regression-imputed IPW survival part.
pub fn ipw_p_weights<N: Nuisance>(cohort: &Cohort, grid: &PartitionGrid, nuisance: &N, ce: &CeConfig) -> Result<WeightVector> {
    partitioned(cohort, grid, nuisance, ce, false)
}

/// Partitioned AIPW cost weights with the regression-imputed AIPW survival part.
pub fn aipw_p_weights<N: Nuisance>(cohort: &Cohort, grid: &PartitionGrid, nuisance: &N, ce: &CeConfig) -> Result<WeightVector> {
    partitioned(cohort, grid, nuisance, ce, true)
}

/// Dispatches on `method`; partitioned methods need `grid`.
pub fn compute_weights<N: Nuisance>(
    method: WeightMethod,
    cohort: &Cohort,
    grid: Option<&PartitionGrid>,
    nuisance: &N,
    ce: &CeConfig,
) -> Result<WeightVector> {
    match method {
        WeightMethod::RegBased => reg_based_weights(cohort, nuisance, ce),
        WeightMethod::AipwNp => aipw_np_weights(cohort, nuisance, ce),
        WeightMethod::IpwP | WeightMethod::AipwP => {
            let grid = grid.or(cohort.grid.as_ref()).ok_or_else(|| {
                Error::InvalidArgument(format!("{method} weights need a partition grid"))
            })?;
            if method == WeightMethod::IpwP {
                ipw_p_weights(cohort, grid, nuisance, ce)
            } else {
                aipw_p_weights(cohort, grid, nuisance, ce)
            }
        }
    }
}
