use serde::{Deserialize, Serialize};

use super::survival::{fit_exponential, ExponentialRegression};
use crate::error::{invalid, Result};

/// Which censoring model backs `K_a(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensoringKind {
    /// Arm-stratified product-limit estimator, covariate free.
    #[default]
    ProductLimit,
    /// Exponential regression of the censoring time on covariates and arm.
    Exponential,
}

/// Right-continuous step function starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvivor {
    /// Jump times, strictly increasing.
    pub times: Vec<f64>,
    /// Value from each jump time onwards.
    pub values: Vec<f64>,
}

impl StepSurvivor {
    pub fn constant_one() -> Self {
        Self { times: Vec::new(), values: Vec::new() }
    }

    /// Value at `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Left limit at `t`: only jumps strictly before `t` count.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Product-limit estimate where `is_event[i]` marks the events of interest.
    pub fn product_limit(times: &[f64], is_event: &[bool]) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
        let n = times.len();
        let mut out = Self::constant_one();
        let mut surv = 1.0;
        let mut k = 0;
        while k < n {
            let t = times[order[k]];
            let at_risk = n - k;
            let mut events = 0usize;
            let mut m = k;
            while m < n && times[order[m]] == t {
                events += usize::from(is_event[order[m]]);
                m += 1;
            }
            if events > 0 {
                surv *= 1.0 - events as f64 / at_risk as f64;
                out.times.push(t);
                out.values.push(surv);
            }
            k = m;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CensorModel {
    ProductLimit { arms: [StepSurvivor; 2] },
    Exponential { fit: ExponentialRegression },
}

impl CensorModel {
    /// `K_a(t-)`.
    pub fn survivor(&self, arm: u8, t: f64, x: &[f64]) -> f64 {
        match self {
            Self::ProductLimit { arms } => arms[arm as usize].left_limit(t),
            Self::Exponential { fit } => (-fit.rate(x, arm) * t.max(0.0)).exp(),
        }
    }
}

/// Censoring survivor treating censorings (`delta = 0`) as the events and
/// deaths or horizon completions as censored observations.
pub fn fit_censor_survivor(u: &[f64], delta: &[bool], a: &[u8]) -> Result<CensorModel> {
    if u.len() != delta.len() || u.len() != a.len() {
        return invalid("u, delta and a must have equal length");
    }
    let arms = std::array::from_fn(|arm| {
        let idx: Vec<usize> = (0..u.len()).filter(|&i| a[i] as usize == arm).collect();
        let t: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
        let c: Vec<bool> = idx.iter().map(|&i| !delta[i]).collect();
        StepSurvivor::product_limit(&t, &c)
    });
    Ok(CensorModel::ProductLimit { arms })
}

/// Covariate-adjusted alternative: exponential model for the censoring time.
pub fn fit_censor_exponential(
    x: &[Vec<f64>],
    u: &[f64],
    delta: &[bool],
    a: &[u8],
    spec: &super::ModelSpec,
) -> Result<CensorModel> {
    let censored: Vec<bool> = delta.iter().map(|d| !d).collect();
    if !censored.iter().any(|&c| c) {
        return invalid("exponential censoring model needs at least one censored subject");
    }
    let design = super::ModelSpec { interactions: Some(Vec::new()), misspecified: false, ..spec.clone() };
    let fit = fit_exponential(x, a, u, &censored, &design)?;
    Ok(CensorModel::Exponential { fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_censoring_is_constant_one() {
        let m = fit_censor_survivor(&[1.0, 2.0, 3.0], &[true, true, true], &[0, 1, 1]).unwrap();
        for t in [0.0, 1.5, 100.0] {
            assert_eq!(m.survivor(0, t, &[]), 1.0);
            assert_eq!(m.survivor(1, t, &[]), 1.0);
        }
    }

    #[test]
    fn hand_computed_product_limit() {
        let m = fit_censor_survivor(&[2.0, 3.0, 5.0], &[true, false, true], &[1, 1, 1]).unwrap();
        assert_eq!(m.survivor(1, 2.9, &[]), 1.0);
        assert_eq!(m.survivor(1, 3.0, &[]), 1.0);
        assert_eq!(m.survivor(1, 3.0001, &[]), 0.5);
        assert_eq!(m.survivor(1, 5.0, &[]), 0.5);
        if let CensorModel::ProductLimit { arms } = &m {
            assert_eq!(arms[1].at(3.0), 0.5);
        }
    }

    #[test]
    fn single_mass_point() {
        let m = fit_censor_survivor(&[4.0; 5], &[false; 5], &[0; 5]).unwrap();
        assert_eq!(m.survivor(0, 4.0, &[]), 1.0);
        assert_eq!(m.survivor(0, 4.5, &[]), 0.0);
    }

    #[test]
    fn ties_use_full_risk_set() {
        // death and censoring at the same time: both are at risk
        let m = fit_censor_survivor(&[1.0, 1.0, 2.0, 3.0], &[true, false, true, false], &[0; 4]).unwrap();
        assert!((m.survivor(0, 1.5, &[]) - 0.75).abs() < 1e-15);
        assert_eq!(m.survivor(0, 3.5, &[]), 0.0);
    }
}
