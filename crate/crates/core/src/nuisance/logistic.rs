use serde::{Deserialize, Serialize};

use super::linalg::{dot, NormalEquations};
use super::ModelSpec;
use crate::dgp::expit;
use crate::error::{invalid, Result};

/// Coefficient norm beyond which the fit is treated as separated.
const SEPARATION_NORM: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coef: Vec<f64>,
    pub epsilon: f64,
    pub spec: ModelSpec,
    pub separated: bool,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood after each accepted step, starting from the initial value.
    pub loglik_trace: Vec<f64>,
}

impl LogisticFit {
    /// Unclipped probability.
    pub fn raw(&self, x: &[f64]) -> f64 {
        expit(dot(&self.coef, &self.spec.propensity_row(x)))
    }

    /// Probability clipped to `[eps, 1 - eps]`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.raw(x).clamp(self.epsilon, 1.0 - self.epsilon)
    }
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn loglik(rows: &[Vec<f64>], y: &[u8], beta: &[f64]) -> f64 {
    rows.iter().zip(y).map(|(r, &yi)| {
        let eta = dot(r, beta);
        f64::from(yi) * eta - softplus(eta)
    }).sum()
}

/// Logistic regression of treatment on covariates by damped Newton steps.
pub fn fit_propensity(x: &[Vec<f64>], a: &[u8], spec: &ModelSpec) -> Result<LogisticFit> {
    if x.len() != a.len() || x.is_empty() {
        return invalid("covariates and treatment must be non-empty and of equal length");
    }
    let n1 = a.iter().filter(|&&v| v == 1).count();
    if n1 == 0 || n1 == a.len() {
        return invalid("propensity model needs both treatment arms");
    }
    spec.validate(x[0].len())?;
    let rows: Vec<Vec<f64>> = x.iter().map(|r| spec.propensity_row(r)).collect();
    let dim = rows[0].len();
    let mut beta = vec![0.0; dim];
    let pbar = n1 as f64 / a.len() as f64;
    beta[0] = (pbar / (1.0 - pbar)).ln();
    let mut ll = loglik(&rows, a, &beta);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;

    while iterations < 100 {
        iterations += 1;
        let mut ne = NormalEquations::new(dim);
        for (r, &yi) in rows.iter().zip(a) {
            let p = expit(dot(r, &beta));
            let w = (p * (1.0 - p)).max(1e-12);
            // Newton step as weighted least squares on the working residual
            ne.add(r, w, (f64::from(yi) - p) / w);
        }
        let step = ne.solve()?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let cand_ll = loglik(&rows, a, &cand);
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some((cand, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_ll)) = accepted else {
            converged = true;
            break;
        };
        let max_step = beta.iter().zip(&cand).map(|(b, c)| (b - c).abs()).fold(0.0, f64::max);
        beta = cand;
        ll = cand_ll;
        trace.push(ll);
        if beta.iter().map(|b| b * b).sum::<f64>().sqrt() > SEPARATION_NORM {
            separated = true;
            log::warn!("propensity model looks separated; predictions are clipped to [{0}, {1}]", spec.epsilon, 1.0 - spec.epsilon);
            break;
        }
        if max_step < 1e-8 {
            converged = true;
            break;
        }
    }
    Ok(LogisticFit { coef: beta, epsilon: spec.epsilon, spec: spec.clone(), separated, converged, iterations, loglik_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{assign_treatment, sample_covariates, DgpScenario, EffectModification, HteMode};

    #[test]
    fn symmetric_four_points() {
        let x = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]];
        let a = vec![0, 1, 0, 1];
        let fit = fit_propensity(&x, &a, &ModelSpec::default()).unwrap();
        assert!(fit.coef[0].abs() < 1e-10 && fit.coef[1].abs() < 1e-10);
        assert!((fit.predict(&[3.0]) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn intercept_only_truth() {
        let x = sample_covariates(4000, 3).unwrap();
        let s = DgpScenario {
            treatment: crate::dgp::TreatmentAssignment::Randomized(0.5),
            ..DgpScenario::new(4000, EffectModification::SurvivalAndCost, HteMode::Small, 0.0, 0)
        };
        let a = assign_treatment(&x, &s, 4).unwrap();
        let fit = fit_propensity(&x, &a, &ModelSpec::default()).unwrap();
        let mean_a = a.iter().map(|&v| f64::from(v)).sum::<f64>() / a.len() as f64;
        let mean_e = x.iter().map(|r| fit.predict(r)).sum::<f64>() / x.len() as f64;
        assert!((mean_e - mean_a).abs() < 0.01);
        assert!(fit.converged);
        assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn separation_is_flagged_and_clipped() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 - 9.5]).collect();
        let a: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let fit = fit_propensity(&x, &a, &ModelSpec::default()).unwrap();
        assert!(fit.separated);
        assert_eq!(fit.predict(&[100.0]), 0.99);
        assert_eq!(fit.predict(&[-100.0]), 0.01);
    }

    #[test]
    fn single_arm_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(fit_propensity(&x, &[1, 1], &ModelSpec::default()).is_err());
    }
}
