use serde::{Deserialize, Serialize};

use super::linalg::{dot, NormalEquations};
use super::{restricted_mean_exponential, ModelSpec};
use crate::error::{invalid, Error, Result};

/// Exponential proportional-hazards regression with log-rate `row(x, a)' alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialRegression {
    pub alpha: Vec<f64>,
    pub spec: ModelSpec,
    pub iterations: usize,
}

impl ExponentialRegression {
    pub fn rate(&self, x: &[f64], arm: u8) -> f64 {
        dot(&self.alpha, &self.spec.outcome_row(x, arm)).exp()
    }

    /// `S_a(t | x)`.
    pub fn survivor(&self, arm: u8, t: f64, x: &[f64]) -> f64 {
        (-self.rate(x, arm) * t.max(0.0)).exp()
    }

    /// `h_a(x) = int_0^tau S_a(t | x) dt`.
    pub fn restricted_mean(&self, arm: u8, x: &[f64], tau: f64) -> f64 {
        restricted_mean_exponential(self.rate(x, arm), tau)
    }
}

fn poisson_loglik(rows: &[Vec<f64>], u: &[f64], d: &[bool], beta: &[f64]) -> f64 {
    rows.iter()
        .zip(u)
        .zip(d)
        .map(|((r, &ui), &di)| {
            let eta = dot(r, beta);
            if di { eta - ui * eta.exp() } else { -ui * eta.exp() }
        })
        .sum()
}

/// Maximum likelihood for exposure `u` and event indicators `events`.
pub(crate) fn fit_exponential(
    x: &[Vec<f64>],
    a: &[u8],
    u: &[f64],
    events: &[bool],
    spec: &ModelSpec,
) -> Result<ExponentialRegression> {
    let n = x.len();
    if n == 0 || a.len() != n || u.len() != n || events.len() != n {
        return invalid("survival inputs must be non-empty and of equal length");
    }
    if u.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return invalid("follow-up times must be finite and non-negative");
    }
    spec.validate(x[0].len())?;
    let rows: Vec<Vec<f64>> = x.iter().zip(a).map(|(r, &ai)| spec.outcome_row(r, ai)).collect();
    let dim = rows[0].len();
    let total_events = events.iter().filter(|&&e| e).count() as f64;
    let exposure: f64 = u.iter().sum();
    let mut beta = vec![0.0; dim];
    beta[0] = (total_events / exposure).ln();
    let mut ll = poisson_loglik(&rows, u, events, &beta);

    for it in 1..=100 {
        let mut ne = NormalEquations::new(dim);
        for ((r, &ui), &di) in rows.iter().zip(u).zip(events) {
            let mu = ui * dot(r, &beta).exp();
            let w = mu.max(1e-300);
            ne.add(r, w, (f64::from(u8::from(di)) - mu) / w);
        }
        let step = ne.solve()?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cll = poisson_loglik(&rows, u, events, &cand);
            if cll.is_finite() && cll >= ll - 1e-10 * ll.abs().max(1.0) {
                beta = cand;
                ll = cll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let max_step = step.iter().fold(0.0f64, |m, s| m.max((t * s).abs()));
        if !accepted || max_step < 1e-8 {
            if beta.iter().all(|b| b.is_finite()) {
                return Ok(ExponentialRegression { alpha: beta, spec: spec.clone(), iterations: it });
            }
            break;
        }
    }
    Err(Error::FitFailure("exponential regression did not converge".into()))
}

/// Survival outcome model; deaths observed before the horizon are the events.
pub fn fit_survival_outcome(
    x: &[Vec<f64>],
    a: &[u8],
    u: &[f64],
    death: &[bool],
    spec: &ModelSpec,
) -> Result<ExponentialRegression> {
    for arm in 0..2u8 {
        if !a.iter().zip(death).any(|(&ai, &d)| ai == arm && d) {
            return invalid(format!("survival model needs at least one event in arm {arm}"));
        }
    }
    fit_exponential(x, a, u, death, spec)
}
