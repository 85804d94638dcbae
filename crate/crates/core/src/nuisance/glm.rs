use serde::{Deserialize, Serialize};

use super::linalg::{dot, NormalEquations};
use super::ModelSpec;
use crate::error::{invalid, Error, Result};

fn default_tolerance() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmOptions {
    /// Relative change of the gamma deviance objective.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self { tolerance: default_tolerance(), max_iter: default_max_iter() }
    }
}

/// Gamma GLM with log link, mean structure only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaGlm {
    pub beta: Vec<f64>,
    pub spec: ModelSpec,
    pub converged: bool,
    pub iterations: usize,
}

impl GammaGlm {
    pub fn linear_predictor(&self, x: &[f64], arm: u8) -> f64 {
        dot(&self.beta, &self.spec.outcome_row(x, arm))
    }

    pub fn predict(&self, x: &[f64], arm: u8) -> f64 {
        self.linear_predictor(x, arm).exp()
    }

    /// Fits `E[y | x, a]` on the outcome design of `spec`.
    pub fn fit(x: &[Vec<f64>], a: &[u8], y: &[f64], spec: &ModelSpec) -> Result<Self> {
        if x.is_empty() || x.len() != a.len() || x.len() != y.len() {
            return invalid("gamma GLM inputs must be non-empty and of equal length");
        }
        spec.validate(x[0].len())?;
        let rows: Vec<Vec<f64>> = x.iter().zip(a).map(|(r, &ai)| spec.outcome_row(r, ai)).collect();
        let (beta, converged, iterations) = irls(&rows, y, &spec.glm)?;
        if !converged {
            log::warn!("gamma GLM stopped after {iterations} iterations without converging");
        }
        Ok(Self { beta, spec: spec.clone(), converged, iterations })
    }
}

/// `sum(log mu + y / mu)`, the gamma negative log-likelihood up to dispersion.
fn objective(rows: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    rows.iter().zip(y).map(|(r, &yi)| {
        let eta = dot(r, beta);
        eta + yi * (-eta).exp()
    }).sum()
}

pub(crate) fn irls(rows: &[Vec<f64>], y: &[f64], opts: &GlmOptions) -> Result<(Vec<f64>, bool, usize)> {
    if y.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return invalid("costs must be finite and non-negative");
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if mean <= 0.0 {
        return Err(Error::FitFailure("gamma GLM needs a positive mean outcome".into()));
    }
    let dim = rows[0].len();
    let mut beta = vec![0.0; dim];
    beta[0] = mean.ln();
    let mut q = objective(rows, y, &beta);
    for it in 1..=opts.max_iter {
        let mut ne = NormalEquations::new(dim);
        for (r, &yi) in rows.iter().zip(y) {
            let eta = dot(r, &beta);
            let mu = eta.exp();
            // working weight is 1 for the gamma family with log link
            ne.add(r, 1.0, (yi - mu) / mu);
        }
        let step = ne.solve()?;
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cq = objective(rows, y, &cand);
            if cq.is_finite() && cq <= q + 1e-12 * q.abs().max(1.0) {
                next = Some((cand, cq));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cq)) = next else {
            return Ok((beta, true, it));
        };
        let rel = (q - cq).abs() / q.abs().max(1e-300);
        let max_step = step.iter().fold(0.0f64, |m, s| m.max((t * s).abs()));
        beta = cand;
        q = cq;
        if rel < opts.tolerance && max_step < 1e-10 {
            return Ok((beta, true, it));
        }
    }
    if beta.iter().all(|b| b.is_finite()) {
        Ok((beta, false, opts.max_iter))
    } else {
        Err(Error::FitFailure("gamma GLM diverged".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma, Normal};

    #[test]
    fn constant_cost_intercept_only() {
        let spec = ModelSpec { covariates: Some(vec![]), interactions: Some(vec![]), treatment_main: false, ..ModelSpec::default() };
        let x = vec![vec![0.3]; 7];
        let fit = GammaGlm::fit(&x, &[0, 1, 0, 1, 1, 0, 0], &[1234.5; 7], &spec).unwrap();
        assert!((fit.predict(&[9.0], 1) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn score_equations_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let nrm = Normal::new(0.0, 1.0).unwrap();
        let g = Gamma::new(2.5, 1.0).unwrap();
        let n = 2000;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![nrm.sample(&mut rng), nrm.sample(&mut rng)]).collect();
        let a: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        let y: Vec<f64> = x.iter().zip(&a).map(|(r, &ai)| {
            1000.0 * (0.3 * r[0] - 0.2 * r[1] + 0.4 * f64::from(ai)).exp() * g.sample(&mut rng)
        }).collect();
        let spec = ModelSpec::default();
        let fit = GammaGlm::fit(&x, &a, &y, &spec).unwrap();
        assert!(fit.converged);
        let mut score = vec![0.0; fit.beta.len()];
        for ((r, &ai), &yi) in x.iter().zip(&a).zip(&y) {
            let row = spec.outcome_row(r, ai);
            let mu = fit.predict(r, ai);
            for (s, v) in score.iter_mut().zip(&row) {
                *s += (yi / mu - 1.0) * v;
            }
        }
        assert!(score.iter().all(|s| s.abs() < 1e-6), "{score:?}");
        assert!((fit.beta[1] - 0.3).abs() < 0.06);
        assert!((fit.beta[3] - 0.4).abs() < 0.1);
    }

    #[test]
    fn negative_cost_rejected() {
        let spec = ModelSpec::default();
        assert!(matches!(
            GammaGlm::fit(&[vec![0.0], vec![1.0]], &[0, 1], &[1.0, -1.0], &spec),
            Err(Error::InvalidArgument(_))
        ));
    }
}
