use serde::Serialize;

use ceitr_core::error::{Error, Result};
use ceitr_core::PotentialOutcomes;

/// Fraction of subjects whose estimated label matches the optimal one.
pub fn classification_accuracy(g_hat: &[u8], g_opt: &[u8]) -> Result<f64> {
    if g_hat.len() != g_opt.len() {
        return Err(Error::InvalidArgument(format!("{} estimated labels for {} subjects", g_hat.len(), g_opt.len())));
    }
    if g_hat.is_empty() {
        return Err(Error::InvalidArgument("no subjects".into()));
    }
    let hits = g_hat.iter().zip(g_opt).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / g_hat.len() as f64)
}

/// Sample mean of `y1 g + y0 (1 - g)`.
pub fn mean_nmb_under_rule(potentials: &[PotentialOutcomes], g_hat: &[u8]) -> Result<f64> {
    if g_hat.len() != potentials.len() || g_hat.is_empty() {
        return Err(Error::InvalidArgument(format!("{} labels for {} potential outcomes", g_hat.len(), potentials.len())));
    }
    Ok(potentials.iter().zip(g_hat).map(|(p, &g)| p.nmb(g)).sum::<f64>() / g_hat.len() as f64)
}

pub fn oracle_labels(potentials: &[PotentialOutcomes]) -> Vec<u8> {
    potentials.iter().map(|p| p.g_opt).collect()
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd, n }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }
}

/// Type-1 (inverse empirical CDF) quantile of `sorted`.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}
