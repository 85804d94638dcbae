use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Cost-effectiveness settings: willingness-to-pay per life-year, restriction
/// horizon in years and an annual cost discount rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeConfig {
    pub lambda: f64,
    pub tau: f64,
    #[serde(default)]
    pub discount_rate: f64,
}

impl CeConfig {
    pub fn new(lambda: f64, tau: f64, discount_rate: f64) -> Result<Self> {
        let cfg = Self { lambda, tau, discount_rate };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return invalid(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return invalid(format!("tau must be positive, got {}", self.tau));
        }
        if !(0.0..1.0).contains(&self.discount_rate) {
            return invalid(format!("discount_rate must be in [0, 1), got {}", self.discount_rate));
        }
        Ok(())
    }

    /// Continuous-time discount intensity equivalent to the annual rate.
    pub fn discount_intensity(&self) -> f64 {
        (1.0 + self.discount_rate).ln()
    }
}

impl Default for CeConfig {
    fn default() -> Self {
        Self { lambda: 50_000.0, tau: 20.0, discount_rate: 0.0 }
    }
}
