use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::PartitionGrid;

/// One row of observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: u64,
    pub x: Vec<f64>,
    /// Treatment arm, 0 or 1.
    pub a: u8,
    /// Observed restricted time `min(T*, C, tau)`.
    pub u: f64,
    /// `I{min(T*, tau) <= C}`; reaching the horizon counts as observed.
    pub delta: bool,
    /// `I{T* <= min(C, tau)}`.
    pub death_observed: bool,
    pub total_cost: f64,
    /// Cost accrued in each interval of the cohort grid.
    pub cost_history: Option<Vec<f64>>,
}

impl Subject {
    pub fn treated(&self) -> bool {
        self.a == 1
    }

    pub fn validate(&self, tau: f64, grid: Option<&PartitionGrid>) -> Result<()> {
        if self.a > 1 {
            return invalid(format!("subject {}: treatment must be 0 or 1, got {}", self.id, self.a));
        }
        if !(0.0..=tau).contains(&self.u) {
            return invalid(format!("subject {}: u = {} outside [0, {tau}]", self.id, self.u));
        }
        if !(self.total_cost >= 0.0) {
            return invalid(format!("subject {}: negative total cost {}", self.id, self.total_cost));
        }
        if self.u >= tau && !self.delta {
            return invalid(format!("subject {}: reached the horizon but delta = 0", self.id));
        }
        if self.death_observed && !self.delta {
            return invalid(format!("subject {}: observed death with delta = 0", self.id));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return invalid(format!("subject {}: non-finite covariate", self.id));
        }
        if let Some(h) = &self.cost_history {
            if let Some(grid) = grid {
                if h.len() != grid.n_intervals() {
                    return invalid(format!(
                        "subject {}: {} interval costs for a {}-interval grid",
                        self.id,
                        h.len(),
                        grid.n_intervals()
                    ));
                }
            }
            if h.iter().any(|c| !(*c >= 0.0)) {
                return invalid(format!("subject {}: negative interval cost", self.id));
            }
            let sum: f64 = h.iter().sum();
            if (sum - self.total_cost).abs() > 1e-9 * self.total_cost.abs().max(1.0) {
                return invalid(format!(
                    "subject {}: interval costs sum to {sum} but total cost is {}",
                    self.id, self.total_cost
                ));
            }
        }
        Ok(())
    }
}

/// A set of subjects sharing covariate dimension and (optionally) a cost grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub subjects: Vec<Subject>,
    pub grid: Option<PartitionGrid>,
}

impl Cohort {
    pub fn new(subjects: Vec<Subject>, grid: Option<PartitionGrid>, tau: f64) -> Result<Self> {
        let cohort = Self { subjects, grid };
        cohort.validate(tau)?;
        Ok(cohort)
    }

    pub fn validate(&self, tau: f64) -> Result<()> {
        if self.subjects.is_empty() {
            return invalid("cohort is empty");
        }
        let p = self.p();
        for s in &self.subjects {
            if s.x.len() != p {
                return invalid(format!("subject {}: {} covariates, expected {p}", s.id, s.x.len()));
            }
            s.validate(tau, self.grid.as_ref())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn p(&self) -> usize {
        self.subjects.first().map_or(0, |s| s.x.len())
    }

    pub fn covariates(&self) -> Vec<Vec<f64>> {
        self.subjects.iter().map(|s| s.x.clone()).collect()
    }

    pub fn has_cost_history(&self) -> bool {
        self.grid.is_some() && self.subjects.iter().all(|s| s.cost_history.is_some())
    }

    /// Cohort made of the subjects at `idx`, in that order (repeats allowed).
    pub fn select(&self, idx: &[usize]) -> Self {
        Self { subjects: idx.iter().map(|&i| self.subjects[i].clone()).collect(), grid: self.grid.clone() }
    }

    pub fn censoring_fraction(&self) -> f64 {
        self.subjects.iter().filter(|s| !s.delta).count() as f64 / self.len() as f64
    }
}

/// Counterfactual outcomes of one simulated subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialOutcomes {
    pub t0: f64,
    pub t1: f64,
    pub m0: f64,
    pub m1: f64,
    pub y0: f64,
    pub y1: f64,
    pub delta_y: f64,
    pub g_opt: u8,
}

impl PotentialOutcomes {
    pub fn new(t0: f64, t1: f64, m0: f64, m1: f64, lambda: f64) -> Self {
        let y0 = lambda * t0 - m0;
        let y1 = lambda * t1 - m1;
        let delta_y = y1 - y0;
        Self { t0, t1, m0, m1, y0, y1, delta_y, g_opt: u8::from(delta_y > 0.0) }
    }

    /// NMB realised when the subject receives `arm`.
    pub fn nmb(&self, arm: u8) -> f64 {
        if arm == 1 {
            self.y1
        } else {
            self.y0
        }
    }
}
