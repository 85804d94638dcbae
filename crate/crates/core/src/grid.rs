//! Partition of the restriction window `(0, tau]` into subintervals and the
//! per-interval view of a subject's follow-up.

use serde::{Deserialize, Serialize};

use crate::cohort::Subject;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PartitionGrid {
    knots: Vec<f64>,
}

impl PartitionGrid {
    /// Knots must start at exactly 0 and be strictly increasing; the last knot is the horizon.
    pub fn from_knots(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return invalid("a grid needs at least two knots");
        }
        if knots[0] != 0.0 {
            return invalid(format!("first knot must be 0, got {}", knots[0]));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return invalid("knots must be finite");
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("knots must be strictly increasing");
        }
        Ok(Self { knots })
    }

    /// `j` equally spaced intervals on `(0, tau]`.
    pub fn uniform(tau: f64, j: usize) -> Result<Self> {
        if j == 0 {
            return invalid("number of intervals must be at least 1");
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return invalid(format!("tau must be positive, got {tau}"));
        }
        let step = tau / j as f64;
        let mut knots: Vec<f64> = (0..j).map(|i| i as f64 * step).collect();
        knots.push(tau);
        Self::from_knots(knots)
    }

    /// Six-month intervals over `(0, tau]`, rounding the count up when `tau` is not a
    /// multiple of half a year.
    pub fn semiannual(tau: f64) -> Result<Self> {
        Self::uniform(tau, ((2.0 * tau).ceil() as usize).max(1))
    }

    /// Parses a comma-separated knot list such as `0,0.5,1`.
    pub fn parse(s: &str) -> Result<Self> {
        let knots = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("knot {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_knots(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn tau(&self) -> f64 {
        *self.knots.last().expect("grid has knots")
    }

    /// Bounds `(t_j, t_{j+1}]` of interval `j` (zero based).
    pub fn interval(&self, j: usize) -> (f64, f64) {
        (self.knots[j], self.knots[j + 1])
    }

    /// Index of the interval containing `t`, with `t = 0` mapped to the first interval.
    pub fn locate(&self, t: f64) -> usize {
        let j = self.knots.partition_point(|&k| k < t);
        j.saturating_sub(1).min(self.n_intervals() - 1)
    }

    /// Time spent in each interval by someone followed over `(0, t]`.
    pub fn exposure(&self, t: f64) -> Vec<f64> {
        self.knots.windows(2).map(|w| (t.min(w[1]) - w[0]).max(0.0)).collect()
    }

    pub fn to_csv_string(&self) -> String {
        self.knots.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
    }
}

impl TryFrom<Vec<f64>> for PartitionGrid {
    type Error = Error;

    fn try_from(knots: Vec<f64>) -> Result<Self> {
        Self::from_knots(knots)
    }
}

impl From<PartitionGrid> for Vec<f64> {
    fn from(g: PartitionGrid) -> Self {
        g.knots
    }
}

/// Follow-up of one subject restricted to a single interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalObs {
    /// Time truncated at the interval's right endpoint, `min(U, t_{j+1})`.
    pub u: f64,
    /// Whether the subject is fully observed through the interval (or died in or before it).
    pub delta: bool,
    /// Cost accrued inside the interval.
    pub cost: f64,
}

/// Per-interval truncated time, event flag and cost of `subject` on `grid`.
///
/// The event flag of interval `j` is `I{min(T, t_{j+1}) <= C}`: an uncensored
/// subject is observed in every interval, a subject censored at `c` only in the
/// intervals ending at or before `c`.
pub fn interval_quantities(subject: &Subject, grid: &PartitionGrid) -> Result<Vec<IntervalObs>> {
    let history = subject.cost_history.as_ref().ok_or_else(|| {
        Error::InvalidArgument(format!("subject {} has no cost history", subject.id))
    })?;
    if history.len() != grid.n_intervals() {
        return invalid(format!(
            "subject {}: cost history has {} entries but the grid has {} intervals",
            subject.id,
            history.len(),
            grid.n_intervals()
        ));
    }
    Ok(grid
        .knots
        .windows(2)
        .zip(history)
        .map(|(w, &cost)| {
            let right = w[1];
            IntervalObs {
                u: subject.u.min(right),
                delta: subject.delta || right <= subject.u,
                cost,
            }
        })
        .collect())
}
