use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Accumulates `X' W X` and `X' W v` row by row.
pub(crate) struct NormalEquations {
    xtx: DMatrix<f64>,
    xtv: DVector<f64>,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        Self { xtx: DMatrix::zeros(dim, dim), xtv: DVector::zeros(dim) }
    }

    pub fn add(&mut self, row: &[f64], weight: f64, v: f64) {
        let d = row.len();
        for i in 0..d {
            let wi = weight * row[i];
            self.xtv[i] += wi * v;
            for j in 0..=i {
                self.xtx[(i, j)] += wi * row[j];
            }
        }
    }

    /// Solves the symmetric system, falling back to a pseudo-inverse when the
    /// matrix is not positive definite (e.g. a constant column).
    pub fn solve(mut self) -> Result<Vec<f64>> {
        let d = self.xtv.len();
        for i in 0..d {
            for j in 0..i {
                self.xtx[(j, i)] = self.xtx[(i, j)];
            }
        }
        if let Some(ch) = self.xtx.clone().cholesky() {
            return Ok(ch.solve(&self.xtv).iter().copied().collect());
        }
        let svd = self.xtx.svd(true, true);
        let max_sv = svd.singular_values.max();
        let sol = svd
            .solve(&self.xtv, max_sv * 1e-12)
            .map_err(|e| Error::FitFailure(format!("singular normal equations: {e}")))?;
        Ok(sol.iter().copied().collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
