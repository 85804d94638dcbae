//! Rule labels over an `(x1, x2)` lattice, the remaining covariates held fixed.

use std::io::Write;

use ceitr_core::error::{Error, Result};
use ceitr_core::nuisance::Nuisance;
use ceitr_learners::{predict_rule, FittedRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCell {
    pub x1: f64,
    pub x2: f64,
    pub label: u8,
}

/// `resolution` evenly spaced points from `lo` to `hi` inclusive.
pub fn axis(range: (f64, f64), resolution: usize) -> Vec<f64> {
    if resolution == 1 {
        return vec![range.0];
    }
    let step = (range.1 - range.0) / (resolution - 1) as f64;
    (0..resolution).map(|k| range.0 + step * k as f64).collect()
}

pub fn column_means(x: &[Vec<f64>]) -> Vec<f64> {
    let p = x.first().map_or(0, Vec::len);
    (0..p).map(|k| x.iter().map(|r| r[k]).sum::<f64>() / x.len() as f64).collect()
}

/// Lattice rows in x1-major order. `fixed_others` is a full covariate vector
/// whose first two entries are replaced by the lattice point.
pub fn boundary_with<F>(labels: F, x1_range: (f64, f64), x2_range: (f64, f64), resolution: usize, fixed_others: &[f64]) -> Result<Vec<BoundaryCell>>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<u8>>,
{
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be at least 1".into()));
    }
    if fixed_others.len() < 2 {
        return Err(Error::InvalidArgument("the lattice needs at least two covariates".into()));
    }
    if !(x1_range.0 <= x1_range.1 && x2_range.0 <= x2_range.1) {
        return Err(Error::InvalidArgument("ranges must be ordered low to high".into()));
    }
    let mut pts = Vec::with_capacity(resolution * resolution);
    for &a in &axis(x1_range, resolution) {
        for &b in &axis(x2_range, resolution) {
            let mut row = fixed_others.to_vec();
            row[0] = a;
            row[1] = b;
            pts.push(row);
        }
    }
    let lab = labels(&pts)?;
    Ok(pts.iter().zip(lab).map(|(r, label)| BoundaryCell { x1: r[0], x2: r[1], label }).collect())
}

pub fn export_boundary_grid(
    rule: &FittedRule,
    x1_range: (f64, f64),
    x2_range: (f64, f64),
    resolution: usize,
    fixed_others: &[f64],
) -> Result<Vec<BoundaryCell>> {
    boundary_with(|x| predict_rule(rule, x), x1_range, x2_range, resolution, fixed_others)
}

/// Labels of `I{lambda (h1 - h0) - (m1 - m0) > 0}` under the given nuisance;
/// with the generating model this is the population-optimal rule.
pub fn contrast_labels<N: Nuisance>(nuisance: &N, lambda: f64, x: &[Vec<f64>]) -> Result<Vec<u8>> {
    x.iter()
        .map(|r| {
            let dt = nuisance.restricted_mean(1, r)? - nuisance.restricted_mean(0, r)?;
            let dm = nuisance.total_cost(1, r)? - nuisance.total_cost(0, r)?;
            Ok(u8::from(lambda * dt - dm > 0.0))
        })
        .collect()
}

pub fn write_boundary_csv<W: Write>(out: W, cells: &[BoundaryCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x1", "x2", "label"])?;
    for c in cells {
        w.write_record([c.x1.to_string(), c.x2.to_string(), c.label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
