//! CSV formats for cohorts and simulated potential outcomes.
//!
//! Cohort files carry the header `id,a,u,delta,total_cost,x1..xp[,m_1..m_J]`;
//! the interval columns are present only when the cohort has a cost grid.

use std::io::{Read, Write};

use crate::cohort::{Cohort, PotentialOutcomes, Subject};
use crate::error::{Error, Result};
use crate::grid::PartitionGrid;

pub fn write_cohort<W: Write>(out: W, cohort: &Cohort) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = cohort.p();
    let j = if cohort.has_cost_history() { cohort.grid.as_ref().map_or(0, |g| g.n_intervals()) } else { 0 };
    let mut header: Vec<String> = ["id", "a", "u", "delta", "total_cost"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=p).map(|k| format!("x{k}")));
    header.extend((1..=j).map(|k| format!("m_{k}")));
    w.write_record(&header)?;
    for s in &cohort.subjects {
        let mut rec = vec![
            s.id.to_string(),
            s.a.to_string(),
            s.u.to_string(),
            u8::from(s.delta).to_string(),
            s.total_cost.to_string(),
        ];
        rec.extend(s.x.iter().map(|v| v.to_string()));
        if j > 0 {
            rec.extend(s.cost_history.as_ref().expect("checked above").iter().map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str, what: &str, row: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {row}, {what} = {field:?}: {e}")))
}

fn parse_flag(field: &str, what: &str, row: usize) -> Result<u8> {
    match field.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Parse(format!("row {row}, {what} must be 0 or 1, got {other:?}"))),
    }
}

/// Reads a cohort. When interval columns are present a grid with the same
/// number of intervals must be supplied. The death flag is not stored in the
/// file and is reconstructed as `delta && u < tau`.
pub fn read_cohort<R: Read>(input: R, tau: f64, grid: Option<PartitionGrid>) -> Result<Cohort> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let fixed = ["id", "a", "u", "delta", "total_cost"];
    for (k, name) in fixed.iter().enumerate() {
        if header.get(k).map(str::trim) != Some(*name) {
            return Err(Error::Parse(format!("column {} must be {name:?}", k + 1)));
        }
    }
    let mut p = 0;
    let mut j = 0;
    for name in header.iter().skip(fixed.len()).map(str::trim) {
        if j == 0 && name == format!("x{}", p + 1) {
            p += 1;
        } else if name == format!("m_{}", j + 1) {
            j += 1;
        } else {
            return Err(Error::Parse(format!("unexpected column {name:?}")));
        }
    }
    let grid = match (j, grid) {
        (0, g) => g,
        (j, Some(g)) if g.n_intervals() == j => Some(g),
        (j, Some(g)) => {
            return Err(Error::InvalidArgument(format!(
                "file has {j} interval cost columns but the grid has {} intervals",
                g.n_intervals()
            )))
        }
        (j, None) => {
            return Err(Error::InvalidArgument(format!(
                "file has {j} interval cost columns but no grid was given"
            )))
        }
    };
    let mut subjects = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = row + 1;
        let id = rec[0].trim().parse::<u64>().map_err(|e| Error::Parse(format!("row {row}, id: {e}")))?;
        let a = parse_flag(&rec[1], "a", row)?;
        let u = parse_f64(&rec[2], "u", row)?;
        let delta = parse_flag(&rec[3], "delta", row)? == 1;
        let total_cost = parse_f64(&rec[4], "total_cost", row)?;
        let x = (0..p).map(|k| parse_f64(&rec[5 + k], "covariate", row)).collect::<Result<Vec<_>>>()?;
        let cost_history = if j > 0 {
            Some((0..j).map(|k| parse_f64(&rec[5 + p + k], "interval cost", row)).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        subjects.push(Subject { id, x, a, u, delta, death_observed: delta && u < tau, total_cost, cost_history });
    }
    Cohort::new(subjects, grid, tau)
}

pub fn write_potentials<W: Write>(out: W, ids: &[u64], potentials: &[PotentialOutcomes]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "t0", "t1", "m0", "m1", "y0", "y1", "g_opt"])?;
    for (id, po) in ids.iter().zip(potentials) {
        w.write_record([
            id.to_string(),
            po.t0.to_string(),
            po.t1.to_string(),
            po.m0.to_string(),
            po.m1.to_string(),
            po.y0.to_string(),
            po.y1.to_string(),
            po.g_opt.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a potentials file; `y` and the oracle label are recomputed from `lambda`
/// and checked against the stored columns.
pub fn read_potentials<R: Read>(input: R, lambda: f64) -> Result<(Vec<u64>, Vec<PotentialOutcomes>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut ids = Vec::new();
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = row + 1;
        if rec.len() != 8 {
            return Err(Error::Parse(format!("row {row}: expected 8 columns, got {}", rec.len())));
        }
        ids.push(rec[0].trim().parse::<u64>().map_err(|e| Error::Parse(format!("row {row}, id: {e}")))?);
        let f = |k: usize, what: &str| parse_f64(&rec[k], what, row);
        let po = PotentialOutcomes::new(f(1, "t0")?, f(2, "t1")?, f(3, "m0")?, f(4, "m1")?, lambda);
        let stored_y1 = f(6, "y1")?;
        if (stored_y1 - po.y1).abs() > 1e-6 * po.y1.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "row {row}: y1 does not match lambda * t1 - m1 for lambda = {lambda}"
            )));
        }
        out.push(po);
    }
    Ok((ids, out))
}
