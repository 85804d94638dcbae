//! Monte Carlo replications of the simulation design and the scenario grid.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use ceitr_core::dgp::{assemble_cohort, DgpScenario, EffectModification, HteMode, TreatmentAssignment};
use ceitr_core::error::{Error, Result};
use ceitr_core::nuisance::ModelSpec;
use ceitr_core::rng::derive_seed;
use ceitr_core::{CeConfig, PartitionGrid, WeightMethod, WeightVector};
use ceitr_learners::predict_rule;

use crate::metrics::{classification_accuracy, mean_nmb_under_rule, oracle_labels, Summary};
use crate::method::MethodSpec;
use crate::pipeline::{fit_cohort_nuisance, method_weights, train_on_weights, LearnerSettings};

/// One cell of the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioId {
    pub em_mode: EffectModification,
    pub hte_mode: HteMode,
    pub wtp: f64,
    pub censor_rate: f64,
}

impl ScenarioId {
    pub fn new(em_mode: EffectModification, hte_mode: HteMode, wtp: f64, censor_rate: f64) -> Self {
        Self { em_mode, hte_mode, wtp, censor_rate }
    }

    /// Stable per-cell stream index. Cells that differ only in WTP share it,
    /// so both thresholds are evaluated on the same cohorts.
    fn stream(&self) -> u64 {
        let em = matches!(self.em_mode, EffectModification::SurvivalOnly) as u64;
        let hte = matches!(self.hte_mode, HteMode::Large) as u64;
        let cr = (self.censor_rate * 10_000.0).round() as u64;
        (em << 40) | (hte << 32) | cr
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}/{}", self.em_mode.label(), self.hte_mode.label(), self.wtp, self.censor_rate)
    }
}

/// The full grid: effect modification x HTE x WTP x censoring rate.
pub fn scenario_grid(em: &[EffectModification], hte: &[HteMode], wtp: &[f64], cr: &[f64]) -> Vec<ScenarioId> {
    let mut out = Vec::new();
    for &e in em {
        for &h in hte {
            for &w in wtp {
                for &c in cr {
                    out.push(ScenarioId::new(e, h, w, c));
                }
            }
        }
    }
    out
}

pub fn full_grid() -> Vec<ScenarioId> {
    scenario_grid(
        &[EffectModification::SurvivalAndCost, EffectModification::SurvivalOnly],
        &[HteMode::Small, HteMode::Large],
        &[50_000.0, 100_000.0],
        &[0.0, 0.2, 0.5, 0.7],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub n: usize,
    pub reps: usize,
    pub methods: Vec<MethodSpec>,
    pub spec: ModelSpec,
    pub learners: LearnerSettings,
    pub tau: f64,
    pub discount_rate: f64,
    pub intervals: usize,
    pub treatment: TreatmentAssignment,
}

/// Metrics of one method in one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub accuracy: f64,
    pub mean_nmb: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub oracle_nmb: f64,
    pub censoring: f64,
    /// Indexed like `RunSettings::methods`; `Err` holds the failure message.
    pub methods: Vec<std::result::Result<MethodOutcome, String>>,
    /// Mean weight of every weight method computed in this replication.
    pub mean_w: Vec<(WeightMethod, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub accuracy: Summary,
    pub mean_nmb: Summary,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub id: ScenarioId,
    pub n: usize,
    pub reps: usize,
    pub methods: Vec<MethodSummary>,
    pub oracle_nmb: Summary,
    /// Replications lost before any method ran (cohort or nuisance failure).
    pub failed_reps: usize,
    pub records: Vec<RepRecord>,
    /// Wall-clock seconds; not part of the CSV output.
    pub runtime_secs: f64,
}

impl ScenarioResult {
    pub fn method(&self, m: MethodSpec) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m.label())
    }
}

fn run_rep(id: &ScenarioId, s: &RunSettings, rep: usize, seed: u64) -> Result<RepRecord> {
    let ce = CeConfig::new(id.wtp, s.tau, s.discount_rate)?;
    let grid = PartitionGrid::uniform(s.tau, s.intervals)?;
    let mut scen = DgpScenario::new(s.n, id.em_mode, id.hte_mode, id.censor_rate, seed);
    scen.tau = s.tau;
    scen.treatment = s.treatment;
    let sim = assemble_cohort(&scen, &ce, &grid)?;
    let g_opt = oracle_labels(&sim.potentials);
    let oracle_nmb = mean_nmb_under_rule(&sim.potentials, &g_opt)?;
    let nuisance = fit_cohort_nuisance(&sim.cohort, &ce, &s.spec)?;

    let mut weights: HashMap<WeightMethod, std::result::Result<WeightVector, String>> = HashMap::new();
    for m in &s.methods {
        weights
            .entry(m.weight())
            .or_insert_with(|| method_weights(*m, &sim.cohort, &nuisance, &ce).map_err(|e| e.to_string()));
    }
    let x = sim.cohort.covariates();
    let methods = s
        .methods
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let w = weights[&m.weight()].as_ref().map_err(Clone::clone)?;
            let run = || -> Result<MethodOutcome> {
                let rule = train_on_weights(m, &sim.cohort, w, &nuisance, &ce, &s.learners, derive_seed(seed, 100 + k as u64))?;
                let g = predict_rule(&rule, &x)?;
                Ok(MethodOutcome {
                    accuracy: classification_accuracy(&g, &g_opt)?,
                    mean_nmb: mean_nmb_under_rule(&sim.potentials, &g)?,
                })
            };
            run().map_err(|e| e.to_string())
        })
        .collect();
    let mut mean_w: Vec<(WeightMethod, f64)> =
        weights.iter().filter_map(|(m, w)| w.as_ref().ok().map(|w| (*m, w.mean_w()))).collect();
    mean_w.sort_by_key(|(m, _)| WeightMethod::ALL.iter().position(|a| a == m));
    Ok(RepRecord { rep, seed, oracle_nmb, censoring: sim.cohort.censoring_fraction(), methods, mean_w })
}

/// Runs `settings.reps` replications of one cell with seeds derived from `seed`.
pub fn run_scenario(id: &ScenarioId, settings: &RunSettings, seed: u64) -> Result<ScenarioResult> {
    if settings.reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    if settings.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods selected".into()));
    }
    let start = Instant::now();
    let outcomes: Vec<Result<RepRecord>> =
        (0..settings.reps).into_par_iter().map(|r| run_rep(id, settings, r, derive_seed(seed, r as u64))).collect();
    let mut records = Vec::new();
    let mut failed_reps = 0;
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("{}: replication {r} failed: {e}", id.label());
                failed_reps += 1;
            }
        }
    }
    let methods = settings
        .methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let ok: Vec<&MethodOutcome> = records.iter().filter_map(|r| r.methods[k].as_ref().ok()).collect();
            for r in &records {
                if let Err(e) = &r.methods[k] {
                    log::warn!("{}: {m} failed in replication {}: {e}", id.label(), r.rep);
                }
            }
            MethodSummary {
                method: m.label(),
                accuracy: Summary::of(&ok.iter().map(|o| o.accuracy).collect::<Vec<_>>()),
                mean_nmb: Summary::of(&ok.iter().map(|o| o.mean_nmb).collect::<Vec<_>>()),
                failures: failed_reps + records.len() - ok.len(),
            }
        })
        .collect();
    let oracle_nmb = Summary::of(&records.iter().map(|r| r.oracle_nmb).collect::<Vec<_>>());
    Ok(ScenarioResult {
        id: *id,
        n: settings.n,
        reps: settings.reps,
        methods,
        oracle_nmb,
        failed_reps,
        records,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs every cell in order; each cell's seed is derived from `seed` and the cell.
pub fn run_benchmark(cells: &[ScenarioId], settings: &RunSettings, seed: u64) -> Result<Vec<ScenarioResult>> {
    cells
        .iter()
        .map(|id| {
            let r = run_scenario(id, settings, derive_seed(seed, id.stream()))?;
            log::info!("{}: {} replications in {:.1}s", id.label(), r.reps, r.runtime_secs);
            Ok(r)
        })
        .collect()
}

/// One row per (cell, method).
pub fn write_results_csv<W: Write>(out: W, results: &[ScenarioResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "em_mode",
        "hte_mode",
        "wtp",
        "censor_rate",
        "n",
        "reps",
        "method",
        "accuracy_mean",
        "accuracy_sd",
        "nmb_mean",
        "nmb_sd",
        "oracle_nmb_mean",
        "oracle_nmb_sd",
        "completed",
        "failures",
    ])?;
    for r in results {
        for m in &r.methods {
            w.write_record([
                r.id.em_mode.label().to_string(),
                r.id.hte_mode.label().to_string(),
                r.id.wtp.to_string(),
                r.id.censor_rate.to_string(),
                r.n.to_string(),
                r.reps.to_string(),
                m.method.clone(),
                m.accuracy.mean.to_string(),
                m.accuracy.sd.to_string(),
                m.mean_nmb.mean.to_string(),
                m.mean_nmb.sd.to_string(),
                r.oracle_nmb.mean.to_string(),
                r.oracle_nmb.sd.to_string(),
                m.accuracy.n.to_string(),
                m.failures.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
