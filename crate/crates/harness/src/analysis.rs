//! Out-of-sample rule estimation on an external cohort: cross-fitted labels,
//! an AIPW estimate of the rule value, bootstrap intervals and importance.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use ceitr_core::error::{Error, Result};
use ceitr_core::nuisance::{ModelSpec, Nuisance};
use ceitr_core::rng::{derive_seed, stream};
use ceitr_core::{CeConfig, Cohort};
use ceitr_learners::{conditional_importance, cv_folds, fit_forest_auto, predict_rule, split_fold, ForestConfig, Importance, ImportanceConfig};

use crate::metrics::empirical_quantile;
use crate::method::MethodSpec;
use crate::pipeline::{check_method_inputs, fit_cohort_nuisance, method_weights, train_rule, LearnerSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub method: MethodSpec,
    pub ce: CeConfig,
    pub spec: ModelSpec,
    pub learners: LearnerSettings,
    pub folds: usize,
    pub bootstrap: usize,
    pub fast_bootstrap: bool,
    pub seed: u64,
    /// `None` skips the importance table.
    pub importance: Option<ImportanceConfig>,
}

/// Per-subject terms of the AIPW value of `labels`:
/// `I{A=g} Y delta / (e_g K) - (I{A=g} - e_g) Q_g / e_g`, where `Y = lambda U - M`
/// is the observed NMB, `e_g` the propensity of the recommended arm, `K` the
/// censoring survivor at `U-` and `Q_g` the regression NMB under `g`.
pub fn value_contributions<N: Nuisance>(cohort: &Cohort, nuisance: &N, ce: &CeConfig, labels: &[u8]) -> Result<Vec<f64>> {
    if labels.len() != cohort.len() {
        return Err(Error::InvalidArgument(format!("{} labels for {} subjects", labels.len(), cohort.len())));
    }
    cohort
        .subjects
        .iter()
        .zip(labels)
        .map(|(s, &g)| {
            let e = nuisance.propensity(&s.x)?;
            let e_g = if g == 1 { e } else { 1.0 - e };
            let q = ce.lambda * nuisance.restricted_mean(g, &s.x)? - nuisance.total_cost(g, &s.x)?;
            let follows = f64::from(u8::from(s.a == g));
            let mut ipw = 0.0;
            if s.a == g && s.delta {
                let k = nuisance.censor_survivor(s.a, s.u, &s.x)?;
                if !(k > 0.0) {
                    return Err(Error::DegenerateWeight(format!("subject {}: censoring survivor {k} at {}", s.id, s.u)));
                }
                ipw = (ce.lambda * s.u - s.total_cost) / (e_g * k);
            }
            Ok(ipw - (follows - e_g) * q / e_g)
        })
        .collect()
}

pub fn aipw_value<N: Nuisance>(cohort: &Cohort, nuisance: &N, ce: &CeConfig, labels: &[u8]) -> Result<f64> {
    let c = value_contributions(cohort, nuisance, ce, labels)?;
    Ok(c.iter().sum::<f64>() / c.len() as f64)
}

/// Labels from rules trained with each fold held out.
pub fn cross_fitted_labels(cohort: &Cohort, settings: &AnalysisSettings, seed: u64) -> Result<Vec<u8>> {
    let n = cohort.len();
    if settings.folds < 2 {
        return Err(Error::InvalidArgument("at least two folds are needed".into()));
    }
    let k = settings.folds.min(n);
    let fold = cv_folds(n, k, derive_seed(seed, 1));
    let per_fold: Vec<Result<(Vec<usize>, Vec<u8>)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = split_fold(&fold, f);
            let rule = train_rule(
                settings.method,
                &cohort.select(&train),
                &settings.ce,
                &settings.spec,
                &settings.learners,
                derive_seed(seed, 10 + f as u64),
            )?;
            let x = cohort.select(&test).covariates();
            Ok((test, predict_rule(&rule, &x)?))
        })
        .collect();
    let mut labels = vec![0u8; n];
    for r in per_fold {
        let (test, lab) = r?;
        for (i, l) in test.into_iter().zip(lab) {
            labels[i] = l;
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub proportion_treated: f64,
    pub rule_value: f64,
    pub treat_all: f64,
    pub treat_none: f64,
}

impl Estimates {
    pub const NAMES: [&'static str; 4] = ["proportion_treated", "rule_value", "treat_all_value", "treat_none_value"];

    pub fn as_array(&self) -> [f64; 4] {
        [self.proportion_treated, self.rule_value, self.treat_all, self.treat_none]
    }

    fn from_parts(labels: &[u8], psi: &[Vec<f64>; 3], idx: &[usize]) -> Self {
        let n = idx.len() as f64;
        let mean = |v: &[f64]| idx.iter().map(|&i| v[i]).sum::<f64>() / n;
        Self {
            proportion_treated: idx.iter().map(|&i| f64::from(labels[i])).sum::<f64>() / n,
            rule_value: mean(&psi[0]),
            treat_all: mean(&psi[1]),
            treat_none: mean(&psi[2]),
        }
    }
}

struct PointFit {
    labels: Vec<u8>,
    psi: [Vec<f64>; 3],
}

fn point_fit(cohort: &Cohort, settings: &AnalysisSettings, seed: u64) -> Result<PointFit> {
    let labels = cross_fitted_labels(cohort, settings, seed)?;
    let nuisance = fit_cohort_nuisance(cohort, &settings.ce, &settings.spec)?;
    let n = cohort.len();
    let psi = [
        value_contributions(cohort, &nuisance, &settings.ce, &labels)?,
        value_contributions(cohort, &nuisance, &settings.ce, &vec![1; n])?,
        value_contributions(cohort, &nuisance, &settings.ce, &vec![0; n])?,
    ];
    Ok(PointFit { labels, psi })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// 2.5th and 97.5th percentiles of each statistic across resamples.
pub fn percentile_intervals(draws: &[[f64; 4]]) -> Option<[Interval; 4]> {
    if draws.is_empty() {
        return None;
    }
    Some(std::array::from_fn(|k| {
        let mut v: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        v.sort_by(f64::total_cmp);
        Interval { lower: empirical_quantile(&v, 0.025), upper: empirical_quantile(&v, 0.975) }
    }))
}

fn resample(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = stream(seed, b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Subjects at `idx` with fresh sequential ids, so repeats stay distinct.
fn resampled_cohort(cohort: &Cohort, idx: &[usize]) -> Cohort {
    let mut c = cohort.select(idx);
    for (k, s) in c.subjects.iter_mut().enumerate() {
        s.id = k as u64 + 1;
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub method: MethodSpec,
    pub n: usize,
    pub estimates: Estimates,
    pub intervals: Option<[Interval; 4]>,
    pub bootstrap_completed: usize,
    pub bootstrap_failures: usize,
    /// Out-of-fold label per subject, in cohort order.
    pub labels: Vec<u8>,
    pub ids: Vec<u64>,
    pub importance: Option<Importance>,
}

/// Conditional importance of a forest fit to the method's weights on the whole cohort.
pub fn cohort_importance(
    cohort: &Cohort,
    method: MethodSpec,
    ce: &CeConfig,
    spec: &ModelSpec,
    learners: &LearnerSettings,
    cfg: &ImportanceConfig,
) -> Result<Importance> {
    check_method_inputs(method, cohort)?;
    let nuisance = fit_cohort_nuisance(cohort, ce, spec)?;
    let w = method_weights(method, cohort, &nuisance, ce)?;
    let x = cohort.covariates();
    let fcfg = ForestConfig { seed: derive_seed(cfg.seed, 1), ..learners.forest.clone() };
    let forest = fit_forest_auto(&x, &w.z, &w.abs_w, &fcfg, learners.mtry_folds)?;
    conditional_importance(&forest, &x, &w.z, &w.abs_w, cfg)
}

pub fn analyze_external(cohort: &Cohort, settings: &AnalysisSettings) -> Result<AnalysisReport> {
    check_method_inputs(settings.method, cohort)?;
    let n = cohort.len();
    let fit = point_fit(cohort, settings, settings.seed)?;
    let all: Vec<usize> = (0..n).collect();
    let estimates = Estimates::from_parts(&fit.labels, &fit.psi, &all);

    let boot_seed = derive_seed(settings.seed, 2);
    let draws: Vec<Result<[f64; 4]>> = (0..settings.bootstrap)
        .into_par_iter()
        .map(|b| {
            let idx = resample(n, boot_seed, b);
            if settings.fast_bootstrap {
                Ok(Estimates::from_parts(&fit.labels, &fit.psi, &idx).as_array())
            } else {
                let c = resampled_cohort(cohort, &idx);
                let f = point_fit(&c, settings, derive_seed(boot_seed, 1_000_000 + b as u64))?;
                Ok(Estimates::from_parts(&f.labels, &f.psi, &(0..n).collect::<Vec<_>>()).as_array())
            }
        })
        .collect();
    let mut ok = Vec::new();
    let mut failures = 0;
    for (b, d) in draws.into_iter().enumerate() {
        match d {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::warn!("bootstrap resample {b} failed: {e}");
                failures += 1;
            }
        }
    }
    let importance = match &settings.importance {
        Some(cfg) => Some(cohort_importance(cohort, settings.method, &settings.ce, &settings.spec, &settings.learners, cfg)?),
        None => None,
    };
    Ok(AnalysisReport {
        method: settings.method,
        n,
        estimates,
        intervals: percentile_intervals(&ok),
        bootstrap_completed: ok.len(),
        bootstrap_failures: failures,
        labels: fit.labels,
        ids: cohort.subjects.iter().map(|s| s.id).collect(),
        importance,
    })
}

/// `quantity,estimate,ci_lower,ci_upper` rows, then one row per covariate
/// importance (`importance_x<k>`, mean, mean - 2 se, mean + 2 se).
pub fn write_report_csv<W: Write>(out: W, report: &AnalysisReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quantity", "estimate", "ci_lower", "ci_upper"])?;
    for (k, name) in Estimates::NAMES.iter().enumerate() {
        let (lo, hi) = match &report.intervals {
            Some(ci) => (ci[k].lower.to_string(), ci[k].upper.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([name.to_string(), report.estimates.as_array()[k].to_string(), lo, hi])?;
    }
    if let Some(imp) = &report.importance {
        for (k, (m, se)) in imp.mean.iter().zip(&imp.se).enumerate() {
            w.write_record([format!("importance_x{}", k + 1), m.to_string(), (m - 2.0 * se).to_string(), (m + 2.0 * se).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels_csv<W: Write>(out: W, ids: &[u64], labels: &[u8]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "label"])?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_importance_csv<W: Write>(out: W, imp: &Importance) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variable", "importance", "se"])?;
    for (k, (m, se)) in imp.mean.iter().zip(&imp.se).enumerate() {
        w.write_record([format!("x{}", k + 1), m.to_string(), se.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_text(report: &AnalysisReport) -> String {
    let e = &report.estimates;
    let ci = |k: usize| match &report.intervals {
        Some(c) => format!(" (95% CI {:.1}, {:.1})", c[k].lower, c[k].upper),
        None => String::new(),
    };
    let pct = |k: usize| match &report.intervals {
        Some(c) => format!(" (95% CI {:.1}%, {:.1}%)", 100.0 * c[k].lower, 100.0 * c[k].upper),
        None => String::new(),
    };
    let mut s = format!("method: {}\nsubjects: {}\n", report.method, report.n);
    s += &format!("proportion treated: {:.1}%{}\n", 100.0 * e.proportion_treated, pct(0));
    s += &format!("mean NMB under learned rule: {:.1}{}\n", e.rule_value, ci(1));
    s += &format!("mean NMB treating all: {:.1}{}\n", e.treat_all, ci(2));
    s += &format!("mean NMB treating none: {:.1}{}\n", e.treat_none, ci(3));
    s += &format!("bootstrap resamples: {} completed, {} failed\n", report.bootstrap_completed, report.bootstrap_failures);
    if let Some(imp) = &report.importance {
        let mut order: Vec<usize> = (0..imp.mean.len()).collect();
        order.sort_by(|&a, &b| imp.mean[b].total_cmp(&imp.mean[a]).then(a.cmp(&b)));
        s += "variable importance:\n";
        for k in order {
            s += &format!("  x{}: {:.6} (se {:.6})\n", k + 1, imp.mean[k], imp.se[k]);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ceitr_core::Subject;

    /// Known propensity, no censoring and zero outcome regression.
    struct Flat(f64);

    impl Nuisance for Flat {
        fn propensity(&self, _: &[f64]) -> Result<f64> {
            Ok(self.0)
        }
        fn censor_survivor(&self, _: u8, _: f64, _: &[f64]) -> Result<f64> {
            Ok(1.0)
        }
        fn restricted_mean(&self, _: u8, _: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
        fn total_cost(&self, _: u8, _: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
        fn interval_cost(&self, _: u8, _: usize, _: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
    }

    fn complete(n: usize) -> Cohort {
        let subjects = (0..n)
            .map(|i| Subject {
                id: i as u64 + 1,
                x: vec![i as f64],
                a: (i % 2) as u8,
                u: 1.0 + (i % 7) as f64,
                delta: true,
                death_observed: true,
                total_cost: 1000.0 * (i % 5) as f64,
                cost_history: None,
            })
            .collect();
        Cohort::new(subjects, None, 20.0).unwrap()
    }

    #[test]
    fn treat_all_reduces_to_the_ipw_mean() {
        let c = complete(40);
        let ce = CeConfig::new(50_000.0, 20.0, 0.0).unwrap();
        let v = aipw_value(&c, &Flat(0.5), &ce, &vec![1; 40]).unwrap();
        let ipw = c.subjects.iter().filter(|s| s.a == 1).map(|s| (ce.lambda * s.u - s.total_cost) / 0.5).sum::<f64>() / 40.0;
        assert!((v - ipw).abs() < 1e-9);
        let arm1 = c.subjects.iter().filter(|s| s.a == 1).map(|s| ce.lambda * s.u - s.total_cost).sum::<f64>() / 20.0;
        assert!((v - arm1).abs() < 1e-9);
    }

    #[test]
    fn intervals_are_percentiles() {
        let draws: Vec<[f64; 4]> = (1..=200).map(|k| [k as f64; 4]).collect();
        let ci = percentile_intervals(&draws).unwrap();
        assert_eq!((ci[1].lower, ci[1].upper), (5.0, 195.0));
        assert!(percentile_intervals(&[]).is_none());
    }

    #[test]
    fn resamples_keep_ids_unique() {
        let c = complete(10);
        let r = resampled_cohort(&c, &[0, 0, 3, 3, 3]);
        assert_eq!(r.subjects.iter().map(|s| s.id).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert_eq!(r.subjects[1].u, c.subjects[0].u);
    }
}
