//! Synthetic cohorts with full counterfactuals.
//!
//! Five covariates: `X1, X2 ~ N(1, var 2)` are the effect modifiers, `X3..X5 ~ N(0, 1)`.
//! Treatment follows `logit P(A=1) = 0.5 X1 + 0.5 X2 + 0.9 X3`. Survival is
//! exponential with rate `h0 * exp(X b_T - (X1, X2) g_T a)`; both arms share one
//! uniform draw per subject. Costs are an initial lump, an ongoing annual rate
//! and a death lump, each `Gamma(kappa, s * theta_a)` with scales 1, 0.6, 0.2
//! and a shared standard-gamma draw across arms. Censoring is `5 + Exp(c0)` with
//! `c0` calibrated by bisection to a target censoring fraction.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, PotentialOutcomes, Subject};
use crate::config::CeConfig;
use crate::error::{invalid, Error, Result};
use crate::grid::PartitionGrid;
use crate::nuisance::Nuisance;
use crate::rng;

pub const N_COVARIATES: usize = 5;
/// Minimum follow-up guaranteed to every subject, in years.
pub const MIN_FOLLOW_UP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EffectModification {
    /// Effect modification on survival and cost.
    #[serde(rename = "EM-TM")]
    SurvivalAndCost,
    /// Effect modification on survival only.
    #[serde(rename = "EM-T")]
    SurvivalOnly,
}

impl EffectModification {
    pub fn label(self) -> &'static str {
        match self {
            Self::SurvivalAndCost => "EM-TM",
            Self::SurvivalOnly => "EM-T",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EM-TM" | "TM" => Ok(Self::SurvivalAndCost),
            "EM-T" | "T" => Ok(Self::SurvivalOnly),
            other => Err(Error::Parse(format!("unknown effect-modification mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HteMode {
    Small,
    Large,
}

impl HteMode {
    /// Interaction coefficients on `(X1, X2)` in the log hazard.
    pub fn gamma_t(self) -> [f64; 2] {
        match self {
            Self::Small => [2.0, 1.5],
            Self::Large => [2.5, 2.0],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Small => "small",
            Self::Large => "large",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "small" | "s" => Ok(Self::Small),
            "large" | "l" => Ok(Self::Large),
            other => Err(Error::Parse(format!("unknown HTE mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "p")]
pub enum TreatmentAssignment {
    /// Logistic in `(X1, X2, X3)`.
    Observational,
    /// Bernoulli with a fixed probability.
    Randomized(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpScenario {
    pub n: usize,
    pub em_mode: EffectModification,
    pub hte_mode: HteMode,
    pub beta_t: [f64; N_COVARIATES],
    pub beta_m: [f64; N_COVARIATES],
    pub gamma_m: f64,
    pub kappa: f64,
    pub baseline_hazard: f64,
    pub censor_target: f64,
    pub tau: f64,
    pub cost_multiplier: f64,
    pub treatment: TreatmentAssignment,
    pub seed: u64,
}

impl DgpScenario {
    pub fn new(n: usize, em_mode: EffectModification, hte_mode: HteMode, censor_target: f64, seed: u64) -> Self {
        Self {
            n,
            em_mode,
            hte_mode,
            beta_t: [0.8, 0.8, 0.3, 0.3, 0.3],
            beta_m: [0.8, 0.8, 0.3, 0.3, 0.3],
            gamma_m: 0.03,
            kappa: 2.5,
            baseline_hazard: 0.1,
            censor_target,
            tau: 20.0,
            cost_multiplier: 1000.0,
            treatment: TreatmentAssignment::Observational,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("n must be at least 1");
        }
        if !(0.0..1.0).contains(&self.censor_target) {
            return invalid(format!("censor_target must be in [0, 1), got {}", self.censor_target));
        }
        if !(self.kappa > 0.0) {
            return invalid("kappa must be positive");
        }
        if !(self.baseline_hazard > 0.0) || !(self.tau > 0.0) || !(self.cost_multiplier > 0.0) {
            return invalid("baseline hazard, tau and cost multiplier must be positive");
        }
        if let TreatmentAssignment::Randomized(p) = self.treatment {
            if !(p > 0.0 && p < 1.0) {
                return invalid(format!("randomisation probability must be in (0, 1), got {p}"));
            }
        }
        Ok(())
    }

    /// Survival hazard under `arm` at covariates `x`.
    pub fn hazard(&self, x: &[f64], arm: u8) -> f64 {
        let main: f64 = x.iter().zip(&self.beta_t).map(|(v, b)| v * b).sum();
        let g = self.hte_mode.gamma_t();
        let inter = if arm == 1 { g[0] * x[0] + g[1] * x[1] } else { 0.0 };
        self.baseline_hazard * (main - inter).exp()
    }

    /// Gamma scale `theta_a` of the cost components.
    pub fn cost_scale(&self, x: &[f64], arm: u8) -> f64 {
        let main: f64 = x.iter().zip(&self.beta_m).map(|(v, b)| v * b).sum();
        let inter = match (arm, self.em_mode) {
            (0, _) => 0.0,
            (_, EffectModification::SurvivalAndCost) => self.gamma_m * (x[0] + x[1]),
            (_, EffectModification::SurvivalOnly) => 2.0 * self.gamma_m,
        };
        (main + inter).exp()
    }

    pub fn propensity(&self, x: &[f64]) -> f64 {
        match self.treatment {
            TreatmentAssignment::Observational => expit(0.5 * x[0] + 0.5 * x[1] + 0.9 * x[2]),
            TreatmentAssignment::Randomized(p) => p,
        }
    }
}

pub fn expit(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `n x 5` covariate matrix.
pub fn sample_covariates(n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let mut r = rng::rng(seed);
    let sd12 = 2f64.sqrt();
    Ok((0..n)
        .map(|_| {
            let z: [f64; N_COVARIATES] = std::array::from_fn(|_| r.sample(StandardNormal));
            vec![1.0 + sd12 * z[0], 1.0 + sd12 * z[1], z[2], z[3], z[4]]
        })
        .collect())
}

pub fn assign_treatment(x: &[Vec<f64>], scenario: &DgpScenario, seed: u64) -> Result<Vec<u8>> {
    if let Some(row) = x.iter().find(|r| r.len() != N_COVARIATES) {
        return invalid(format!("expected {N_COVARIATES} covariates, got {}", row.len()));
    }
    let mut r = rng::rng(seed);
    Ok(x.iter().map(|row| u8::from(r.random::<f64>() < scenario.propensity(row))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSurvival {
    pub t_star: [f64; 2],
    /// `min(T*, tau)` per arm.
    pub t: [f64; 2],
}

impl PotentialSurvival {
    /// `I{T*(a) <= tau}`.
    pub fn dies_by_horizon(&self, arm: u8, tau: f64) -> bool {
        self.t_star[arm as usize] <= tau
    }
}

pub fn sample_potential_survival(x: &[Vec<f64>], scenario: &DgpScenario, seed: u64) -> Vec<PotentialSurvival> {
    let mut r = rng::rng(seed);
    x.iter()
        .map(|row| {
            // -ln(U) with a single uniform shared by both arms
            let e: f64 = r.sample(Exp1);
            let t_star = [e / scenario.hazard(row, 0), e / scenario.hazard(row, 1)];
            PotentialSurvival { t_star, t: [t_star[0].min(scenario.tau), t_star[1].min(scenario.tau)] }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Censoring {
    /// Exponential rate of the censoring time beyond the minimum follow-up; 0 means no censoring.
    pub rate: f64,
    pub times: Vec<f64>,
    pub realized_fraction: f64,
}

fn censored_fraction(std_exp: &[f64], t_obs: &[f64], rate: f64) -> f64 {
    let hit = std_exp.iter().zip(t_obs).filter(|(e, t)| MIN_FOLLOW_UP + *e / rate < **t).count();
    hit as f64 / t_obs.len() as f64
}

/// Censoring times `5 + Exp(c0)` with `c0` chosen so that the fraction of subjects with
/// `C < min(T*, tau)` lands within one percentage point of the target.
pub fn calibrate_censoring(scenario: &DgpScenario, t_star_observed: &[f64], seed: u64) -> Result<Censoring> {
    let n = t_star_observed.len();
    if scenario.censor_target == 0.0 {
        return Ok(Censoring { rate: 0.0, times: vec![f64::INFINITY; n], realized_fraction: 0.0 });
    }
    let target = scenario.censor_target;
    let t_obs: Vec<f64> = t_star_observed.iter().map(|t| t.min(scenario.tau)).collect();
    let mut r = rng::rng(seed);
    let std_exp: Vec<f64> = (0..n).map(|_| r.sample(Exp1)).collect();

    let (mut lo, mut hi) = ((1e-8f64).ln(), (1e8f64).ln());
    let f_hi = censored_fraction(&std_exp, &t_obs, hi.exp());
    if f_hi < target - 0.01 - 1e-12 {
        return Err(Error::CalibrationFailure(format!(
            "target {target} unreachable: at most {f_hi:.4} of subjects are followed past {MIN_FOLLOW_UP} years"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let f = censored_fraction(&std_exp, &t_obs, mid.exp());
        if (f - target).abs() <= 0.01 + 1e-12 {
            let rate = mid.exp();
            let times = std_exp.iter().map(|e| MIN_FOLLOW_UP + e / rate).collect();
            return Ok(Censoring { rate, times, realized_fraction: f });
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::CalibrationFailure(format!("bisection did not reach {target} within 100 iterations")))
}

/// `int_a^b exp(-r s) ds`.
fn discounted_length(a: f64, b: f64, r: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if r == 0.0 {
        b - a
    } else {
        ((-r * a).exp() - (-r * b).exp()) / r
    }
}

/// One arm's cost components, already multiplied by the currency scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostDraw {
    pub initial: f64,
    /// Ongoing cost per year alive.
    pub ongoing_rate: f64,
    /// Lump charged at death.
    pub death: f64,
}

impl CostDraw {
    /// Cumulative cost over `(0, t]`, adding the death lump when `died`.
    /// `discount` is a continuous intensity applied to ongoing and death costs.
    pub fn cumulative(&self, t: f64, died: bool, discount: f64) -> f64 {
        let death = if died { self.death * (-discount * t).exp() } else { 0.0 };
        self.initial + self.ongoing_rate * discounted_length(0.0, t, discount) + death
    }

    /// Cost accrued in each interval of `grid` for someone followed over `(0, t]`.
    pub fn allocate(&self, grid: &PartitionGrid, t: f64, died: bool, discount: f64) -> Vec<f64> {
        let mut out: Vec<f64> = grid
            .knots()
            .windows(2)
            .map(|w| self.ongoing_rate * discounted_length(w[0], t.min(w[1]), discount))
            .collect();
        out[0] += self.initial;
        if died {
            out[grid.locate(t)] += self.death * (-discount * t).exp();
        }
        out
    }
}

/// Per subject, cost draws for arms 0 and 1 built from shared standard-gamma variates.
pub fn sample_costs(x: &[Vec<f64>], scenario: &DgpScenario, seed: u64) -> Result<Vec<[CostDraw; 2]>> {
    let mut r = rng::rng(seed);
    let g = Gamma::new(scenario.kappa, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(x.iter()
        .map(|row| {
            let (gi, go, gd) = (g.sample(&mut r), g.sample(&mut r), g.sample(&mut r));
            std::array::from_fn(|arm| {
                let theta = scenario.cost_multiplier * scenario.cost_scale(row, arm as u8);
                CostDraw { initial: gi * theta, ongoing_rate: go * 0.6 * theta, death: gd * 0.2 * theta }
            })
        })
        .collect())
}

/// Everything drawn for one synthetic cohort.
#[derive(Debug, Clone)]
pub struct SimulatedCohort {
    pub cohort: Cohort,
    pub potentials: Vec<PotentialOutcomes>,
    pub censoring_rate: f64,
}

/// Generates the observed cohort, cost histories on `grid` and the counterfactuals.
pub fn assemble_cohort(scenario: &DgpScenario, ce: &CeConfig, grid: &PartitionGrid) -> Result<SimulatedCohort> {
    scenario.validate()?;
    ce.validate()?;
    if (grid.tau() - scenario.tau).abs() > 1e-12 {
        return invalid(format!("grid ends at {} but the horizon is {}", grid.tau(), scenario.tau));
    }
    let tau = scenario.tau;
    let discount = ce.discount_intensity();
    let seed = scenario.seed;
    let x = sample_covariates(scenario.n, rng::derive_seed(seed, 1))?;
    let a = assign_treatment(&x, scenario, rng::derive_seed(seed, 2))?;
    let surv = sample_potential_survival(&x, scenario, rng::derive_seed(seed, 3));
    let costs = sample_costs(&x, scenario, rng::derive_seed(seed, 4))?;
    let t_star_obs: Vec<f64> = surv.iter().zip(&a).map(|(s, &arm)| s.t_star[arm as usize]).collect();
    let cens = calibrate_censoring(scenario, &t_star_obs, rng::derive_seed(seed, 5))?;

    let mut subjects = Vec::with_capacity(scenario.n);
    let mut potentials = Vec::with_capacity(scenario.n);
    for i in 0..scenario.n {
        let s = &surv[i];
        let m: [f64; 2] = std::array::from_fn(|arm| {
            costs[i][arm].cumulative(s.t[arm], s.dies_by_horizon(arm as u8, tau), discount)
        });
        potentials.push(PotentialOutcomes::new(s.t[0], s.t[1], m[0], m[1], ce.lambda));

        let arm = a[i];
        let t_star = s.t_star[arm as usize];
        let c = cens.times[i];
        let u = t_star.min(c).min(tau);
        let delta = t_star.min(tau) <= c;
        let death_observed = t_star <= c.min(tau);
        let draw = &costs[i][arm as usize];
        let history = draw.allocate(grid, u, death_observed, discount);
        let total_cost = history.iter().sum::<f64>();
        subjects.push(Subject {
            id: i as u64 + 1,
            x: x[i].clone(),
            a: arm,
            u,
            delta,
            death_observed,
            total_cost,
            cost_history: Some(history),
        });
    }
    let cohort = Cohort::new(subjects, Some(grid.clone()), tau)?;
    Ok(SimulatedCohort { cohort, potentials, censoring_rate: cens.rate })
}

/// Nuisance functions of the generating process, for oracle comparisons.
#[derive(Debug, Clone)]
pub struct TrueNuisance {
    pub scenario: DgpScenario,
    pub grid: PartitionGrid,
    /// Censoring rate beyond the minimum follow-up (0 = no censoring).
    pub censoring_rate: f64,
    pub discount: f64,
}

impl TrueNuisance {
    pub fn new(scenario: DgpScenario, grid: PartitionGrid, censoring_rate: f64, ce: &CeConfig) -> Self {
        Self { scenario, grid, censoring_rate, discount: ce.discount_intensity() }
    }

    /// `E[int_a^b exp(-d s) dN]` pieces for an exponential survival with rate `h`:
    /// time alive and death probability in `(a, b]`, both discounted.
    fn alive_and_death(&self, h: f64, a: f64, b: f64) -> (f64, f64) {
        let r = h + self.discount;
        let alive = discounted_length(a, b, r);
        (alive, h * alive)
    }
}

impl Nuisance for TrueNuisance {
    fn propensity(&self, x: &[f64]) -> Result<f64> {
        Ok(self.scenario.propensity(x))
    }

    fn censor_survivor(&self, _arm: u8, t: f64, _x: &[f64]) -> Result<f64> {
        if self.censoring_rate == 0.0 || t <= MIN_FOLLOW_UP {
            Ok(1.0)
        } else {
            Ok((-self.censoring_rate * (t - MIN_FOLLOW_UP)).exp())
        }
    }

    fn restricted_mean(&self, arm: u8, x: &[f64]) -> Result<f64> {
        Ok(crate::nuisance::restricted_mean_exponential(self.scenario.hazard(x, arm), self.scenario.tau))
    }

    fn total_cost(&self, arm: u8, x: &[f64]) -> Result<f64> {
        let s = &self.scenario;
        let theta = s.cost_multiplier * s.cost_scale(x, arm) * s.kappa;
        let (alive, death) = self.alive_and_death(s.hazard(x, arm), 0.0, s.tau);
        Ok(theta * (1.0 + 0.6 * alive + 0.2 * death))
    }

    fn interval_cost(&self, arm: u8, j: usize, x: &[f64]) -> Result<f64> {
        if j >= self.grid.n_intervals() {
            return invalid(format!("interval {j} out of range"));
        }
        let s = &self.scenario;
        let theta = s.cost_multiplier * s.cost_scale(x, arm) * s.kappa;
        let (a, b) = self.grid.interval(j);
        let (alive, death) = self.alive_and_death(s.hazard(x, arm), a, b);
        let initial = if j == 0 { 1.0 } else { 0.0 };
        Ok(theta * (initial + 0.6 * alive + 0.2 * death))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(n: usize, cr: f64, seed: u64) -> DgpScenario {
        DgpScenario::new(n, EffectModification::SurvivalAndCost, HteMode::Small, cr, seed)
    }

    fn grid() -> PartitionGrid {
        PartitionGrid::semiannual(20.0).unwrap()
    }

    #[test]
    fn covariate_moments() {
        let n = 100_000;
        let x = sample_covariates(n, 11).unwrap();
        let sds = [2f64.sqrt(), 2f64.sqrt(), 1.0, 1.0, 1.0];
        let means = [1.0, 1.0, 0.0, 0.0, 0.0];
        for k in 0..5 {
            let m = x.iter().map(|r| r[k]).sum::<f64>() / n as f64;
            let se = sds[k] / (n as f64).sqrt();
            assert!((m - means[k]).abs() < 3.0 * se, "column {k}: mean {m}");
        }
        assert_eq!(x, sample_covariates(n, 11).unwrap());
        let one = sample_covariates(1, 5).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].iter().all(|v| v.is_finite()));
        assert!(sample_covariates(0, 1).is_err());
    }

    #[test]
    fn propensity_values() {
        let s = scenario(1, 0.0, 0);
        assert_eq!(s.propensity(&[0.0, 0.0, 0.0, 3.0, -2.0]), 0.5);
        assert!((s.propensity(&[10.0, 10.0, 0.0, 0.0, 0.0]) - 0.9999546).abs() < 1e-6);
    }

    #[test]
    fn treatment_calibration_by_bins() {
        let n = 100_000;
        let s = scenario(n, 0.0, 0);
        let x = sample_covariates(n, 21).unwrap();
        let a = assign_treatment(&x, &s, 22).unwrap();
        let mut bins = vec![(0.0, 0.0, 0usize); 10];
        for (row, &ai) in x.iter().zip(&a) {
            let p = s.propensity(row);
            let b = ((p * 10.0) as usize).min(9);
            bins[b].0 += ai as f64;
            bins[b].1 += p;
            bins[b].2 += 1;
        }
        for (obs, exp, cnt) in bins.into_iter().filter(|b| b.2 > 500) {
            let pbar = exp / cnt as f64;
            let se = (pbar * (1.0 - pbar) / cnt as f64).sqrt();
            assert!((obs / cnt as f64 - pbar).abs() < 3.0 * se + 1e-3);
        }
        assert!(assign_treatment(&[vec![0.0; 3]], &s, 1).is_err());
    }

    #[test]
    fn survival_rates() {
        let s = DgpScenario::new(1, EffectModification::SurvivalAndCost, HteMode::Large, 0.0, 0);
        let x0 = [0.0; 5];
        assert!((s.hazard(&x0, 0) - 0.1).abs() < 1e-15);
        let x = [1.0, 1.0, 0.0, 0.0, 0.0];
        let diff = s.hazard(&x, 1).ln() - s.hazard(&x, 0).ln();
        assert!((diff + 4.5).abs() < 1e-12);

        let n = 200_000;
        let xs = vec![vec![0.0; 5]; n];
        let surv = sample_potential_survival(&xs, &s, 3);
        let mean = surv.iter().map(|p| p.t[0]).sum::<f64>() / n as f64;
        let var = surv.iter().map(|p| (p.t[0] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let truth = 20.0 * (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((mean - truth).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {truth}");
        assert!((truth - 8.6466).abs() < 1e-4);
        let raw = surv.iter().map(|p| p.t_star[0]).sum::<f64>() / n as f64;
        assert!((raw - 10.0).abs() < 3.0 * 10.0 / (n as f64).sqrt());
    }

    #[test]
    fn censoring_calibration() {
        let n = 100_000;
        let s = scenario(n, 0.5, 0);
        let x = sample_covariates(n, 1).unwrap();
        let a = assign_treatment(&x, &s, 2).unwrap();
        let surv = sample_potential_survival(&x, &s, 3);
        let t: Vec<f64> = surv.iter().zip(&a).map(|(p, &ai)| p.t_star[ai as usize]).collect();
        let c = calibrate_censoring(&s, &t, 4).unwrap();
        assert!((0.49..=0.51).contains(&c.realized_fraction));
        assert!(c.times.iter().all(|&ci| ci >= MIN_FOLLOW_UP));
        let recount = c.times.iter().zip(&t).filter(|(ci, ti)| **ci < ti.min(20.0)).count() as f64 / n as f64;
        assert_eq!(recount, c.realized_fraction);

        let none = calibrate_censoring(&scenario(n, 0.0, 0), &t, 4).unwrap();
        assert!(none.times.iter().all(|ci| ci.is_infinite()));

        // nobody lives past 5 years: any positive target is unreachable
        let short = vec![1.0; 100];
        assert!(matches!(calibrate_censoring(&scenario(100, 0.2, 0), &short, 1), Err(Error::CalibrationFailure(_))));
    }

    #[test]
    fn gamma_cost_moments() {
        let n = 100_000;
        let s = scenario(n, 0.0, 0);
        let xs = vec![vec![0.0; 5]; n];
        let draws = sample_costs(&xs, &s, 9).unwrap();
        let v: Vec<f64> = draws.iter().map(|d| d[0].initial / 1000.0).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = (2.5f64).sqrt();
        assert!((mean - 2.5).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn em_t_cost_ratio_is_constant() {
        let s = DgpScenario::new(1, EffectModification::SurvivalOnly, HteMode::Small, 0.0, 0);
        for x in [[0.0; 5], [1.0, -2.0, 0.3, 4.0, -1.0], [3.0, 3.0, 3.0, 3.0, 3.0]] {
            let ratio = s.cost_scale(&x, 1) / s.cost_scale(&x, 0);
            assert!((ratio - 0.06f64.exp()).abs() < 1e-12);
        }
        assert!((0.06f64.exp() - 1.0618).abs() < 1e-4);
    }

    #[test]
    fn allocation_telescopes() {
        let g = grid();
        let d = CostDraw { initial: 10.0, ongoing_rate: 3.0, death: 7.0 };
        for (t, died) in [(0.3, true), (7.25, true), (20.0, false), (12.0, false)] {
            for disc in [0.0, 0.03f64.ln_1p()] {
                let h = d.allocate(&g, t, died, disc);
                let total = d.cumulative(t, died, disc);
                assert!((h.iter().sum::<f64>() - total).abs() < 1e-9 * total);
            }
        }
        let h = d.allocate(&g, 0.3, true, 0.0);
        assert!((h[0] - (10.0 + 0.9 + 7.0)).abs() < 1e-12);
        assert!(h[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn cohort_consistency_without_censoring() {
        let s = scenario(2000, 0.0, 77);
        let ce = CeConfig::default();
        let sim = assemble_cohort(&s, &ce, &grid()).unwrap();
        for (subj, po) in sim.cohort.subjects.iter().zip(&sim.potentials) {
            assert!(subj.delta);
            let t = if subj.treated() { po.t1 } else { po.t0 };
            let m = if subj.treated() { po.m1 } else { po.m0 };
            assert_eq!(subj.u, t);
            assert!((subj.total_cost - m).abs() <= 1e-9 * m);
            let h = subj.cost_history.as_ref().unwrap();
            assert!((h.iter().sum::<f64>() - subj.total_cost).abs() <= 1e-9 * subj.total_cost);
            assert_eq!(po.g_opt, u8::from(po.y1 - po.y0 > 0.0));
        }
    }

    #[test]
    fn observed_time_matches_potentials_under_censoring() {
        let s = scenario(3000, 0.5, 8);
        let sim = assemble_cohort(&s, &CeConfig::default(), &grid()).unwrap();
        let frac = sim.cohort.censoring_fraction();
        assert!((0.49..=0.51).contains(&frac), "{frac}");
        for (subj, po) in sim.cohort.subjects.iter().zip(&sim.potentials) {
            let t = if subj.treated() { po.t1 } else { po.t0 };
            assert!(subj.u <= t);
            if subj.delta {
                assert_eq!(subj.u, t);
            } else {
                assert!(subj.u >= MIN_FOLLOW_UP);
            }
        }
    }

    #[test]
    fn seed_determinism() {
        let s = scenario(300, 0.2, 5);
        let a = assemble_cohort(&s, &CeConfig::default(), &grid()).unwrap();
        let b = assemble_cohort(&s, &CeConfig::default(), &grid()).unwrap();
        assert_eq!(a.cohort, b.cohort);
        assert_eq!(a.potentials, b.potentials);
        let c = assemble_cohort(&DgpScenario { seed: 6, ..s }, &CeConfig::default(), &grid()).unwrap();
        assert_ne!(a.cohort, c.cohort);
    }

    #[test]
    fn true_interval_costs_sum_to_total() {
        let s = scenario(1, 0.0, 0);
        let tn = TrueNuisance::new(s, grid(), 0.0, &CeConfig::default());
        for x in [[0.0; 5], [1.0, 2.0, -1.0, 0.0, 0.5]] {
            for arm in 0..2u8 {
                let sum: f64 = (0..40).map(|j| tn.interval_cost(arm, j, &x).unwrap()).sum();
                let tot = tn.total_cost(arm, &x).unwrap();
                assert!((sum - tot).abs() < 1e-9 * tot);
            }
        }
    }
}
