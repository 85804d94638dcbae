//! TOML configuration with sections `[ce]`, `[dgp]`, `[nuisance]`, `[tree]`,
//! `[forest]` and `[harness]`. Every key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ceitr_core::dgp::{DgpScenario, EffectModification, HteMode, TreatmentAssignment};
use ceitr_core::error::{Error, Result};
use ceitr_core::nuisance::{CensoringKind, GlmOptions, ModelSpec};
use ceitr_core::{CeConfig, PartitionGrid};
use ceitr_learners::{ForestConfig, ImportanceConfig, TreeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeSection {
    pub lambda: f64,
    pub tau: f64,
    pub discount_rate: f64,
}

impl Default for CeSection {
    fn default() -> Self {
        Self { lambda: 50_000.0, tau: 20.0, discount_rate: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpSection {
    pub n: usize,
    pub em_mode: String,
    pub hte_mode: String,
    pub censor_rate: f64,
    /// Fixed treatment probability; unset means the logistic assignment.
    pub randomized: Option<f64>,
    /// Number of equal-width cost intervals on `(0, tau]`.
    pub intervals: usize,
    pub seed: u64,
}

impl Default for DgpSection {
    fn default() -> Self {
        Self {
            n: 1000,
            em_mode: "EM-TM".into(),
            hte_mode: "small".into(),
            censor_rate: 0.0,
            randomized: None,
            intervals: 40,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuisanceSection {
    /// Main-effect columns (0-based); unset uses every covariate.
    pub covariates: Option<Vec<usize>>,
    /// Treatment-interaction columns (0-based).
    pub interactions: Vec<usize>,
    pub treatment_main: bool,
    pub misspecified: bool,
    pub epsilon: f64,
    pub censoring: CensoringKind,
    pub glm_tolerance: f64,
    pub glm_max_iter: usize,
}

impl Default for NuisanceSection {
    fn default() -> Self {
        let spec = ModelSpec::simulation(true);
        Self {
            covariates: None,
            interactions: vec![0, 1],
            treatment_main: spec.treatment_main,
            misspecified: true,
            epsilon: spec.epsilon,
            censoring: spec.censoring,
            glm_tolerance: spec.glm.tolerance,
            glm_max_iter: spec.glm.max_iter,
        }
    }
}

impl NuisanceSection {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            covariates: self.covariates.clone(),
            interactions: Some(self.interactions.clone()),
            treatment_main: self.treatment_main,
            misspecified: self.misspecified,
            epsilon: self.epsilon,
            censoring: self.censoring,
            glm: GlmOptions { tolerance: self.glm_tolerance, max_iter: self.glm_max_iter },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessSection {
    pub seed: Option<u64>,
    pub reps: usize,
    pub methods: Vec<String>,
    pub em_modes: Vec<String>,
    pub hte_modes: Vec<String>,
    pub wtp: Vec<f64>,
    pub censor_rates: Vec<f64>,
    /// Folds for the forest `mtry` search.
    pub mtry_folds: usize,
    /// Folds of the out-of-sample analysis pipeline.
    pub folds: usize,
    pub bootstrap: usize,
    /// Resample a fixed rule's evaluation only, instead of the whole pipeline.
    pub fast_bootstrap: bool,
    /// Trees per forest outside the simulation benchmark.
    pub analysis_trees: usize,
    pub importance_repeats: usize,
    pub cor_threshold: f64,
    pub resolution: usize,
    pub x1_range: [f64; 2],
    pub x2_range: [f64; 2],
}

impl Default for HarnessSection {
    fn default() -> Self {
        Self {
            seed: None,
            reps: 50,
            methods: vec!["all".into()],
            em_modes: vec!["EM-TM".into(), "EM-T".into()],
            hte_modes: vec!["small".into(), "large".into()],
            wtp: vec![50_000.0, 100_000.0],
            censor_rates: vec![0.0, 0.2, 0.5, 0.7],
            mtry_folds: 10,
            folds: 10,
            bootstrap: 1000,
            fast_bootstrap: false,
            analysis_trees: 500,
            importance_repeats: 1,
            cor_threshold: 0.2,
            resolution: 101,
            x1_range: [-4.0, 4.0],
            x2_range: [-4.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub ce: CeSection,
    pub dgp: DgpSection,
    pub nuisance: NuisanceSection,
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub harness: HarnessSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn ce(&self) -> Result<CeConfig> {
        CeConfig::new(self.ce.lambda, self.ce.tau, self.ce.discount_rate)
    }

    pub fn grid(&self) -> Result<PartitionGrid> {
        PartitionGrid::uniform(self.ce.tau, self.dgp.intervals)
    }

    pub fn treatment(&self) -> TreatmentAssignment {
        match self.dgp.randomized {
            Some(p) => TreatmentAssignment::Randomized(p),
            None => TreatmentAssignment::Observational,
        }
    }

    pub fn scenario(&self) -> Result<DgpScenario> {
        let mut s = DgpScenario::new(
            self.dgp.n,
            EffectModification::parse(&self.dgp.em_mode)?,
            HteMode::parse(&self.dgp.hte_mode)?,
            self.dgp.censor_rate,
            self.dgp.seed,
        );
        s.tau = self.ce.tau;
        s.treatment = self.treatment();
        s.validate()?;
        Ok(s)
    }

    pub fn importance(&self, seed: u64) -> ImportanceConfig {
        ImportanceConfig {
            cor_threshold: self.harness.cor_threshold,
            conditional: true,
            repeats: self.harness.importance_repeats,
            seed,
        }
    }
}
