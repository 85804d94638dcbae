//! Simulation benchmark, metrics, decision-boundary export and the
//! external-cohort analysis pipeline behind the `ceitr` tool.

pub mod analysis;
pub mod boundary;
pub mod config;
pub mod method;
pub mod metrics;
pub mod pipeline;
pub mod scenario;

pub use analysis::{aipw_value, analyze_external, AnalysisReport, AnalysisSettings, Estimates};
pub use boundary::{export_boundary_grid, BoundaryCell};
pub use config::Config;
pub use method::{Learner, MethodSpec};
pub use metrics::{classification_accuracy, mean_nmb_under_rule, Summary};
pub use pipeline::{train_rule, LearnerSettings};
pub use scenario::{full_grid, run_benchmark, run_scenario, RunSettings, ScenarioId, ScenarioResult};
