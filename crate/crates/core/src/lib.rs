//! Domain types, synthetic cohorts, nuisance models and NMB classification
//! weights for estimating cost-effective individualized treatment rules.

pub mod cohort;
pub mod config;
pub mod dgp;
pub mod error;
pub mod grid;
pub mod io;
pub mod nuisance;
pub mod rng;
pub mod weights;

pub use cohort::{Cohort, PotentialOutcomes, Subject};
pub use config::CeConfig;
pub use error::{Error, Result};
pub use grid::PartitionGrid;
pub use weights::{WeightMethod, WeightVector};
