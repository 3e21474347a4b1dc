//! Sample-constrained treatment-effect experimental designs.
//!
//! * [`ite`]: leverage-score sampling for individual treatment effects.
//! * [`gsw`]: the Gram-Schmidt walk balancing design and the Horvitz-Thompson estimator.
//! * [`ate`]: recursive balancing for the average treatment effect under a budget.
//! * [`data`]: synthetic instances and CSV persistence.
//! * [`experiments`]: the Monte Carlo harness.

pub mod ate;
pub mod data;
pub mod error;
pub mod experiments;
pub mod gsw;
pub mod ite;
pub mod linalg;
pub mod oracle;

pub use ate::{AteEstimate, AteMethod, RecursiveDesign};
pub use data::{Dataset, SyntheticSpec};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, ExperimentOutput, SummaryRow, TrialRecord};
pub use gsw::{Assignment, GswParams};
pub use ite::{IteEstimate, PlanInputs, SampleSets, SamplingPlan};
pub use linalg::{CovariateMatrix, LeverageProfile, SmoothedMatrix, SvdFactors};
pub use oracle::{Arm, OutcomeOracle, PotentialOutcomes};
