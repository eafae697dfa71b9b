//! Design engine for multi-stage drop-the-loser trials that may stop early
//! for superiority.
//!
//! The analytic side builds every operating characteristic (pairwise error
//! rate, power under the least favorable configuration, type I error under
//! the global null, stop-stage probabilities and expected sample size) as a
//! sum of multivariate normal rectangle probabilities. The [`simulate`]
//! module is an independent Monte Carlo oracle for all of them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod characteristics;
pub mod covariance;
pub mod design;
pub mod endpoint;
pub mod error;
pub mod events;
pub mod mvn;
pub mod normal;
pub mod simulate;

pub use calibrate::{calibrate_boundaries, find_sample_size, obf_shape, BoundaryShape, CalibrationConfig};
pub use characteristics::{
    comparator_multiarm, comparator_separate_trials, expected_sample_size, full_report, power_lfc, pwer,
    type_i_global_null, OperatingCharacteristics,
};
pub use covariance::{build_moment_problem, cov_diff_diff, cov_z, cov_z_diff, mean_of, StatCoord};
pub use design::{EffectConfig, TrialDesign};
pub use endpoint::{binary_to_normal, BinaryEndpointSpec, NormalEffectSpec};
pub use error::{Error, Result};
pub use events::{
    global_null_typeI_problems, power_lfc_problems, pwer_problem, stop_stage_problems, DropOrder, EventProblemSet,
    WeightedProblem,
};
pub use mvn::{mvn_rectangle_prob, standardize, IntegrationOptions, OrthantProblem, ProbabilityEstimate};
pub use simulate::{estimate_characteristics, simulate_trial, SimulationResult, TrialOutcome};
