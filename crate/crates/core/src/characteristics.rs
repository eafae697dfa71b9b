//! Operating characteristics of a design and of the single-stage comparators.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::calibrate::minimal_n;
use crate::covariance::{build_moment_problem, StatCoord};
use crate::design::{EffectConfig, TrialDesign};
use crate::endpoint::NormalEffectSpec;
use crate::error::{Error, Result};
use crate::events::{self, integrate_sets};
use crate::mvn::{mvn_rectangle_prob, ProbabilityEstimate, CALIBRATION_TOL, REPORTING_TOL};
use crate::normal;

/// Seed used when a caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// PWER of a fixed arm with its integration error.
pub fn pwer_estimate(design: &TrialDesign, target_abs_error: f64, seed: u64) -> Result<ProbabilityEstimate> {
    let p = mvn_rectangle_prob(&events::pwer_problem(design)?, target_abs_error, seed)?;
    Ok(ProbabilityEstimate {
        value: 1.0 - p.value,
        ..p
    })
}

pub fn pwer(design: &TrialDesign) -> Result<f64> {
    Ok(pwer_estimate(design, CALIBRATION_TOL, DEFAULT_SEED)?.value)
}

/// Probability that arm 1 is recommended under the least favorable
/// configuration.
pub fn power_lfc_estimate(
    design: &TrialDesign,
    theta_prime: f64,
    theta_zero: f64,
    target_abs_error: f64,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    let sets = events::power_lfc_problems(design, theta_prime, theta_zero)?;
    Ok(sum_estimates(&integrate_sets(&sets, target_abs_error, seed)?))
}

pub fn power_lfc(design: &TrialDesign, theta_prime: f64, theta_zero: f64) -> Result<f64> {
    Ok(power_lfc_estimate(design, theta_prime, theta_zero, REPORTING_TOL, DEFAULT_SEED)?.value)
}

/// Probability that arm 1 is rejected under the global null.
pub fn type_i_global_null_estimate(design: &TrialDesign, target_abs_error: f64, seed: u64) -> Result<ProbabilityEstimate> {
    let sets = events::global_null_typeI_problems(design)?;
    Ok(sum_estimates(&integrate_sets(&sets, target_abs_error, seed)?))
}

pub fn type_i_global_null(design: &TrialDesign) -> Result<f64> {
    Ok(type_i_global_null_estimate(design, REPORTING_TOL, DEFAULT_SEED)?.value)
}

/// `P(trial stops at stage j)` for every stage.
pub fn stop_probabilities(
    design: &TrialDesign,
    effects: &EffectConfig,
    target_abs_error: f64,
    seed: u64,
) -> Result<Vec<ProbabilityEstimate>> {
    integrate_sets(&events::stop_stage_problems(design, effects)?, target_abs_error, seed)
}

/// `sum_j P(stop at j) * N_j`, with the final-stage probability taken as the
/// complement of the earlier ones so that a design without early stopping
/// has an expected size of exactly its maximum.
pub fn ess_from_stop_probs(design: &TrialDesign, stop_probs: &[f64]) -> f64 {
    weighted_total(design, stop_probs, |j| design.patients_at_stop(j))
}

/// Same sum with the per-group accounting of stop totals.
pub fn ess_from_stop_probs_by_group(design: &TrialDesign, stop_probs: &[f64]) -> f64 {
    weighted_total(design, stop_probs, |j| design.patients_at_stop_by_group(j))
}

fn weighted_total(design: &TrialDesign, stop_probs: &[f64], total: impl Fn(usize) -> u64) -> f64 {
    let big_j = design.stages();
    let early: f64 = stop_probs[..big_j - 1].iter().sum();
    let mut ess = (1.0 - early) * total(big_j) as f64;
    for (j, p) in stop_probs[..big_j - 1].iter().enumerate() {
        ess += p * total(j + 1) as f64;
    }
    ess
}

pub fn expected_sample_size(design: &TrialDesign, effects: &EffectConfig) -> Result<f64> {
    let probs = stop_probabilities(design, effects, REPORTING_TOL, DEFAULT_SEED)?;
    let values: Vec<f64> = probs.iter().map(|p| p.value).collect();
    Ok(ess_from_stop_probs(design, &values))
}

fn sum_estimates(parts: &[ProbabilityEstimate]) -> ProbabilityEstimate {
    ProbabilityEstimate {
        value: parts.iter().map(|p| p.value).sum::<f64>().clamp(0.0, 1.0),
        error_bound: parts.iter().map(|p| p.error_bound.powi(2)).sum::<f64>().sqrt(),
        evaluations: parts.iter().map(|p| p.evaluations).sum(),
        converged: parts.iter().all(|p| p.converged),
    }
}

/// Result of a single-stage comparator sample-size calculation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComparatorSize {
    /// Patients per group (each arm and each control).
    pub n_per_group: u32,
    pub max_n: u64,
}

/// Power of the single-look multi-arm design: arm 1 beats the critical value
/// and every other arm.
#[allow(clippy::too_many_arguments)]
pub fn multiarm_power(
    arms: usize,
    n: u32,
    alpha: f64,
    theta_prime: f64,
    theta_zero: f64,
    sigma: f64,
    target_abs_error: f64,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    let c = normal::quantile(1.0 - alpha);
    let design = TrialDesign::new(arms, n, vec![c; arms], alpha, sigma)?;
    let effects = EffectConfig::least_favorable(arms, 1, theta_prime, theta_zero);
    let mut coords = vec![StatCoord::single(1, 1)];
    coords.extend((2..=arms).map(|k| StatCoord::diff(1, k, 1)));
    let mut lower = vec![0.0; arms];
    lower[0] = c;
    let problem = build_moment_problem(&design, &effects, &coords, &lower, &vec![f64::INFINITY; arms])?;
    mvn_rectangle_prob(&problem, target_abs_error, seed)
}

/// Single-look design with `arms` arms sharing one control, each tested at
/// level `alpha`, powered for arm 1 being recommended under the least
/// favorable configuration.
pub fn comparator_multiarm(
    arms: usize,
    alpha: f64,
    power_target: f64,
    theta_prime: f64,
    theta_zero: f64,
    sigma: f64,
) -> Result<ComparatorSize> {
    check_comparator_inputs(arms, alpha, power_target, theta_prime, sigma)?;
    let n = minimal_n(power_target, 1_000_000, 2.0 * REPORTING_TOL, |n| {
        Ok(multiarm_power(arms, n, alpha, theta_prime, theta_zero, sigma, REPORTING_TOL, DEFAULT_SEED)?.value)
    })?;
    Ok(ComparatorSize {
        n_per_group: n,
        max_n: (arms as u64 + 1) * u64::from(n),
    })
}

/// `arms` independent two-arm trials, each with its own control:
/// `n = ceil(2 sigma^2 (z_{1-alpha} + z_{1-beta})^2 / theta'^2)` per group.
pub fn comparator_separate_trials(
    arms: usize,
    alpha: f64,
    power_target: f64,
    theta_prime: f64,
    sigma: f64,
) -> Result<ComparatorSize> {
    check_comparator_inputs(arms, alpha, power_target, theta_prime, sigma)?;
    let z = normal::quantile(1.0 - alpha) + normal::quantile(power_target);
    let exact = 2.0 * sigma * sigma * z * z / (theta_prime * theta_prime);
    let n = exact.ceil();
    if n > f64::from(u32::MAX) {
        return Err(Error::SampleSizeCap {
            cap: u32::MAX,
            target: power_target,
        });
    }
    let n = n.max(1.0) as u32;
    Ok(ComparatorSize {
        n_per_group: n,
        max_n: 2 * arms as u64 * u64::from(n),
    })
}

fn check_comparator_inputs(arms: usize, alpha: f64, power_target: f64, theta_prime: f64, sigma: f64) -> Result<()> {
    if arms == 0 {
        return Err(Error::InvalidInput("comparator needs at least one arm".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(power_target > 0.0 && power_target < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha ({alpha}) and power ({power_target}) must lie in (0, 1)"
        )));
    }
    if !(theta_prime > 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "theta_prime ({theta_prime}) and sigma ({sigma}) must be positive"
        )));
    }
    Ok(())
}

/// Integration settings for [`full_report_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub target_abs_error: f64,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            target_abs_error: REPORTING_TOL,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingCharacteristics {
    pub pwer: f64,
    pub power_lfc: f64,
    pub type_i_global_null: f64,
    /// Expected sample size per named effect configuration.
    pub ess: BTreeMap<String, f64>,
    /// Stop-stage probabilities per named effect configuration.
    pub stop_probs: BTreeMap<String, Vec<f64>>,
    pub max_n: u64,
    /// Largest estimated integration error among the reported probabilities.
    pub max_integration_error: f64,
}

impl OperatingCharacteristics {
    /// `P(stop before the final stage)` for a named configuration.
    pub fn early_stop(&self, name: &str) -> Option<f64> {
        self.stop_probs.get(name).map(|p| p[..p.len() - 1].iter().sum())
    }
}

pub fn full_report(
    design: &TrialDesign,
    endpoint: &NormalEffectSpec,
    configs: &BTreeMap<String, EffectConfig>,
) -> Result<OperatingCharacteristics> {
    full_report_with(design, endpoint, configs, &ReportOptions::default())
}

pub fn full_report_with(
    design: &TrialDesign,
    endpoint: &NormalEffectSpec,
    configs: &BTreeMap<String, EffectConfig>,
    opts: &ReportOptions,
) -> Result<OperatingCharacteristics> {
    let (tol, seed) = (opts.target_abs_error, opts.seed);
    let pwer = pwer_estimate(design, tol.min(CALIBRATION_TOL), seed)?;
    let power = power_lfc_estimate(design, endpoint.theta_prime, endpoint.theta_zero, tol, seed)?;
    let type_i = type_i_global_null_estimate(design, tol, seed)?;
    let mut max_err = pwer.error_bound.max(power.error_bound).max(type_i.error_bound);

    let mut ess = BTreeMap::new();
    let mut stop_probs = BTreeMap::new();
    for (name, effects) in configs {
        let probs = stop_probabilities(design, effects, tol, seed)?;
        max_err = probs.iter().fold(max_err, |m, p| m.max(p.error_bound));
        let values: Vec<f64> = probs.iter().map(|p| p.value).collect();
        ess.insert(name.clone(), ess_from_stop_probs(design, &values));
        stop_probs.insert(name.clone(), values);
    }
    Ok(OperatingCharacteristics {
        pwer: pwer.value,
        power_lfc: power.value,
        type_i_global_null: type_i.value,
        ess,
        stop_probs,
        max_n: design.max_sample_size(),
        max_integration_error: max_err,
    })
}
