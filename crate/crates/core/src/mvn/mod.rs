//! Rectangle probabilities `P(lower < Z <= upper)` for multivariate normal
//! vectors with unit variances.
//!
//! The integral is mapped to the unit cube by the separation-of-variables
//! transform (with Genz–Bretz reordering) and evaluated with a randomly
//! shifted Kronecker rule. Independent shifts give an unbiased error
//! estimate; points are added until the estimated 3-sigma error reaches the
//! requested target or the evaluation cap is hit.

mod factor;
mod lattice;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Multiplier applied to the standard error of the randomization means.
const ERROR_FACTOR: f64 = 3.0;
const INITIAL_POINTS: u64 = 256;
const SYMMETRY_TOL: f64 = 1e-12;

/// Default target for integrals on the calibration path.
pub const CALIBRATION_TOL: f64 = 1e-6;
/// Default target for reported probabilities.
pub const REPORTING_TOL: f64 = 1e-5;

/// One multivariate normal rectangle probability: mean vector, correlation
/// matrix and integration limits, all in standardized-statistic units.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthantProblem {
    mean: Vec<f64>,
    corr: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl OrthantProblem {
    /// Validates and builds a problem. `corr` is given row by row.
    pub fn new(mean: Vec<f64>, corr: Vec<Vec<f64>>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if corr.len() != d || corr.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "mean has {d} entries but correlation matrix is not {d} x {d}"
            )));
        }
        let flat: Vec<f64> = corr.into_iter().flatten().collect();
        Self::from_flat(mean, flat, lower, upper)
    }

    pub(crate) fn from_flat(mean: Vec<f64>, corr: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidInput("problem has no coordinates".into()));
        }
        if corr.len() != d * d || lower.len() != d || upper.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "dimension {d}: corr has {} entries, lower {}, upper {}",
                corr.len(),
                lower.len(),
                upper.len()
            )));
        }
        for i in 0..d {
            if !mean[i].is_finite() {
                return Err(Error::InvalidInput(format!("mean[{i}] is not finite")));
            }
            if (corr[i * d + i] - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidInput(format!("corr[{i}][{i}] = {} is not 1", corr[i * d + i])));
            }
            for j in 0..i {
                let (a, b) = (corr[i * d + j], corr[j * d + i]);
                if !a.is_finite() || (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidInput(format!("corr is not symmetric at ({i}, {j})")));
                }
            }
            if lower[i].is_nan() || upper[i].is_nan() || lower[i] >= upper[i] {
                return Err(Error::InvalidInput(format!(
                    "degenerate limits at coordinate {i}: ({}, {}]",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { mean, corr, lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn corr(&self, i: usize, j: usize) -> f64 {
        self.corr[i * self.dim() + j]
    }

    /// Correlation matrix row by row.
    pub fn corr_rows(&self) -> Vec<Vec<f64>> {
        self.corr.chunks(self.dim()).map(<[f64]>::to_vec).collect()
    }

    /// Applies the same permutation to every coordinate-indexed field.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidInput("not a permutation".into()));
        }
        let pick = |v: &[f64]| perm.iter().map(|&p| v[p]).collect::<Vec<_>>();
        let corr = perm
            .iter()
            .flat_map(|&i| perm.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.corr[i * d + j])
            .collect();
        Ok(Self {
            mean: pick(&self.mean),
            corr,
            lower: pick(&self.lower),
            upper: pick(&self.upper),
        })
    }
}

/// Converts a problem with an arbitrary covariance matrix to unit-variance
/// form by scaling each coordinate by its standard deviation.
pub fn standardize(mean: &[f64], cov: &[Vec<f64>], lower: &[f64], upper: &[f64]) -> Result<OrthantProblem> {
    let d = mean.len();
    if cov.len() != d || cov.iter().any(|r| r.len() != d) || lower.len() != d || upper.len() != d {
        return Err(Error::DimensionMismatch(format!("inconsistent dimensions for a {d}-variate problem")));
    }
    let sd: Vec<f64> = (0..d)
        .map(|i| {
            let v = cov[i][i];
            if v > 0.0 && v.is_finite() {
                Ok(v.sqrt())
            } else {
                Err(Error::InvalidInput(format!("covariance diagonal entry {i} is {v}, not positive")))
            }
        })
        .collect::<Result<_>>()?;
    let mut corr = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            corr[i * d + j] = if i == j { 1.0 } else { cov[i][j] / (sd[i] * sd[j]) };
        }
    }
    let scale = |v: &[f64]| v.iter().zip(&sd).map(|(x, s)| x / s).collect::<Vec<_>>();
    OrthantProblem::from_flat(scale(mean), corr, scale(lower), scale(upper))
}

/// Result of one integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    /// Estimated 3-sigma integration error.
    pub error_bound: f64,
    /// Integrand evaluations spent.
    pub evaluations: u64,
    pub converged: bool,
}

impl ProbabilityEstimate {
    pub(crate) fn exact(value: f64) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            error_bound: 0.0,
            evaluations: 1,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub target_abs_error: f64,
    pub seed: u64,
    /// Number of independent random shifts used for the error estimate.
    pub randomizations: usize,
    pub max_evaluations: u64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            target_abs_error: REPORTING_TOL,
            seed: 0,
            randomizations: 12,
            max_evaluations: 1 << 25,
        }
    }
}

impl IntegrationOptions {
    pub fn with_target(target_abs_error: f64, seed: u64) -> Self {
        Self {
            target_abs_error,
            seed,
            ..Self::default()
        }
    }
}

/// `P(lower < Z <= upper)` to within `target_abs_error`, deterministic in
/// `(problem, target_abs_error, seed)`.
pub fn mvn_rectangle_prob(problem: &OrthantProblem, target_abs_error: f64, seed: u64) -> Result<ProbabilityEstimate> {
    mvn_rectangle_prob_with(problem, &IntegrationOptions::with_target(target_abs_error, seed))
}

pub fn mvn_rectangle_prob_with(problem: &OrthantProblem, opts: &IntegrationOptions) -> Result<ProbabilityEstimate> {
    if !(opts.target_abs_error > 0.0) {
        return Err(Error::InvalidInput(format!(
            "target_abs_error must be positive, got {}",
            opts.target_abs_error
        )));
    }
    if opts.randomizations < 2 {
        return Err(Error::InvalidInput("at least two randomizations are needed".into()));
    }

    // Centre the limits and drop coordinates that are unconstrained.
    let d = problem.dim();
    let keep: Vec<usize> = (0..d)
        .filter(|&i| problem.lower[i] != f64::NEG_INFINITY || problem.upper[i] != f64::INFINITY)
        .collect();
    if keep.is_empty() {
        return Ok(ProbabilityEstimate::exact(1.0));
    }
    let lower: Vec<f64> = keep.iter().map(|&i| problem.lower[i] - problem.mean[i]).collect();
    let upper: Vec<f64> = keep.iter().map(|&i| problem.upper[i] - problem.mean[i]).collect();
    let corr: Vec<f64> = keep
        .iter()
        .flat_map(|&i| keep.iter().map(move |&j| i * d + j))
        .map(|ij| problem.corr[ij])
        .collect();

    let fact = factor::factorize(&corr, &lower, &upper)
        .map_err(|e| match e {
            Error::NotPositiveSemidefinite { index, residual } => Error::NotPositiveSemidefinite {
                index: keep[index],
                residual,
            },
            other => other,
        })?;
    let rank = fact.rank();
    if rank == 1 {
        return Ok(ProbabilityEstimate::exact(fact.integrand(&[], &mut [0.0])));
    }
    let dims = rank - 1;
    if dims > lattice::MAX_DIM {
        return Err(Error::Capacity(format!(
            "integration rank {rank} exceeds the supported maximum {}",
            lattice::MAX_DIM + 1
        )));
    }

    let generator = lattice::generator(dims);
    let shifts: Vec<Vec<f64>> = (0..opts.randomizations)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(s as u64);
            (0..dims).map(|_| rng.random::<f64>()).collect()
        })
        .collect();

    let mut sums = vec![0.0; opts.randomizations];
    let mut count: u64 = 0;
    let mut batch = INITIAL_POINTS;
    let reps = opts.randomizations as f64;
    loop {
        let start = count;
        let partial: Vec<f64> = shifts
            .par_iter()
            .map(|shift| {
                let mut x = vec![0.0; dims];
                let mut y = vec![0.0; rank];
                let mut acc = 0.0;
                for i in start..start + batch {
                    lattice::point(i + 1, &generator, shift, &mut x);
                    let v = fact.integrand(&x, &mut y);
                    x.iter_mut().for_each(|t| *t = 1.0 - *t);
                    acc += 0.5 * (v + fact.integrand(&x, &mut y));
                }
                acc
            })
            .collect();
        for (s, p) in sums.iter_mut().zip(partial) {
            *s += p;
        }
        count += batch;

        let means: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();
        let value = means.iter().sum::<f64>() / reps;
        let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (reps - 1.0);
        let error = ERROR_FACTOR * (var / reps).sqrt();
        let evaluations = 2 * count * opts.randomizations as u64;
        let converged = error <= opts.target_abs_error;
        if converged || evaluations >= opts.max_evaluations {
            let value = value.clamp(0.0, 1.0);
            return Ok(ProbabilityEstimate {
                value,
                error_bound: error.min(value).min(1.0 - value),
                evaluations,
                converged,
            });
        }
        batch = count;
    }
}
