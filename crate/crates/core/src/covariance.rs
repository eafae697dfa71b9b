//! Means and correlations of the standardized statistics `Z_{k,j}` and of
//! their pairwise differences `Z_{a,j} - Z_{b,j}`.
//!
//! With equal allocation and `V_{k,j} = sigma^2 (1/n_{k,j} + 1/n_{0,j})`,
//! two statistics at cumulative sizes `n_j` and `n_j*` have correlation
//! `sqrt(min/max)` on the same arm and half that on different arms (the
//! shared control). Differences of two statistics at the same stage have
//! unit variance, so every coordinate built here is already standardized.

use serde::{Deserialize, Serialize};

use crate::design::{EffectConfig, TrialDesign};
use crate::error::{Error, Result};
use crate::mvn::OrthantProblem;

/// One coordinate of an event: a single statistic or a difference of two.
/// Arms and stages are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatCoord {
    Single { arm: usize, stage: usize },
    Difference { arm_a: usize, arm_b: usize, stage: usize },
}

impl StatCoord {
    pub fn single(arm: usize, stage: usize) -> Self {
        StatCoord::Single { arm, stage }
    }

    pub fn diff(arm_a: usize, arm_b: usize, stage: usize) -> Self {
        StatCoord::Difference { arm_a, arm_b, stage }
    }

    pub fn stage(&self) -> usize {
        match *self {
            StatCoord::Single { stage, .. } | StatCoord::Difference { stage, .. } => stage,
        }
    }

    pub fn validate(&self, design: &TrialDesign) -> Result<()> {
        let k = design.arms();
        let in_range = |a: usize| (1..=k).contains(&a);
        let ok = match *self {
            StatCoord::Single { arm, .. } => in_range(arm),
            StatCoord::Difference { arm_a, arm_b, .. } => in_range(arm_a) && in_range(arm_b) && arm_a != arm_b,
        };
        if !ok || !(1..=design.stages()).contains(&self.stage()) {
            return Err(Error::InvalidInput(format!("{self:?} is not valid for a {k}-arm design")));
        }
        Ok(())
    }

    /// Realized value of this coordinate on a path `z[arm-1][stage-1]`.
    pub fn evaluate(&self, z: &[Vec<f64>]) -> f64 {
        match *self {
            StatCoord::Single { arm, stage } => z[arm - 1][stage - 1],
            StatCoord::Difference { arm_a, arm_b, stage } => z[arm_a - 1][stage - 1] - z[arm_b - 1][stage - 1],
        }
    }
}

/// `sqrt(min(n_j, n_j*) / max(n_j, n_j*))` for cumulative sizes at two stages.
fn info_ratio(design: &TrialDesign, stage_a: usize, stage_b: usize) -> f64 {
    let (a, b) = (design.cumulative_n(stage_a), design.cumulative_n(stage_b));
    (a.min(b) / a.max(b)).sqrt()
}

/// Correlation of `Z_{k,j}` and `Z_{k*,j*}`.
pub fn cov_z(design: &TrialDesign, a: StatCoord, b: StatCoord) -> f64 {
    let (StatCoord::Single { arm: ka, stage: ja }, StatCoord::Single { arm: kb, stage: jb }) = (a, b) else {
        panic!("cov_z expects two single-statistic coordinates, got {a:?} and {b:?}");
    };
    let r = info_ratio(design, ja, jb);
    if ka == kb {
        r
    } else {
        0.5 * r
    }
}

/// Correlation of `Z_{k,j}` and `Z_{k1*,j*} - Z_{k2*,j*}`.
pub fn cov_z_diff(design: &TrialDesign, a: StatCoord, b: StatCoord) -> f64 {
    let (StatCoord::Single { arm, stage: ja }, StatCoord::Difference { arm_a, arm_b, stage: jb }) = (a, b) else {
        panic!("cov_z_diff expects a single and a difference coordinate, got {a:?} and {b:?}");
    };
    let r = info_ratio(design, ja, jb);
    if arm == arm_a {
        0.5 * r
    } else if arm == arm_b {
        -0.5 * r
    } else {
        0.0
    }
}

/// Correlation of `Z_{k1,j} - Z_{k2,j}` and `Z_{k1*,j*} - Z_{k2*,j*}`.
pub fn cov_diff_diff(design: &TrialDesign, a: StatCoord, b: StatCoord) -> f64 {
    let (
        StatCoord::Difference { arm_a: k1, arm_b: k2, stage: ja },
        StatCoord::Difference { arm_a: s1, arm_b: s2, stage: jb },
    ) = (a, b)
    else {
        panic!("cov_diff_diff expects two difference coordinates, got {a:?} and {b:?}");
    };
    let r = info_ratio(design, ja, jb);
    if s1 == k1 && s2 == k2 {
        r
    } else if s2 == k1 && s1 == k2 {
        -r
    } else if (s1 == k1) != (s2 == k2) {
        0.5 * r
    } else if (s1 == k2) != (s2 == k1) {
        -0.5 * r
    } else {
        0.0
    }
}

/// Correlation between any two coordinates.
pub fn correlation(design: &TrialDesign, a: StatCoord, b: StatCoord) -> f64 {
    use StatCoord::*;
    match (a, b) {
        (Single { .. }, Single { .. }) => cov_z(design, a, b),
        (Single { .. }, Difference { .. }) => cov_z_diff(design, a, b),
        (Difference { .. }, Single { .. }) => cov_z_diff(design, b, a),
        (Difference { .. }, Difference { .. }) => cov_diff_diff(design, a, b),
    }
}

/// Mean of a coordinate: `delta * sqrt(j n) / (sigma sqrt 2)` for a single
/// statistic and the same with `delta_a - delta_b` for a difference.
pub fn mean_of(design: &TrialDesign, effects: &EffectConfig, c: StatCoord) -> f64 {
    let scale = |stage: usize| design.cumulative_n(stage).sqrt() / (design.sigma() * std::f64::consts::SQRT_2);
    match c {
        StatCoord::Single { arm, stage } => effects.delta(arm) * scale(stage),
        StatCoord::Difference { arm_a, arm_b, stage } => (effects.delta(arm_a) - effects.delta(arm_b)) * scale(stage),
    }
}

/// Assembles the rectangle problem for `lowers[i] < coords[i] <= uppers[i]`.
pub fn build_moment_problem(
    design: &TrialDesign,
    effects: &EffectConfig,
    coords: &[StatCoord],
    lowers: &[f64],
    uppers: &[f64],
) -> Result<OrthantProblem> {
    if coords.is_empty() {
        return Err(Error::InvalidInput("an event needs at least one coordinate".into()));
    }
    if lowers.len() != coords.len() || uppers.len() != coords.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coordinates but {} lower and {} upper limits",
            coords.len(),
            lowers.len(),
            uppers.len()
        )));
    }
    effects.check(design)?;
    for c in coords {
        c.validate(design)?;
    }
    let d = coords.len();
    let mean = coords.iter().map(|&c| mean_of(design, effects, c)).collect();
    let mut corr = vec![0.0; d * d];
    for i in 0..d {
        corr[i * d + i] = 1.0;
        for j in 0..i {
            let r = correlation(design, coords[i], coords[j]);
            corr[i * d + j] = r;
            corr[j * d + i] = r;
        }
    }
    OrthantProblem::from_flat(mean, corr, lowers.to_vec(), uppers.to_vec())
}
