//! Monte Carlo simulation of trial paths.
//!
//! Each group (control and every arm) contributes one standard normal
//! increment per stage, the standardized sum of that stage's patients. With
//! cumulative sums `S_{g,j}`, the statistic is
//! `Z_{k,j} = (S_{k,j} - S_{0,j}) / sqrt(2j) + delta_k sqrt(j n) / (sigma sqrt 2)`,
//! which has exactly the correlation structure of the analytic engine. The
//! whole path is drawn for every arm so that the trial rules can be replayed
//! on it.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{mean_of, StatCoord};
use crate::design::{EffectConfig, TrialDesign};
use crate::error::{Error, Result};
use crate::events::DropOrder;

/// Replicates per parallel work unit.
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub stop_stage: usize,
    /// Whether the trial ended with at least one arm declared superior.
    pub superiority: bool,
    /// Arms declared superior: the arms kept at an early stop, or the last
    /// arm if it crosses the final boundary.
    pub recommended_arms: Vec<usize>,
    /// Every arm present at the stopping analysis, including one dropped
    /// there, whose statistic lies above the boundary.
    pub rejected_arms: Vec<usize>,
    /// The recommended arm with the largest statistic.
    pub best_arm: Option<usize>,
    pub drop_order: DropOrder,
    pub total_patients: u64,
}

/// Draws a full path `z[arm-1][stage-1]`.
pub fn simulate_path<R: Rng + ?Sized>(design: &TrialDesign, effects: &EffectConfig, rng: &mut R) -> Vec<Vec<f64>> {
    let (k, big_j) = (design.arms(), design.stages());
    let mut sums = vec![0.0; k + 1];
    let mut z = vec![vec![0.0; big_j]; k];
    for j in 1..=big_j {
        for s in sums.iter_mut() {
            *s += rng.sample::<f64, _>(StandardNormal);
        }
        let scale = (2.0 * j as f64).sqrt();
        for arm in 1..=k {
            z[arm - 1][j - 1] = (sums[arm] - sums[0]) / scale + mean_of(design, effects, StatCoord::single(arm, j));
        }
    }
    z
}

/// Replays the trial rules on a path.
pub fn apply_rules(design: &TrialDesign, z: &[Vec<f64>]) -> TrialOutcome {
    let big_j = design.stages();
    let mut remaining: Vec<usize> = (1..=design.arms()).collect();
    let mut dropped = Vec::new();
    for j in 1..=big_j {
        let u = design.boundary(j);
        let at = |a: usize| z[a - 1][j - 1];
        if j == big_j {
            let last = remaining[0];
            let win = at(last) > u;
            return TrialOutcome {
                stop_stage: j,
                superiority: win,
                recommended_arms: if win { vec![last] } else { Vec::new() },
                rejected_arms: if win { vec![last] } else { Vec::new() },
                best_arm: win.then_some(last),
                drop_order: DropOrder(dropped),
                total_patients: design.patients_at_stop(j),
            };
        }
        // Lowest statistic is dropped; ties go to the lowest arm index.
        let m = remaining
            .iter()
            .copied()
            .fold(None, |best: Option<usize>, a| match best {
                Some(b) if at(b) <= at(a) => Some(b),
                _ => Some(a),
            })
            .expect("at least two arms remain before the final stage");
        let present = remaining.clone();
        remaining.retain(|&a| a != m);
        dropped.push(m);
        if remaining.iter().all(|&a| at(a) > u) {
            let best = remaining
                .iter()
                .copied()
                .fold(None, |best: Option<usize>, a| match best {
                    Some(b) if at(b) >= at(a) => Some(b),
                    _ => Some(a),
                });
            return TrialOutcome {
                stop_stage: j,
                superiority: true,
                recommended_arms: remaining.clone(),
                rejected_arms: present.into_iter().filter(|&a| at(a) > u).collect(),
                best_arm: best,
                drop_order: DropOrder(dropped),
                total_patients: design.patients_at_stop(j),
            };
        }
    }
    unreachable!("the final stage always returns")
}

pub fn simulate_trial<R: Rng + ?Sized>(design: &TrialDesign, effects: &EffectConfig, rng: &mut R) -> TrialOutcome {
    apply_rules(design, &simulate_path(design, effects, rng))
}

/// Generator for replicate `rep`: one ChaCha stream per replicate, so any
/// subset of replicates can be regenerated independently.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Empirical value with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

impl McEstimate {
    fn proportion(count: u64, reps: u64) -> Self {
        let p = count as f64 / reps as f64;
        Self {
            value: p,
            se: (p * (1.0 - p) / reps as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub replicates: u64,
    pub seed: u64,
    pub focal_arm: usize,
    pub estimates: BTreeMap<String, McEstimate>,
    /// Number of replicates stopping at each stage.
    pub stop_counts: Vec<u64>,
}

impl SimulationResult {
    pub fn get(&self, metric: &str) -> Option<McEstimate> {
        self.estimates.get(metric).copied()
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    recommend: Vec<u64>,
    stop: Vec<u64>,
    type_i: u64,
    crossing: u64,
    patients: u128,
    patients_sq: u128,
}

impl Tally {
    fn new(stages: usize) -> Self {
        Self {
            recommend: vec![0; stages],
            stop: vec![0; stages],
            ..Self::default()
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.recommend.iter_mut().zip(other.recommend) {
            *a += b;
        }
        for (a, b) in self.stop.iter_mut().zip(other.stop) {
            *a += b;
        }
        self.type_i += other.type_i;
        self.crossing += other.crossing;
        self.patients += other.patients;
        self.patients_sq += other.patients_sq;
        self
    }
}

/// Simulates `reps` trials. Metrics, all for `focal_arm` where relevant:
///
/// * `power` and `power_stage_j`: the focal arm is the best recommended arm
///   (overall and by stop stage);
/// * `type_i`: the focal arm is among the rejected arms;
/// * `pwer`: the focal arm's statistic crosses its boundary at some stage of
///   the full path, ignoring dropping and stopping;
/// * `stop_stage_j`, `early_stop` and `ess`.
///
/// Replicates are tallied with integer counters, so the result does not
/// depend on the thread schedule.
pub fn estimate_characteristics(
    design: &TrialDesign,
    effects: &EffectConfig,
    reps: u64,
    seed: u64,
    focal_arm: usize,
) -> Result<SimulationResult> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    effects.check(design)?;
    if !(1..=design.arms()).contains(&focal_arm) {
        return Err(Error::InvalidInput(format!(
            "focal arm {focal_arm} is not in 1..={}",
            design.arms()
        )));
    }
    let big_j = design.stages();
    let chunks = reps.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = Tally::new(big_j);
            for rep in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                let mut rng = replicate_rng(seed, rep);
                let z = simulate_path(design, effects, &mut rng);
                let out = apply_rules(design, &z);
                t.stop[out.stop_stage - 1] += 1;
                if out.best_arm == Some(focal_arm) {
                    t.recommend[out.stop_stage - 1] += 1;
                }
                if out.rejected_arms.contains(&focal_arm) {
                    t.type_i += 1;
                }
                if (1..=big_j).any(|j| z[focal_arm - 1][j - 1] > design.boundary(j)) {
                    t.crossing += 1;
                }
                let n = u128::from(out.total_patients);
                t.patients += n;
                t.patients_sq += n * n;
            }
            t
        })
        .reduce(|| Tally::new(big_j), Tally::merge);

    let mut est = BTreeMap::new();
    let total_rec: u64 = tally.recommend.iter().sum();
    est.insert("power".to_string(), McEstimate::proportion(total_rec, reps));
    for j in 1..=big_j {
        est.insert(format!("power_stage_{j}"), McEstimate::proportion(tally.recommend[j - 1], reps));
        est.insert(format!("stop_stage_{j}"), McEstimate::proportion(tally.stop[j - 1], reps));
    }
    let early: u64 = tally.stop[..big_j - 1].iter().sum();
    est.insert("early_stop".to_string(), McEstimate::proportion(early, reps));
    est.insert("type_i".to_string(), McEstimate::proportion(tally.type_i, reps));
    est.insert("pwer".to_string(), McEstimate::proportion(tally.crossing, reps));

    let r = reps as f64;
    let mean = tally.patients as f64 / r;
    let var = if reps > 1 {
        ((tally.patients_sq as f64 - r * mean * mean) / (r - 1.0)).max(0.0)
    } else {
        0.0
    };
    est.insert("ess".to_string(), McEstimate { value: mean, se: (var / r).sqrt() });

    Ok(SimulationResult {
        replicates: reps,
        seed,
        focal_arm,
        estimates: est,
        stop_counts: tally.stop,
    })
}
