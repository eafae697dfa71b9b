//! Event systems of a drop-the-loser trial as sums of rectangle probabilities.
//!
//! Trial rules: at each stage `i < J` the arm with the smallest statistic is
//! dropped; the trial then stops for superiority if every remaining arm has
//! `Z > u_i`. At stage `J` the last arm is rejected if `Z > u_J`. Every event
//! below is a union over drop orders, and within an order the "did not stop
//! at stage i" condition is split into disjoint rectangles by the chain
//! `Z_{s1} <= u`, `Z_{s1} > u, Z_{s2} <= u`, ... over the surviving arms.
//!
//! Drop orders that are images of each other under a permutation of arms with
//! identical effects (the focal arm fixed) have equal probability, so only
//! one representative per orbit is integrated and it carries the orbit size
//! as its weight.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{build_moment_problem, StatCoord};
use crate::design::{EffectConfig, TrialDesign};
use crate::error::{Error, Result};
use crate::mvn::{mvn_rectangle_prob, OrthantProblem, ProbabilityEstimate};

/// Largest arm count accepted by the enumerators.
pub const MAX_ARMS: usize = 8;
/// Upper limit on the number of rectangles in one event system.
pub const MAX_PROBLEMS: usize = 250_000;

const INF: f64 = f64::INFINITY;

/// Arms dropped at stages `1..=len`, in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DropOrder(pub Vec<usize>);

/// One rectangle `lower < coords <= upper`, standing for `weight` disjoint
/// events of equal probability.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedProblem {
    pub weight: u64,
    /// Representative drop order (the event's own stages only).
    pub order: DropOrder,
    pub coords: Vec<StatCoord>,
    pub problem: OrthantProblem,
}

impl WeightedProblem {
    /// Whether a realized path `z[arm-1][stage-1]` lies in this rectangle.
    pub fn contains(&self, z: &[Vec<f64>]) -> bool {
        self.coords.iter().enumerate().all(|(i, c)| {
            let v = c.evaluate(z);
            v > self.problem.lower()[i] && v <= self.problem.upper()[i]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventProblemSet {
    /// 1-based stage the event refers to.
    pub stage: usize,
    pub problems: Vec<WeightedProblem>,
}

impl EventProblemSet {
    pub fn total_weight(&self) -> u64 {
        self.problems.iter().map(|p| p.weight).sum()
    }

    /// Whether a realized path belongs to any listed event. Only meaningful
    /// when every weight is 1.
    pub fn contains(&self, z: &[Vec<f64>]) -> bool {
        self.problems.iter().any(|p| p.contains(z))
    }
}

/// Integrates every problem of every set so that the combined error of all
/// sets together stays within `target_abs_error`. Returns one estimate per
/// set, summed in enumeration order.
pub fn integrate_sets(sets: &[EventProblemSet], target_abs_error: f64, seed: u64) -> Result<Vec<ProbabilityEstimate>> {
    if !(target_abs_error > 0.0) {
        return Err(Error::InvalidInput(format!(
            "target_abs_error must be positive, got {target_abs_error}"
        )));
    }
    let flat: Vec<(usize, &WeightedProblem)> = sets
        .iter()
        .enumerate()
        .flat_map(|(s, set)| set.problems.iter().map(move |p| (s, p)))
        .collect();
    let weight_norm = flat.iter().map(|(_, p)| (p.weight as f64).powi(2)).sum::<f64>().sqrt();
    let per_problem = if weight_norm > 0.0 { target_abs_error / weight_norm } else { target_abs_error };

    let estimates: Vec<ProbabilityEstimate> = flat
        .par_iter()
        .enumerate()
        .map(|(idx, (_, p))| mvn_rectangle_prob(&p.problem, per_problem, problem_seed(seed, idx)))
        .collect::<Result<_>>()?;

    let mut out = vec![
        ProbabilityEstimate {
            value: 0.0,
            error_bound: 0.0,
            evaluations: 0,
            converged: true,
        };
        sets.len()
    ];
    let mut var = vec![0.0; sets.len()];
    for ((s, p), e) in flat.iter().zip(&estimates) {
        let w = p.weight as f64;
        out[*s].value += w * e.value;
        var[*s] += (w * e.error_bound).powi(2);
        out[*s].evaluations += e.evaluations;
        out[*s].converged &= e.converged;
    }
    for (o, v) in out.iter_mut().zip(var) {
        o.value = o.value.clamp(0.0, 1.0);
        o.error_bound = v.sqrt();
    }
    Ok(out)
}

fn problem_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// PWER of a fixed arm under the global null is `1 - P(Z_{1,j} <= u_j for all j)`.
/// This returns the problem for the complement probability.
pub fn pwer_problem(design: &TrialDesign) -> Result<OrthantProblem> {
    let j = design.stages();
    let coords: Vec<StatCoord> = (1..=j).map(|s| StatCoord::single(1, s)).collect();
    let effects = EffectConfig::global_null(design.arms());
    build_moment_problem(design, &effects, &coords, &vec![-INF; j], design.boundaries())
}

/// Events `Phi_j` under the least favorable configuration with arm 1 focal.
pub fn power_lfc_problems(design: &TrialDesign, theta_prime: f64, theta_zero: f64) -> Result<Vec<EventProblemSet>> {
    let effects = EffectConfig::least_favorable(design.arms(), 1, theta_prime, theta_zero);
    recommendation_problems(design, &effects, 1)
}

/// Events `nu_j` under the global null with arm 1 focal.
#[allow(non_snake_case)]
pub fn global_null_typeI_problems(design: &TrialDesign) -> Result<Vec<EventProblemSet>> {
    rejection_problems(design, &EffectConfig::global_null(design.arms()), 1)
}

/// `Phi_j`: the trial stops at stage `j` and `focal` has the largest
/// statistic among the arms remaining, so it is the one recommended.
pub fn recommendation_problems(
    design: &TrialDesign,
    effects: &EffectConfig,
    focal: usize,
) -> Result<Vec<EventProblemSet>> {
    let ctx = Context::new(design, effects, Some(focal))?;
    let big_j = design.stages();
    let others: Vec<usize> = ctx.arms.iter().copied().filter(|&a| a != focal).collect();
    (1..=big_j)
        .map(|j| {
            if j < big_j {
                ctx.build(j, &others, j, |rem, order, dnf| {
                    let m = order[j - 1];
                    let survivors: Vec<usize> = rem.iter().copied().filter(|&a| a != m).collect();
                    let mut last = drop_at(j, rem, m);
                    last.extend(stop_at(ctx.design, j, &survivors));
                    last.extend(survivors.iter().filter(|&&k| k != focal).map(|&k| positive(StatCoord::diff(focal, k, j))));
                    dnf.and_rect(&last);
                })
            } else {
                ctx.build(j, &others, big_j - 1, |_, _, dnf| {
                    dnf.and_rect(&[above(StatCoord::single(focal, big_j), design.boundary(big_j))]);
                })
            }
        })
        .collect()
}

/// `Psi_j`: the trial stops at stage `j`, for any reason.
pub fn stop_stage_problems(design: &TrialDesign, effects: &EffectConfig) -> Result<Vec<EventProblemSet>> {
    let ctx = Context::new(design, effects, None)?;
    let big_j = design.stages();
    (1..=big_j)
        .map(|j| {
            if j < big_j {
                ctx.build(j, &ctx.arms, j, |rem, order, dnf| {
                    let m = order[j - 1];
                    let survivors: Vec<usize> = rem.iter().copied().filter(|&a| a != m).collect();
                    let mut last = drop_at(j, rem, m);
                    last.extend(stop_at(ctx.design, j, &survivors));
                    dnf.and_rect(&last);
                })
            } else {
                ctx.build(j, &ctx.arms, big_j - 1, |_, _, _| {})
            }
        })
        .collect()
}

/// `nu_j`: `focal` is still in the trial at stage `j`, the trial stops there
/// and `Z_{focal,j} > u_j`. This includes the case where `focal` is itself
/// the arm dropped at `j` while lying above the boundary.
pub fn rejection_problems(design: &TrialDesign, effects: &EffectConfig, focal: usize) -> Result<Vec<EventProblemSet>> {
    let ctx = Context::new(design, effects, Some(focal))?;
    let big_j = design.stages();
    let others: Vec<usize> = ctx.arms.iter().copied().filter(|&a| a != focal).collect();
    (1..=big_j)
        .map(|j| {
            if j < big_j {
                ctx.build(j, &others, j - 1, |rem, _, dnf| {
                    let alternatives: Vec<Rect> = rem
                        .iter()
                        .map(|&d| {
                            let survivors: Vec<usize> = rem.iter().copied().filter(|&a| a != d).collect();
                            let mut r = drop_at(j, rem, d);
                            r.extend(stop_at(ctx.design, j, &survivors));
                            r.push(above(StatCoord::single(focal, j), design.boundary(j)));
                            r
                        })
                        .collect();
                    dnf.and_any(&alternatives);
                })
            } else {
                ctx.build(j, &others, big_j - 1, |_, _, dnf| {
                    dnf.and_rect(&[above(StatCoord::single(focal, big_j), design.boundary(big_j))]);
                })
            }
        })
        .collect()
}

type Constraint = (StatCoord, f64, f64);
type Rect = Vec<Constraint>;

fn above(c: StatCoord, u: f64) -> Constraint {
    (c, u, INF)
}

fn at_most(c: StatCoord, u: f64) -> Constraint {
    (c, -INF, u)
}

fn positive(c: StatCoord) -> Constraint {
    (c, 0.0, INF)
}

/// `m` has the smallest statistic among `remaining` at `stage`.
fn drop_at(stage: usize, remaining: &[usize], m: usize) -> Rect {
    remaining
        .iter()
        .filter(|&&k| k != m)
        .map(|&k| positive(StatCoord::diff(k, m, stage)))
        .collect()
}

/// Every arm in `survivors` is above the boundary.
fn stop_at(design: &TrialDesign, stage: usize, survivors: &[usize]) -> Rect {
    let u = design.boundary(stage);
    survivors.iter().map(|&k| above(StatCoord::single(k, stage), u)).collect()
}

/// Not every survivor is above the boundary, as disjoint rectangles.
fn continue_at(design: &TrialDesign, stage: usize, survivors: &[usize]) -> Vec<Rect> {
    let u = design.boundary(stage);
    (0..survivors.len())
        .map(|t| {
            let mut r: Rect = survivors[..t]
                .iter()
                .map(|&k| above(StatCoord::single(k, stage), u))
                .collect();
            r.push(at_most(StatCoord::single(survivors[t], stage), u));
            r
        })
        .collect()
}

/// A union of disjoint rectangles, kept simplified: coordinates repeated
/// within a rectangle are intersected, empty rectangles are removed.
struct Dnf {
    rects: Vec<Rect>,
}

impl Dnf {
    fn new() -> Self {
        Self { rects: vec![Vec::new()] }
    }

    fn and_rect(&mut self, extra: &[Constraint]) {
        for r in &mut self.rects {
            r.extend_from_slice(extra);
        }
        self.simplify();
    }

    fn and_any(&mut self, alternatives: &[Rect]) {
        let mut out = Vec::with_capacity(self.rects.len() * alternatives.len());
        for r in &self.rects {
            for a in alternatives {
                let mut x = r.clone();
                x.extend_from_slice(a);
                out.push(x);
            }
        }
        self.rects = out;
        self.simplify();
    }

    fn simplify(&mut self) {
        self.rects = std::mem::take(&mut self.rects).into_iter().filter_map(simplify_rect).collect();
    }
}

fn simplify_rect(rect: Rect) -> Option<Rect> {
    let mut out: Rect = Vec::with_capacity(rect.len());
    for (c, lo, hi) in rect {
        match out.iter_mut().find(|(d, _, _)| *d == c) {
            Some(existing) => {
                existing.1 = existing.1.max(lo);
                existing.2 = existing.2.min(hi);
            }
            None => out.push((c, lo, hi)),
        }
    }
    if out.iter().any(|&(_, lo, hi)| lo >= hi) {
        return None;
    }
    out.retain(|&(_, lo, hi)| lo > -INF || hi < INF);
    Some(out)
}

struct Context<'a> {
    design: &'a TrialDesign,
    effects: &'a EffectConfig,
    arms: Vec<usize>,
    /// Symmetry class of each arm (index `arm - 1`).
    class: Vec<usize>,
}

impl<'a> Context<'a> {
    fn new(design: &'a TrialDesign, effects: &'a EffectConfig, focal: Option<usize>) -> Result<Self> {
        let k = design.arms();
        if k > MAX_ARMS {
            return Err(Error::Capacity(format!("{k} arms exceed the enumeration limit of {MAX_ARMS}")));
        }
        effects.check(design)?;
        if let Some(f) = focal {
            if !(1..=k).contains(&f) {
                return Err(Error::InvalidInput(format!("focal arm {f} is not in 1..={k}")));
            }
        }
        // Exact equality of effects defines exchangeable arms; the focal arm
        // is always in a class of its own.
        let mut seen: Vec<u64> = Vec::new();
        let class = (1..=k)
            .map(|a| {
                if Some(a) == focal {
                    return usize::MAX;
                }
                let bits = (effects.delta(a) + 0.0).to_bits();
                match seen.iter().position(|&b| b == bits) {
                    Some(p) => p,
                    None => {
                        seen.push(bits);
                        seen.len() - 1
                    }
                }
            })
            .collect();
        Ok(Self {
            design,
            effects,
            arms: (1..=k).collect(),
            class,
        })
    }

    /// Enumerates drop orders of length `len` from `pool`, collapses them by
    /// symmetry and, for each representative, adds drop-and-continue
    /// conditions at stages `1..min(len, stage - 1)` before calling `last`
    /// with the arms remaining at `stage` and the order.
    fn build<F>(&self, stage: usize, pool: &[usize], len: usize, last: F) -> Result<EventProblemSet>
    where
        F: Fn(&[usize], &[usize], &mut Dnf),
    {
        let orders = orbit_representatives(pool, len, &self.class);
        let mut problems = Vec::new();
        for (order, weight) in orders {
            let mut dnf = Dnf::new();
            let mut remaining = self.arms.clone();
            for i in 1..stage {
                let m = order[i - 1];
                let r = drop_at(i, &remaining, m);
                remaining.retain(|&a| a != m);
                dnf.and_rect(&r);
                dnf.and_any(&continue_at(self.design, i, &remaining));
            }
            last(&remaining, &order, &mut dnf);
            for rect in dnf.rects {
                problems.push(self.to_problem(weight, &order, rect)?);
                if problems.len() > MAX_PROBLEMS {
                    return Err(Error::Capacity(format!(
                        "stage {stage} needs more than {MAX_PROBLEMS} rectangle probabilities"
                    )));
                }
            }
        }
        Ok(EventProblemSet { stage, problems })
    }

    fn to_problem(&self, weight: u64, order: &[usize], rect: Rect) -> Result<WeightedProblem> {
        // An unconstrained rectangle is the sure event; keep one free
        // coordinate so it still forms a valid problem.
        let rect = if rect.is_empty() {
            vec![(StatCoord::single(1, 1), -INF, INF)]
        } else {
            rect
        };
        let coords: Vec<StatCoord> = rect.iter().map(|c| c.0).collect();
        let lower: Vec<f64> = rect.iter().map(|c| c.1).collect();
        let upper: Vec<f64> = rect.iter().map(|c| c.2).collect();
        let problem = build_moment_problem(self.design, self.effects, &coords, &lower, &upper)?;
        Ok(WeightedProblem {
            weight,
            order: DropOrder(order.to_vec()),
            coords,
            problem,
        })
    }
}

/// All injective sequences of length `len` from `pool` in lexicographic
/// order, grouped by the class pattern they trace. Returns the first member
/// of each group with the group size.
fn orbit_representatives(pool: &[usize], len: usize, class: &[usize]) -> Vec<(Vec<usize>, u64)> {
    let mut reps: Vec<(Vec<usize>, u64)> = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut current = Vec::with_capacity(len);
    let mut used = vec![false; pool.len()];
    visit(pool, len, &mut used, &mut current, &mut |order: &[usize]| {
        let key: Vec<usize> = order.iter().map(|&a| class[a - 1]).collect();
        match index.get(&key) {
            Some(&i) => reps[i].1 += 1,
            None => {
                index.insert(key, reps.len());
                reps.push((order.to_vec(), 1));
            }
        }
    });
    reps
}

fn visit(pool: &[usize], len: usize, used: &mut [bool], current: &mut Vec<usize>, emit: &mut dyn FnMut(&[usize])) {
    if current.len() == len {
        emit(current);
        return;
    }
    for i in 0..pool.len() {
        if !used[i] {
            used[i] = true;
            current.push(pool[i]);
            visit(pool, len, used, current, emit);
            current.pop();
            used[i] = false;
        }
    }
}
