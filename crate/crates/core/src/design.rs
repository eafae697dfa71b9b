use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multi-stage drop-the-loser design with equal allocation.
///
/// Every arm still in the trial, and the control, recruits `n_per_stage`
/// patients per stage, so the cumulative size of a group at stage `j` is
/// `j * n_per_stage`. One arm is dropped at each of the first `stages - 1`
/// analyses, hence `stages == arms`. A boundary of `+inf` disables early
/// stopping at that stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDesign")]
pub struct TrialDesign {
    arms: usize,
    n_per_stage: u32,
    #[serde(with = "extended_reals")]
    boundaries: Vec<f64>,
    alpha: f64,
    sigma: f64,
}

#[derive(Deserialize)]
struct RawDesign {
    arms: usize,
    n_per_stage: u32,
    #[serde(with = "extended_reals")]
    boundaries: Vec<f64>,
    alpha: f64,
    sigma: f64,
}

impl TryFrom<RawDesign> for TrialDesign {
    type Error = Error;

    fn try_from(r: RawDesign) -> Result<Self> {
        Self::new(r.arms, r.n_per_stage, r.boundaries, r.alpha, r.sigma)
    }
}

impl TrialDesign {
    pub fn new(arms: usize, n_per_stage: u32, boundaries: Vec<f64>, alpha: f64, sigma: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::InvalidInput("design needs at least one active arm".into()));
        }
        if boundaries.len() != arms {
            return Err(Error::InvalidInput(format!(
                "{arms} arms need {arms} stages but {} boundaries were given",
                boundaries.len()
            )));
        }
        if n_per_stage == 0 {
            return Err(Error::InvalidInput("n_per_stage must be at least 1".into()));
        }
        if let Some((j, u)) = boundaries
            .iter()
            .enumerate()
            .find(|(_, u)| u.is_nan() || **u == f64::NEG_INFINITY)
        {
            return Err(Error::InvalidInput(format!("boundary u_{} = {u} is not allowed", j + 1)));
        }
        if !boundaries[arms - 1].is_finite() {
            return Err(Error::InvalidInput("the final-stage boundary must be finite".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            arms,
            n_per_stage,
            boundaries,
            alpha,
            sigma,
        })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn stages(&self) -> usize {
        self.arms
    }

    pub fn n_per_stage(&self) -> u32 {
        self.n_per_stage
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Boundary at 1-based stage `j`.
    pub fn boundary(&self, stage: usize) -> f64 {
        self.boundaries[stage - 1]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Cumulative patients per group at 1-based stage `j`.
    pub fn cumulative_n(&self, stage: usize) -> f64 {
        stage as f64 * f64::from(self.n_per_stage)
    }

    pub fn with_n_per_stage(&self, n_per_stage: u32) -> Result<Self> {
        Self::new(self.arms, n_per_stage, self.boundaries.clone(), self.alpha, self.sigma)
    }

    pub fn with_boundaries(&self, boundaries: Vec<f64>) -> Result<Self> {
        Self::new(self.arms, self.n_per_stage, boundaries, self.alpha, self.sigma)
    }

    /// Total patients when the trial stops at stage `j`: the arm dropped at
    /// stage `i < j` contributes `i * n`, and the `K - j + 1` arms still
    /// present plus the control contribute `j * n` each.
    pub fn patients_at_stop(&self, stage: usize) -> u64 {
        let n = u64::from(self.n_per_stage);
        let (k, j) = (self.arms as u64, stage as u64);
        let dropped: u64 = (1..j).map(|i| i * n).sum();
        dropped + (k - j + 2) * j * n
    }

    /// Same total written as `sum_{i<j} n_i + (K - j + 1) n_j + n_{0,j}` with
    /// cumulative per-group sizes.
    pub fn patients_at_stop_by_group(&self, stage: usize) -> u64 {
        let n_i = |i: usize| i as u64 * u64::from(self.n_per_stage);
        let dropped: u64 = (1..stage).map(n_i).sum();
        let active = (self.arms - stage + 1) as u64 * n_i(stage);
        let control = n_i(stage);
        dropped + active + control
    }

    /// `sum_j n_j + n_{0,J}`: the size of a trial that runs to the end.
    pub fn max_sample_size(&self) -> u64 {
        self.patients_at_stop(self.stages())
    }
}

/// True effects `delta_1..delta_K` relative to control, on the outcome scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectConfig {
    pub deltas: Vec<f64>,
}

impl EffectConfig {
    pub fn new(deltas: Vec<f64>) -> Self {
        Self { deltas }
    }

    /// All arms share effect `delta`.
    pub fn uniform(arms: usize, delta: f64) -> Self {
        Self::new(vec![delta; arms])
    }

    pub fn global_null(arms: usize) -> Self {
        Self::uniform(arms, 0.0)
    }

    /// Least favorable configuration: `focal` (1-based) at `theta_prime`,
    /// every other arm at `theta_zero`.
    pub fn least_favorable(arms: usize, focal: usize, theta_prime: f64, theta_zero: f64) -> Self {
        let deltas = (1..=arms)
            .map(|k| if k == focal { theta_prime } else { theta_zero })
            .collect();
        Self::new(deltas)
    }

    pub fn delta(&self, arm: usize) -> f64 {
        self.deltas[arm - 1]
    }

    pub(crate) fn check(&self, design: &TrialDesign) -> Result<()> {
        if self.deltas.len() != design.arms() {
            return Err(Error::DimensionMismatch(format!(
                "effect configuration has {} entries for {} arms",
                self.deltas.len(),
                design.arms()
            )));
        }
        if let Some(d) = self.deltas.iter().find(|d| !d.is_finite()) {
            return Err(Error::InvalidInput(format!("effect {d} is not finite")));
        }
        Ok(())
    }
}

/// JSON has no infinity; `+inf` boundaries travel as `null`.
pub mod extended_reals {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn motivating(n: u32) -> TrialDesign {
        TrialDesign::new(3, n, vec![3.47, 2.45, 2.00], 0.025, 9.47f64.sqrt()).unwrap()
    }

    #[test]
    fn maximum_sample_size() {
        assert_eq!(motivating(206).max_sample_size(), 1854);
        assert_eq!(motivating(203).max_sample_size(), 1827);
    }

    #[test]
    fn stop_totals_agree_between_formulas() {
        for k in 1..=7 {
            let d = TrialDesign::new(k, 37, vec![2.0; k], 0.025, 1.0).unwrap();
            for j in 1..=k {
                assert_eq!(d.patients_at_stop(j), d.patients_at_stop_by_group(j));
            }
        }
        let d = motivating(206);
        assert_eq!(d.patients_at_stop(1), 4 * 206);
        assert_eq!(d.patients_at_stop(2), 4 * 206 + 3 * 206);
    }

    #[test]
    fn validation() {
        assert!(TrialDesign::new(3, 10, vec![2.0, 2.0], 0.025, 1.0).is_err());
        assert!(TrialDesign::new(3, 0, vec![2.0; 3], 0.025, 1.0).is_err());
        assert!(TrialDesign::new(3, 10, vec![2.0, 2.0, f64::INFINITY], 0.025, 1.0).is_err());
        assert!(TrialDesign::new(3, 10, vec![f64::INFINITY, f64::INFINITY, 1.96], 0.025, 1.0).is_ok());
        assert!(TrialDesign::new(3, 10, vec![2.0; 3], 1.5, 1.0).is_err());
    }

    #[test]
    fn infinite_boundaries_survive_json() {
        let d = TrialDesign::new(3, 10, vec![f64::INFINITY, f64::INFINITY, 1.96], 0.025, 1.0).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("[null,null,1.96]"));
        let back: TrialDesign = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
        let bad = text.replace("1.96", "null");
        assert!(serde_json::from_str::<TrialDesign>(&bad).is_err());
    }
}
