//! Boundary calibration and sample-size search.

use serde::{Deserialize, Serialize};

use crate::characteristics;
use crate::design::TrialDesign;
use crate::error::{Error, Result};

/// `u_j = c * sqrt(J / j)`.
pub fn obf_shape(stages: usize, c: f64) -> Vec<f64> {
    (1..=stages).map(|j| c * (stages as f64 / j as f64).sqrt()).collect()
}

/// Relative shape of the boundaries; the overall scale is calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryShape {
    ObrienFleming,
    Pocock,
    /// Per-stage multipliers of the scale. `+inf` disables stopping at that
    /// stage and is written as `null` in JSON.
    Custom(#[serde(with = "crate::design::extended_reals")] Vec<f64>),
}

impl BoundaryShape {
    pub fn multipliers(&self, stages: usize) -> Result<Vec<f64>> {
        let m = match self {
            BoundaryShape::ObrienFleming => obf_shape(stages, 1.0),
            BoundaryShape::Pocock => vec![1.0; stages],
            BoundaryShape::Custom(m) => {
                if m.len() != stages {
                    return Err(Error::InvalidInput(format!(
                        "custom shape has {} multipliers for {stages} stages",
                        m.len()
                    )));
                }
                if m.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::InvalidInput("custom multipliers must be strictly positive".into()));
                }
                if !m[stages - 1].is_finite() {
                    return Err(Error::InvalidInput("the final-stage multiplier must be finite".into()));
                }
                m.clone()
            }
        };
        Ok(m)
    }

    pub fn boundaries(&self, stages: usize, c: f64) -> Result<Vec<f64>> {
        Ok(self.multipliers(stages)?.into_iter().map(|m| m * c).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub alpha: f64,
    /// Width of the accepted PWER window `[alpha - omega, alpha]`.
    pub omega: f64,
    pub power_target: f64,
    /// Search interval for the boundary scale.
    pub bracket: (f64, f64),
    pub max_n: u32,
    /// Integration target for the power integrals of the sample-size search.
    pub power_tol: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            alpha: 0.025,
            omega: 1e-5,
            power_target: 0.9,
            bracket: (0.5, 10.0),
            max_n: 100_000,
            power_tol: 1e-5,
            seed: 20_240_601,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.omega > 0.0 && self.omega < self.alpha) {
            return Err(Error::InvalidInput(format!(
                "omega must lie in (0, alpha), got {}",
                self.omega
            )));
        }
        if !(self.power_target > 0.0 && self.power_target < 1.0) {
            return Err(Error::InvalidInput(format!(
                "power must lie in (0, 1), got {}",
                self.power_target
            )));
        }
        let (lo, hi) = self.bracket;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid scale bracket ({lo}, {hi})")));
        }
        if self.max_n == 0 {
            return Err(Error::InvalidInput("max_n must be positive".into()));
        }
        if !(self.power_tol > 0.0) {
            return Err(Error::InvalidInput(format!("power_tol must be positive, got {}", self.power_tol)));
        }
        Ok(())
    }

    /// Integration target for PWER evaluations: a tenth of the window.
    pub fn pwer_tol(&self) -> f64 {
        self.omega / 10.0
    }
}

const MAX_BISECTIONS: usize = 200;

/// Scales `shape` so that the PWER lands in `[alpha - omega, alpha]`.
/// Everything but the boundaries and alpha is taken from `template`.
pub fn calibrate_boundaries(template: &TrialDesign, shape: &BoundaryShape, cfg: &CalibrationConfig) -> Result<TrialDesign> {
    cfg.validate()?;
    let stages = template.stages();
    let make = |c: f64| -> Result<TrialDesign> {
        TrialDesign::new(
            template.arms(),
            template.n_per_stage(),
            shape.boundaries(stages, c)?,
            cfg.alpha,
            template.sigma(),
        )
    };
    let window = (cfg.alpha - cfg.omega, cfg.alpha);
    // Coarse integrals settle points far from the window; only points near
    // it are refined down to the final tolerance.
    let eval = |c: f64| -> Result<(TrialDesign, f64)> {
        let d = make(c)?;
        let mut tol = (cfg.pwer_tol() * 1000.0).min(1e-3);
        loop {
            let tol_now = tol.max(cfg.pwer_tol());
            let p = characteristics::pwer_estimate(&d, tol_now, cfg.seed)?;
            let decided = p.value - p.error_bound > window.1 || p.value + p.error_bound < window.0;
            if decided || tol_now <= cfg.pwer_tol() {
                return Ok((d, p.value));
            }
            tol /= 10.0;
        }
    };
    let accept = |p: f64| p <= window.1 && p >= window.0;

    let (mut lo, mut hi) = cfg.bracket;
    let (d_lo, p_lo) = eval(lo)?;
    if accept(p_lo) {
        return Ok(d_lo);
    }
    let (d_hi, p_hi) = eval(hi)?;
    if accept(p_hi) {
        return Ok(d_hi);
    }
    if !(p_lo > cfg.alpha && p_hi < cfg.alpha - cfg.omega) {
        return Err(Error::Bracket {
            lo,
            hi,
            pwer_lo: p_lo,
            pwer_hi: p_hi,
            alpha: cfg.alpha,
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let (d, p) = eval(mid)?;
        if accept(p) {
            return Ok(d);
        }
        if p > cfg.alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NotConverged {
        error: hi - lo,
        target: cfg.omega,
    })
}

/// Smallest `n_per_stage` whose power under the least favorable
/// configuration reaches `cfg.power_target`.
pub fn find_sample_size(design: &TrialDesign, theta_prime: f64, theta_zero: f64, cfg: &CalibrationConfig) -> Result<TrialDesign> {
    cfg.validate()?;
    if !(theta_prime > theta_zero) {
        return Err(Error::InvalidInput(format!(
            "theta_prime ({theta_prime}) must exceed theta_zero ({theta_zero})"
        )));
    }
    // Coarse integrals settle sizes far from the target; the monotonicity
    // check allows for their error.
    let coarse = (cfg.power_tol * 100.0).min(1e-3).max(cfg.power_tol);
    let n = minimal_n(cfg.power_target, cfg.max_n, 2.0 * coarse, |n| {
        let d = design.with_n_per_stage(n)?;
        let mut tol = coarse;
        loop {
            let tol_now = tol.max(cfg.power_tol);
            let p = characteristics::power_lfc_estimate(&d, theta_prime, theta_zero, tol_now, cfg.seed)?;
            if (p.value - cfg.power_target).abs() > p.error_bound || tol_now <= cfg.power_tol {
                return Ok(p.value);
            }
            tol /= 10.0;
        }
    })?;
    design.with_n_per_stage(n)
}

/// Smallest integer `n` in `1..=cap` with `power(n) >= target`, found by
/// doubling and then bisection. Values seen along the way must be
/// nondecreasing in `n` up to `slack`.
pub(crate) fn minimal_n<F>(target: f64, cap: u32, slack: f64, mut power: F) -> Result<u32>
where
    F: FnMut(u32) -> Result<f64>,
{
    let mut visited: Vec<(u32, f64)> = Vec::new();
    let mut eval = |n: u32, visited: &mut Vec<(u32, f64)>| -> Result<bool> {
        let p = power(n)?;
        visited.push((n, p));
        Ok(p >= target)
    };

    let mut lo = 0u32;
    let mut hi = 1u32;
    loop {
        if eval(hi, &mut visited)? {
            break;
        }
        if hi >= cap {
            return Err(Error::SampleSizeCap { cap, target });
        }
        lo = hi;
        hi = hi.saturating_mul(2).min(cap);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if eval(mid, &mut visited)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    visited.sort_by_key(|v| v.0);
    for w in visited.windows(2) {
        let ((n_lo, power_lo), (n_hi, power_hi)) = (w[0], w[1]);
        if power_hi + slack < power_lo {
            return Err(Error::NonMonotone {
                n_lo,
                power_lo,
                n_hi,
                power_hi,
            });
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obf_values() {
        let u = obf_shape(3, 2.004);
        assert!((u[0] - 3.471).abs() < 1e-3);
        assert!((u[1] - 2.454).abs() < 1e-3);
        assert!((u[2] - 2.004).abs() < 1e-12);
        assert_eq!(obf_shape(1, 1.96), vec![1.96]);
        let u = obf_shape(3, 2.0);
        assert!((u[1] - 2.449).abs() < 1e-3);
        assert!((u[0] - 3.464).abs() < 1e-3);
    }

    #[test]
    fn shapes() {
        assert_eq!(BoundaryShape::Pocock.boundaries(3, 2.0).unwrap(), vec![2.0; 3]);
        let dtl = BoundaryShape::Custom(vec![f64::INFINITY, f64::INFINITY, 1.0]);
        assert_eq!(dtl.boundaries(3, 2.0).unwrap()[2], 2.0);
        assert!(BoundaryShape::Custom(vec![1.0, -1.0, 1.0]).multipliers(3).is_err());
        assert!(BoundaryShape::Custom(vec![1.0, 1.0]).multipliers(3).is_err());
    }

    #[test]
    fn minimal_n_search() {
        let n = minimal_n(0.9, 100_000, 0.0, |n| Ok(1.0 - 1.0 / f64::from(n))).unwrap();
        assert_eq!(n, 10);
        let n = minimal_n(0.5, 100, 0.0, |_| Ok(0.6)).unwrap();
        assert_eq!(n, 1);
        assert!(matches!(
            minimal_n(0.9, 1000, 0.0, |_| Ok(0.1)),
            Err(Error::SampleSizeCap { cap: 1000, .. })
        ));
        // Power that dips on the visited grid is reported.
        let err = minimal_n(0.9, 1000, 0.0, |n| Ok(if n == 8 { 0.5 } else if n < 40 { 0.6 } else { 0.95 }));
        assert!(matches!(err, Err(Error::NonMonotone { .. })));
    }

    #[test]
    fn univariate_calibration() {
        let template = TrialDesign::new(1, 10, vec![1.0], 0.025, 1.0).unwrap();
        let d = calibrate_boundaries(&template, &BoundaryShape::ObrienFleming, &CalibrationConfig::default()).unwrap();
        assert!((d.boundary(1) - 1.959964).abs() < 1e-3);
    }

    #[test]
    fn bracket_must_straddle() {
        let template = TrialDesign::new(1, 10, vec![1.0], 0.025, 1.0).unwrap();
        let cfg = CalibrationConfig {
            bracket: (3.0, 5.0),
            ..CalibrationConfig::default()
        };
        assert!(matches!(
            calibrate_boundaries(&template, &BoundaryShape::Pocock, &cfg),
            Err(Error::Bracket { .. })
        ));
    }
}
