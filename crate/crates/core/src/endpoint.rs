//! Binary endpoint to normal-approximation parameters on the log-odds scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Control event rate and two absolute risk decreases: the clinically
/// relevant one and the largest uninteresting one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryEndpointSpec {
    pub p_control: f64,
    pub rd_relevant: f64,
    pub rd_uninteresting: f64,
}

impl BinaryEndpointSpec {
    pub fn validate(&self) -> Result<()> {
        let (p, r1, r0) = (self.p_control, self.rd_relevant, self.rd_uninteresting);
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidInput(format!("p_control must lie in (0, 1), got {p}")));
        }
        if !(r0 > 0.0) {
            return Err(Error::InvalidInput(format!("rd_uninteresting must be positive, got {r0}")));
        }
        if !(r1 > r0) {
            return Err(Error::InvalidInput(format!(
                "rd_relevant ({r1}) must exceed rd_uninteresting ({r0})"
            )));
        }
        if !(r1 < p) {
            return Err(Error::InvalidInput(format!(
                "rd_relevant ({r1}) must be below p_control ({p}) so the treated rate stays positive"
            )));
        }
        Ok(())
    }
}

/// Effects and variance on the normal scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalEffectSpec {
    pub theta_prime: f64,
    pub theta_zero: f64,
    pub sigma_sq: f64,
}

impl NormalEffectSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_zero > 0.0 && self.theta_prime > self.theta_zero && self.theta_prime.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need theta_prime > theta_zero > 0, got theta_prime = {}, theta_zero = {}",
                self.theta_prime, self.theta_zero
            )));
        }
        if !(self.sigma_sq > 0.0 && self.sigma_sq.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma_sq must be positive, got {}", self.sigma_sq)));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Log-odds ratio of control rate `p_control` against treated rate
/// `p_control - rd`. Positive for a risk decrease.
pub fn log_odds_effect(p_control: f64, rd: f64) -> Result<f64> {
    let treated = p_control - rd;
    if !(treated > 0.0 && treated < 1.0) {
        return Err(Error::InvalidInput(format!(
            "treated rate p_control - rd = {treated} is outside (0, 1)"
        )));
    }
    Ok(logit(p_control) - logit(treated))
}

/// Treated event rate implied by a log-odds effect `theta`.
pub fn treated_rate(p_control: f64, theta: f64) -> f64 {
    let z = logit(p_control) - theta;
    1.0 / (1.0 + (-z).exp())
}

/// `theta = logit(p) - logit(p - rd)` for both risk decreases and
/// `sigma^2 = 1 / (p (1 - p))`.
pub fn binary_to_normal(spec: &BinaryEndpointSpec) -> Result<NormalEffectSpec> {
    spec.validate()?;
    let p = spec.p_control;
    Ok(NormalEffectSpec {
        theta_prime: log_odds_effect(p, spec.rd_relevant)?,
        theta_zero: log_odds_effect(p, spec.rd_uninteresting)?,
        sigma_sq: 1.0 / (p * (1.0 - p)),
    })
}
