use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "correlation matrix is not positive semi-definite \
         (coordinate {index}, residual {residual:.3e})"
    )]
    NotPositiveSemidefinite { index: usize, residual: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error(
        "bracket [{lo}, {hi}] does not straddle the target \
         (pwer(lo) = {pwer_lo:.6}, pwer(hi) = {pwer_hi:.6}, alpha = {alpha})"
    )]
    Bracket {
        lo: f64,
        hi: f64,
        pwer_lo: f64,
        pwer_hi: f64,
        alpha: f64,
    },

    #[error("integration did not converge: error bound {error:.3e} exceeds target {target:.3e}")]
    NotConverged { error: f64, target: f64 },

    #[error("no sample size up to {cap} per stage reaches power {target}")]
    SampleSizeCap { cap: u32, target: f64 },

    #[error("power is not monotone in n: power({n_hi}) = {power_hi:.6} < power({n_lo}) = {power_lo:.6}")]
    NonMonotone {
        n_lo: u32,
        power_lo: f64,
        n_hi: u32,
        power_hi: f64,
    },
}
