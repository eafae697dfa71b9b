//! Univariate standard normal helpers.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function, accurate in both tails.
#[inline]
pub fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

/// Upper tail `1 - cdf(x)` without cancellation.
#[inline]
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// Quantile function. `p` outside (0, 1) maps to the infinities.
#[inline]
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else if p > 0.5 {
        -lower_quantile(1.0 - p)
    } else {
        lower_quantile(p)
    }
}

/// Quantile for `p <= 1/2`: an initial inverse-erfc value polished by one
/// Halley step against the accurate distribution function.
fn lower_quantile(p: f64) -> f64 {
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    let d = pdf(x);
    if !(d > 0.0) {
        return x;
    }
    let u = (cdf(x) - p) / d;
    x - u / (1.0 + 0.5 * x * u)
}

/// Probability of `(lo, hi]` for a standard normal.
#[inline]
pub fn interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo > 0.0 {
        sf(lo) - sf(hi)
    } else {
        cdf(hi) - cdf(lo)
    }
}

/// Mass of `(lo, hi]` together with the `w`-quantile of the normal
/// truncated to that interval. Tail arithmetic is done on whichever side
/// keeps the subtraction well conditioned.
#[inline]
pub(crate) fn truncated_draw(lo: f64, hi: f64, w: f64) -> (f64, f64) {
    const P_MIN: f64 = 1e-300;
    if lo > 0.0 {
        let (q_lo, q_hi) = (sf(lo), sf(hi));
        let mass = q_lo - q_hi;
        let q = (q_lo - w * mass).max(P_MIN);
        (mass, -quantile(q))
    } else {
        let (p_lo, p_hi) = (cdf(lo), cdf(hi));
        let mass = p_hi - p_lo;
        let p = (p_lo + w * mass).max(P_MIN);
        (mass, quantile(p))
    }
}

/// Mean of a standard normal truncated to `(lo, hi]`.
pub(crate) fn truncated_mean(lo: f64, hi: f64) -> f64 {
    let mass = interval(lo, hi);
    if mass > 1e-300 {
        (pdf(lo) - pdf(hi)) / mass
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((quantile(0.9) - 1.281_551_565_544_601).abs() < 1e-12);
        assert_eq!(cdf(0.0), 0.5);
        assert!((sf(8.0) / 6.220_960_574_271_785e-16 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn quantile_inverts_cdf_in_tails() {
        for &x in &[-30.0, -8.0, -3.0, -0.5, 0.0] {
            let p = cdf(x);
            assert!((quantile(p) - x).abs() < 1e-12 * (1.0 + x.abs()), "x = {x}");
        }
        for &x in &[0.7, 4.0, 7.5, 20.0] {
            assert!((-quantile(sf(x)) - x).abs() < 1e-12 * (1.0 + x.abs()), "x = {x}");
        }
    }

    #[test]
    fn truncated_draw_stays_inside() {
        for &(lo, hi) in &[(-1.0, 2.0), (3.0, 9.0), (-9.0, -4.0), (f64::NEG_INFINITY, 0.3), (6.0, f64::INFINITY)] {
            for &w in &[0.0, 1e-9, 0.25, 0.5, 0.999_999] {
                let (mass, y) = truncated_draw(lo, hi, w);
                assert!((mass - interval(lo, hi)).abs() < 1e-15);
                assert!(y >= lo - 1e-9 && y <= hi + 1e-9, "({lo}, {hi}) w={w} y={y}");
            }
        }
    }
}
