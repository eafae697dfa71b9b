//! Pivoted Cholesky factorization with Genz–Bretz variable prioritization.
//!
//! Rank-deficient correlation matrices are common here: events such as
//! `Z1 - Z3 > 0` together with `Z1 - Z2 > 0` and `Z2 - Z3 > 0` produce exact
//! linear dependencies. A coordinate whose conditional variance vanishes is
//! kept as a *dependent* row: a linear constraint on the independent normals
//! that is folded into the integration interval of the last independent
//! variable it involves.

use crate::error::{Error, Result};
use crate::normal;

/// Conditional variances at or below this value mark a coordinate as a
/// deterministic function of the pivots already chosen.
pub(crate) const RANK_TOL: f64 = 1e-10;
/// Largest reconstruction error tolerated before declaring the input
/// inconsistent with any positive semi-definite matrix.
const RECONSTRUCTION_TOL: f64 = 1e-7;
/// Coefficients smaller than this are treated as exact zeros.
pub(crate) const COEF_EPS: f64 = 1e-12;

/// One independent integration variable, in integration order.
#[derive(Debug, Clone)]
pub(crate) struct Pivot {
    pub lower: f64,
    pub upper: f64,
    /// Coefficients on the previously sampled normals.
    pub coeffs: Vec<f64>,
    pub diag: f64,
    /// Constraints whose last non-zero coefficient is on this variable.
    pub dependents: Vec<Dependent>,
}

#[derive(Debug, Clone)]
pub(crate) struct Dependent {
    pub lower: f64,
    pub upper: f64,
    /// Coefficients on the normals up to and including the owning pivot.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Factorization {
    pub pivots: Vec<Pivot>,
}

impl Factorization {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Integrand of the separation-of-variables transform. `w` holds one
    /// uniform per pivot except the last; `y` is scratch of length `rank`.
    #[inline]
    pub fn integrand(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let r = self.pivots.len();
        let mut prod = 1.0;
        for (k, p) in self.pivots.iter().enumerate() {
            let s = dot(&p.coeffs, y);
            let mut lo = (p.lower - s) / p.diag;
            let mut hi = (p.upper - s) / p.diag;
            for dep in &p.dependents {
                let s = dot(&dep.coeffs[..k], y);
                let c = dep.coeffs[k];
                if c.abs() < COEF_EPS {
                    if s <= dep.lower || s > dep.upper {
                        return 0.0;
                    }
                    continue;
                }
                let a = (dep.lower - s) / c;
                let b = (dep.upper - s) / c;
                let (a, b) = if c > 0.0 { (a, b) } else { (b, a) };
                lo = lo.max(a);
                hi = hi.min(b);
            }
            if lo >= hi {
                return 0.0;
            }
            if k + 1 < r {
                let (mass, draw) = normal::truncated_draw(lo, hi, w[k]);
                prod *= mass;
                if prod <= 0.0 {
                    return 0.0;
                }
                y[k] = draw.clamp(-38.0, 38.0);
            } else {
                prod *= normal::interval(lo, hi);
            }
        }
        prod
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factorizes `corr` (row-major, `d x d`) for the rectangle `(lower, upper]`,
/// choosing at each step the remaining coordinate with the smallest
/// conditional interval probability.
pub(crate) fn factorize(corr: &[f64], lower: &[f64], upper: &[f64]) -> Result<Factorization> {
    let d = lower.len();
    debug_assert_eq!(corr.len(), d * d);
    let c = |i: usize, j: usize| corr[i * d + j];

    // Per original coordinate: coefficients on chosen pivots and residual variance.
    let mut coef: Vec<Vec<f64>> = vec![Vec::with_capacity(d); d];
    let mut resid: Vec<f64> = (0..d).map(|i| c(i, i)).collect();
    let mut pending: Vec<usize> = (0..d).collect();
    let mut order: Vec<usize> = Vec::with_capacity(d);
    let mut expected: Vec<f64> = Vec::with_capacity(d);
    let mut pivots: Vec<Pivot> = Vec::with_capacity(d);
    // Dependent rows: (original index, owning pivot position).
    let mut dependents: Vec<(usize, usize)> = Vec::new();

    while !pending.is_empty() {
        let k = order.len();
        let mut best: Option<(usize, f64)> = None;
        for (pos, &i) in pending.iter().enumerate() {
            let sd = resid[i].sqrt();
            let s = dot(&coef[i], &expected);
            let prob = normal::interval((lower[i] - s) / sd, (upper[i] - s) / sd);
            if best.is_none_or(|(_, bp)| prob < bp) {
                best = Some((pos, prob));
            }
        }
        let (pos, _) = best.expect("pending is non-empty");
        let p = pending.remove(pos);
        let diag = resid[p].sqrt();

        for &i in &pending {
            let l = (c(i, p) - dot(&coef[i], &coef[p])) / diag;
            coef[i].push(l);
            resid[i] -= l * l;
        }
        let s = dot(&coef[p], &expected);
        expected.push(normal::truncated_mean((lower[p] - s) / diag, (upper[p] - s) / diag));
        pivots.push(Pivot {
            lower: lower[p],
            upper: upper[p],
            coeffs: coef[p].clone(),
            diag,
            dependents: Vec::new(),
        });
        coef[p].push(diag);
        order.push(p);

        let mut still = Vec::with_capacity(pending.len());
        for &i in &pending {
            if resid[i] < -RANK_TOL {
                return Err(Error::NotPositiveSemidefinite { index: i, residual: resid[i] });
            }
            if resid[i] <= RANK_TOL {
                dependents.push((i, k));
            } else {
                still.push(i);
            }
        }
        pending = still;
    }

    // Reject inputs whose implied factor does not reproduce the matrix.
    let r = order.len();
    let padded = |i: usize| {
        let mut v = coef[i].clone();
        v.resize(r, 0.0);
        v
    };
    let rows: Vec<Vec<f64>> = (0..d).map(padded).collect();
    for i in 0..d {
        for j in 0..=i {
            let err = (dot(&rows[i], &rows[j]) - c(i, j)).abs();
            if err > RECONSTRUCTION_TOL {
                return Err(Error::NotPositiveSemidefinite { index: i, residual: -err });
            }
        }
    }

    for (i, k) in dependents {
        pivots[k].dependents.push(Dependent {
            lower: lower[i],
            upper: upper[i],
            coeffs: coef[i][..=k].to_vec(),
        });
    }
    Ok(Factorization { pivots })
}
