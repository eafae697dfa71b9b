//! Randomly shifted Kronecker (Richtmyer) point sets on the unit cube.
//!
//! Point `i` of randomization `s` is `frac(i * g + shift_s)` with generator
//! `g_m = frac(sqrt(p_m))` for the m-th prime. The sequence is extensible, so
//! an adaptive integrator can keep adding points without discarding work.

const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

pub(crate) const MAX_DIM: usize = PRIMES.len();

pub(crate) fn generator(dim: usize) -> Vec<f64> {
    assert!(dim <= MAX_DIM, "lattice generator supports at most {MAX_DIM} dimensions");
    PRIMES[..dim].iter().map(|&p| f64::from(p).sqrt().fract()).collect()
}

/// Writes the baker-transformed point `i` into `out`.
#[inline]
pub(crate) fn point(index: u64, generator: &[f64], shift: &[f64], out: &mut [f64]) {
    let i = index as f64;
    for ((o, g), s) in out.iter_mut().zip(generator).zip(shift) {
        let x = (i * g + s).fract();
        *o = (2.0 * x - 1.0).abs();
    }
}
