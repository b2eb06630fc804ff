//! Counter-based random number streams.
//!
//! Every draw is a pure function of `(seed, stream, index)`, so simulations
//! are reproducible bit-for-bit no matter how work is split across threads:
//! there is no generator state to share or hand off. Path simulations key
//! the stream by path index and the counter by step index.

use alloc::vec::Vec;

use crate::math;

/// SplitMix64 finalizer; bijective with strong avalanche.
#[inline(always)]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Mix a (seed, stream, counter) triple into one word.
#[inline(always)]
fn mix3(seed: u64, stream: u64, counter: u64) -> u64 {
    let mut z = finalize(seed ^ 0x9E3779B97F4A7C15);
    z = finalize(z.wrapping_add(stream));
    finalize(z.wrapping_add(counter))
}

/// Uniform draw in the half-open interval [0, 1).
#[inline]
pub fn uniform(seed: u64, stream: u64, index: u64) -> f64 {
    (mix3(seed, stream, index) >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Uniform draw in the half-open interval (0, 1]; safe under `ln`.
#[inline]
fn uniform_oc(word: u64) -> f64 {
    ((word >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
}

/// Standard normal draw keyed by `(seed, stream, index)`.
///
/// Box-Muller on two sub-draws of the keyed counter; stateless, so the
/// i-th increment of a path can be regenerated in isolation.
#[inline]
pub fn standard_normal(seed: u64, stream: u64, index: u64) -> f64 {
    let u1 = uniform_oc(mix3(seed, stream, index.wrapping_mul(2)));
    let u2 = uniform(seed, stream, index.wrapping_mul(2).wrapping_add(1));
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}

/// Brownian increments over `n_steps` uniform steps on [0, horizon], built
/// by dyadic refinement so that resolutions related by powers of two sample
/// the *same* Brownian path: the increments at `n` are (up to rounding) the
/// pairwise sums of the increments at `2n`.
///
/// Writing n = m * 2^L with m odd, the m base increments are drawn directly
/// and each refinement level splits every increment D into D/2 +- xi with an
/// independent bridge draw xi. Draw keys depend only on (level, position),
/// which is what makes the construction refinement-consistent.
pub fn brownian_increments(seed: u64, stream: u64, n_steps: usize, horizon: f64) -> Vec<f64> {
    assert!(n_steps >= 1 && horizon > 0.0);
    let levels = n_steps.trailing_zeros() as u64;
    let base = n_steps >> levels;

    let mut dt = horizon / base as f64;
    let sd0 = math::sqrt(dt);
    let mut inc: Vec<f64> = (0..base)
        .map(|j| sd0 * standard_normal(seed, stream, j as u64))
        .collect();

    for level in 1..=levels {
        let half_sd = 0.5 * math::sqrt(dt);
        let mut next = Vec::with_capacity(inc.len() * 2);
        for (j, &d) in inc.iter().enumerate() {
            let xi = half_sd * standard_normal(seed, stream, (level << 48) | j as u64);
            next.push(0.5 * d + xi);
            next.push(0.5 * d - xi);
        }
        inc = next;
        dt *= 0.5;
    }
    inc
}
