//! Seed derivation and the exact samplers the release mechanisms depend on.
//!
//! The binomial sampler must follow the exact Binomial(n, p) law for n up to
//! ~1e8 and p down to ~1e-20; the grouped unobserved-item release is only
//! distributionally equal to the dense mechanism if this holds, so a normal
//! approximation is never acceptable here. Small means use CDF inversion with
//! the leading term computed in log space; large means fall back to the exact
//! BTPE rejection sampler.

use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::Binomial;

use crate::normal::{phi_complement, phi_inv_complement};

/// SplitMix64 mix of a base seed and a stream index. Used everywhere a
/// collection of independent deterministic RNG streams is needed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const INVERSION_MEAN_LIMIT: f64 = 30.0;

/// Exact Binomial(n, p) sample.
pub fn sample_binomial(n: u64, p: f64, rng: &mut impl Rng) -> u64 {
    assert!((0.0..=1.0).contains(&p), "p must lie in [0,1], got {p}");
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    // Work with success probability <= 1/2 and flip back.
    if p > 0.5 {
        return n - sample_binomial(n, 1.0 - p, rng);
    }
    if n as f64 * p <= INVERSION_MEAN_LIMIT {
        binomial_inversion(n, p, rng)
    } else {
        // np > 30 implies p is far from the deep-tail regime, where the BTPE
        // rejection sampler is exact and fast.
        Binomial::new(n, p)
            .expect("validated parameters")
            .sample(rng)
    }
}

/// CDF inversion: walk the pmf from k = 0. `P(X = 0) = (1-p)^n` is computed
/// as `exp(n ln(1-p))` so it stays accurate for p down to 1e-20 where
/// `1 - p` rounds to 1.
fn binomial_inversion(n: u64, p: f64, rng: &mut impl Rng) -> u64 {
    let log_q = (-p).ln_1p();
    let mut pmf = (n as f64 * log_q).exp();
    let odds = p / (1.0 - p);
    let u: f64 = rng.gen();
    let mut cum = pmf;
    let mut k = 0u64;
    while u > cum && k < n {
        k += 1;
        pmf *= (n - k + 1) as f64 / k as f64 * odds;
        cum += pmf;
        if pmf == 0.0 {
            break;
        }
    }
    k
}

/// Draw from a standard Gaussian with scale `sigma` conditioned on exceeding
/// `threshold`, by inverting the conditional survival function. Exact given an
/// exact tail inverse.
pub fn gaussian_tail_sample(threshold: f64, sigma: f64, rng: &mut impl Rng) -> f64 {
    debug_assert!(sigma > 0.0);
    let tail = phi_complement(threshold / sigma);
    // Open-interval uniform keeps the inverse in its valid domain.
    let u: f64 = loop {
        let v: f64 = rng.gen();
        if v > 0.0 {
            break v;
        }
    };
    let target = u * tail;
    if target <= 0.0 {
        // The conditioning event has numerically zero mass; return the boundary.
        return threshold;
    }
    sigma * phi_inv_complement(target)
}
