//! Privacy calibration: the exact Gaussian-mechanism condition, minimal-noise
//! search, uniform multi-level composition, and the spillover / spurious-control
//! thresholds used by the set-union and n-gram mechanisms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{per_trial_tail, phi, phi_inv_complement};

/// The privacy contract for a run: `(epsilon, delta)` with an explicit split of
/// `delta` between the Gaussian mechanism and level-1 spillover, the bounded
/// L2 sensitivity of the histogram query, and the number of composed levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    /// L2 sensitivity of the histogram (1 for the weighted scheme).
    pub sensitivity: f64,
    /// Number of sequentially composed Gaussian levels.
    pub levels: u32,
    /// Portion of `delta` spent on the Gaussian mechanism.
    pub delta_mech: f64,
    /// Portion of `delta` spent on level-1 spillover.
    pub delta_spill: f64,
}

impl PrivacyParams {
    /// Construct with the default even split `delta_mech = delta_spill = delta/2`.
    pub fn new(epsilon: f64, delta: f64, sensitivity: f64, levels: u32) -> Result<Self> {
        Self::with_split(
            epsilon,
            delta,
            sensitivity,
            levels,
            delta / 2.0,
            delta / 2.0,
        )
    }

    pub fn with_split(
        epsilon: f64,
        delta: f64,
        sensitivity: f64,
        levels: u32,
        delta_mech: f64,
        delta_spill: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        if !(sensitivity > 0.0) {
            return Err(Error::Config(format!(
                "sensitivity must be positive, got {sensitivity}"
            )));
        }
        if levels < 1 {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        if !(delta_mech > 0.0 && delta_spill >= 0.0)
            || (delta_mech + delta_spill - delta).abs() > 1e-12 * delta
        {
            return Err(Error::Config(format!(
                "delta split {delta_mech} + {delta_spill} must equal delta = {delta}"
            )));
        }
        Ok(Self {
            epsilon,
            delta,
            sensitivity,
            levels,
            delta_mech,
            delta_spill,
        })
    }
}

/// Calibrated noise for a [`PrivacyParams`] contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Minimal single-release noise scale.
    pub sigma_star: f64,
    /// Per-level noise `sigma_star * sqrt(levels)` under uniform composition.
    pub sigma_per_level: f64,
}

impl CalibrationResult {
    pub fn from_params(params: &PrivacyParams) -> Result<Self> {
        let sigma_star = calibrate_sigma(params.epsilon, params.delta_mech, params.sensitivity)?;
        let sigma_per_level = compose_sigma(sigma_star, params.levels);
        Ok(Self {
            sigma_star,
            sigma_per_level,
        })
    }
}

/// The exact delta achieved by a Gaussian mechanism with scale `sigma` at
/// privacy loss `epsilon` and L2 sensitivity `sensitivity`:
///
/// `Phi(D/(2s) - es/D) - e^e * Phi(-D/(2s) - es/D)`
///
/// Strictly decreasing in `sigma`.
pub fn bw_delta(sigma: f64, epsilon: f64, sensitivity: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(epsilon > 0.0) || !(sensitivity > 0.0) {
        return Err(Error::Domain(
            "epsilon and sensitivity must be positive".into(),
        ));
    }
    let r = sensitivity / sigma;
    let a = 0.5 * r - epsilon / r;
    let b = -0.5 * r - epsilon / r;
    Ok(phi(a) - epsilon.exp() * phi(b))
}

/// Minimal `sigma` with `bw_delta(sigma, epsilon, sensitivity) <= delta_mech`,
/// found by bisection on `sigma / sensitivity` over `[1e-6, 1e6]`.
pub fn calibrate_sigma(epsilon: f64, delta_mech: f64, sensitivity: f64) -> Result<f64> {
    if !(delta_mech > 0.0 && delta_mech < 1.0) {
        return Err(Error::Calibration(format!(
            "delta_mech must lie in (0,1), got {delta_mech}"
        )));
    }
    if !(epsilon > 0.0) || !(sensitivity > 0.0) {
        return Err(Error::Calibration(
            "epsilon and sensitivity must be positive".into(),
        ));
    }
    // bw_delta depends on sigma only through sigma/sensitivity, so calibrate
    // the normalized scale and multiply back.
    let f = |s: f64| bw_delta(s, epsilon, 1.0).expect("positive sigma");
    let (mut lo, mut hi) = (1e-6, 1e6);
    if f(lo) <= delta_mech {
        // Already satisfied at the bottom of the bracket: degenerate target.
        return Err(Error::Calibration(format!(
            "delta_mech = {delta_mech} is satisfied by sigma <= 1e-6; inputs degenerate"
        )));
    }
    if f(hi) > delta_mech {
        return Err(Error::Calibration(format!(
            "bracket exhausted: even sigma = 1e6 does not reach delta_mech = {delta_mech}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > delta_mech {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    // `hi` is the smallest point known to satisfy the condition.
    Ok(hi * sensitivity)
}

/// Per-level noise under uniform budget: `sigma_star * sqrt(levels)`, so that
/// the composed mechanism (`sum 1/sigma_k^2 = 1/sigma_star^2`) matches a single
/// Gaussian mechanism at `sigma_star`.
pub fn compose_sigma(sigma_star: f64, levels: u32) -> f64 {
    assert!(levels >= 1, "levels must be at least 1");
    sigma_star * (levels as f64).sqrt()
}

/// Level-1 spillover threshold:
/// `max over t in 1..=delta1_max of 1/sqrt(t) + sigma1 * Phi^-1((1-delta_spill)^{1/t})`.
pub fn rho1(sigma1: f64, delta_spill: f64, delta1_max: u64) -> Result<f64> {
    if delta1_max < 1 {
        return Err(Error::Domain(
            "contribution bound must be at least 1".into(),
        ));
    }
    if !(delta_spill > 0.0 && delta_spill < 1.0) {
        return Err(Error::Domain(format!(
            "delta_spill must lie in (0,1), got {delta_spill}"
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for t in 1..=delta1_max {
        let tail = per_trial_tail(delta_spill, t);
        let v = (t as f64).sqrt().recip() + sigma1 * phi_inv_complement(tail);
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// Spurious-control base threshold for level-k candidates:
/// `sigma_k * Phi^-1(1 - eta * min(prev_release_size / candidate_size, 1))`.
pub fn rho_kgram_base(
    sigma_k: f64,
    eta: f64,
    prev_release_size: u64,
    candidate_size: u64,
) -> Result<f64> {
    if candidate_size < 1 {
        return Err(Error::Domain("candidate_size must be at least 1".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    let ratio = (prev_release_size as f64 / candidate_size as f64).min(1.0);
    let mass = eta * ratio;
    if mass >= 1.0 {
        return Err(Error::Domain(format!(
            "eta * min(|S|/|V|, 1) = {mass} leaves no upper tail"
        )));
    }
    if mass <= 0.0 {
        // prev_release_size = 0: no spurious-control constraint binds.
        return Ok(f64::INFINITY);
    }
    Ok(sigma_k * phi_inv_complement(mass))
}

/// Policy Gaussian threshold and the zero-mass benchmark for a given
/// `(epsilon, delta, delta0)`, using the even `delta/2` split.
///
/// Returns `(rho_pg, rho_zero)` where `rho_pg` maximizes the per-`t` spillover
/// term over `t <= delta0` and `rho_zero` drops the `1/sqrt(t)` mass term at
/// `t = delta0`.
pub fn rho_policy_gaussian(epsilon: f64, delta: f64, delta0: u64) -> Result<(f64, f64)> {
    if delta0 < 1 {
        return Err(Error::Domain("delta0 must be at least 1".into()));
    }
    let delta_half = delta / 2.0;
    let sigma = calibrate_sigma(epsilon, delta_half, 1.0)?;
    let rho_pg = rho1(sigma, delta_half, delta0)?;
    let rho_zero = sigma * phi_inv_complement(per_trial_tail(delta_half, delta0));
    Ok((rho_pg, rho_zero))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn e10() -> f64 {
        (-10.0f64).exp()
    }

    #[test]
    fn bw_delta_vanishes_for_huge_sigma() {
        let d = bw_delta(1e6, 1.0, 1.0).unwrap();
        assert!(d.abs() < 1e-30, "got {d}");
    }

    #[test]
    fn bw_delta_strictly_decreasing() {
        assert!(bw_delta(1.0, 1.0, 1.0).unwrap() > bw_delta(2.0, 1.0, 1.0).unwrap());
        // 100-point grid
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let sigma = 0.05 + 0.1 * i as f64;
            let d = bw_delta(sigma, 1.0, 1.0).unwrap();
            assert!(d < prev, "not decreasing at sigma={sigma}");
            prev = d;
        }
    }

    #[test]
    fn bw_delta_rejects_nonpositive_sigma() {
        assert!(bw_delta(0.0, 1.0, 1.0).is_err());
        assert!(bw_delta(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn calibration_hits_target_within_relative_tolerance() {
        let target = e10() / 2.0;
        let sigma = calibrate_sigma(1.0, target, 1.0).unwrap();
        let achieved = bw_delta(sigma, 1.0, 1.0).unwrap();
        assert!(achieved <= target);
        assert!(
            ((achieved - target) / target).abs() < 1e-6,
            "residual too large: {achieved} vs {target}"
        );
        // Reference value from 60-digit bisection.
        assert!((sigma - 3.5431380684367347).abs() < 1e-9, "sigma = {sigma}");
    }

    #[test]
    fn calibration_minimality_on_random_inputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let eps = rng.gen_range(0.1..10.0);
            let delta_mech = 10f64.powf(rng.gen_range(-12.0..-2.0));
            let sigma = calibrate_sigma(eps, delta_mech, 1.0).unwrap();
            assert!(bw_delta(sigma, eps, 1.0).unwrap() <= delta_mech);
            assert!(bw_delta(0.999 * sigma, eps, 1.0).unwrap() > delta_mech);
        }
    }

    #[test]
    fn calibration_scales_linearly_in_sensitivity() {
        let s1 = calibrate_sigma(1.5, 1e-6, 1.0).unwrap();
        let s2 = calibrate_sigma(1.5, 1e-6, 2.0).unwrap();
        assert!((s2 - 2.0 * s1).abs() < 1e-9 * s2);
    }

    #[test]
    fn calibration_rejects_degenerate_targets() {
        assert!(calibrate_sigma(1.0, 1.0, 1.0).is_err());
        assert!(calibrate_sigma(1.0, 0.0, 1.0).is_err());
        assert!(calibrate_sigma(1.0, -0.5, 1.0).is_err());
        // A loose-but-valid target still calibrates.
        assert!(calibrate_sigma(1.0, 0.9999, 1.0).is_ok());
    }

    #[test]
    fn compose_sigma_identities() {
        assert_eq!(compose_sigma(2.0, 1), 2.0);
        assert_eq!(compose_sigma(2.0, 4), 4.0);
        let sigma_star = 1.37;
        let t = 6u32;
        let per = compose_sigma(sigma_star, t);
        let harmonic: f64 = (0..t).map(|_| per.powi(-2)).sum();
        assert!((harmonic - sigma_star.powi(-2)).abs() < 1e-12);
    }

    #[test]
    fn rho1_single_term() {
        let sigma = 2.0;
        let ds = 1e-4;
        let expected = 1.0 + sigma * phi_inv_complement(ds);
        assert!((rho1(sigma, ds, 1).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn rho1_matches_brute_force_max() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let sigma = rng.gen_range(0.2..6.0);
            let ds = 10f64.powf(rng.gen_range(-10.0..-3.0));
            let dmax = rng.gen_range(1..=1000u64);
            let fast = rho1(sigma, ds, dmax).unwrap();
            let brute = (1..=dmax)
                .map(|t| {
                    (t as f64).sqrt().recip() + sigma * phi_inv_complement(per_trial_tail(ds, t))
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                (fast - brute).abs() < 1e-9,
                "dmax={dmax}: {fast} vs {brute}"
            );
        }
    }

    #[test]
    fn rho1_paper_value() {
        let sigma = calibrate_sigma(1.0, e10() / 2.0, 1.0).unwrap();
        let r = rho1(sigma, e10() / 2.0, 10).unwrap();
        assert!((r - 16.56).abs() < 0.01, "rho1 = {r}");
    }

    #[test]
    fn rho1_rejects_zero_bound() {
        assert!(rho1(1.0, 1e-5, 0).is_err());
    }

    #[test]
    fn rho_kgram_saturated_at_half_eta_is_zero() {
        let r = rho_kgram_base(3.0, 0.5, 1_000_000, 1_000_000).unwrap();
        assert!(r.abs() < 1e-12, "got {r}");
    }

    #[test]
    fn rho_kgram_shrinking_candidates_lowers_threshold() {
        let big = rho_kgram_base(1.0, 0.01, 100, 1_000_000).unwrap();
        let small = rho_kgram_base(1.0, 0.01, 100, 10_000).unwrap();
        assert!(small <= big);
    }

    #[test]
    fn rho_kgram_reference_tail() {
        // eta * min(100/1e6, 1) = 1e-6
        let r = rho_kgram_base(1.0, 0.01, 100, 1_000_000).unwrap();
        assert!((r - 4.7534243088228989).abs() < 1e-3, "got {r}");
    }

    #[test]
    fn rho_kgram_rejects_saturated_mass() {
        assert!(rho_kgram_base(1.0, 1.5, 10, 10).is_err());
    }

    #[test]
    fn policy_gaussian_reference_rows() {
        let delta = e10();
        let (pg, zero) = rho_policy_gaussian(3.0, delta, 10).unwrap();
        assert!((pg - 6.44).abs() < 0.01, "rho_pg = {pg}");
        assert!((zero - 6.11).abs() < 0.01, "rho_zero = {zero}");
        let (pg, zero) = rho_policy_gaussian(5.0, delta, 100).unwrap();
        assert!((pg - 4.50).abs() < 0.01, "rho_pg = {pg}");
        assert!((zero - 4.33).abs() < 0.01, "rho_zero = {zero}");
    }

    #[test]
    fn policy_gaussian_surcharge_nonnegative() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..30 {
            let eps = rng.gen_range(0.2..9.0);
            let delta = 10f64.powf(rng.gen_range(-9.0..-3.0));
            let d0 = rng.gen_range(1..=300u64);
            let (pg, zero) = rho_policy_gaussian(eps, delta, d0).unwrap();
            assert!(pg >= zero - 1e-12, "eps={eps} d0={d0}: {pg} < {zero}");
        }
    }

    #[test]
    fn params_validate_split() {
        assert!(PrivacyParams::new(1.0, 1e-5, 1.0, 6).is_ok());
        assert!(PrivacyParams::with_split(1.0, 1e-5, 1.0, 6, 8e-6, 2e-6).is_ok());
        assert!(PrivacyParams::with_split(1.0, 1e-5, 1.0, 6, 8e-6, 3e-6).is_err());
        assert!(PrivacyParams::new(0.0, 1e-5, 1.0, 6).is_err());
        assert!(PrivacyParams::new(1.0, 0.0, 1.0, 6).is_err());
        assert!(PrivacyParams::new(1.0, 1e-5, 1.0, 0).is_err());
    }
}
