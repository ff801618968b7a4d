//! The Policy Gaussian set-union mechanism, the replayed greedy-policy
//! expansion counterexample, and the spillover-surcharge benchmark table.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::calibration::{calibrate_sigma, rho_policy_gaussian};
use crate::error::{Error, Result};
use crate::histogram::{
    expansion_witness_instance, l2_diff, truncate_items, Policy, PolicyState, WeightedHistogram,
};
use crate::sampling::derive_seed;

/// Options for a set-union run.
#[derive(Debug, Clone)]
pub struct DpsuOptions {
    pub policy: Policy,
    /// Histogram cutoff; defaults to `rho_pg + 3 sigma` when unset.
    pub cutoff_gamma: Option<f64>,
    /// The greedy policy has no valid privacy proof; it is refused unless this
    /// override is set, and the outcome is then tagged non-private.
    pub allow_non_private_policy: bool,
    pub rng_seed: u64,
}

impl Default for DpsuOptions {
    fn default() -> Self {
        Self {
            policy: Policy::L2Descent,
            cutoff_gamma: None,
            allow_non_private_policy: false,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DpsuOutcome {
    pub released: BTreeSet<u64>,
    pub support_size: u64,
    pub sigma: f64,
    pub rho_pg: f64,
    pub rho_zero: f64,
    pub cutoff_gamma: f64,
    /// False when the run used the unproven greedy policy.
    pub private: bool,
}

/// Run the Policy Gaussian set-union mechanism: build the histogram by policy
/// updates over a seeded user order, add Gaussian noise to support entries
/// only, and release the items whose noisy value exceeds the spillover
/// threshold. The released set is always a subset of the true union.
pub fn run_policy_gaussian(
    corpus_items: &[Vec<u64>],
    epsilon: f64,
    delta: f64,
    delta0: u64,
    options: &DpsuOptions,
) -> Result<DpsuOutcome> {
    if options.policy == Policy::L1Descent && !options.allow_non_private_policy {
        return Err(Error::UnsafePolicy(
            "the greedy update policy is not L2-contractive (a 3-item, 8-user witness expands \
             the neighboring distance to ~1.032); rerun with the explicit non-private override \
             or use the L2 descent"
                .into(),
        ));
    }
    let sigma = calibrate_sigma(epsilon, delta / 2.0, 1.0)?;
    let (rho_pg, rho_zero) = rho_policy_gaussian(epsilon, delta, delta0)?;
    let gamma = options.cutoff_gamma.unwrap_or(rho_pg + 3.0 * sigma);
    if !(gamma > 0.0) {
        return Err(Error::Config(format!(
            "cutoff must be positive, got {gamma}"
        )));
    }

    // Seeded pseudo-random user order stands in for the hash order.
    let mut order: Vec<usize> = (0..corpus_items.len()).collect();
    order.shuffle(&mut ChaCha12Rng::seed_from_u64(derive_seed(
        options.rng_seed,
        0xB0,
    )));

    let mut state: PolicyState<u64> = PolicyState::new(gamma, delta0);
    for &i in &order {
        let mut items = corpus_items[i].clone();
        items.sort_unstable();
        items.dedup();
        if items.is_empty() {
            continue;
        }
        let mut trunc_rng = ChaCha12Rng::seed_from_u64(derive_seed(options.rng_seed, i as u64));
        let kept = truncate_items(&items, delta0 as usize, &mut trunc_rng);
        state.update(options.policy, &kept);
    }

    let mut noise_rng = ChaCha12Rng::seed_from_u64(derive_seed(options.rng_seed, 0xA0));
    let mut released = BTreeSet::new();
    for (&item, h) in state.histogram.iter() {
        let z: f64 = StandardNormal.sample(&mut noise_rng);
        if h + sigma * z > rho_pg {
            released.insert(item);
        }
    }
    Ok(DpsuOutcome {
        released,
        support_size: state.histogram.len() as u64,
        sigma,
        rho_pg,
        rho_zero,
        cutoff_gamma: gamma,
        private: options.policy == Policy::L2Descent,
    })
}

/// One step of the replayed expansion trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub user: usize,
    pub items: Vec<u64>,
    /// Histogram over items (0, 1, 2) after this user, larger database.
    pub h1: [f64; 3],
    /// Same for the smaller database (unchanged while the extra user runs).
    pub h2: [f64; 3],
    pub diff_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleTrace {
    pub diff_vector: [f64; 3],
    pub diff_norm: f64,
    pub per_user: Vec<TraceStep>,
}

/// Replay the 3-item, 8-user instance through the greedy update in the listed
/// order and return the exact final difference between the neighboring
/// histograms. Exceeds 1, contradicting contractivity.
pub fn l1_counterexample_trace() -> CounterexampleTrace {
    let (d1, _, gamma, bound) = expansion_witness_instance();
    let mut s1: PolicyState<u64> = PolicyState::new(gamma, bound);
    let mut s2: PolicyState<u64> = PolicyState::new(gamma, bound);
    let mut per_user = Vec::with_capacity(d1.len());
    for (i, items) in d1.iter().enumerate() {
        s1.l1_descent_update(items);
        if i > 0 {
            // user 0 is the extra user of the larger database
            s2.l1_descent_update(items);
        }
        per_user.push(TraceStep {
            user: i,
            items: items.clone(),
            h1: snapshot(&s1.histogram),
            h2: snapshot(&s2.histogram),
            diff_norm: l2_diff(&s1.histogram, &s2.histogram),
        });
    }
    let h1 = snapshot(&s1.histogram);
    let h2 = snapshot(&s2.histogram);
    let diff = [h1[0] - h2[0], h1[1] - h2[1], h1[2] - h2[2]];
    let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    CounterexampleTrace {
        diff_vector: diff,
        diff_norm: norm,
        per_user,
    }
}

fn snapshot(h: &WeightedHistogram<u64>) -> [f64; 3] {
    [h.get(&0), h.get(&1), h.get(&2)]
}

#[derive(Debug, Clone, Serialize)]
pub struct SurchargeRow {
    pub epsilon: f64,
    pub delta0: u64,
    pub rho_pg: f64,
    pub rho_zero: f64,
    pub surcharge: f64,
    /// Surcharge relative to the Policy Gaussian threshold.
    pub relative: f64,
}

/// Deterministic spillover-surcharge table over a grid of `(epsilon, delta0)`.
pub fn spillover_surcharge_table(
    eps_list: &[f64],
    delta0_list: &[u64],
    delta: f64,
) -> Result<Vec<SurchargeRow>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    let mut rows = Vec::with_capacity(eps_list.len() * delta0_list.len());
    for &eps in eps_list {
        for &d0 in delta0_list {
            let (rho_pg, rho_zero) = rho_policy_gaussian(eps, delta, d0)?;
            let surcharge = rho_pg - rho_zero;
            rows.push(SurchargeRow {
                epsilon: eps,
                delta0: d0,
                rho_pg,
                rho_zero,
                surcharge,
                relative: surcharge / rho_pg,
            });
        }
    }
    Ok(rows)
}

/// The benchmark grid: epsilon in {1, 3, 5, 8} by delta0 in {10, 100} at
/// delta = e^-10.
pub fn benchmark_surcharge_table() -> Result<Vec<SurchargeRow>> {
    spillover_surcharge_table(&[1.0, 3.0, 5.0, 8.0], &[10, 100], (-10.0f64).exp())
}
