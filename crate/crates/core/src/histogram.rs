//! Weighted histograms with bounded L2 sensitivity, the two descent update
//! policies of the set-union framework, the Jacobian of the greedy update map,
//! and a randomized contractivity prober.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::derive_seed;

/// Sparse item -> weight map. Absent keys mean weight zero; all stored weights
/// are non-negative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedHistogram<K: Ord> {
    entries: BTreeMap<K, f64>,
}

impl<K: Ord + Clone> WeightedHistogram<K> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, key: &K) -> f64 {
        self.entries.get(key).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, key: K, weight: f64) {
        debug_assert!(weight >= 0.0);
        *self.entries.entry(key).or_insert(0.0) += weight;
    }

    pub fn set(&mut self, key: K, weight: f64) {
        debug_assert!(weight >= 0.0);
        self.entries.insert(key, weight);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn contains(&self, key: &K) -> bool {
        self.entries.contains_key(key)
    }
}

/// L2 norm of the sparse difference vector over the union of keys.
pub fn l2_diff<K: Ord + Clone>(h1: &WeightedHistogram<K>, h2: &WeightedHistogram<K>) -> f64 {
    let mut sum = 0.0;
    let mut it1 = h1.entries.iter().peekable();
    let mut it2 = h2.entries.iter().peekable();
    loop {
        match (it1.peek(), it2.peek()) {
            (Some(&(k1, v1)), Some(&(k2, v2))) => match k1.cmp(k2) {
                std::cmp::Ordering::Less => {
                    sum += v1 * v1;
                    it1.next();
                }
                std::cmp::Ordering::Greater => {
                    sum += v2 * v2;
                    it2.next();
                }
                std::cmp::Ordering::Equal => {
                    let d = v1 - v2;
                    sum += d * d;
                    it1.next();
                    it2.next();
                }
            },
            (Some(&(_, v1)), None) => {
                sum += v1 * v1;
                it1.next();
            }
            (None, Some(&(_, v2))) => {
                sum += v2 * v2;
                it2.next();
            }
            (None, None) => break,
        }
    }
    sum.sqrt()
}

/// Truncate a user's distinct items to at most `bound` by seeded uniform
/// subsample (without replacement), then return the kept items.
pub fn truncate_items<K: Clone>(items: &[K], bound: usize, rng: &mut impl Rng) -> Vec<K> {
    if items.len() <= bound {
        return items.to_vec();
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(rng);
    idx.truncate(bound);
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

/// Build the weighted histogram `H[u] = sum over users holding u of 1/sqrt(t)`,
/// where `t` is the user's kept-item count after truncation to `bound`.
///
/// Each user's contribution vector has L2 norm exactly 1 (when non-empty), so
/// the histogram has L2 sensitivity at most 1 across neighboring inputs.
/// Per-user RNG streams are derived from `(rng_seed, user index)`, so the
/// result is independent of processing order.
pub fn build_weighted_histogram<K: Ord + Clone>(
    corpus_items: &[Vec<K>],
    bound: u64,
    rng_seed: u64,
) -> WeightedHistogram<K> {
    assert!(bound >= 1, "contribution bound must be at least 1");
    let mut hist = WeightedHistogram::new();
    for (i, items) in corpus_items.iter().enumerate() {
        if items.is_empty() {
            continue;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(rng_seed, i as u64));
        let kept = truncate_items(items, bound as usize, &mut rng);
        let w = (kept.len() as f64).sqrt().recip();
        for item in kept {
            hist.add(item, w);
        }
    }
    hist
}

/// Which descent policy updates the running histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Unit step toward the cutoff corner along the normalized gap direction.
    /// The policy with a valid contractivity proof.
    L2Descent,
    /// Greedy water-filling: maximize total mass added under the unit L2
    /// budget. NOT contractive; kept for counterexample replay and probing.
    L1Descent,
}

/// Running state of a policy-built histogram.
#[derive(Debug, Clone)]
pub struct PolicyState<K: Ord> {
    pub histogram: WeightedHistogram<K>,
    /// Cutoff: per-item weights never exceed this.
    pub cutoff_gamma: f64,
    /// Maximum items a single user may contribute.
    pub contribution_bound: u64,
}

impl<K: Ord + Clone> PolicyState<K> {
    pub fn new(cutoff_gamma: f64, contribution_bound: u64) -> Self {
        assert!(cutoff_gamma > 0.0, "cutoff must be positive");
        assert!(contribution_bound >= 1);
        Self {
            histogram: WeightedHistogram::new(),
            cutoff_gamma,
            contribution_bound,
        }
    }

    /// Greedy water-filling update: gaps `G[u] = Gamma - H[u]` over the user's
    /// items still below the cutoff; skip entirely if `||G|| <= 1`, otherwise
    /// add `min(G[u], lambda)` with `lambda` solving `sum min(G[u], lambda)^2 = 1`
    /// exactly by sorted-gap piecewise algebra.
    pub fn l1_descent_update(&mut self, user_items: &[K]) {
        assert!(
            user_items.len() as u64 <= self.contribution_bound,
            "contribution bound exceeded"
        );
        let gamma = self.cutoff_gamma;
        let open: Vec<(&K, f64)> = user_items
            .iter()
            .filter_map(|k| {
                let g = gamma - self.histogram.get(k);
                (g > 0.0).then_some((k, g))
            })
            .collect();
        if open.is_empty() {
            return;
        }
        let norm_sq: f64 = open.iter().map(|&(_, g)| g * g).sum();
        if norm_sq <= 1.0 {
            return;
        }
        let lambda = water_fill_lambda(open.iter().map(|&(_, g)| g));
        for (k, g) in open {
            self.histogram.add(k.clone(), g.min(lambda));
        }
    }

    /// Move the restricted histogram toward the cutoff corner by L2 distance
    /// `min(1, ||G||)` along `G/||G||`; when the gap vector is already within
    /// the unit ball the full gap is consumed and every item reaches the cutoff.
    pub fn l2_descent_update(&mut self, user_items: &[K]) {
        assert!(
            user_items.len() as u64 <= self.contribution_bound,
            "contribution bound exceeded"
        );
        let gamma = self.cutoff_gamma;
        let open: Vec<(&K, f64)> = user_items
            .iter()
            .filter_map(|k| {
                let g = gamma - self.histogram.get(k);
                (g > 0.0).then_some((k, g))
            })
            .collect();
        if open.is_empty() {
            return;
        }
        let norm: f64 = open.iter().map(|&(_, g)| g * g).sum::<f64>().sqrt();
        if norm <= 1.0 {
            for (k, _) in open {
                self.histogram.set(k.clone(), gamma);
            }
        } else {
            for (k, g) in open {
                self.histogram.add(k.clone(), g / norm);
            }
        }
    }

    pub fn update(&mut self, policy: Policy, user_items: &[K]) {
        match policy {
            Policy::L2Descent => self.l2_descent_update(user_items),
            Policy::L1Descent => self.l1_descent_update(user_items),
        }
    }
}

/// Solve `sum_u min(g_u, lambda)^2 = 1` for `lambda >= 0`, assuming
/// `sum g_u^2 > 1` and all `g_u > 0`. Sorted-gap piecewise closed form.
fn water_fill_lambda(gaps: impl Iterator<Item = f64>) -> f64 {
    let mut g: Vec<f64> = gaps.collect();
    g.sort_by(|a, b| a.partial_cmp(b).expect("gaps are finite"));
    let d = g.len();
    let mut prefix = 0.0f64;
    for t in 0..d {
        // With the t smallest gaps fully consumed, the remaining d-t items
        // each receive lambda_t.
        let lambda = ((1.0 - prefix).max(0.0) / (d - t) as f64).sqrt();
        if lambda <= g[t] {
            return lambda;
        }
        prefix += g[t] * g[t];
    }
    // Unreachable when sum g^2 > 1; return the boundary value defensively.
    ((1.0 - prefix).max(0.0)).sqrt()
}

/// Spectral norm of the water-filling update's Jacobian at a point where the
/// `gaps_at_cutoff` coordinates reach the cutoff and `free_count` coordinates
/// receive `lambda`: `1/sqrt(free_count * lambda^2) = 1/sqrt(1 - sum gaps^2)`.
///
/// The inputs must satisfy the defining constraint
/// `sum gaps^2 + free_count * lambda^2 = 1` to within 1e-9.
pub fn jacobian_spectral_norm(
    gaps_at_cutoff: &[f64],
    lambda: f64,
    free_count: usize,
) -> Result<f64> {
    if free_count == 0 {
        return Err(Error::Domain("free_count must be at least 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let gap_sq: f64 = gaps_at_cutoff.iter().map(|g| g * g).sum();
    let constraint = gap_sq + free_count as f64 * lambda * lambda;
    if (constraint - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "constraint sum(g^2) + m*lambda^2 = {constraint} != 1"
        )));
    }
    Ok((free_count as f64 * lambda * lambda).sqrt().recip())
}

/// The 3-item / 8-user instance on which the greedy policy expands the
/// neighboring-histogram distance past 1. Items are 0, 1, 2; cutoff 5;
/// contribution bound 3. The first user of the larger database is the extra one.
pub fn expansion_witness_instance() -> (Vec<Vec<u64>>, Vec<Vec<u64>>, f64, u64) {
    let d1: Vec<Vec<u64>> = vec![
        vec![0, 1, 2],
        vec![0, 1],
        vec![0, 1],
        vec![1, 2],
        vec![1, 2],
        vec![1, 2],
        vec![1, 2],
        vec![1, 2],
    ];
    let d2: Vec<Vec<u64>> = d1[1..].to_vec();
    (d1, d2, 5.0, 3)
}

/// Run `policy` over a pair of neighboring databases in the given shared order
/// and return the final histogram L2 distance.
pub fn neighboring_distance(
    policy: Policy,
    db1: &[Vec<u64>],
    db2: &[Vec<u64>],
    cutoff_gamma: f64,
    contribution_bound: u64,
) -> f64 {
    let mut s1 = PolicyState::new(cutoff_gamma, contribution_bound);
    let mut s2 = PolicyState::new(cutoff_gamma, contribution_bound);
    for items in db1 {
        s1.update(policy, items);
    }
    for items in db2 {
        s2.update(policy, items);
    }
    l2_diff(&s1.histogram, &s2.histogram)
}

/// Randomized search for expansion of the neighboring-histogram distance.
///
/// Each trial draws a shared user list plus one extra user (inserted at a
/// random position of the larger database), runs the policy over both
/// databases in the shared order, and records `||H1 - H2||_2`. Returns the
/// maximum over all trials; a contractive policy stays at or below 1.
///
/// For the greedy policy, trial 0 replays the known expansion witness and a
/// fraction of trials draws from the same near-cutoff family, so violations
/// above 1 are reachable. Trials run in parallel with per-trial derived seeds;
/// the result does not depend on the worker count.
pub fn contractivity_probe(policy: Policy, trials: u64, rng_seed: u64) -> f64 {
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            if trial == 0 && policy == Policy::L1Descent {
                let (d1, d2, gamma, bound) = expansion_witness_instance();
                return neighboring_distance(policy, &d1, &d2, gamma, bound);
            }
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(rng_seed, trial));
            let (d1, d2, gamma, bound) = random_neighboring_instance(&mut rng);
            neighboring_distance(policy, &d1, &d2, gamma, bound)
        })
        .reduce(|| 0.0, f64::max)
}

fn random_subset(rng: &mut impl Rng, universe: u64) -> Vec<u64> {
    let size = rng.gen_range(1..=universe);
    let mut items: Vec<u64> = (0..universe).collect();
    items.shuffle(rng);
    items.truncate(size as usize);
    items.sort_unstable();
    items
}

fn random_neighboring_instance(rng: &mut impl Rng) -> (Vec<Vec<u64>>, Vec<Vec<u64>>, f64, u64) {
    if rng.gen_bool(0.4) {
        // Near-cutoff family shaped like the expansion witness: a triple
        // extra user up front, then repeated overlapping pairs that drive
        // items close to the cutoff.
        let gamma = rng.gen_range(3.0..6.5);
        let extra = vec![0u64, 1, 2];
        let mut shared = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            shared.push(vec![0u64, 1]);
        }
        for _ in 0..rng.gen_range(3..=8) {
            shared.push(vec![1u64, 2]);
        }
        let mut d1 = vec![extra];
        d1.extend(shared.iter().cloned());
        return (d1, shared, gamma, 3);
    }
    let universe = rng.gen_range(2..=6u64);
    let gamma = rng.gen_range(1.5..8.0);
    let n_shared = rng.gen_range(2..=16usize);
    let shared: Vec<Vec<u64>> = (0..n_shared)
        .map(|_| random_subset(rng, universe))
        .collect();
    let extra = random_subset(rng, universe);
    let pos = rng.gen_range(0..=n_shared);
    let mut d1 = shared.clone();
    d1.insert(pos, extra);
    (d1, shared, gamma, universe)
}
