//! Frequency-pruned, heterogeneously thresholded n-gram extraction.
//!
//! Level 1 is a weighted-histogram set union over unigrams with a spillover
//! threshold. Each later level forms structural candidates from the previous
//! release, prunes them by margin (FIP), assigns per-item public thresholds
//! from previous-level margins (HT), and releases through a Gaussian mechanism.
//! Unobserved candidates are never materialized per item: they are grouped by
//! exact threshold value and sampled with an exact binomial, which gives the
//! same output distribution as drawing per-item noise densely.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_sigma, compose_sigma, rho1, rho_kgram_base};
use crate::data::{Corpus, TokenId};
use crate::error::{Error, Result};
use crate::histogram::{build_weighted_histogram, WeightedHistogram};
use crate::normal::{phi, phi_complement};
use crate::sampling::{derive_seed, gaussian_tail_sample, sample_binomial};

/// An ordered token sequence of length >= 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NGram {
    tokens: Box<[TokenId]>,
}

impl NGram {
    pub fn new(tokens: impl Into<Box<[TokenId]>>) -> Self {
        let tokens = tokens.into();
        assert!(!tokens.is_empty(), "n-grams have length at least 1");
        Self { tokens }
    }

    pub fn unigram(t: TokenId) -> Self {
        Self {
            tokens: Box::new([t]),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    /// First k-1 tokens; defined for length >= 2.
    pub fn prefix(&self) -> &[TokenId] {
        &self.tokens[..self.tokens.len() - 1]
    }

    /// Last k-1 tokens; defined for length >= 2.
    pub fn suffix(&self) -> &[TokenId] {
        &self.tokens[1..]
    }

    pub fn display(&self, corpus: &Corpus) -> String {
        self.tokens
            .iter()
            .map(|&t| corpus.token(t))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

// Allows set/map lookups keyed by token slices without allocating.
impl Borrow<[TokenId]> for NGram {
    fn borrow(&self) -> &[TokenId] {
        &self.tokens
    }
}

/// Distinct contiguous length-k subsequences of a token sequence.
pub fn extract_ngrams(text: &[TokenId], k: usize) -> BTreeSet<NGram> {
    assert!(k >= 1, "k must be at least 1");
    if text.len() < k {
        return BTreeSet::new();
    }
    text.windows(k).map(NGram::new).collect()
}

/// Union of every user's length-k grams: the ground truth for spurious
/// accounting (computed before any truncation).
pub fn true_ngrams(corpus: &Corpus, k: usize) -> BTreeSet<NGram> {
    let mut all = BTreeSet::new();
    for user in corpus.users() {
        all.extend(extract_ngrams(&user.tokens, k));
    }
    all
}

/// Lazy structural candidate stream for level k >= 2: every extension of a
/// released (k-1)-gram by a released unigram whose suffix (k-1)-gram was also
/// released. Never materialized; the candidate set at bigram level can reach
/// `|S_1|^2`.
pub fn structural_candidates<'a>(
    s_prev: &'a BTreeSet<NGram>,
    s_1: &'a BTreeSet<NGram>,
) -> impl Iterator<Item = NGram> + 'a {
    s_prev.iter().flat_map(move |p| {
        s_1.iter().filter_map(move |u| {
            let mut tokens = Vec::with_capacity(p.len() + 1);
            tokens.extend_from_slice(p.tokens());
            tokens.push(u.tokens()[0]);
            let w = NGram::new(tokens);
            s_prev.contains(w.suffix()).then_some(w)
        })
    })
}

/// Margin of a single released (k-1)-gram: its noisy value minus the previous
/// base threshold; lookups outside the map impute a zero margin.
fn constituent_margin(
    gram: &[TokenId],
    noisy_prev: &BTreeMap<NGram, f64>,
    rho_prev: f64,
    imputed: &mut u64,
) -> f64 {
    match noisy_prev.get(gram) {
        Some(&v) => v - rho_prev,
        None => {
            *imputed += 1;
            0.0
        }
    }
}

/// Margin of a candidate: the minimum of its prefix and suffix margins.
pub fn margin_of(
    w: &NGram,
    noisy_prev: &BTreeMap<NGram, f64>,
    rho_prev: f64,
    imputed: &mut u64,
) -> f64 {
    let pm = constituent_margin(w.prefix(), noisy_prev, rho_prev, imputed);
    let sm = constituent_margin(w.suffix(), noisy_prev, rho_prev, imputed);
    pm.min(sm)
}

/// Materialized margin map over a candidate collection.
pub fn compute_margins(
    candidates: impl IntoIterator<Item = NGram>,
    noisy_prev: &BTreeMap<NGram, f64>,
    rho_prev: f64,
) -> BTreeMap<NGram, f64> {
    let mut imputed = 0;
    candidates
        .into_iter()
        .map(|w| {
            let m = margin_of(&w, noisy_prev, rho_prev, &mut imputed);
            (w, m)
        })
        .collect()
}

/// Frequency-informed pruning: keep candidates with margin strictly above
/// `-m * sigma_prev`. `m = f64::INFINITY` disables pruning.
pub fn fip_prune(
    candidates: impl IntoIterator<Item = NGram>,
    margins: &BTreeMap<NGram, f64>,
    m: f64,
    sigma_prev: f64,
) -> BTreeSet<NGram> {
    assert!(m >= 0.0, "tolerance must be non-negative");
    candidates
        .into_iter()
        .filter(|w| fip_keeps(margins.get(w).copied().unwrap_or(0.0), m, sigma_prev))
        .collect()
}

fn fip_keeps(margin: f64, m: f64, sigma_prev: f64) -> bool {
    if m.is_infinite() {
        return true;
    }
    margin > -m * sigma_prev
}

/// Per-item threshold: `rho_base` minus a margin-proportional discount capped
/// at `rho_base / 2`. One canonical expression so equal margins always produce
/// bit-identical thresholds (exact-value grouping depends on this).
pub fn compute_tau(margin: f64, rho_base: f64, gamma: f64, c_bar: f64) -> f64 {
    let discount = (gamma * margin.max(0.0) / c_bar).min(rho_base / 2.0);
    rho_base - discount
}

/// Median of the positive margins; 1.0 when none exist.
pub fn median_positive_margin(margins: impl IntoIterator<Item = f64>) -> f64 {
    let mut pos: Vec<f64> = margins.into_iter().filter(|&m| m > 0.0).collect();
    if pos.is_empty() {
        return 1.0;
    }
    pos.sort_by(|a, b| a.partial_cmp(b).expect("margins are finite"));
    let n = pos.len();
    if n % 2 == 1 {
        pos[n / 2]
    } else {
        0.5 * (pos[n / 2 - 1] + pos[n / 2])
    }
}

/// Materialized heterogeneous thresholds for a candidate collection.
pub fn ht_thresholds(
    candidates: impl IntoIterator<Item = NGram>,
    margins: &BTreeMap<NGram, f64>,
    rho_base: f64,
    gamma: f64,
) -> BTreeMap<NGram, f64> {
    assert!((0.0..=1.0).contains(&gamma), "gamma must lie in [0,1]");
    assert!(rho_base >= 0.0, "rho_base must be non-negative");
    let c_bar = median_positive_margin(margins.values().copied());
    candidates
        .into_iter()
        .map(|w| {
            let m = margins.get(&w).copied().unwrap_or(0.0);
            (w, compute_tau(m, rho_base, gamma, c_bar))
        })
        .collect()
}

/// A released level: the output set plus the public byproducts the next level
/// consumes, and diagnostics against the ground truth.
#[derive(Debug, Clone)]
pub struct LevelRelease {
    pub level: u32,
    pub released: BTreeSet<NGram>,
    /// Noisy values over released-plus-observed items.
    pub noisy_values: BTreeMap<NGram, f64>,
    /// Per-item thresholds over released-plus-observed items.
    pub thresholds: BTreeMap<NGram, f64>,
    pub rho_base: f64,
    pub sigma: f64,
    pub candidate_count: u64,
    pub genuine_count: u64,
    pub spurious_count: u64,
    /// How many margin lookups fell outside the previous noisy map.
    pub imputed_margin_lookups: u64,
}

/// Full pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DpneConfig {
    /// Maximum n-gram length T.
    pub max_length: u32,
    /// Per-level contribution bounds, one per level.
    pub contribution_bounds: Vec<u64>,
    pub epsilon: f64,
    pub delta: f64,
    /// FIP tolerance m; infinity disables pruning.
    pub fip_tolerance: f64,
    /// HT discount factor gamma in [0,1]; 0 recovers uniform thresholds.
    pub ht_discount: f64,
    /// Target spurious fraction eta.
    pub spurious_fraction: f64,
    pub rng_seed: u64,
    /// Audit sanity mode: no noise, zero thresholds. Not private.
    #[serde(default)]
    pub broken_no_noise: bool,
}

impl DpneConfig {
    /// Defaults: T = 6, delta = e^-10, eta = 0.01, gamma = 0.3, m = 1.
    pub fn new(epsilon: f64, contribution_bound: u64) -> Self {
        Self {
            max_length: 6,
            contribution_bounds: vec![contribution_bound; 6],
            epsilon,
            delta: (-10.0f64).exp(),
            fip_tolerance: 1.0,
            ht_discount: 0.3,
            spurious_fraction: 0.01,
            rng_seed: 0,
            broken_no_noise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_length < 1 {
            return Err(Error::Config("max_length must be at least 1".into()));
        }
        if self.contribution_bounds.len() != self.max_length as usize {
            return Err(Error::Config(format!(
                "need {} contribution bounds, got {}",
                self.max_length,
                self.contribution_bounds.len()
            )));
        }
        if self.contribution_bounds.iter().any(|&b| b < 1) {
            return Err(Error::Config(
                "contribution bounds must be at least 1".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config("delta must lie in (0,1)".into()));
        }
        if !(self.fip_tolerance >= 0.0) {
            return Err(Error::Config("fip tolerance must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.ht_discount) {
            return Err(Error::Config("ht discount must lie in [0,1]".into()));
        }
        if !(self.spurious_fraction > 0.0) {
            return Err(Error::Config("spurious fraction must be positive".into()));
        }
        Ok(())
    }
}

/// The mechanism output of one level: released items and their noisy values.
#[derive(Debug, Clone, Default)]
pub struct Release {
    pub released: BTreeSet<NGram>,
    pub noisy_values: BTreeMap<NGram, f64>,
}

fn threshold_crossed(noisy: f64, tau: f64) -> bool {
    noisy > tau
}

/// Release probability of an unobserved item: `P(Z > tau)` for
/// `Z ~ N(0, sigma^2)`, with the noiseless limit at `sigma = 0`.
fn unobserved_pass_probability(tau: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        if 0.0 > tau {
            1.0
        } else {
            0.0
        }
    } else {
        phi(-tau / sigma)
    }
}

/// Core level mechanism over a re-streamable candidate collection.
///
/// Observed items get per-item Gaussian noise and a threshold test. Unobserved
/// items are grouped by bit-identical threshold; each group of size n releases
/// `Binomial(n, P(Z > tau))` members chosen uniformly (selection sampling over
/// the stream), with noisy values drawn from the conditional upper tail.
fn release_level_streaming<I, F, T>(
    candidates: F,
    hist: &BTreeMap<NGram, f64>,
    tau_of: T,
    sigma: f64,
    rng: &mut ChaCha12Rng,
) -> Release
where
    I: Iterator<Item = NGram>,
    F: Fn() -> I,
    T: Fn(&NGram) -> f64,
{
    let mut out = Release::default();

    // Observed pass: key order for determinism.
    for (w, &h) in hist {
        let tau = tau_of(w);
        let noisy = if sigma == 0.0 {
            h
        } else {
            h + sigma * standard_normal(rng)
        };
        out.noisy_values.insert(w.clone(), noisy);
        if threshold_crossed(noisy, tau) {
            out.released.insert(w.clone());
        }
    }

    // Unobserved, pass 1: group sizes by exact threshold bits.
    let mut groups: BTreeMap<u64, u64> = BTreeMap::new();
    for w in candidates() {
        if hist.contains_key(&w) {
            continue;
        }
        *groups.entry(tau_of(&w).to_bits()).or_insert(0) += 1;
    }
    if groups.is_empty() {
        return out;
    }

    // Draw per-group release counts.
    let mut to_release: BTreeMap<u64, u64> = BTreeMap::new();
    for (&bits, &n) in &groups {
        let tau = f64::from_bits(bits);
        let p = unobserved_pass_probability(tau, sigma);
        let x = sample_binomial(n, p, rng);
        if x > 0 {
            to_release.insert(bits, x);
        }
    }
    if to_release.is_empty() {
        return out;
    }

    // Unobserved, pass 2: uniform without-replacement selection per group,
    // walking the stream in the same deterministic order.
    let mut remaining_items = groups;
    for w in candidates() {
        if hist.contains_key(&w) {
            continue;
        }
        let bits = tau_of(&w).to_bits();
        let r = remaining_items
            .get_mut(&bits)
            .expect("group counted in pass 1");
        let s = to_release.get_mut(&bits);
        if let Some(s) = s {
            if *s > 0 && rng.gen::<f64>() * (*r as f64) < *s as f64 {
                let tau = f64::from_bits(bits);
                let noisy = if sigma == 0.0 {
                    0.0
                } else {
                    gaussian_tail_sample(tau, sigma, rng)
                };
                out.noisy_values.insert(w.clone(), noisy);
                out.released.insert(w);
                *s -= 1;
            }
        }
        *r -= 1;
    }
    out
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Sparse level mechanism over a materialized candidate set (the keys of the
/// threshold map). Fails if the histogram mentions an item with no threshold.
pub fn run_level(
    hist: &BTreeMap<NGram, f64>,
    tau: &BTreeMap<NGram, f64>,
    sigma: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Release> {
    for w in hist.keys() {
        if !tau.contains_key(w) {
            return Err(Error::Contract(format!(
                "histogram item {:?} has no threshold",
                w.tokens()
            )));
        }
    }
    Ok(release_level_streaming(
        || tau.keys().cloned(),
        hist,
        |w| *tau.get(w).expect("candidate threshold"),
        sigma,
        rng,
    ))
}

/// Dense reference mechanism: one Gaussian draw per candidate, observed or
/// not. The distributional oracle for [`run_level`]; only usable when the
/// candidate set is small enough to materialize.
pub fn dense_reference_level(
    candidates: &[NGram],
    hist: &BTreeMap<NGram, f64>,
    tau: &BTreeMap<NGram, f64>,
    sigma: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Release> {
    let mut out = Release::default();
    for w in candidates {
        let tau_w = *tau.get(w).ok_or_else(|| {
            Error::Contract(format!("candidate {:?} has no threshold", w.tokens()))
        })?;
        let h = hist.get(w).copied().unwrap_or(0.0);
        let noisy = if sigma == 0.0 {
            h
        } else {
            h + sigma * standard_normal(rng)
        };
        if hist.contains_key(w) || threshold_crossed(noisy, tau_w) {
            out.noisy_values.insert(w.clone(), noisy);
        }
        if threshold_crossed(noisy, tau_w) {
            out.released.insert(w.clone());
        }
    }
    Ok(out)
}

/// Outcome of a full pipeline run.
#[derive(Debug, Clone)]
pub struct DpneOutcome {
    pub levels: Vec<LevelRelease>,
    pub sigma_star: f64,
    pub sigma_per_level: f64,
    pub rho1: f64,
}

impl DpneOutcome {
    pub fn total_released(&self) -> u64 {
        self.levels.iter().map(|l| l.released.len() as u64).sum()
    }

    pub fn released_sets(&self) -> Vec<&BTreeSet<NGram>> {
        self.levels.iter().map(|l| &l.released).collect()
    }
}

/// Run the full multi-level extraction over a corpus.
pub fn run_afp_dpne(corpus: &Corpus, config: &DpneConfig) -> Result<DpneOutcome> {
    config.validate()?;
    let t_levels = config.max_length;
    let (sigma_star, sigma_k) = if config.broken_no_noise {
        (0.0, 0.0)
    } else {
        let s = calibrate_sigma(config.epsilon, config.delta / 2.0, 1.0)?;
        (s, compose_sigma(s, t_levels))
    };
    let rho_1 = if config.broken_no_noise {
        0.0
    } else {
        rho1(sigma_k, config.delta / 2.0, config.contribution_bounds[0])?
    };

    let mut levels: Vec<LevelRelease> = Vec::with_capacity(t_levels as usize);

    // Level 1: weighted-histogram set union over unigram supports.
    let unigram_sets: Vec<Vec<NGram>> = corpus
        .users()
        .iter()
        .map(|u| {
            let mut v = u.tokens.clone();
            v.sort_unstable();
            v.dedup();
            v.into_iter().map(NGram::unigram).collect()
        })
        .collect();
    let hist1 = weighted_hist_to_map(build_weighted_histogram(
        &unigram_sets,
        config.contribution_bounds[0],
        derive_seed(config.rng_seed, 2_000),
    ));
    let mut rng1 = ChaCha12Rng::seed_from_u64(derive_seed(config.rng_seed, 1_001));
    let mut level1 = Release::default();
    for (w, &h) in &hist1 {
        let noisy = if sigma_k == 0.0 {
            h
        } else {
            h + sigma_k * standard_normal(&mut rng1)
        };
        level1.noisy_values.insert(w.clone(), noisy);
        if threshold_crossed(noisy, rho_1) {
            level1.released.insert(w.clone());
        }
    }
    let thresholds1: BTreeMap<NGram, f64> = level1
        .noisy_values
        .keys()
        .map(|w| (w.clone(), rho_1))
        .collect();
    levels.push(LevelRelease {
        level: 1,
        genuine_count: level1.released.len() as u64,
        spurious_count: 0,
        candidate_count: hist1.len() as u64,
        imputed_margin_lookups: 0,
        rho_base: rho_1,
        sigma: sigma_k,
        released: level1.released,
        noisy_values: level1.noisy_values,
        thresholds: thresholds1,
    });

    let s_1: BTreeSet<NGram> = levels[0].released.clone();

    for k in 2..=t_levels {
        let prev = &levels[(k - 2) as usize];
        let s_prev = &prev.released;
        let noisy_prev = &prev.noisy_values;
        let rho_prev = prev.rho_base;
        let delta_k = config.contribution_bounds[(k - 1) as usize];
        let mut imputed = 0u64;

        if s_prev.is_empty() || s_1.is_empty() {
            levels.push(empty_level(k, sigma_k));
            continue;
        }

        // Pass over the lazy candidate stream: count survivors of FIP and
        // collect positive margins for the median. Thresholds are fully
        // determined by level k-1 outputs before any level-k data is touched.
        let m_tol = config.fip_tolerance;
        let mut candidate_count = 0u64;
        let mut positive_margins: Vec<f64> = Vec::new();
        for w in structural_candidates(s_prev, &s_1) {
            let margin = margin_of(&w, noisy_prev, rho_prev, &mut imputed);
            if !fip_keeps(margin, m_tol, sigma_k) {
                continue;
            }
            candidate_count += 1;
            if margin > 0.0 {
                positive_margins.push(margin);
            }
        }
        if candidate_count == 0 {
            levels.push(empty_level(k, sigma_k));
            continue;
        }

        let rho_base = if config.broken_no_noise {
            0.0
        } else {
            rho_kgram_base(
                sigma_k,
                config.spurious_fraction,
                s_prev.len() as u64,
                candidate_count,
            )?
        };
        let c_bar = median_positive_margin(positive_margins);
        let gamma = config.ht_discount;

        // tau as a pure function of level k-1 public outputs.
        let tau_of = |w: &NGram| {
            let mut scratch = 0u64;
            let margin = margin_of(w, noisy_prev, rho_prev, &mut scratch);
            compute_tau(margin, rho_base, gamma, c_bar)
        };

        // Build the level histogram: per user, distinct k-grams restricted to
        // surviving candidates, truncated to the level bound.
        let keeps = |w: &NGram| -> bool {
            if !s_1.contains(&w.tokens()[w.len() - 1..]) {
                return false;
            }
            if !s_prev.contains(w.prefix()) || !s_prev.contains(w.suffix()) {
                return false;
            }
            let mut scratch = 0u64;
            let margin = margin_of(w, noisy_prev, rho_prev, &mut scratch);
            fip_keeps(margin, m_tol, sigma_k)
        };
        let user_kgrams: Vec<Vec<NGram>> = corpus
            .users()
            .iter()
            .map(|u| {
                extract_ngrams(&u.tokens, k as usize)
                    .into_iter()
                    .filter(|w| keeps(w))
                    .collect::<Vec<_>>()
            })
            .collect();
        let hist_k = weighted_hist_to_map(build_weighted_histogram(
            &user_kgrams,
            delta_k,
            derive_seed(config.rng_seed, 2_000 + k as u64),
        ));

        let mut rng_k = ChaCha12Rng::seed_from_u64(derive_seed(config.rng_seed, 1_000 + k as u64));
        let release = release_level_streaming(
            || {
                structural_candidates(s_prev, &s_1).filter(|w| {
                    let mut scratch = 0u64;
                    let margin = margin_of(w, noisy_prev, rho_prev, &mut scratch);
                    fip_keeps(margin, m_tol, sigma_k)
                })
            },
            &hist_k,
            tau_of,
            sigma_k,
            &mut rng_k,
        );

        let truth = true_ngrams(corpus, k as usize);
        let genuine = release
            .released
            .iter()
            .filter(|w| truth.contains(*w))
            .count() as u64;
        let spurious = release.released.len() as u64 - genuine;
        let thresholds: BTreeMap<NGram, f64> = release
            .noisy_values
            .keys()
            .map(|w| (w.clone(), tau_of(w)))
            .collect();
        levels.push(LevelRelease {
            level: k,
            genuine_count: genuine,
            spurious_count: spurious,
            candidate_count,
            imputed_margin_lookups: imputed,
            rho_base,
            sigma: sigma_k,
            released: release.released,
            noisy_values: release.noisy_values,
            thresholds,
        });
    }

    Ok(DpneOutcome {
        levels,
        sigma_star,
        sigma_per_level: sigma_k,
        rho1: rho_1,
    })
}

fn empty_level(k: u32, sigma: f64) -> LevelRelease {
    LevelRelease {
        level: k,
        released: BTreeSet::new(),
        noisy_values: BTreeMap::new(),
        thresholds: BTreeMap::new(),
        rho_base: 0.0,
        sigma,
        candidate_count: 0,
        genuine_count: 0,
        spurious_count: 0,
        imputed_margin_lookups: 0,
    }
}

fn weighted_hist_to_map(h: WeightedHistogram<NGram>) -> BTreeMap<NGram, f64> {
    h.iter().map(|(k, v)| (k.clone(), v)).collect()
}

/// Privacy-loss analysis of thresholding on current-level support: the item's
/// release probabilities with and without its sole contributing user, under a
/// support-conditioned threshold (`rho/2` if observed, `rho` if not) versus a
/// uniform threshold.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdaptiveRatio {
    pub p_in: f64,
    pub p_out: f64,
    pub ratio: f64,
    pub uniform_ratio: f64,
}

/// Compute the support-adaptive privacy-loss amplification at the given noise
/// scale, base threshold, and contribution bound.
pub fn adaptive_counterexample_ratio(sigma: f64, rho: f64, delta0: u64) -> AdaptiveRatio {
    assert!(sigma > 0.0 && rho > 0.0 && delta0 >= 1);
    let w = (delta0 as f64).sqrt().recip();
    let p_in = phi((w - rho / 2.0) / sigma);
    let p_out = phi_complement(rho / sigma);
    let p_in_uniform = phi((w - rho) / sigma);
    AdaptiveRatio {
        p_in,
        p_out,
        ratio: p_in / p_out,
        uniform_ratio: p_in_uniform / p_out,
    }
}
