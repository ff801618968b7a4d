//! One-run empirical privacy audit: plant canary users with coin-flip
//! inclusion, score each canary by n-gram overlap with the released sets,
//! guess membership from the score ranking, and bound the correct-guess count
//! with the binomial envelope `beta + 2 m delta alpha`, where
//! `beta = P[Bin(r, e^eps/(e^eps+1)) >= v]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::data::{Corpus, TokenId};
use crate::dpne::{extract_ngrams, run_afp_dpne, DpneConfig, NGram};
use crate::error::{Error, Result};
use crate::sampling::derive_seed;

/// Token length of each synthetic canary document.
const CANARY_LEN: usize = 12;

/// Outcome of an aggregated audit.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    /// Total canaries planted across runs.
    pub m: u64,
    pub runs: u64,
    pub inclusion_bits: Vec<bool>,
    pub scores: Vec<f64>,
    /// (canary index, guessed-included) pairs across runs.
    pub guesses: Vec<(usize, bool)>,
    pub correct: u64,
    pub total_guesses: u64,
    pub p_value: f64,
    /// True when the p-value fails to fall below 0.05.
    pub pass: bool,
}

/// Plant `m` canary users, each included independently with probability 1/2.
///
/// Every canary is a sequence of fresh tokens absent from the base vocabulary,
/// so an excluded canary can never overlap the mechanism output. Returns the
/// corpus with the included canaries appended, the inclusion bits, and all m
/// canary token sequences (token ids are valid for the returned corpus).
pub fn plant_canaries(
    corpus: &Corpus,
    m: u64,
    rng_seed: u64,
) -> Result<(Corpus, Vec<bool>, Vec<Vec<TokenId>>)> {
    if m < 1 {
        return Err(Error::Config("canary count must be at least 1".into()));
    }
    let mut planted = corpus.clone();
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let mut bits = Vec::with_capacity(m as usize);
    let mut texts = Vec::with_capacity(m as usize);
    for i in 0..m {
        let mut tokens = Vec::with_capacity(CANARY_LEN);
        for j in 0..CANARY_LEN {
            let mut name = format!("__canary_{i}_{j}__");
            let mut salt = 0u64;
            while planted.lookup(&name).is_some() {
                salt += 1;
                name = format!("__canary_{i}_{j}_{salt}__");
            }
            tokens.push(planted.intern(&name));
        }
        let included = rng.gen_bool(0.5);
        if included {
            planted.push_user(format!("__canary_user_{i}__"), tokens.clone())?;
        }
        bits.push(included);
        texts.push(tokens);
    }
    Ok((planted, bits, texts))
}

/// Score each canary: how many of its true n-grams (all lengths 1..=T) appear
/// in the released sets.
pub fn score_canaries(
    released_per_level: &[&std::collections::BTreeSet<NGram>],
    canary_texts: &[Vec<TokenId>],
) -> Vec<f64> {
    canary_texts
        .iter()
        .map(|text| {
            let mut score = 0usize;
            for (k, released) in released_per_level.iter().enumerate() {
                if released.is_empty() {
                    continue;
                }
                score += extract_ngrams(text, k + 1)
                    .iter()
                    .filter(|w| released.contains(*w))
                    .count();
            }
            score as f64
        })
        .collect()
}

/// Rank canaries by score (ties broken by canary index) and guess the top
/// r/2 as included, the bottom r/2 as excluded. `r` must be even and at most
/// the canary count.
pub fn score_and_guess(scores: &[f64], guess_count: usize) -> Result<Vec<(usize, bool)>> {
    let m = scores.len();
    if guess_count > m {
        return Err(Error::Config(format!(
            "cannot make {guess_count} guesses over {m} canaries"
        )));
    }
    if guess_count % 2 != 0 {
        return Err(Error::Config(
            "guess count must be even (top half / bottom half)".into(),
        ));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let half = guess_count / 2;
    let mut guesses = Vec::with_capacity(guess_count);
    for &i in order.iter().take(half) {
        guesses.push((i, true));
    }
    for &i in order.iter().rev().take(half) {
        guesses.push((i, false));
    }
    Ok(guesses)
}

/// Exact binomial upper tail `P[Bin(r, p) >= v]` by log-space term summation.
pub fn binomial_upper_tail(v: u64, r: u64, p: f64) -> f64 {
    if v == 0 {
        return 1.0;
    }
    if v > r {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ln_fact_r = ln_gamma(r as f64 + 1.0);
    let mut total = 0.0;
    for k in v..=r {
        let ln_term = ln_fact_r - ln_gamma(k as f64 + 1.0) - ln_gamma((r - k) as f64 + 1.0)
            + k as f64 * ln_p
            + (r - k) as f64 * ln_q;
        total += ln_term.exp();
    }
    total.min(1.0)
}

/// Audit p-value with the conservative default `alpha = 1`.
pub fn audit_pvalue(correct: u64, total: u64, epsilon: f64, delta: f64, m: u64) -> f64 {
    audit_pvalue_with_alpha(correct, total, epsilon, delta, m, 1.0)
}

/// `beta + 2 m delta alpha`, capped to [0, 1], with
/// `beta = P[Bin(total, e^eps/(e^eps+1)) >= correct]` computed exactly.
pub fn audit_pvalue_with_alpha(
    correct: u64,
    total: u64,
    epsilon: f64,
    delta: f64,
    m: u64,
    alpha: f64,
) -> f64 {
    assert!(correct <= total, "correct guesses cannot exceed total");
    let p = 1.0 / (1.0 + (-epsilon).exp());
    let beta = binomial_upper_tail(correct, total, p);
    (beta + 2.0 * m as f64 * delta * alpha).min(1.0)
}

/// Run the full audit: `runs` independent plant-run-score rounds over the base
/// corpus, aggregated into one envelope test at significance 0.05. Each round
/// guesses `m/2` canaries (m must be even).
pub fn run_audit(
    corpus: &Corpus,
    dpne_config: &DpneConfig,
    m: u64,
    runs: u64,
    rng_seed: u64,
) -> Result<AuditRecord> {
    if runs < 1 {
        return Err(Error::Config("need at least one audit run".into()));
    }
    if m % 2 != 0 {
        return Err(Error::Config("canary count must be even".into()));
    }
    let guess_count = (m / 2) as usize;
    let mut all_bits = Vec::new();
    let mut all_scores = Vec::new();
    let mut all_guesses = Vec::new();
    let mut correct = 0u64;
    let mut total = 0u64;
    for run in 0..runs {
        let (planted, bits, texts) =
            plant_canaries(corpus, m, derive_seed(rng_seed, 0x4000 + run))?;
        let config = DpneConfig {
            rng_seed: derive_seed(rng_seed, 0x8000 + run),
            ..dpne_config.clone()
        };
        let outcome = run_afp_dpne(&planted, &config)?;
        let released = outcome.released_sets();
        let scores = score_canaries(&released, &texts);
        let guesses = score_and_guess(&scores, guess_count)?;
        let offset = all_bits.len();
        for &(i, guessed_included) in &guesses {
            if bits[i] == guessed_included {
                correct += 1;
            }
            total += 1;
            all_guesses.push((offset + i, guessed_included));
        }
        all_bits.extend(bits);
        all_scores.extend(scores);
    }
    let p_value = audit_pvalue(
        correct,
        total,
        dpne_config.epsilon,
        dpne_config.delta,
        m * runs,
    );
    Ok(AuditRecord {
        m: m * runs,
        runs,
        inclusion_bits: all_bits,
        scores: all_scores,
        guesses: all_guesses,
        correct,
        total_guesses: total,
        p_value,
        pass: p_value >= 0.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, CorpusKind, GenKnobs};

    fn small_corpus() -> Corpus {
        gen_synthetic(CorpusKind::Zipf, 150, 60, 77, &GenKnobs::default()).unwrap()
    }

    #[test]
    fn plant_rejects_zero() {
        assert!(plant_canaries(&small_corpus(), 0, 1).is_err());
    }

    #[test]
    fn plant_inclusion_near_half() {
        let (_, bits, texts) = plant_canaries(&small_corpus(), 200, 5).unwrap();
        let included = bits.iter().filter(|&&b| b).count() as f64;
        // Binomial(200, 1/2): mean 100, sd sqrt(50)
        assert!(
            (included - 100.0).abs() <= 3.0 * 50f64.sqrt(),
            "included {included}"
        );
        assert_eq!(texts.len(), 200);
    }

    #[test]
    fn canaries_are_out_of_vocabulary() {
        let base = small_corpus();
        let base_vocab = base.vocab_size();
        let (planted, _, texts) = plant_canaries(&base, 10, 5).unwrap();
        for text in &texts {
            for &t in text {
                assert!(
                    t as usize >= base_vocab,
                    "canary token {} collides with base vocab",
                    planted.token(t)
                );
            }
        }
    }

    #[test]
    fn excluded_canaries_score_zero_against_base_run() {
        let base = small_corpus();
        let (planted, bits, texts) = plant_canaries(&base, 20, 9).unwrap();
        // Run the mechanism on the BASE corpus only (no canaries at all);
        // disjoint support forces zero overlap for every canary.
        let mut config = DpneConfig::new(4.0, 50);
        config.max_length = 3;
        config.contribution_bounds = vec![50; 3];
        config.rng_seed = 1;
        let out = run_afp_dpne(&base, &config).unwrap();
        let scores = score_canaries(&out.released_sets(), &texts);
        for (i, s) in scores.iter().enumerate() {
            assert_eq!(*s, 0.0, "canary {i} (included={}) scored {s}", bits[i]);
        }
        let _ = planted;
    }

    #[test]
    fn guesses_break_ties_by_index() {
        let scores = vec![1.0, 1.0, 1.0, 1.0];
        let guesses = score_and_guess(&scores, 4).unwrap();
        assert_eq!(guesses, vec![(0, true), (1, true), (3, false), (2, false)]);
    }

    #[test]
    fn top_scorer_guessed_included() {
        let scores = vec![0.0, 50.0, 0.0];
        let guesses = score_and_guess(&scores, 2).unwrap();
        assert!(guesses.contains(&(1, true)));
    }

    #[test]
    fn guess_count_validation() {
        assert!(score_and_guess(&[1.0, 2.0], 4).is_err());
        assert!(score_and_guess(&[1.0, 2.0, 3.0], 1).is_err());
    }

    #[test]
    fn pvalue_symmetric_binomial_at_eps_zero() {
        let p = audit_pvalue(50, 100, 1e-300, 1e-12, 10);
        assert!(p >= 0.5, "got {p}");
    }

    #[test]
    fn pvalue_full_tail_capped_at_one() {
        assert_eq!(audit_pvalue(0, 100, 4.0, (-10.0f64).exp(), 200), 1.0);
    }

    #[test]
    fn pvalue_monotone_in_correct_count() {
        let mut prev = f64::INFINITY;
        for v in 0..=100u64 {
            let p = audit_pvalue(v, 100, 4.0, (-10.0f64).exp(), 200);
            assert!(p <= prev + 1e-15, "not monotone at v={v}");
            prev = p;
        }
    }

    #[test]
    fn envelope_allows_high_correct_fraction_at_eps4() {
        // The largest v/r that keeps p >= 0.05 sits near e^4/(e^4+1) ~ 0.982.
        let (r, m) = (100u64, 200u64);
        let delta = (-10.0f64).exp();
        let mut max_fraction = 0.0;
        for v in 0..=r {
            if audit_pvalue(v, r, 4.0, delta, m) >= 0.05 {
                max_fraction = v as f64 / r as f64;
            }
        }
        assert!(
            (max_fraction - 0.982).abs() < 0.02,
            "max allowed fraction {max_fraction}"
        );
    }

    #[test]
    fn broken_mode_audit_is_perfectly_correct() {
        let base = small_corpus();
        let mut config = DpneConfig::new(4.0, 50);
        config.max_length = 3;
        config.contribution_bounds = vec![50; 3];
        config.broken_no_noise = true;
        let record = run_audit(&base, &config, 20, 1, 31).unwrap();
        assert_eq!(
            record.correct, record.total_guesses,
            "broken run must be fully guessable"
        );
        let fraction = record.correct as f64 / record.total_guesses as f64;
        assert_eq!(fraction, 1.0);
    }
}
