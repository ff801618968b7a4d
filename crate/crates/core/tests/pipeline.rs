//! Cross-module integration tests: pipeline invariants, the exact-tail oracle
//! for the audit envelope, and serialization properties.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

use dpgram::audit::binomial_upper_tail;
use dpgram::data::{gen_synthetic, load_corpus, save_corpus, Corpus, CorpusKind, GenKnobs};
use dpgram::dpne::{
    compute_margins, extract_ngrams, ht_thresholds, run_afp_dpne, true_ngrams, DpneConfig, NGram,
};

// ---------------------------------------------------------------------------
// Audit envelope: exact-rational oracle for the binomial tail
// ---------------------------------------------------------------------------

fn rational_upper_tail(v: u64, r: u64, p: f64) -> BigRational {
    let p = BigRational::from_float(p).expect("finite probability");
    let q = BigRational::one() - p.clone();
    let mut tail = BigRational::zero();
    // running binomial coefficient C(r, k)
    let mut coeff = BigInt::one();
    let mut pk = BigRational::one(); // p^k
    let mut terms: Vec<(BigInt, BigRational)> = Vec::new();
    for k in 0..=r {
        terms.push((coeff.clone(), pk.clone()));
        coeff = coeff * BigInt::from(r - k) / BigInt::from(k + 1);
        pk *= p.clone();
    }
    for k in v..=r {
        let (c, pk) = &terms[k as usize];
        let qk = pow_rational(&q, (r - k) as usize);
        tail += BigRational::from(c.clone()) * pk * qk;
    }
    tail
}

fn pow_rational(x: &BigRational, n: usize) -> BigRational {
    let mut acc = BigRational::one();
    let mut base = x.clone();
    let mut n = n;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base.clone();
        }
        base = base.clone() * base;
        n >>= 1;
    }
    acc
}

#[test]
fn binomial_tail_matches_big_rational_oracle() {
    let p = (4.0f64).exp() / (1.0 + (4.0f64).exp());
    for &(v, r) in &[
        (100u64, 100u64),
        (90, 100),
        (161, 300),
        (294, 300),
        (1, 300),
        (150, 300),
    ] {
        let fast = binomial_upper_tail(v, r, p);
        let exact = rational_upper_tail(v, r, p).to_f64().expect("fits in f64");
        let rel = ((fast - exact) / exact).abs();
        assert!(rel < 1e-9, "v={v} r={r}: {fast} vs {exact} (rel {rel})");
    }
    // Also exercise a small-p case.
    let fast = binomial_upper_tail(3, 50, 0.01);
    let exact = rational_upper_tail(3, 50, 0.01).to_f64().unwrap();
    assert!(((fast - exact) / exact).abs() < 1e-9);
}

// ---------------------------------------------------------------------------
// Pipeline invariants
// ---------------------------------------------------------------------------

#[test]
fn level1_subset_of_support_and_spurious_only_above() {
    let corpus = gen_synthetic(CorpusKind::Zipf, 800, 80, 13, &GenKnobs::default()).unwrap();
    let config = DpneConfig {
        rng_seed: 3,
        ..DpneConfig::new(4.0, 40)
    };
    let out = run_afp_dpne(&corpus, &config).unwrap();
    let unigram_truth = true_ngrams(&corpus, 1);
    assert!(out.levels[0].released.is_subset(&unigram_truth));
    assert_eq!(out.levels[0].spurious_count, 0);
    for level in &out.levels[1..] {
        let truth = true_ngrams(&corpus, level.level as usize);
        let genuine = level.released.intersection(&truth).count() as u64;
        assert_eq!(genuine, level.genuine_count);
        assert_eq!(level.released.len() as u64 - genuine, level.spurious_count);
    }
}

#[test]
fn thresholds_pure_function_of_previous_level() {
    // Recomputing tau from the same previous-level outputs must give
    // bit-identical values regardless of candidate iteration order.
    let mut noisy = BTreeMap::new();
    for i in 0..40u32 {
        noisy.insert(NGram::new(vec![i]), 10.0 + (i as f64 * 0.37).sin() * 3.0);
    }
    let rho_prev = 10.0;
    let cands: Vec<NGram> = (0..40u32)
        .flat_map(|a| (0..40u32).map(move |b| NGram::new(vec![a, b])))
        .collect();
    let margins = compute_margins(cands.iter().cloned(), &noisy, rho_prev);
    let forward = ht_thresholds(cands.iter().cloned(), &margins, 8.0, 0.3);
    let reversed = ht_thresholds(cands.iter().rev().cloned(), &margins, 8.0, 0.3);
    assert_eq!(forward.len(), reversed.len());
    for (w, tau) in &forward {
        assert_eq!(
            tau.to_bits(),
            reversed[w].to_bits(),
            "tau bits differ for {:?}",
            w.tokens()
        );
    }
}

#[test]
fn ground_truth_index_matches_naive_recount() {
    let corpus = gen_synthetic(CorpusKind::Clustered, 60, 50, 17, &GenKnobs::default()).unwrap();
    for k in 1..=4usize {
        let fast = true_ngrams(&corpus, k);
        let mut naive = std::collections::BTreeSet::new();
        for user in corpus.users() {
            for window in user.tokens.windows(k) {
                naive.insert(NGram::new(window.to_vec()));
            }
        }
        assert_eq!(fast, naive, "k={k}");
    }
}

#[test]
fn imputation_never_fires_on_clean_pipeline() {
    // Structural candidates only reference released grams, and every released
    // gram carries a noisy value, so the defensive imputation path should
    // stay cold on a normal run.
    let corpus = gen_synthetic(CorpusKind::Zipf, 800, 60, 5, &GenKnobs::default()).unwrap();
    let config = DpneConfig {
        rng_seed: 9,
        ..DpneConfig::new(4.0, 40)
    };
    let out = run_afp_dpne(&corpus, &config).unwrap();
    for level in &out.levels {
        assert_eq!(level.imputed_margin_lookups, 0, "level {}", level.level);
    }
}

#[test]
fn heavier_discount_never_shrinks_release_count_on_average() {
    // Paired seeds, gamma = 0.3 vs gamma = 0: the discounted run should win
    // in nearly every pair (a smaller replica of the acceptance gate).
    let mut wins = 0;
    for seed in 100..105u64 {
        let corpus =
            gen_synthetic(CorpusKind::Zipf, 1_500, 300, seed, &GenKnobs::default()).unwrap();
        let afp = DpneConfig {
            rng_seed: seed,
            ..DpneConfig::new(4.0, 100)
        };
        let base = DpneConfig {
            ht_discount: 0.0,
            ..afp.clone()
        };
        let a = run_afp_dpne(&corpus, &afp).unwrap().total_released();
        let b = run_afp_dpne(&corpus, &base).unwrap().total_released();
        if a >= b {
            wins += 1;
        }
    }
    assert!(wins >= 4, "discounted runs won only {wins}/5 pairs");
}

// ---------------------------------------------------------------------------
// Property tests
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_round_trip_arbitrary_tokens(
        users in prop::collection::vec(
            prop::collection::vec("[a-z0-9 _#\\-]{1,12}", 0..20),
            0..12,
        )
    ) {
        let mut corpus = Corpus::new();
        for (i, tokens) in users.iter().enumerate() {
            let ids: Vec<u32> = tokens.iter().map(|t| corpus.intern(t)).collect();
            corpus.push_user(format!("user-{i}"), ids).unwrap();
        }
        let dir = std::env::temp_dir().join(format!("dpgram-prop-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("prop-{}.ndjson", rand::random::<u64>()));
        save_corpus(&corpus, &path).unwrap();
        let back = load_corpus(&path).unwrap();
        std::fs::remove_file(&path).ok();
        prop_assert_eq!(back.n_users(), corpus.n_users());
        for (a, b) in corpus.users().iter().zip(back.users()) {
            prop_assert_eq!(&a.user_id, &b.user_id);
            let sa: Vec<&str> = a.tokens.iter().map(|&t| corpus.token(t)).collect();
            let sb: Vec<&str> = b.tokens.iter().map(|&t| back.token(t)).collect();
            prop_assert_eq!(sa, sb);
        }
    }

    #[test]
    fn extract_ngrams_counts_bounded(
        text in prop::collection::vec(0u32..50, 0..60),
        k in 1usize..6,
    ) {
        let grams = extract_ngrams(&text, k);
        let max = text.len().saturating_sub(k - 1);
        prop_assert!(grams.len() <= max);
        for g in &grams {
            prop_assert_eq!(g.len(), k);
        }
    }

    #[test]
    fn margins_never_exceed_constituents(
        prefix_margin in -5.0f64..5.0,
        suffix_margin in -5.0f64..5.0,
    ) {
        let mut noisy = BTreeMap::new();
        let rho = 10.0;
        noisy.insert(NGram::new(vec![0u32]), rho + prefix_margin);
        noisy.insert(NGram::new(vec![1u32]), rho + suffix_margin);
        let margins = compute_margins([NGram::new(vec![0u32, 1])], &noisy, rho);
        let m = margins[&NGram::new(vec![0u32, 1])];
        prop_assert!(m <= prefix_margin + 1e-12);
        prop_assert!(m <= suffix_margin + 1e-12);
        prop_assert!((m - prefix_margin.min(suffix_margin)).abs() < 1e-12);
    }
}
