//! Two-sample chi-square comparison of release-outcome distributions, used to
//! check that the sparse level mechanism and the dense reference mechanism
//! draw from the same joint distribution.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use statrs::function::gamma::gamma_ur;

use crate::dpne::{dense_reference_level, run_level, NGram, Release};
use crate::error::Result;
use crate::sampling::derive_seed;

/// Two-sample chi-square test that both count vectors (indexed by outcome)
/// come from the same distribution. Cells with a pooled expected count below
/// 5 are merged into one bucket. Returns `(statistic, dof, p_value)`.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, f64, f64) {
    assert_eq!(a.len(), b.len(), "samples must share the outcome space");
    let n_a: u64 = a.iter().sum();
    let n_b: u64 = b.iter().sum();
    let n = (n_a + n_b) as f64;
    assert!(n_a > 0 && n_b > 0, "both samples must be non-empty");
    let share_a = n_a as f64 / n;
    let share_b = n_b as f64 / n;

    // Pool sparse cells so the chi-square approximation holds.
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (obs_a, obs_b)
    let mut pooled = (0.0, 0.0);
    for (&ca, &cb) in a.iter().zip(b) {
        let col = (ca + cb) as f64;
        if col * share_a.min(share_b) < 5.0 {
            pooled.0 += ca as f64;
            pooled.1 += cb as f64;
        } else {
            cells.push((ca as f64, cb as f64));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        cells.push(pooled);
    }
    if cells.len() < 2 {
        // One effective outcome: the distributions are trivially identical.
        return (0.0, 0.0, 1.0);
    }
    let mut stat = 0.0;
    for &(ca, cb) in &cells {
        let col = ca + cb;
        let ea = col * share_a;
        let eb = col * share_b;
        stat += (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb;
    }
    let dof = (cells.len() - 1) as f64;
    let p = gamma_ur(dof / 2.0, stat / 2.0);
    (stat, dof, p)
}

/// A joint-outcome equivalence scenario: a candidate set with its histogram,
/// per-item thresholds, and noise scale.
#[derive(Debug, Clone)]
pub struct EquivScenario {
    pub name: &'static str,
    pub candidates: Vec<NGram>,
    pub hist: BTreeMap<NGram, f64>,
    pub tau: BTreeMap<NGram, f64>,
    pub sigma: f64,
}

fn ng(tokens: &[u32]) -> NGram {
    NGram::new(tokens.to_vec())
}

fn scenario(
    name: &'static str,
    sigma: f64,
    items: &[(u32, Option<f64>, f64)], // (token, observed value, threshold)
) -> EquivScenario {
    let candidates: Vec<NGram> = items.iter().map(|&(t, _, _)| ng(&[t])).collect();
    let hist = items
        .iter()
        .filter_map(|&(t, h, _)| h.map(|v| (ng(&[t]), v)))
        .collect();
    let tau = items.iter().map(|&(t, _, tau)| (ng(&[t]), tau)).collect();
    EquivScenario {
        name,
        candidates,
        hist,
        tau,
        sigma,
    }
}

/// The five scenarios exercised by the equivalence gate: distinct mixes of
/// observed and unobserved items and of threshold groups, all with release
/// probabilities far from 0 and 1 so every joint outcome gets mass.
pub fn standard_equiv_scenarios() -> Vec<EquivScenario> {
    vec![
        scenario(
            "two observed, four unobserved sharing one threshold",
            1.0,
            &[
                (0, Some(1.1), 1.0),
                (1, Some(0.4), 1.0),
                (2, None, 0.52),
                (3, None, 0.52),
                (4, None, 0.52),
                (5, None, 0.52),
            ],
        ),
        scenario(
            "eight unobserved in two threshold groups",
            1.0,
            &[
                (0, None, 0.0),
                (1, None, 0.0),
                (2, None, 0.0),
                (3, None, 0.0),
                (4, None, 0.84),
                (5, None, 0.84),
                (6, None, 0.84),
                (7, None, 0.84),
            ],
        ),
        scenario(
            "mixed with three threshold groups",
            2.0,
            &[
                (0, Some(2.0), 2.5),
                (1, Some(0.5), 2.5),
                (2, Some(3.0), 1.0),
                (3, None, 1.0),
                (4, None, 1.0),
                (5, None, 2.5),
                (6, None, -0.5),
            ],
        ),
        scenario(
            "all observed, thresholds straddling the values",
            0.8,
            &[
                (0, Some(1.0), 0.8),
                (1, Some(0.2), 0.8),
                (2, Some(0.8), 0.8),
                (3, Some(1.5), 2.0),
                (4, Some(0.1), -0.2),
            ],
        ),
        scenario(
            "negative threshold group releases by default",
            1.5,
            &[
                (0, None, -1.0),
                (1, None, -1.0),
                (2, None, 1.2),
                (3, None, 1.2),
                (4, Some(1.0), 1.2),
                (5, None, 2.2),
            ],
        ),
    ]
}

fn outcome_mask(candidates: &[NGram], release: &Release) -> usize {
    let mut mask = 0usize;
    for (i, w) in candidates.iter().enumerate() {
        if release.released.contains(w) {
            mask |= 1 << i;
        }
    }
    mask
}

/// Empirical joint-outcome distributions of the sparse and dense mechanisms
/// over `trials` independent runs each, compared by chi-square.
/// Returns `(statistic, dof, p_value)`.
pub fn equivalence_pvalue(
    scenario: &EquivScenario,
    trials: u64,
    rng_seed: u64,
) -> Result<(f64, f64, f64)> {
    assert!(
        scenario.candidates.len() <= 16,
        "joint outcome space too large"
    );
    let n_outcomes = 1usize << scenario.candidates.len();
    let mut counts_sparse = vec![0u64; n_outcomes];
    let mut counts_dense = vec![0u64; n_outcomes];
    let mut rng_sparse = ChaCha12Rng::seed_from_u64(derive_seed(rng_seed, 1));
    let mut rng_dense = ChaCha12Rng::seed_from_u64(derive_seed(rng_seed, 2));
    for _ in 0..trials {
        let sparse = run_level(
            &scenario.hist,
            &scenario.tau,
            scenario.sigma,
            &mut rng_sparse,
        )?;
        counts_sparse[outcome_mask(&scenario.candidates, &sparse)] += 1;
        let dense = dense_reference_level(
            &scenario.candidates,
            &scenario.hist,
            &scenario.tau,
            scenario.sigma,
            &mut rng_dense,
        )?;
        counts_dense[outcome_mask(&scenario.candidates, &dense)] += 1;
    }
    Ok(chi_square_two_sample(&counts_sparse, &counts_dense))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_distributions_pass() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let probs = [0.5, 0.3, 0.15, 0.05];
        let mut a = vec![0u64; 4];
        let mut b = vec![0u64; 4];
        for _ in 0..50_000 {
            for counts in [&mut a, &mut b] {
                let u: f64 = rng.gen();
                let mut cum = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    cum += p;
                    if u < cum {
                        counts[i] += 1;
                        break;
                    }
                }
            }
        }
        let (_, _, p) = chi_square_two_sample(&a, &b);
        assert!(p > 0.01, "false rejection: p = {p}");
    }

    #[test]
    fn shifted_distributions_fail() {
        let a = vec![5000u64, 5000, 0, 0];
        let b = vec![4000u64, 6000, 0, 0];
        let (_, _, p) = chi_square_two_sample(&a, &b);
        assert!(p < 1e-6, "should reject: p = {p}");
    }

    #[test]
    fn single_outcome_is_trivially_equal() {
        let (stat, dof, p) = chi_square_two_sample(&[100, 0], &[100, 0]);
        assert_eq!((stat, dof, p), (0.0, 0.0, 1.0));
    }

    #[test]
    fn scenarios_are_well_formed() {
        for s in standard_equiv_scenarios() {
            assert!(s.candidates.len() <= 8);
            for w in s.hist.keys() {
                assert!(s.tau.contains_key(w));
            }
            for w in &s.candidates {
                assert!(s.tau.contains_key(w));
            }
        }
    }

    #[test]
    fn quick_equivalence_smoke() {
        let s = &standard_equiv_scenarios()[0];
        let (_, _, p) = equivalence_pvalue(s, 20_000, 99).unwrap();
        assert!(p > 0.01, "sparse vs dense diverged: p = {p}");
    }
}
