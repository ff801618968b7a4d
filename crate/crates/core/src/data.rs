//! Synthetic corpus generators, corpus ingestion/persistence, and report
//! serialization.
//!
//! Corpora are stored as newline-delimited JSON, one record per user:
//! `{"user_id": "...", "tokens": ["...", ...]}`. A `{"format_version": 1}`
//! header line is written on save and tolerated (not required) on load.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::derive_seed;

pub type TokenId = u32;

pub const CORPUS_FORMAT_VERSION: u32 = 1;
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct User {
    pub user_id: String,
    pub tokens: Vec<TokenId>,
}

/// Per-user token sequences plus the token table they reference.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    users: Vec<User>,
    vocab: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Intern a token string, returning its id.
    pub fn intern(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.vocab.len() as TokenId;
        self.vocab.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.vocab[id as usize]
    }

    pub fn lookup(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn push_user(&mut self, user_id: impl Into<String>, tokens: Vec<TokenId>) -> Result<()> {
        let user_id = user_id.into();
        if self.users.iter().any(|u| u.user_id == user_id) {
            return Err(Error::Config(format!("duplicate user_id {user_id:?}")));
        }
        for &t in &tokens {
            if t as usize >= self.vocab.len() {
                return Err(Error::Config(format!("token id {t} outside vocab")));
            }
        }
        self.users.push(User { user_id, tokens });
        Ok(())
    }

    /// Each user's distinct tokens, sorted. The level-1 item sets.
    pub fn user_token_sets(&self) -> Vec<Vec<TokenId>> {
        self.users
            .iter()
            .map(|u| {
                let mut v = u.tokens.clone();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    /// Zipf-distributed tokens with rank-adjacent Markov transitions.
    Zipf,
    /// Topic mixture with shared phrases.
    Clustered,
    /// Heavier-tailed Zipf with the same Markov transitions.
    HeavyTail,
}

/// Truncated-Pareto distribution over per-user set sizes; switches the zipf
/// generator into set mode (distinct items, no sequence structure), matching
/// the set-union benchmark corpora.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoSizeKnobs {
    pub shape: f64,
    pub min: u64,
    pub cap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenKnobs {
    /// Zipf exponent; `None` uses the kind default (1.07, or 1.5 for heavy-tail).
    pub zipf_alpha: Option<f64>,
    /// Uniform document-length range.
    pub len_min: usize,
    pub len_max: usize,
    /// Metropolis proposal window over ranks for the bigram structure.
    pub transition_window: u32,
    /// Probability of drawing a fresh token instead of a chained one.
    pub restart_prob: f64,
    /// Topic count for the clustered kind.
    pub n_topics: usize,
    /// Shared-phrase injection probability for the clustered kind.
    pub phrase_prob: f64,
    /// Number of shared phrases for the clustered kind.
    pub n_phrases: usize,
    /// Set-size distribution; switches the zipf kind into set mode.
    pub set_sizes: Option<ParetoSizeKnobs>,
}

impl Default for GenKnobs {
    fn default() -> Self {
        Self {
            zipf_alpha: None,
            len_min: 30,
            len_max: 120,
            transition_window: 4,
            restart_prob: 0.15,
            n_topics: 10,
            phrase_prob: 0.08,
            n_phrases: 12,
            set_sizes: None,
        }
    }
}

impl GenKnobs {
    /// Frozen knobs for the 20k-user / 50k-item set-union benchmark: tuned once
    /// to land near 30k unique items with ~14k singletons.
    pub fn dpsu_benchmark() -> Self {
        Self {
            set_sizes: Some(ParetoSizeKnobs {
                shape: 1.2,
                min: 4,
                cap: 100,
            }),
            ..Self::default()
        }
    }
}

/// Cumulative table for Zipf(alpha) over ranks `0..n`.
struct ZipfTable {
    cum: Vec<f64>,
}

impl ZipfTable {
    fn new(n: u32, alpha: f64) -> Self {
        let mut cum = Vec::with_capacity(n as usize);
        let mut total = 0.0;
        for r in 0..n {
            total += ((r + 1) as f64).powf(-alpha);
            cum.push(total);
        }
        for c in &mut cum {
            *c /= total;
        }
        Self { cum }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let u: f64 = rng.gen();
        self.cum.partition_point(|&c| c < u) as u32
    }
}

/// Generate a synthetic corpus. Pure function of its arguments: the same
/// inputs give bit-identical corpora regardless of worker count, because every
/// user owns an RNG stream derived from `(rng_seed, user index)`.
pub fn gen_synthetic(
    kind: CorpusKind,
    n_users: u64,
    vocab_size: u32,
    rng_seed: u64,
    knobs: &GenKnobs,
) -> Result<Corpus> {
    if n_users < 1 {
        return Err(Error::Config("n_users must be at least 1".into()));
    }
    if vocab_size < 2 {
        return Err(Error::Config("vocab_size must be at least 2".into()));
    }
    if knobs.len_min < 1 || knobs.len_max < knobs.len_min {
        return Err(Error::Config("document length range is empty".into()));
    }
    if !(0.0..=1.0).contains(&knobs.restart_prob) || !(0.0..=1.0).contains(&knobs.phrase_prob) {
        return Err(Error::Config("probabilities must lie in [0,1]".into()));
    }
    if let Some(p) = knobs.set_sizes {
        if !(p.shape > 0.0) || p.min < 1 || p.cap < p.min {
            return Err(Error::Config("invalid set-size distribution".into()));
        }
    }
    let alpha = knobs.zipf_alpha.unwrap_or(match kind {
        CorpusKind::HeavyTail => 1.5,
        _ => 1.07,
    });
    if !(alpha > 0.0) {
        return Err(Error::Config(format!(
            "zipf exponent must be positive, got {alpha}"
        )));
    }

    let table = ZipfTable::new(vocab_size, alpha);
    let topics = match kind {
        CorpusKind::Clustered => {
            // One rank permutation per topic, so each topic has its own
            // popular words.
            (0..knobs.n_topics)
                .map(|t| {
                    let mut perm: Vec<u32> = (0..vocab_size).collect();
                    let mut rng =
                        ChaCha12Rng::seed_from_u64(derive_seed(rng_seed ^ 0x746f_7069, t as u64));
                    use rand::seq::SliceRandom;
                    perm.shuffle(&mut rng);
                    perm
                })
                .collect()
        }
        _ => Vec::new(),
    };
    let phrases: Vec<Vec<u32>> = match kind {
        CorpusKind::Clustered => {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(rng_seed ^ 0x7068_7261, 0));
            (0..knobs.n_phrases)
                .map(|_| {
                    let len = rng.gen_range(3..=5usize);
                    (0..len)
                        .map(|_| table.sample(&mut rng).min(vocab_size - 1))
                        .collect()
                })
                .collect()
        }
        _ => Vec::new(),
    };

    let docs: Vec<Vec<TokenId>> = (0..n_users)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(rng_seed, i));
            match (kind, knobs.set_sizes) {
                (CorpusKind::Zipf, Some(pareto)) => gen_item_set(&table, pareto, &mut rng),
                (CorpusKind::Clustered, _) => {
                    gen_clustered_doc(&table, &topics, &phrases, knobs, &mut rng)
                }
                _ => gen_chain_doc(&table, vocab_size, alpha, knobs, &mut rng),
            }
        })
        .collect();

    let mut corpus = Corpus::new();
    for r in 0..vocab_size {
        corpus.intern(&format!("w{r}"));
    }
    for (i, tokens) in docs.into_iter().enumerate() {
        corpus.push_user(format!("u{i}"), tokens)?;
    }
    Ok(corpus)
}

/// Markov document: stationary Zipf marginal with transitions biased toward
/// adjacent ranks (Metropolis kernel with a symmetric rank-window proposal).
fn gen_chain_doc(
    table: &ZipfTable,
    vocab_size: u32,
    alpha: f64,
    knobs: &GenKnobs,
    rng: &mut impl Rng,
) -> Vec<TokenId> {
    let len = rng.gen_range(knobs.len_min..=knobs.len_max);
    let w = knobs.transition_window.max(1) as i64;
    let mut state = table.sample(rng);
    let mut doc = Vec::with_capacity(len);
    doc.push(state);
    for _ in 1..len {
        if rng.gen_bool(knobs.restart_prob) {
            state = table.sample(rng);
        } else {
            let mut delta = rng.gen_range(-w..=w);
            if delta == 0 {
                delta = 1;
            }
            let proposal = state as i64 + delta;
            if (0..vocab_size as i64).contains(&proposal) {
                let ratio = (((state + 1) as f64) / ((proposal + 1) as f64)).powf(alpha);
                if ratio >= 1.0 || rng.gen::<f64>() < ratio {
                    state = proposal as u32;
                }
            }
        }
        doc.push(state);
    }
    doc
}

fn gen_clustered_doc(
    table: &ZipfTable,
    topics: &[Vec<u32>],
    phrases: &[Vec<u32>],
    knobs: &GenKnobs,
    rng: &mut impl Rng,
) -> Vec<TokenId> {
    let len = rng.gen_range(knobs.len_min..=knobs.len_max);
    let topic = &topics[rng.gen_range(0..topics.len())];
    let mut doc = Vec::with_capacity(len);
    while doc.len() < len {
        if !phrases.is_empty() && rng.gen_bool(knobs.phrase_prob) {
            doc.extend_from_slice(&phrases[rng.gen_range(0..phrases.len())]);
        } else {
            doc.push(topic[table.sample(rng) as usize]);
        }
    }
    doc.truncate(len);
    doc
}

/// Distinct-item user set with a truncated-Pareto size.
fn gen_item_set(table: &ZipfTable, pareto: ParetoSizeKnobs, rng: &mut impl Rng) -> Vec<TokenId> {
    let u: f64 = loop {
        let v: f64 = rng.gen();
        if v > 0.0 {
            break v;
        }
    };
    let size =
        ((pareto.min as f64 * u.powf(-1.0 / pareto.shape)) as u64).clamp(pareto.min, pareto.cap);
    let mut set = std::collections::BTreeSet::new();
    let mut guard = 0u64;
    while (set.len() as u64) < size && guard < size * 200 {
        set.insert(table.sample(rng));
        guard += 1;
    }
    set.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Corpus I/O
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CorpusLine {
    #[serde(skip_serializing_if = "Option::is_none")]
    format_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    user_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
}

/// Save a corpus as NDJSON with a leading format-version header line.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "{}",
        serde_json::json!({ "format_version": CORPUS_FORMAT_VERSION })
    )?;
    for user in corpus.users() {
        let tokens: Vec<&str> = user.tokens.iter().map(|&t| corpus.token(t)).collect();
        writeln!(
            w,
            "{}",
            serde_json::json!({ "user_id": user.user_id, "tokens": tokens })
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Load an NDJSON corpus. Malformed lines are reported with their 1-based
/// line number.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut corpus = Corpus::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if parsed.user_id.is_none() && parsed.format_version.is_some() {
            continue; // header line
        }
        let user_id = parsed.user_id.ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "missing \"user_id\"".into(),
        })?;
        let tokens = parsed.tokens.ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "missing \"tokens\"".into(),
        })?;
        let ids: Vec<TokenId> = tokens.iter().map(|t| corpus.intern(t)).collect();
        corpus.push_user(user_id, ids)?;
    }
    Ok(corpus)
}

/// Load plain text, one document per line, whitespace-tokenized and lowercased.
pub fn load_text_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut corpus = Corpus::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let ids: Vec<TokenId> = line
            .split_whitespace()
            .map(|t| corpus.intern(&t.to_lowercase()))
            .collect();
        corpus.push_user(format!("u{lineno}"), ids)?;
    }
    Ok(corpus)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Per-level release statistics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LevelStats {
    pub level: u32,
    pub released: u64,
    pub genuine: u64,
    pub spurious: u64,
    pub rho_base: f64,
    pub sigma: f64,
    pub candidate_count: u64,
    pub imputed_margin_lookups: u64,
}

/// Structured run record; doubles as a re-runnable configuration (the `config`
/// field echoes the exact inputs).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReleaseReport {
    pub format_version: u32,
    pub tool: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub levels: Vec<LevelStats>,
    pub total_released: u64,
    pub total_genuine: u64,
    pub total_spurious: u64,
    pub wall_clock_secs: f64,
    /// Released items per level (token strings), included on request.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub released_items: Option<Vec<Vec<String>>>,
}

impl ReleaseReport {
    pub fn validate(&self) -> Result<()> {
        for l in &self.levels {
            if l.genuine + l.spurious != l.released {
                return Err(Error::Contract(format!(
                    "level {}: genuine {} + spurious {} != released {}",
                    l.level, l.genuine, l.spurious, l.released
                )));
            }
        }
        Ok(())
    }
}

pub fn save_report(report: &ReleaseReport, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), report)?;
    Ok(())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<ReleaseReport> {
    let file = std::fs::File::open(path)?;
    let report: ReleaseReport = serde_json::from_reader(BufReader::new(file))?;
    Ok(report)
}
