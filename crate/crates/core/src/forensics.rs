//! Homophone inspection of an embedding table.
//!
//! Embeddings learned from audio should place homophones (`ate`/`eight`)
//! close together, since the encoder hears the same thing. Embeddings learned
//! from text have no reason to. The report compares mean homophone-pair
//! cosine against a seeded random-pair baseline and turns the gap into a
//! verdict.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::index;
use thiserror::Error;

use crate::embed_store::{EmbedError, EmbeddingTable};
use crate::numeric::mean_std;
use crate::rng;

pub const DEFAULT_MARGIN: f64 = 0.02;

#[derive(Debug, Error)]
pub enum ForensicError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("pair `{0}` has identical words")]
    SameWord(String),
    #[error("duplicate pair ({0}, {1})")]
    DuplicatePair(String, String),
    #[error("no pair has both words in the vocabulary")]
    NoEvaluablePairs,
    #[error("cannot draw {n} distinct pairs from {available}")]
    InvalidN { n: u64, available: u64 },
    #[error("margin must be positive, got {0}")]
    InvalidMargin(f64),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercase word pairs that sound alike but are spelled differently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomophonePairSet {
    pairs: Vec<(String, String)>,
}

impl HomophonePairSet {
    pub fn new<I, S>(pairs: I) -> Result<Self, ForensicError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b) in pairs {
            let a = a.as_ref().trim().to_lowercase();
            let b = b.as_ref().trim().to_lowercase();
            if a == b {
                return Err(ForensicError::SameWord(a));
            }
            let key = if a < b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            if !seen.insert(key) {
                return Err(ForensicError::DuplicatePair(a, b));
            }
            out.push((a, b));
        }
        Ok(Self { pairs: out })
    }

    /// One pair per line, words separated by a comma or a tab. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, ForensicError> {
        let mut raw = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split([',', '\t']).map(str::trim).collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(ForensicError::Format {
                    line: i + 1,
                    msg: format!("expected two words, got `{t}`"),
                });
            }
            raw.push((fields[0].to_string(), fields[1].to_string()));
        }
        Self::new(raw)
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub n_evaluated: usize,
    pub n_skipped_oov: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Cosine statistics over word pairs with canonicalized order so the result
/// does not depend on how the input is arranged.
fn stats_over<'a, I>(table: &EmbeddingTable, pairs: I) -> Result<PairStats, ForensicError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut idx = Vec::new();
    let mut skipped = 0;
    for (a, b) in pairs {
        match (table.index_of(a), table.index_of(b)) {
            (Some(i), Some(j)) => idx.push((i.min(j), i.max(j))),
            _ => skipped += 1,
        }
    }
    stats_over_indices(table, idx, skipped)
}

fn stats_over_indices(
    table: &EmbeddingTable,
    mut idx: Vec<(usize, usize)>,
    skipped: usize,
) -> Result<PairStats, ForensicError> {
    let words = table.words();
    let key = |&(i, j): &(usize, usize)| {
        let (a, b) = (&words[i], &words[j]);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    };
    idx.sort_by(|x, y| key(x).cmp(&key(y)));
    let mut sims = Vec::with_capacity(idx.len());
    for &(i, j) in &idx {
        // cosine() checks degeneracy and reports the offending word.
        sims.push(table.cosine(&words[i], &words[j])?);
    }
    let (mean, std) = mean_std(&sims).ok_or(ForensicError::NoEvaluablePairs)?;
    Ok(PairStats {
        n_evaluated: sims.len(),
        n_skipped_oov: skipped,
        mean,
        std,
    })
}

pub fn pair_similarity_stats(table: &EmbeddingTable, pairs: &HomophonePairSet) -> Result<PairStats, ForensicError> {
    stats_over(table, pairs.pairs().iter().map(|(a, b)| (a.as_str(), b.as_str())))
}

/// Map a linear index in `0..n(n-1)/2` to the pair `(i, j)`, `i < j`, in
/// row-major order of the strict upper triangle.
fn unrank_pair(mut k: u64, n: u64) -> (usize, usize) {
    let mut i = 0u64;
    loop {
        let row = n - 1 - i;
        if k < row {
            return (i as usize, (i + 1 + k) as usize);
        }
        k -= row;
        i += 1;
    }
}

/// Draw `n` distinct unordered pairs of distinct words uniformly, without
/// replacement, from the whole vocabulary.
pub fn random_pairs(table: &EmbeddingTable, n: u64, seed: u64) -> Result<Vec<(usize, usize)>, ForensicError> {
    let v = table.len() as u64;
    let available = v * v.saturating_sub(1) / 2;
    if n == 0 || n > available {
        return Err(ForensicError::InvalidN { n, available });
    }
    let mut rng = rng::seeded(seed);
    let picks: Vec<u64> = if available <= u32::MAX as u64 {
        index::sample(&mut rng, available as usize, n as usize)
            .into_iter()
            .map(|k| k as u64)
            .collect()
    } else {
        // Rejection sampling with a set; only reached for >92k-word vocabularies.
        use rand::Rng;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        while out.len() < n as usize {
            let k = rng.random_range(0..available);
            if seen.insert(k) {
                out.push(k);
            }
        }
        out
    };
    Ok(picks.into_iter().map(|k| unrank_pair(k, v)).collect())
}

pub fn random_pair_baseline(table: &EmbeddingTable, n: u64, seed: u64) -> Result<PairStats, ForensicError> {
    let pairs = random_pairs(table, n, seed)?;
    stats_over_indices(table, pairs, 0)
}

/// Position of `w2` in the similarity-ordered neighbor list of `w1`.
pub fn homophone_rank(table: &EmbeddingTable, w1: &str, w2: &str) -> Result<usize, ForensicError> {
    if w1 == w2 {
        return Err(ForensicError::SameWord(w1.to_string()));
    }
    Ok(table.neighbor_rank(w1, w2)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    PhoneticallyConsistent,
    PhoneticallyInconsistent,
    Inconclusive,
}

impl Verdict {
    pub fn from_means(homophone: f64, random: f64, margin: f64) -> Self {
        if homophone >= random + margin {
            Verdict::PhoneticallyConsistent
        } else if homophone <= random - margin {
            Verdict::PhoneticallyInconsistent
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::PhoneticallyConsistent => "phonetically_consistent",
            Verdict::PhoneticallyInconsistent => "phonetically_inconsistent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub word_a: String,
    pub word_b: String,
    pub similarity: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForensicReport {
    pub homophone: PairStats,
    pub random_baseline: PairStats,
    /// In-vocabulary pairs in input order.
    pub per_pair: Vec<PairRow>,
    pub margin: f64,
    pub random_n: u64,
    pub seed: u64,
    pub verdict: Verdict,
}

pub fn forensic_report(
    table: &EmbeddingTable,
    pairs: &HomophonePairSet,
    n_random: u64,
    seed: u64,
    margin: f64,
) -> Result<ForensicReport, ForensicError> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(ForensicError::InvalidMargin(margin));
    }
    let homophone = pair_similarity_stats(table, pairs)?;
    let random_baseline = random_pair_baseline(table, n_random, seed)?;
    let mut per_pair = Vec::new();
    for (a, b) in pairs.pairs() {
        if !(table.contains(a) && table.contains(b)) {
            continue;
        }
        per_pair.push(PairRow {
            word_a: a.clone(),
            word_b: b.clone(),
            similarity: table.cosine(a, b)?,
            rank: homophone_rank(table, a, b)?,
        });
    }
    Ok(ForensicReport {
        verdict: Verdict::from_means(homophone.mean, random_baseline.mean, margin),
        homophone,
        random_baseline,
        per_pair,
        margin,
        random_n: n_random,
        seed,
    })
}

impl ForensicReport {
    /// `key=value` lines, one fact per line.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let h = &self.homophone;
        let r = &self.random_baseline;
        let _ = writeln!(s, "homophone_pairs_evaluated={}", h.n_evaluated);
        let _ = writeln!(s, "homophone_pairs_skipped_oov={}", h.n_skipped_oov);
        let _ = writeln!(s, "homophone_mean={:.6}", h.mean);
        let _ = writeln!(s, "homophone_std={:.6}", h.std);
        let _ = writeln!(s, "random_pairs={}", r.n_evaluated);
        let _ = writeln!(s, "random_seed={}", self.seed);
        let _ = writeln!(s, "random_mean={:.6}", r.mean);
        let _ = writeln!(s, "random_std={:.6}", r.std);
        let _ = writeln!(s, "margin={}", self.margin);
        if !self.per_pair.is_empty() {
            let mean_rank = self.per_pair.iter().map(|p| p.rank as f64).sum::<f64>() / self.per_pair.len() as f64;
            let _ = writeln!(s, "mean_homophone_rank={mean_rank:.1}");
        }
        let _ = writeln!(s, "verdict={}", self.verdict.as_str());
        s
    }

    /// `word_a,word_b,similarity,rank` rows with a header.
    pub fn per_pair_csv(&self) -> String {
        let mut s = String::from("word_a,word_b,similarity,homophone_rank\n");
        for p in &self.per_pair {
            let _ = writeln!(s, "{},{},{:.6},{}", p.word_a, p.word_b, p.similarity, p.rank);
        }
        s
    }

    /// Aligned table for people.
    pub fn to_human(&self) -> String {
        let mut s = String::new();
        let h = &self.homophone;
        let r = &self.random_baseline;
        let _ = writeln!(s, "{:<12} {:>6} {:>8} {:>8}", "pairs", "n", "mean", "std");
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>8.4} {:>8.4}",
            "homophone", h.n_evaluated, h.mean, h.std
        );
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>8.4} {:>8.4}",
            "random", r.n_evaluated, r.mean, r.std
        );
        let _ = writeln!(s, "skipped (oov): {}", h.n_skipped_oov);
        let _ = writeln!(s, "verdict: {} (margin {})", self.verdict.as_str(), self.margin);
        if !self.per_pair.is_empty() {
            let wa = self.per_pair.iter().map(|p| p.word_a.len()).max().unwrap_or(0).max(6);
            let wb = self.per_pair.iter().map(|p| p.word_b.len()).max().unwrap_or(0).max(6);
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "{:<wa$} {:<wb$} {:>10} {:>8}",
                "word_a", "word_b", "similarity", "rank"
            );
            for p in &self.per_pair {
                let _ = writeln!(
                    s,
                    "{:<wa$} {:<wb$} {:>10.4} {:>8}",
                    p.word_a, p.word_b, p.similarity, p.rank
                );
            }
        }
        s
    }
}
