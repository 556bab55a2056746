//! Transcript word counts and vocabulary comparisons.
//!
//! Tokenization is a plain whitespace split after lowercasing. LibriSpeech
//! transcripts are already normalized upper-case words, so no punctuation is
//! stripped. Their `.trans.txt` files lead each line with an utterance id;
//! [`CountOptions::skip_first_token`] drops it.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use crate::simbench::WordPairBenchmark;

pub type Vocabulary = BTreeSet<String>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordFrequency {
    pub counts: BTreeMap<String, u64>,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CountOptions {
    pub skip_first_token: bool,
}

impl WordFrequency {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_line(&mut self, line: &str, opts: CountOptions) {
        let skip = usize::from(opts.skip_first_token);
        for tok in line.split_whitespace().skip(skip) {
            *self.counts.entry(tok.to_lowercase()).or_insert(0) += 1;
            self.total_tokens += 1;
        }
    }

    pub fn add_reader<R: BufRead>(&mut self, reader: R, opts: CountOptions) -> std::io::Result<()> {
        for line in reader.lines() {
            self.add_line(&line?, opts);
        }
        Ok(())
    }

    /// Fold another count table into this one.
    pub fn merge(&mut self, other: &WordFrequency) {
        for (w, c) in &other.counts {
            *self.counts.entry(w.clone()).or_insert(0) += c;
        }
        self.total_tokens += other.total_tokens;
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn vocabulary(&self) -> Vocabulary {
        self.counts.keys().cloned().collect()
    }
}

pub fn count_words<R: BufRead>(reader: R) -> std::io::Result<WordFrequency> {
    count_words_with(reader, CountOptions::default())
}

pub fn count_words_with<R: BufRead>(reader: R, opts: CountOptions) -> std::io::Result<WordFrequency> {
    let mut f = WordFrequency::new();
    f.add_reader(reader, opts)?;
    Ok(f)
}

/// Words occurring at least `k` times.
pub fn filter_min_count(freq: &WordFrequency, k: u64) -> Vocabulary {
    freq.counts
        .iter()
        .filter(|(_, &c)| c >= k)
        .map(|(w, _)| w.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabDiff {
    pub reference_size: usize,
    pub corpus_size: usize,
    /// Reference words absent from the corpus, ascending.
    pub missing: Vec<String>,
}

pub fn vocab_diff(reference: &Vocabulary, corpus: &Vocabulary) -> VocabDiff {
    VocabDiff {
        reference_size: reference.len(),
        corpus_size: corpus.len(),
        missing: reference.difference(corpus).cloned().collect(),
    }
}

/// Pairs with at least one word outside `vocab`.
pub fn benchmark_oov(benchmark: &WordPairBenchmark, vocab: &Vocabulary) -> usize {
    benchmark
        .pairs()
        .iter()
        .filter(|p| !vocab.contains(&p.word1) || !vocab.contains(&p.word2))
        .count()
}

pub fn read_vocabulary<R: BufRead>(reader: R) -> std::io::Result<Vocabulary> {
    let mut v = Vocabulary::new();
    for line in reader.lines() {
        let line = line?;
        let w = line.trim();
        if !w.is_empty() {
            v.insert(w.to_lowercase());
        }
    }
    Ok(v)
}

/// One word per line, sorted.
pub fn write_vocabulary<'a, W, I>(mut out: W, words: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a String>,
{
    for w in words {
        writeln!(out, "{w}")?;
    }
    Ok(())
}
