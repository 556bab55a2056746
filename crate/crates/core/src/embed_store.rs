//! Word-embedding tables in the word2vec/GloVe text format.
//!
//! Each entry line is a word followed by `dim` whitespace-separated decimals.
//! An optional first line `count dim` (exactly two integer tokens) is
//! detected and validated. Words are lowercased on load, and unit-normalized
//! copies of every vector are cached so cosine similarity is a single dot
//! product.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::numeric::{dot, l2_norm};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("duplicate word `{0}`")]
    DuplicateWord(String),
    #[error("word `{0}` not in table")]
    WordNotFound(String),
    #[error("vector for `{0}` has zero norm")]
    DegenerateVector(String),
    #[error("k = {k} out of range for vocabulary of {vocab}")]
    InvalidK { k: usize, vocab: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_err(line: usize, msg: impl Into<String>) -> EmbedError {
    EmbedError::Format { line, msg: msg.into() }
}

/// Immutable word → vector map preserving file order.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    // Row-major unit vectors; rows of zero-norm vectors stay zero.
    unit: Vec<f64>,
    degenerate: Vec<bool>,
}

impl PartialEq for EmbeddingTable {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.words == other.words
            && self
                .vectors
                .iter()
                .zip(&other.vectors)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl EmbeddingTable {
    /// Build a table from `(word, vector)` entries. Words are lowercased.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        if dim == 0 {
            return Err(format_err(0, "dimension must be positive"));
        }
        let mut builder = Builder::new(dim);
        for (i, (word, vec)) in entries.into_iter().enumerate() {
            builder.push(i + 1, word.as_ref(), &vec)?;
        }
        Ok(builder.finish())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, EmbedError> {
        let mut builder: Option<Builder> = None;
        let mut declared: Option<(usize, usize)> = None;
        let mut seen_content = false;

        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let mut tokens = line.split_whitespace();
            let Some(word) = tokens.next() else {
                continue;
            };
            let rest: Vec<&str> = tokens.collect();

            if !seen_content {
                seen_content = true;
                if rest.len() == 1 {
                    if let (Ok(count), Ok(dim)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                        if dim == 0 {
                            return Err(format_err(lineno, "header declares dimension 0"));
                        }
                        declared = Some((count, dim));
                        builder = Some(Builder::new(dim));
                        continue;
                    }
                }
            }

            let mut vec = Vec::with_capacity(rest.len());
            for tok in &rest {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| format_err(lineno, format!("non-numeric field `{tok}`")))?;
                if !v.is_finite() {
                    return Err(format_err(lineno, format!("non-finite field `{tok}`")));
                }
                vec.push(v);
            }
            let b = match builder.as_mut() {
                Some(b) => b,
                None => {
                    if vec.is_empty() {
                        return Err(format_err(lineno, "entry has no vector components"));
                    }
                    builder.insert(Builder::new(vec.len()))
                }
            };
            b.push(lineno, word, &vec)?;
        }

        let Some(builder) = builder else {
            return Err(format_err(0, "no entries"));
        };
        let table = builder.finish();
        if let Some((count, _)) = declared {
            if count != table.len() {
                return Err(format_err(
                    1,
                    format!("header declares {count} entries, found {}", table.len()),
                ));
            }
        }
        Ok(table)
    }

    /// Write the table with a `count dim` header. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            out.write_all(word.as_bytes())?;
            for v in self.vector_at(i) {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words in file order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.vector_at(i))
    }

    pub fn vector_at(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn unit_at(&self, i: usize) -> &[f64] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    fn lookup(&self, word: &str) -> Result<usize, EmbedError> {
        self.index_of(word)
            .ok_or_else(|| EmbedError::WordNotFound(word.to_owned()))
    }

    fn nondegenerate(&self, i: usize) -> Result<usize, EmbedError> {
        if self.degenerate[i] {
            Err(EmbedError::DegenerateVector(self.words[i].clone()))
        } else {
            Ok(i)
        }
    }

    /// Cosine similarity between two stored words.
    pub fn cosine(&self, w1: &str, w2: &str) -> Result<f64, EmbedError> {
        let a = self.nondegenerate(self.lookup(w1)?)?;
        let b = self.nondegenerate(self.lookup(w2)?)?;
        Ok(self.cosine_idx(a, b))
    }

    /// Cosine by row index; arguments are put in canonical order so the
    /// result is exactly symmetric. Zero-norm rows yield 0.
    pub fn cosine_idx(&self, a: usize, b: usize) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        dot(self.unit_at(lo), self.unit_at(hi)).clamp(-1.0, 1.0)
    }

    /// Similarity of `query` to every row, in row order.
    pub(crate) fn similarities_to(&self, query: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.cosine_idx(query, j)).collect()
    }

    /// The `k` nearest non-query words by cosine, most similar first; ties go
    /// to the lexicographically smaller word. Zero-norm candidates score 0.
    pub fn knn(&self, query: &str, k: usize) -> Result<Vec<(String, f64)>, EmbedError> {
        let q = self.nondegenerate(self.lookup(query)?)?;
        if k == 0 || k >= self.len() {
            return Err(EmbedError::InvalidK { k, vocab: self.len() });
        }
        let sims = self.similarities_to(q);
        let mut cand: Vec<usize> = (0..self.len()).filter(|&j| j != q).collect();
        let cmp = |a: &usize, b: &usize| {
            sims[*b]
                .total_cmp(&sims[*a])
                .then_with(|| self.words[*a].cmp(&self.words[*b]))
        };
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
        }
        cand.sort_by(cmp);
        Ok(cand.into_iter().map(|j| (self.words[j].clone(), sims[j])).collect())
    }

    /// 1-based position of `target` in the full neighbor list of `query`,
    /// using the same ordering as [`knn`](Self::knn).
    pub fn neighbor_rank(&self, query: &str, target: &str) -> Result<usize, EmbedError> {
        let q = self.nondegenerate(self.lookup(query)?)?;
        let t = self.lookup(target)?;
        if q == t {
            return Err(format_err(0, format!("query and target are both `{query}`")));
        }
        let st = self.cosine_idx(q, t);
        let tw = &self.words[t];
        let ahead = (0..self.len())
            .filter(|&j| j != q && j != t)
            .filter(|&j| {
                let s = self.cosine_idx(q, j);
                s > st || (s == st && self.words[j] < *tw)
            })
            .count();
        Ok(ahead + 1)
    }
}

struct Builder {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

impl Builder {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
        }
    }

    fn push(&mut self, lineno: usize, word: &str, vec: &[f64]) -> Result<(), EmbedError> {
        if vec.len() != self.dim {
            return Err(format_err(
                lineno,
                format!("expected {} components, found {}", self.dim, vec.len()),
            ));
        }
        let word = word.trim().to_lowercase();
        if word.is_empty() {
            return Err(format_err(lineno, "empty word"));
        }
        if vec.iter().any(|v| !v.is_finite()) {
            return Err(format_err(lineno, "non-finite component"));
        }
        if self.index.contains_key(&word) {
            return Err(EmbedError::DuplicateWord(word));
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.vectors.extend_from_slice(vec);
        Ok(())
    }

    fn finish(self) -> EmbeddingTable {
        let dim = self.dim;
        let mut unit = self.vectors.clone();
        let mut degenerate = Vec::with_capacity(self.words.len());
        for row in unit.chunks_mut(dim) {
            let n = l2_norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
                degenerate.push(false);
            } else {
                degenerate.push(true);
            }
        }
        EmbeddingTable {
            dim,
            words: self.words,
            index: self.index,
            vectors: self.vectors,
            unit,
            degenerate,
        }
    }
}
