//! Word-similarity benchmarks scored with Spearman's rank correlation.
//!
//! Files are tab- or comma-separated `word1, word2, score` lines. A first line
//! whose score field does not parse is taken as a header and skipped.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::embed_store::{EmbedError, EmbeddingTable};

/// The thirteen standard benchmark identifiers, in report order.
pub const BENCHMARK_NAMES: [&str; 13] = [
    "MC-30",
    "MEN",
    "MTurk-287",
    "MTurk-771",
    "RG-65",
    "Rare-Word",
    "SimLex-999",
    "SimVerb-3500",
    "Verb-143",
    "WS-353",
    "WS-353-REL",
    "WS-353-SIM",
    "YP-130",
];

/// Resolve a file stem such as `ws-353-sim` to its canonical identifier.
pub fn canonical_name(stem: &str) -> Option<&'static str> {
    let norm = |s: &str| s.to_ascii_lowercase().replace('_', "-");
    let key = norm(stem);
    BENCHMARK_NAMES.iter().copied().find(|n| norm(n) == key)
}

#[derive(Debug, Error)]
pub enum SimbenchError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("benchmark `{0}` has no pairs")]
    Empty(String),
    #[error("sequences must have equal length >= 2 (got {0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("all values are tied; ranks are degenerate")]
    DegenerateRanks,
    #[error("only {0} in-vocabulary pairs; need at least 2")]
    InsufficientPairs(usize),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub word1: String,
    pub word2: String,
    pub gold: f64,
}

impl ScoredPair {
    pub fn new(word1: &str, word2: &str, gold: f64) -> Self {
        Self {
            word1: word1.to_lowercase(),
            word2: word2.to_lowercase(),
            gold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordPairBenchmark {
    name: String,
    pairs: Vec<ScoredPair>,
}

impl WordPairBenchmark {
    pub fn new(name: &str, pairs: Vec<ScoredPair>) -> Result<Self, SimbenchError> {
        if pairs.is_empty() {
            return Err(SimbenchError::Empty(name.to_string()));
        }
        if let Some(i) = pairs.iter().position(|p| !p.gold.is_finite()) {
            return Err(SimbenchError::Format {
                line: i + 1,
                msg: "non-finite gold score".into(),
            });
        }
        Ok(Self {
            name: name.to_string(),
            pairs,
        })
    }

    pub fn load<R: BufRead>(name: &str, reader: R) -> Result<Self, SimbenchError> {
        let mut pairs = Vec::new();
        let mut first = true;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let fields: Vec<&str> = if t.contains('\t') {
                t.split('\t').map(str::trim).collect()
            } else {
                t.split(',').map(str::trim).collect()
            };
            let bad = |msg: String| SimbenchError::Format { line: i + 1, msg };
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            }
            let score = fields[2].parse::<f64>();
            if first {
                first = false;
                if score.is_err() {
                    continue;
                }
            }
            let gold = score.map_err(|_| bad(format!("bad score `{}`", fields[2])))?;
            if fields[0].is_empty() || fields[1].is_empty() {
                return Err(bad("empty word".into()));
            }
            if !gold.is_finite() {
                return Err(bad("non-finite gold score".into()));
            }
            pairs.push(ScoredPair::new(fields[0], fields[1], gold));
        }
        Self::new(name, pairs)
    }

    /// Tab-separated, no header.
    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for p in &self.pairs {
            writeln!(out, "{}\t{}\t{}", p.word1, p.word2, p.gold)?;
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pairs(&self) -> &[ScoredPair] {
        &self.pairs
    }
}

/// Fractional (average) ranks, 1-based.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean of (i+1)..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    // sqrt of the product keeps rho(x, x) == 1 exactly.
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average-rank transforms.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, SimbenchError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(SimbenchError::LengthMismatch(xs.len(), ys.len()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys)).ok_or(SimbenchError::DegenerateRanks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub name: String,
    /// `None` when fewer than two pairs were usable or ranks were degenerate.
    pub rho: Option<f64>,
    pub n_used: usize,
    pub n_oov: usize,
    pub error: Option<String>,
}

struct Scored {
    sims: Vec<f64>,
    golds: Vec<f64>,
    n_oov: usize,
}

fn score_pairs(table: &EmbeddingTable, bench: &WordPairBenchmark) -> Result<Scored, SimbenchError> {
    let mut sims = Vec::new();
    let mut golds = Vec::new();
    let mut n_oov = 0;
    for p in bench.pairs() {
        if table.contains(&p.word1) && table.contains(&p.word2) {
            sims.push(table.cosine(&p.word1, &p.word2)?);
            golds.push(p.gold);
        } else {
            n_oov += 1;
        }
    }
    Ok(Scored { sims, golds, n_oov })
}

pub fn evaluate(table: &EmbeddingTable, bench: &WordPairBenchmark) -> Result<BenchmarkResult, SimbenchError> {
    let s = score_pairs(table, bench)?;
    if s.sims.len() < 2 {
        return Err(SimbenchError::InsufficientPairs(s.sims.len()));
    }
    let rho = spearman(&s.sims, &s.golds)?;
    Ok(BenchmarkResult {
        name: bench.name().to_string(),
        rho: Some(rho),
        n_used: s.sims.len(),
        n_oov: s.n_oov,
        error: None,
    })
}

/// Evaluate every benchmark; a failure is recorded in its row rather than
/// aborting the rest.
pub fn evaluate_suite(table: &EmbeddingTable, benches: &[WordPairBenchmark]) -> Vec<BenchmarkResult> {
    benches
        .iter()
        .map(|b| match evaluate(table, b) {
            Ok(r) => r,
            Err(e) => {
                let (n_used, n_oov) = match score_pairs(table, b) {
                    Ok(s) => (s.sims.len(), s.n_oov),
                    Err(_) => (0, 0),
                };
                BenchmarkResult {
                    name: b.name().to_string(),
                    rho: None,
                    n_used,
                    n_oov,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect()
}

pub fn suite_csv(results: &[BenchmarkResult]) -> String {
    let mut s = String::from("name,rho,n_used,n_oov\n");
    for r in results {
        let rho = r.rho.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(s, "{},{},{},{}", r.name, rho, r.n_used, r.n_oov);
    }
    s
}

pub fn suite_table(results: &[BenchmarkResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {:>9} {:>7} {:>6}", "benchmark", "rho", "used", "oov");
    for r in results {
        let rho = r.rho.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "{:<14} {:>9} {:>7} {:>6}", r.name, rho, r.n_used, r.n_oov);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn load_single_and_header() {
        let b = WordPairBenchmark::load("x", "a\tb\t5.0\n".as_bytes()).unwrap();
        assert_eq!(b.pairs().len(), 1);
        let b = WordPairBenchmark::load("x", "Word 1,Word 2,Human (mean)\nTiger,Cat,7.35\n".as_bytes()).unwrap();
        assert_eq!(b.pairs()[0], ScoredPair::new("tiger", "cat", 7.35));
        assert!(matches!(
            WordPairBenchmark::load("x", "a\tb\t1\nc\td\tzz\n".as_bytes()),
            Err(SimbenchError::Format { line: 2, .. })
        ));
        assert!(matches!(
            WordPairBenchmark::load("x", "a b 1\n".as_bytes()),
            Err(SimbenchError::Format { line: 1, .. })
        ));
        assert!(matches!(
            WordPairBenchmark::load("x", "".as_bytes()),
            Err(SimbenchError::Empty(_))
        ));
    }

    #[test]
    fn canonical_round_trip() {
        let b = WordPairBenchmark::load("x", "a,b,1.5\nc,d,0.1\ne,f,10\n".as_bytes()).unwrap();
        let mut buf = Vec::new();
        b.save(&mut buf).unwrap();
        let back = WordPairBenchmark::load("x", buf.as_slice()).unwrap();
        assert_eq!(back, b);
        let mut again = Vec::new();
        back.save(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn names() {
        assert_eq!(canonical_name("ws-353-sim"), Some("WS-353-SIM"));
        assert_eq!(canonical_name("Rare_Word"), Some("Rare-Word"));
        assert_eq!(canonical_name("glue"), None);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), [2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_extremes() {
        let up = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&up, &[2.0, 4.0, 8.0, 16.0]).unwrap(), 1.0);
        assert_eq!(spearman(&up, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(matches!(spearman(&up, &[1.0; 4]), Err(SimbenchError::DegenerateRanks)));
        assert!(matches!(
            spearman(&[1.0], &[1.0]),
            Err(SimbenchError::LengthMismatch(..))
        ));
    }

    #[test]
    fn spearman_with_ties_by_hand() {
        // ranks x = [1, 2.5, 2.5, 4], y = [1, 2, 3, 4]; means 2.5
        // sxy = 2.25 + 0 + 0 + 2.25 = 4.5; sxx = 4.5; syy = 5
        let expect = 4.5 / (4.5f64.sqrt() * 5f64.sqrt());
        let got = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    fn toy_table() -> EmbeddingTable {
        EmbeddingTable::from_entries(
            2,
            [
                ("a", vec![1.0, 0.0]),
                ("b", vec![1.0, 0.1]),
                ("c", vec![0.0, 1.0]),
                ("d", vec![1.0, 1.0]),
                ("e", vec![-1.0, 0.2]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn evaluate_toy() {
        // cos(a,b) ~ 0.995, cos(a,d) ~ 0.707, cos(a,c) = 0, cos(a,e) ~ -0.98
        // gold agrees except for the last two swapped -> ranks x=[4,3,2,1], y=[4,3,1,2]
        // rho = 1 - 6*sum(d^2)/(n(n^2-1)) = 1 - 6*2/60 = 0.8
        let b = WordPairBenchmark::new(
            "toy",
            vec![
                ScoredPair::new("a", "b", 9.0),
                ScoredPair::new("a", "d", 6.0),
                ScoredPair::new("a", "c", 1.0),
                ScoredPair::new("a", "e", 2.0),
                ScoredPair::new("a", "zz", 5.0),
            ],
        )
        .unwrap();
        let r = evaluate(&toy_table(), &b).unwrap();
        assert_eq!((r.n_used, r.n_oov), (4, 1));
        assert!((r.rho.unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn all_oov_is_insufficient() {
        let b = WordPairBenchmark::new(
            "toy",
            vec![ScoredPair::new("x", "y", 1.0), ScoredPair::new("a", "q", 2.0)],
        )
        .unwrap();
        assert!(matches!(
            evaluate(&toy_table(), &b),
            Err(SimbenchError::InsufficientPairs(0))
        ));
        let rows = evaluate_suite(&toy_table(), &[b]);
        assert_eq!(rows[0].rho, None);
        assert_eq!(rows[0].n_oov, 2);
        assert!(suite_csv(&rows).contains("toy,NA,0,2"));
        assert!(evaluate_suite(&toy_table(), &[]).is_empty());
    }

    proptest! {
        #[test]
        fn symmetric_and_rank_invariant(
            xs in proptest::collection::vec(-5i32..5, 2..30),
            ys_seed in proptest::collection::vec(-5i32..5, 30),
        ) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let ys: Vec<f64> = ys_seed[..xs.len()].iter().map(|&v| f64::from(v)).collect();
            let (Ok(a), Ok(b)) = (spearman(&xs, &ys), spearman(&ys, &xs)) else { return Ok(()); };
            prop_assert!((a - b).abs() < 1e-12);
            let warped: Vec<f64> = xs.iter().map(|x| (x * 0.3).exp() + 7.0).collect();
            prop_assert_eq!(spearman(&warped, &ys).unwrap().to_bits(), a.to_bits());
        }

        #[test]
        fn self_correlation_is_one(mut xs in proptest::collection::vec(-1e6f64..1e6, 2..40)) {
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            prop_assume!(xs.len() >= 2);
            prop_assert_eq!(spearman(&xs, &xs).unwrap(), 1.0);
        }
    }
}
