//! Forensic analysis of word-embedding tables and a desk-scale reproduction of
//! the skip-gram Speech2Vec encoder-decoder.
//!
//! The crate is split along the lines of the experiments it supports:
//!
//! * [`embed_store`] loads and queries embedding tables (cosine, exact k-NN).
//! * [`forensics`] runs the homophone inspection and produces a provenance verdict.
//! * [`vocab`] counts transcript words and diffs vocabularies.
//! * [`simbench`] evaluates tables on word-similarity benchmarks (Spearman rho).
//! * [`mds`] projects embeddings to 2-D with classical multidimensional scaling.
//! * [`speech2vec`] holds the spoken-word corpus, the model, its gradients and training.

pub mod embed_store;
pub mod forensics;
pub mod mds;
pub mod numeric;
pub mod rng;
pub mod simbench;
pub mod speech2vec;
pub mod vocab;

pub use embed_store::{EmbedError, EmbeddingTable};
pub use forensics::{ForensicReport, HomophonePairSet, PairStats, Verdict};
pub use mds::{classical_mds, Mds2D, MdsError, MdsInput};
pub use simbench::{BenchmarkResult, WordPairBenchmark};
pub use vocab::{VocabDiff, WordFrequency};
