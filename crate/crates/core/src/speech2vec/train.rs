//! Minibatch training loop, optimizers, and per-word embedding extraction.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{pad_or_truncate, pad_sentence, PaddedWord, SpokenCorpus};
use super::model::{encode, grad};
use super::params::{ModelConfig, ModelParams};
use super::S2vError;
use crate::embed_store::EmbeddingTable;
use crate::rng;
use crate::simbench::{evaluate_suite, BenchmarkResult, WordPairBenchmark};

const SHUFFLE_STREAM: u64 = 0x5348;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub fixed_frames: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Words with fewer occurrences are dropped before training.
    pub min_count: usize,
    pub seed: u64,
    /// Evaluate the benchmark suite every this many epochs; 0 never.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            fixed_frames: 20,
            batch_size: 64,
            epochs: 50,
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.001,
            min_count: 4,
            seed: 0,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    /// Original full-scale schedule: batch 4096, 500 epochs.
    pub fn full_scale() -> Self {
        Self {
            batch_size: 4096,
            epochs: 500,
            ..Self::default()
        }
    }

    /// A learning rate of exactly 0 passes; it freezes the parameters.
    pub fn validate(&self) -> Result<(), S2vError> {
        self.model.validate()?;
        if self.fixed_frames == 0 {
            return Err(S2vError::InvalidConfig("fixed_frames must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(S2vError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(S2vError::InvalidConfig(format!(
                "learning_rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    /// Mean sentence loss over the epoch's batches, each taken before its
    /// update.
    pub mean_loss: f64,
    pub suite: Option<Vec<BenchmarkResult>>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub metrics: Vec<EpochMetrics>,
    /// The corpus after min-count filtering.
    pub corpus: SpokenCorpus,
}

enum Optimizer {
    Sgd,
    Adam {
        m: Box<ModelParams>,
        v: Box<ModelParams>,
        t: i32,
    },
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    fn new(kind: OptimizerKind, like: &ModelParams) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                m: Box::new(like.zeros_like()),
                v: Box::new(like.zeros_like()),
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut ModelParams, g: &ModelParams, lr: f64) {
        match self {
            Optimizer::Sgd => {
                for ((_, p), (_, d)) in params.tensors_mut().into_iter().zip(g.tensors()) {
                    p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
                }
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - BETA1.powi(*t);
                let c2 = 1.0 - BETA2.powi(*t);
                let ps = params.tensors_mut();
                let ms = m.tensors_mut();
                let vs = v.tensors_mut();
                for (((_, p), (_, m)), ((_, v), (_, d))) in ps.into_iter().zip(ms).zip(vs.into_iter().zip(g.tensors()))
                {
                    for k in 0..p.len() {
                        m[k] = BETA1 * m[k] + (1.0 - BETA1) * d[k];
                        v[k] = BETA2 * v[k] + (1.0 - BETA2) * d[k] * d[k];
                        p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Train from a seeded initialization.
///
/// `on_epoch` runs once with the initial parameters (metrics `None`) and
/// then after every epoch; use it to checkpoint. On a numerical error the
/// loop stops and the error is returned, so the last checkpoint written by
/// `on_epoch` is the last good state.
pub fn train<F>(
    config: &TrainConfig,
    corpus: &SpokenCorpus,
    benchmarks: &[WordPairBenchmark],
    mut on_epoch: F,
) -> Result<TrainOutput, S2vError>
where
    F: FnMut(&ModelParams, Option<&EpochMetrics>) -> Result<(), S2vError>,
{
    config.validate()?;
    let corpus = corpus.filter_min_count(config.min_count);
    if corpus.vocabulary().is_empty() {
        return Err(S2vError::EmptyInput(format!(
            "no word occurs at least {} times",
            config.min_count
        )));
    }
    let padded: Vec<Vec<PaddedWord>> = corpus
        .sentences()
        .iter()
        .map(|s| pad_sentence(s, config.fixed_frames))
        .collect();

    let mut params = ModelParams::init(&config.model, config.seed)?;
    let mut opt = Optimizer::new(config.optimizer, &params);
    let mut shuffler = rng::substream(config.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..padded.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    on_epoch(&params, None)?;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffler);
        let mut loss_sum = 0.0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<Vec<PaddedWord>> = idx.iter().map(|&i| padded[i].clone()).collect();
            let (loss, g) = grad(&params, &batch, config.model.window)?;
            loss_sum += loss * idx.len() as f64;
            opt.step(&mut params, &g, config.learning_rate);
            if !params.all_finite() {
                return Err(S2vError::Numerical(format!("parameters diverged in epoch {epoch}")));
            }
        }
        let suite = if config.eval_every > 0 && epoch % config.eval_every == 0 && !benchmarks.is_empty() {
            let table = extract_word_embeddings(&params, &corpus, config.fixed_frames)?;
            Some(evaluate_suite(&table, benchmarks))
        } else {
            None
        };
        let m = EpochMetrics {
            epoch,
            mean_loss: loss_sum / padded.len() as f64,
            suite,
        };
        on_epoch(&params, Some(&m))?;
        metrics.push(m);
    }
    Ok(TrainOutput {
        params,
        metrics,
        corpus,
    })
}

/// One embedding per word: the mean of its occurrence encodings, summed in
/// corpus order.
pub fn extract_word_embeddings(
    params: &ModelParams,
    corpus: &SpokenCorpus,
    fixed_frames: usize,
) -> Result<EmbeddingTable, S2vError> {
    if fixed_frames == 0 {
        return Err(S2vError::InvalidConfig("fixed_frames must be at least 1".into()));
    }
    let words: Vec<_> = corpus.sentences().iter().flatten().collect();
    let encoded: Vec<Vec<f64>> = words
        .par_iter()
        .map(|w| encode(params, &pad_or_truncate(&w.audio, fixed_frames)))
        .collect::<Result<_, _>>()?;
    let dim = params.config.embedding_dim;
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for (w, e) in words.iter().zip(&encoded) {
        let entry = sums.entry(w.label.as_str()).or_insert_with(|| (vec![0.0; dim], 0));
        entry.0.iter_mut().zip(e).for_each(|(a, b)| *a += b);
        entry.1 += 1;
    }
    let entries = sums.into_iter().map(|(label, (mut v, n))| {
        v.iter_mut().for_each(|x| *x /= n as f64);
        (label, v)
    });
    Ok(EmbeddingTable::from_entries(dim, entries)?)
}
