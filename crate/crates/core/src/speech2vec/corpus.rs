//! Spoken-word corpora: types, the text file format, padding, and a seeded
//! synthetic generator standing in for force-aligned LibriSpeech.
//!
//! File format: each word is a line `WORD <label> <T>` followed by `T` lines
//! of 13 comma-separated decimals. A blank line ends a sentence.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{S2vError, MFCC_DIM};
use crate::forensics::HomophonePairSet;
use crate::rng;
use crate::simbench::{ScoredPair, WordPairBenchmark, BENCHMARK_NAMES};

pub type Frame = [f64; MFCC_DIM];

#[derive(Debug, Clone, PartialEq)]
pub struct MfccSequence {
    frames: Vec<Frame>,
}

impl MfccSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self, S2vError> {
        if frames.is_empty() {
            return Err(S2vError::EmptyInput("MFCC sequence has no frames".into()));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpokenWord {
    pub label: String,
    pub audio: MfccSequence,
}

impl SpokenWord {
    pub fn new(label: &str, audio: MfccSequence) -> Result<Self, S2vError> {
        let label = label.trim().to_lowercase();
        if label.is_empty() || label.contains(char::is_whitespace) {
            return Err(S2vError::InvalidConfig(format!("bad word label `{label}`")));
        }
        Ok(Self { label, audio })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpokenCorpus {
    sentences: Vec<Vec<SpokenWord>>,
    vocabulary: BTreeMap<String, usize>,
}

impl SpokenCorpus {
    /// Empty sentences are dropped.
    pub fn new(sentences: Vec<Vec<SpokenWord>>) -> Self {
        let sentences: Vec<Vec<SpokenWord>> = sentences.into_iter().filter(|s| !s.is_empty()).collect();
        let mut vocabulary = BTreeMap::new();
        for w in sentences.iter().flatten() {
            *vocabulary.entry(w.label.clone()).or_insert(0) += 1;
        }
        Self { sentences, vocabulary }
    }

    pub fn sentences(&self) -> &[Vec<SpokenWord>] {
        &self.sentences
    }

    /// Label → occurrence count.
    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn n_tokens(&self) -> usize {
        self.vocabulary.values().sum()
    }

    /// Drop occurrences of words seen fewer than `min_count` times.
    pub fn filter_min_count(&self, min_count: usize) -> SpokenCorpus {
        let keep = |w: &SpokenWord| self.vocabulary[&w.label] >= min_count;
        SpokenCorpus::new(
            self.sentences
                .iter()
                .map(|s| s.iter().filter(|w| keep(w)).cloned().collect())
                .collect(),
        )
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, S2vError> {
        let mut sentences = Vec::new();
        let mut current = Vec::new();
        let mut lines = reader.lines().enumerate();
        let bad = |line: usize, msg: String| S2vError::Format { line: line + 1, msg };
        while let Some((i, line)) = lines.next() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                if !current.is_empty() {
                    sentences.push(std::mem::take(&mut current));
                }
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "WORD" {
                return Err(bad(i, format!("expected `WORD <label> <T>`, got `{t}`")));
            }
            let n: usize = parts[2]
                .parse()
                .map_err(|_| bad(i, format!("bad frame count `{}`", parts[2])))?;
            if n == 0 {
                return Err(bad(i, "frame count must be positive".into()));
            }
            let mut frames = Vec::with_capacity(n);
            for _ in 0..n {
                let (j, fl) = lines
                    .next()
                    .ok_or_else(|| bad(i, "unexpected end of file inside word".into()))?;
                let fl = fl?;
                let vals: Vec<&str> = fl.trim().split(',').collect();
                if vals.len() != MFCC_DIM {
                    return Err(bad(j, format!("expected {MFCC_DIM} coefficients, got {}", vals.len())));
                }
                let mut frame = [0.0; MFCC_DIM];
                for (slot, v) in frame.iter_mut().zip(vals) {
                    *slot = v
                        .trim()
                        .parse()
                        .ok()
                        .filter(|x: &f64| x.is_finite())
                        .ok_or_else(|| bad(j, format!("bad coefficient `{v}`")))?;
                }
                frames.push(frame);
            }
            let word = SpokenWord::new(parts[1], MfccSequence::new(frames)?).map_err(|e| bad(i, e.to_string()))?;
            current.push(word);
        }
        if !current.is_empty() {
            sentences.push(current);
        }
        Ok(SpokenCorpus::new(sentences))
    }

    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for sentence in &self.sentences {
            for w in sentence {
                writeln!(out, "WORD {} {}", w.label, w.audio.len())?;
                for frame in w.audio.frames() {
                    let mut first = true;
                    for v in frame {
                        if !first {
                            out.write_all(b",")?;
                        }
                        first = false;
                        write!(out, "{v}")?;
                    }
                    out.write_all(b"\n")?;
                }
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A word padded or truncated to a fixed frame count. Frames at and beyond
/// `valid_len` are never read by the model.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedWord {
    pub frames: Vec<Frame>,
    pub valid_len: usize,
}

impl PaddedWord {
    pub fn valid(&self) -> &[Frame] {
        &self.frames[..self.valid_len]
    }
}

pub fn pad_or_truncate(seq: &MfccSequence, fixed_frames: usize) -> PaddedWord {
    assert!(fixed_frames >= 1, "fixed_frames must be positive");
    let valid_len = seq.len().min(fixed_frames);
    let mut frames: Vec<Frame> = seq.frames()[..valid_len].to_vec();
    frames.resize(fixed_frames, [0.0; MFCC_DIM]);
    PaddedWord { frames, valid_len }
}

pub fn pad_sentence(sentence: &[SpokenWord], fixed_frames: usize) -> Vec<PaddedWord> {
    sentence
        .iter()
        .map(|w| pad_or_truncate(&w.audio, fixed_frames))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub vocab_size: usize,
    /// Homophone pairs as a fraction of the vocabulary: 0.1 with 100 words
    /// gives 10 pairs (20 words).
    pub homophone_fraction: f64,
    pub sentences: usize,
    pub sentence_len: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub min_frames: usize,
    pub max_frames: usize,
    /// 0 picks `max(2, vocab_size / 10)`.
    pub n_topics: usize,
    /// Probability that a token is drawn from the sentence topic rather than
    /// uniformly from the whole vocabulary.
    pub topic_focus: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            vocab_size: 100,
            homophone_fraction: 0.1,
            sentences: 5000,
            sentence_len: 6,
            noise_std: 0.1,
            seed: 0,
            min_frames: 3,
            max_frames: 8,
            n_topics: 0,
            topic_focus: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: SpokenCorpus,
    pub homophones: HomophonePairSet,
    pub words: Vec<String>,
    pub word_topic: Vec<usize>,
    /// Generator's unigram distribution, indexed like `words`.
    pub unigram: Vec<f64>,
    /// Noise-free acoustic template of every word.
    pub templates: Vec<MfccSequence>,
}

fn label_for(i: usize, vocab: usize) -> String {
    let width = vocab.saturating_sub(1).to_string().len().max(3);
    format!("w{i:0width$}")
}

pub fn make_synthetic_corpus(cfg: &SyntheticConfig) -> Result<SyntheticCorpus, S2vError> {
    let v = cfg.vocab_size;
    if v < 4 {
        return Err(S2vError::InvalidConfig("vocab_size must be at least 4".into()));
    }
    if !(0.0..=0.5).contains(&cfg.homophone_fraction) {
        return Err(S2vError::InvalidConfig(
            "homophone_fraction must lie in [0, 0.5]".into(),
        ));
    }
    if !(cfg.noise_std >= 0.0 && cfg.noise_std.is_finite()) {
        return Err(S2vError::InvalidConfig(
            "noise_std must be finite and nonnegative".into(),
        ));
    }
    if cfg.min_frames == 0 || cfg.min_frames > cfg.max_frames {
        return Err(S2vError::InvalidConfig("need 1 <= min_frames <= max_frames".into()));
    }
    if cfg.sentence_len == 0 {
        return Err(S2vError::InvalidConfig("sentence_len must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.topic_focus) {
        return Err(S2vError::InvalidConfig("topic_focus must lie in [0, 1]".into()));
    }
    let n_topics = if cfg.n_topics == 0 {
        (v / 10).max(2)
    } else {
        cfg.n_topics
    };
    if n_topics < 2 || n_topics > v {
        return Err(S2vError::InvalidConfig("n_topics must lie in [2, vocab_size]".into()));
    }
    let n_pairs = (cfg.homophone_fraction * v as f64).round() as usize;

    let mut rng_layout = rng::substream(cfg.seed, 1);
    let mut rng_audio = rng::substream(cfg.seed, 2);
    let mut rng_text = rng::substream(cfg.seed, 3);
    let mut rng_noise = rng::substream(cfg.seed, 4);

    let words: Vec<String> = (0..v).map(|i| label_for(i, v)).collect();

    // Shuffled positions decide both topic (position mod K) and homophone
    // pairing (positions 2k, 2k+1), so partners never share a topic.
    let mut order: Vec<usize> = (0..v).collect();
    order.shuffle(&mut rng_layout);
    let mut word_topic = vec![0; v];
    for (pos, &w) in order.iter().enumerate() {
        word_topic[w] = pos % n_topics;
    }
    // acoustic[w] = index of the template word w is pronounced as
    let mut acoustic: Vec<usize> = (0..v).collect();
    let mut pairs = Vec::new();
    for k in 0..n_pairs {
        let (a, b) = (order[2 * k], order[2 * k + 1]);
        acoustic[b] = a;
        pairs.push((words[a].clone(), words[b].clone()));
    }
    let homophones = HomophonePairSet::new(pairs).map_err(|e| S2vError::InvalidConfig(e.to_string()))?;

    let mut templates: Vec<Option<MfccSequence>> = vec![None; v];
    for w in 0..v {
        if acoustic[w] != w {
            continue;
        }
        let len = rng_audio.random_range(cfg.min_frames..=cfg.max_frames);
        let params: Vec<[f64; 4]> = (0..MFCC_DIM)
            .map(|_| {
                [
                    rng_audio.random_range(0.5..1.5),
                    rng_audio.random_range(0.3..1.5),
                    rng_audio.random_range(0.0..std::f64::consts::TAU),
                    rng_audio.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let frames = (0..len)
            .map(|t| {
                let mut f = [0.0; MFCC_DIM];
                for (c, p) in params.iter().enumerate() {
                    f[c] = p[0] * (p[1] * t as f64 + p[2]).sin() + p[3];
                }
                f
            })
            .collect();
        templates[w] = Some(MfccSequence::new(frames)?);
    }
    let templates: Vec<MfccSequence> = (0..v)
        .map(|w| templates[acoustic[w]].clone().expect("template generated"))
        .collect();

    let mut topic_words: Vec<Vec<usize>> = vec![Vec::new(); n_topics];
    for w in 0..v {
        topic_words[word_topic[w]].push(w);
    }
    let unigram: Vec<f64> = (0..v)
        .map(|w| {
            cfg.topic_focus / (n_topics as f64 * topic_words[word_topic[w]].len() as f64)
                + (1.0 - cfg.topic_focus) / v as f64
        })
        .collect();

    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| S2vError::InvalidConfig(e.to_string()))?;
    let mut sentences = Vec::with_capacity(cfg.sentences);
    for _ in 0..cfg.sentences {
        let topic = rng_text.random_range(0..n_topics);
        let mut sentence = Vec::with_capacity(cfg.sentence_len);
        for _ in 0..cfg.sentence_len {
            let w = if rng_text.random::<f64>() < cfg.topic_focus {
                let tw = &topic_words[topic];
                tw[rng_text.random_range(0..tw.len())]
            } else {
                rng_text.random_range(0..v)
            };
            let frames: Vec<Frame> = templates[w]
                .frames()
                .iter()
                .map(|f| {
                    let mut g = *f;
                    if cfg.noise_std > 0.0 {
                        for x in g.iter_mut() {
                            *x += noise.sample(&mut rng_noise);
                        }
                    }
                    g
                })
                .collect();
            sentence.push(SpokenWord {
                label: words[w].clone(),
                audio: MfccSequence::new(frames)?,
            });
        }
        sentences.push(sentence);
    }

    Ok(SyntheticCorpus {
        corpus: SpokenCorpus::new(sentences),
        homophones,
        words,
        word_topic,
        unigram,
        templates,
    })
}

impl SyntheticCorpus {
    /// One benchmark per standard identifier over the synthetic vocabulary.
    /// Gold scores reflect topic membership only (same topic high, otherwise
    /// low, plus jitter), so they carry no acoustic information.
    pub fn benchmarks(&self, pairs_per_benchmark: usize, seed: u64) -> Vec<WordPairBenchmark> {
        let v = self.words.len();
        BENCHMARK_NAMES
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let mut r = rng::substream(seed, 100 + k as u64);
                let pairs = (0..pairs_per_benchmark.max(2))
                    .map(|_| {
                        let a = r.random_range(0..v);
                        let mut b = r.random_range(0..v - 1);
                        if b >= a {
                            b += 1;
                        }
                        let base: f64 = if self.word_topic[a] == self.word_topic[b] {
                            7.0
                        } else {
                            1.0
                        };
                        let gold = base + r.random_range(0.0..3.0);
                        ScoredPair::new(&self.words[a], &self.words[b], (gold * 100.0).round() / 100.0)
                    })
                    .collect();
                WordPairBenchmark::new(name, pairs).expect("nonempty benchmark")
            })
            .collect()
    }
}
