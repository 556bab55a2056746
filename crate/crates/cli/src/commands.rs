use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use walkdir::WalkDir;

use s2v_core::forensics::{forensic_report, HomophonePairSet, DEFAULT_MARGIN};
use s2v_core::mds::{classical_mds, MdsInput};
use s2v_core::rng::sample_sorted;
use s2v_core::simbench::{canonical_name, evaluate_suite, suite_csv, suite_table, WordPairBenchmark};
use s2v_core::speech2vec::{
    encode, extract_word_embeddings, grad_check, make_synthetic_corpus, pad_or_truncate, random_batch, train,
    EpochMetrics, ModelConfig, ModelParams, S2vError, SpokenCorpus, SpokenWord, SyntheticConfig, TrainConfig,
};
use s2v_core::vocab::{
    benchmark_oov, filter_min_count, read_vocabulary, vocab_diff, write_vocabulary, CountOptions, Vocabulary,
    WordFrequency,
};
use s2v_core::EmbeddingTable;

use crate::fail::{usage, Classify, CliResult, Failure, COMPUTE, USAGE};
use crate::{BenchArgs, Cli, Command, GradcheckArgs, InspectArgs, MdsArgs, TrainArgs, VocabArgs};

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Inspect(a) => inspect(cli, a),
        Command::Vocab(a) => vocab(cli, a),
        Command::Bench(a) => bench(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Mds(a) => mds(cli, a),
        Command::Gradcheck(a) => gradcheck(cli, a),
    }
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

fn require_dir(path: &Path, what: &str) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("{what} is not a directory: {}", path.display())))
    }
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).usage_err(|| format!("cannot create {}", dir.display()))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .usage_err(|| format!("cannot open {}", path.display()))
}

fn write_file(dir: &Path, name: &str, content: impl AsRef<[u8]>) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, content).usage_err(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let ctx = || format!("cannot write {}", path.display());
    let mut w = BufWriter::new(File::create(path).usage_err(ctx)?);
    f(&mut w).usage_err(ctx)?;
    w.flush().usage_err(ctx)
}

fn say(cli: &Cli, text: &str) {
    if !cli.quiet {
        print!("{text}");
    }
}

fn load_table(path: &Path) -> CliResult<EmbeddingTable> {
    EmbeddingTable::load(open(path)?).usage_err(|| format!("cannot read embeddings {}", path.display()))
}

fn load_homophones(path: &Path) -> CliResult<HomophonePairSet> {
    HomophonePairSet::load(open(path)?).usage_err(|| format!("cannot read homophone list {}", path.display()))
}

/// Benchmark files directly inside `dir`, sorted by benchmark name.
fn load_benchmarks(dir: &Path) -> CliResult<Vec<WordPairBenchmark>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).usage_err(|| format!("cannot list {}", dir.display()))? {
        let path = entry.usage_err(|| format!("cannot list {}", dir.display()))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && matches!(ext, "txt" | "csv" | "tsv") {
            files.push(path);
        }
    }
    let mut benches = Vec::with_capacity(files.len());
    for path in files {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let name = canonical_name(stem).unwrap_or(stem).to_string();
        let b = WordPairBenchmark::load(&name, open(&path)?)
            .usage_err(|| format!("cannot read benchmark {}", path.display()))?;
        benches.push(b);
    }
    benches.sort_by(|a, b| a.name().cmp(b.name()));
    if benches.is_empty() {
        return Err(usage(format!("no benchmark files in {}", dir.display())));
    }
    Ok(benches)
}

fn inspect(cli: &Cli, a: &InspectArgs) -> CliResult<()> {
    require_file(&a.embeddings, "embedding file")?;
    require_file(&a.homophones, "homophone list")?;
    if !(a.margin > 0.0 && a.margin.is_finite()) {
        return Err(usage("--margin must be positive"));
    }
    if a.k == 0 && !a.queries.is_empty() {
        return Err(usage("--k must be at least 1"));
    }
    prepare_dir(&cli.out_dir)?;

    let table = load_table(&a.embeddings)?;
    let pairs = load_homophones(&a.homophones)?;
    let report =
        forensic_report(&table, &pairs, a.random_n, cli.seed, a.margin).compute_err(|| "inspection failed".into())?;
    write_file(&cli.out_dir, "inspect_summary.txt", report.to_key_value())?;
    write_file(&cli.out_dir, "inspect_pairs.csv", report.per_pair_csv())?;
    say(cli, &report.to_human());

    if !a.queries.is_empty() {
        let mut csv = String::from("query,rank,neighbor,cosine\n");
        let mut human = String::new();
        for q in &a.queries {
            let q = q.to_lowercase();
            let nn = table.knn(&q, a.k).usage_err(|| format!("query `{q}`"))?;
            let _ = writeln!(human, "\nnearest neighbors of {q}");
            for (r, (w, c)) in nn.iter().enumerate() {
                let _ = writeln!(csv, "{q},{},{w},{c:.6}", r + 1);
                let _ = writeln!(human, "  {:>3}  {:<20} {:>9.4}", r + 1, w, c);
            }
        }
        write_file(&cli.out_dir, "inspect_knn.csv", csv)?;
        say(cli, &human);
    }
    Ok(())
}

/// Files named directly, plus `*.txt` files under directories, each
/// directory's files sorted by path.
fn transcript_files(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_file() {
            out.push(p.clone());
            continue;
        }
        let mut found = Vec::new();
        for entry in WalkDir::new(p) {
            let entry = entry.usage_err(|| format!("cannot walk {}", p.display()))?;
            if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "txt") {
                found.push(entry.into_path());
            }
        }
        found.sort();
        out.extend(found);
    }
    Ok(out)
}

fn vocab(cli: &Cli, a: &VocabArgs) -> CliResult<()> {
    if let Some(p) = &a.embeddings {
        require_file(p, "embedding file")?;
    }
    if let Some(p) = &a.reference_vocab {
        require_file(p, "reference vocabulary")?;
    }
    for p in &a.transcripts {
        if !p.exists() {
            return Err(usage(format!("transcript path not found: {}", p.display())));
        }
    }
    if let Some(d) = &a.benchmarks_dir {
        require_dir(d, "benchmarks directory")?;
    }
    if a.min_count == 0 {
        return Err(usage("--min-count must be at least 1"));
    }
    prepare_dir(&cli.out_dir)?;

    let reference: Vocabulary = match (&a.embeddings, &a.reference_vocab) {
        (Some(p), _) => load_table(p)?.words().iter().cloned().collect(),
        (None, Some(p)) => read_vocabulary(open(p)?).usage_err(|| format!("cannot read {}", p.display()))?,
        (None, None) => unreachable!("clap requires one reference"),
    };
    let files = transcript_files(&a.transcripts)?;
    let mut freq = WordFrequency::new();
    for f in &files {
        let by_name = f
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(".trans.txt"));
        let opts = CountOptions {
            skip_first_token: a.utterance_ids || by_name,
        };
        freq.add_reader(open(f)?, opts)
            .usage_err(|| format!("cannot read {}", f.display()))?;
    }
    let corpus_vocab = filter_min_count(&freq, a.min_count);
    let diff = vocab_diff(&reference, &corpus_vocab);

    let mut kv = String::new();
    let _ = writeln!(kv, "reference_size={}", diff.reference_size);
    let _ = writeln!(kv, "transcript_files={}", files.len());
    let _ = writeln!(kv, "total_tokens={}", freq.total_tokens);
    let _ = writeln!(kv, "distinct_words={}", freq.distinct());
    let _ = writeln!(kv, "min_count={}", a.min_count);
    let _ = writeln!(kv, "corpus_vocab_size={}", diff.corpus_size);
    let _ = writeln!(kv, "missing={}", diff.missing.len());
    write_file(&cli.out_dir, "vocab_summary.txt", &kv)?;
    write_with(&cli.out_dir.join("vocab_missing.txt"), |w| {
        write_vocabulary(w, &diff.missing)
    })?;
    write_with(&cli.out_dir.join("vocab_corpus.txt"), |w| {
        write_vocabulary(w, &corpus_vocab)
    })?;

    let mut human = String::new();
    let _ = writeln!(human, "{:<28} {:>12}", "reference vocabulary", diff.reference_size);
    let _ = writeln!(human, "{:<28} {:>12}", "transcript tokens", freq.total_tokens);
    let _ = writeln!(human, "{:<28} {:>12}", "distinct words", freq.distinct());
    let _ = writeln!(
        human,
        "{:<28} {:>12}",
        format!("words with count >= {}", a.min_count),
        diff.corpus_size
    );
    let _ = writeln!(human, "{:<28} {:>12}", "missing", diff.missing.len());

    if let Some(d) = &a.benchmarks_dir {
        let benches = load_benchmarks(d)?;
        let mut csv = String::from("name,pairs,not_found\n");
        let _ = writeln!(human, "\n{:<14} {:>7} {:>10}", "benchmark", "pairs", "not found");
        for b in &benches {
            let oov = benchmark_oov(b, &corpus_vocab);
            let _ = writeln!(csv, "{},{},{}", b.name(), b.pairs().len(), oov);
            let _ = writeln!(human, "{:<14} {:>7} {:>10}", b.name(), b.pairs().len(), oov);
        }
        write_file(&cli.out_dir, "vocab_benchmark_oov.csv", csv)?;
    }
    say(cli, &human);
    Ok(())
}

fn bench(cli: &Cli, a: &BenchArgs) -> CliResult<()> {
    require_file(&a.embeddings, "embedding file")?;
    require_dir(&a.benchmarks_dir, "benchmarks directory")?;
    prepare_dir(&cli.out_dir)?;
    let table = load_table(&a.embeddings)?;
    let benches = load_benchmarks(&a.benchmarks_dir)?;
    let results = evaluate_suite(&table, &benches);
    write_file(&cli.out_dir, "bench_suite.csv", suite_csv(&results))?;
    say(cli, &suite_table(&results));
    for r in &results {
        if let Some(e) = &r.error {
            warn!("{}: {e}", r.name);
        }
    }
    if results.iter().all(|r| r.rho.is_none()) {
        return Err(Failure {
            code: COMPUTE,
            error: anyhow::anyhow!("no benchmark could be evaluated"),
        });
    }
    Ok(())
}

fn model_config(m: &crate::ModelArgs) -> ModelConfig {
    ModelConfig {
        embedding_dim: m.dim,
        encoder_hidden: m.hidden,
        window: m.window,
        pooling: m.pooling.into(),
        shared_decoder: m.shared_decoder,
        feed_embedding: m.feed_embedding,
    }
}

fn config_echo(cfg: &TrainConfig, corpus_source: &str) -> String {
    let m = &cfg.model;
    let mut s = String::new();
    let _ = writeln!(s, "corpus={corpus_source}");
    let _ = writeln!(s, "window={}", m.window);
    let _ = writeln!(s, "embedding_dim={}", m.embedding_dim);
    let _ = writeln!(s, "encoder_hidden={}", m.encoder_hidden);
    let _ = writeln!(s, "pooling={:?}", m.pooling);
    let _ = writeln!(s, "shared_decoder={}", m.shared_decoder);
    let _ = writeln!(s, "feed_embedding={}", m.feed_embedding);
    let _ = writeln!(s, "learning_rate={}", cfg.learning_rate);
    let _ = writeln!(s, "optimizer={:?}", cfg.optimizer);
    let _ = writeln!(s, "epochs={}", cfg.epochs);
    let _ = writeln!(s, "batch_size={}", cfg.batch_size);
    let _ = writeln!(s, "fixed_frames={}", cfg.fixed_frames);
    let _ = writeln!(s, "min_count={}", cfg.min_count);
    let _ = writeln!(s, "eval_every={}", cfg.eval_every);
    let _ = writeln!(s, "seed={}", cfg.seed);
    s
}

fn metrics_csv(names: &[String], metrics: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,mean_loss");
    for n in names {
        let _ = write!(s, ",{n}");
    }
    s.push('\n');
    for m in metrics {
        let _ = write!(s, "{},{}", m.epoch, m.mean_loss);
        for k in 0..names.len() {
            let rho = m.suite.as_ref().and_then(|r| r[k].rho);
            match rho {
                Some(v) => {
                    let _ = write!(s, ",{v:.6}");
                }
                None => s.push_str(",NA"),
            }
        }
        s.push('\n');
    }
    s
}

fn checkpoint_name(epoch: usize) -> String {
    format!("epoch_{epoch:04}.ckpt")
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> CliResult<()> {
    if let Some(p) = &a.corpus {
        require_file(p, "corpus file")?;
    }
    if let Some(d) = &a.benchmarks_dir {
        require_dir(d, "benchmarks directory")?;
    }
    if let Some(p) = &a.homophones {
        require_file(p, "homophone list")?;
    }
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return Err(usage("--lr must be positive"));
    }
    let cfg = TrainConfig {
        model: model_config(&a.model),
        fixed_frames: a.fixed_frames,
        batch_size: a.batch_size,
        epochs: a.epochs,
        optimizer: a.optimizer.into(),
        learning_rate: a.lr,
        min_count: a.min_count,
        seed: cli.seed,
        eval_every: a.eval_every,
    };
    cfg.validate().usage_err(|| "invalid training configuration".into())?;
    let ckpt_dir = cli.out_dir.join("checkpoints");
    prepare_dir(&ckpt_dir)?;
    // Stale checkpoints from an earlier run in the same directory would be
    // mistaken for this run's output.
    for entry in fs::read_dir(&ckpt_dir).usage_err(|| format!("cannot list {}", ckpt_dir.display()))? {
        let path = entry
            .usage_err(|| format!("cannot list {}", ckpt_dir.display()))?
            .path();
        let is_ckpt = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("epoch_") && n.ends_with(".ckpt"));
        if is_ckpt {
            fs::remove_file(&path).usage_err(|| format!("cannot remove {}", path.display()))?;
        }
    }

    let (corpus, source, mut homophones, mut benches) = if a.synthetic.synthetic {
        let s = &a.synthetic;
        let syn = make_synthetic_corpus(&SyntheticConfig {
            vocab_size: s.vocab,
            homophone_fraction: s.homophone_fraction,
            sentences: s.sentences,
            sentence_len: s.sentence_len,
            noise_std: s.noise,
            seed: cli.seed,
            ..SyntheticConfig::default()
        })
        .usage_err(|| "invalid synthetic corpus settings".into())?;
        write_with(&cli.out_dir.join("corpus.txt"), |w| syn.corpus.save(w))?;
        let mut pairs = String::new();
        for (x, y) in syn.homophones.pairs() {
            let _ = writeln!(pairs, "{x},{y}");
        }
        write_file(&cli.out_dir, "homophones.txt", pairs)?;
        let benches = syn.benchmarks(s.bench_pairs, cli.seed);
        let bdir = cli.out_dir.join("benchmarks");
        prepare_dir(&bdir)?;
        for b in &benches {
            write_with(&bdir.join(format!("{}.txt", b.name())), |w| b.save(w))?;
        }
        (syn.corpus, "synthetic".to_string(), Some(syn.homophones), benches)
    } else {
        let path = a.corpus.as_ref().expect("clap requires --corpus without --synthetic");
        let corpus = SpokenCorpus::load(open(path)?).usage_err(|| format!("cannot read corpus {}", path.display()))?;
        (corpus, path.display().to_string(), None, Vec::new())
    };
    if let Some(d) = &a.benchmarks_dir {
        benches = load_benchmarks(d)?;
    }
    if let Some(p) = &a.homophones {
        homophones = Some(load_homophones(p)?);
    }

    let echo = config_echo(&cfg, &source);
    write_file(&cli.out_dir, "train_config.txt", &echo)?;
    for line in echo.lines() {
        info!("{line}");
    }

    let mut io_failure: Option<Failure> = None;
    let result = train(&cfg, &corpus, &benches, |params, m| {
        let epoch = m.map_or(0, |m| m.epoch);
        let path = ckpt_dir.join(checkpoint_name(epoch));
        let saved = File::create(&path).and_then(|f| {
            let mut w = BufWriter::new(f);
            params.save_checkpoint(epoch, &mut w)?;
            w.flush()
        });
        if let Err(e) = saved {
            io_failure = Some(Failure {
                code: USAGE,
                error: anyhow::Error::new(e).context(format!("cannot write {}", path.display())),
            });
            return Err(S2vError::Io(std::io::Error::other("checkpoint write failed")));
        }
        if let Some(m) = m {
            info!("epoch {} mean loss {:.6}", m.epoch, m.mean_loss);
        }
        Ok(())
    });
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            if let Some(f) = io_failure {
                return Err(f);
            }
            let code = if matches!(e, S2vError::InvalidConfig(_) | S2vError::Io(_)) {
                USAGE
            } else {
                COMPUTE
            };
            return Err(Failure {
                code,
                error: anyhow::Error::new(e).context("training failed"),
            });
        }
    };
    if cfg.epochs == 0 {
        say(cli, "initial checkpoint written; no epochs run\n");
        return Ok(());
    }

    let names: Vec<String> = benches.iter().map(|b| b.name().to_string()).collect();
    write_file(&cli.out_dir, "metrics.csv", metrics_csv(&names, &out.metrics))?;
    let table = extract_word_embeddings(&out.params, &out.corpus, cfg.fixed_frames)
        .compute_err(|| "embedding extraction failed".into())?;
    write_with(&cli.out_dir.join("embeddings.txt"), |w| table.save(w))?;

    let mut human = String::new();
    let last = out.metrics.last().expect("epochs > 0");
    let _ = writeln!(
        human,
        "trained {} epochs on {} sentences; final mean loss {:.6}",
        cfg.epochs,
        out.corpus.sentences().len(),
        last.mean_loss
    );
    let _ = writeln!(human, "vocabulary after min-count filter: {} words", table.len());
    if let Some(suite) = out.metrics.iter().rev().find_map(|m| m.suite.as_ref()) {
        human.push('\n');
        human.push_str(&suite_table(suite));
    }
    if let Some(set) = &homophones {
        let v = table.len() as u64;
        let n_random = a.random_n.min(v * v.saturating_sub(1) / 2);
        match forensic_report(&table, set, n_random, cli.seed, DEFAULT_MARGIN) {
            Ok(r) => {
                write_file(&cli.out_dir, "train_forensics.txt", r.to_key_value())?;
                human.push('\n');
                human.push_str(&r.to_human());
            }
            Err(e) => warn!("post-training inspection skipped: {e}"),
        }
    }
    say(cli, &human);
    Ok(())
}

fn mds(cli: &Cli, a: &MdsArgs) -> CliResult<()> {
    match (&a.embeddings, &a.checkpoint, &a.corpus) {
        (Some(e), _, _) => require_file(e, "embedding file")?,
        (None, Some(c), Some(k)) => {
            require_file(c, "checkpoint")?;
            require_file(k, "corpus file")?;
        }
        _ => return Err(usage("give --embeddings, or --checkpoint with --corpus")),
    }
    if a.per_word_cap == 0 || a.fixed_frames == 0 {
        return Err(usage("--per-word-cap and --fixed-frames must be at least 1"));
    }
    prepare_dir(&cli.out_dir)?;
    let mut seen = BTreeSet::new();
    let words: Vec<String> = a
        .words
        .iter()
        .map(|w| w.trim().to_lowercase())
        .filter(|w| !w.is_empty() && seen.insert(w.clone()))
        .collect();

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<(String, usize)> = Vec::new();
    if let Some(path) = &a.embeddings {
        let table = load_table(path)?;
        for w in &words {
            match table.vector(w) {
                Some(v) => {
                    points.push(v.to_vec());
                    labels.push((w.clone(), 0));
                }
                None => warn!("`{w}` is not in the embedding table"),
            }
        }
    } else {
        let ckpt = a.checkpoint.as_ref().expect("checked above");
        let (params, _) = ModelParams::load_checkpoint(open(ckpt)?)
            .usage_err(|| format!("cannot read checkpoint {}", ckpt.display()))?;
        let corpus_path = a.corpus.as_ref().expect("checked above");
        let corpus = SpokenCorpus::load(open(corpus_path)?)
            .usage_err(|| format!("cannot read corpus {}", corpus_path.display()))?;
        for (k, w) in words.iter().enumerate() {
            let occ: Vec<&SpokenWord> = corpus.sentences().iter().flatten().filter(|x| &x.label == w).collect();
            if occ.is_empty() {
                warn!("`{w}` does not occur in the corpus");
            }
            for id in sample_sorted(occ.len(), a.per_word_cap, cli.seed, k as u64) {
                let e = encode(&params, &pad_or_truncate(&occ[id].audio, a.fixed_frames))
                    .compute_err(|| format!("encoding `{w}`"))?;
                points.push(e);
                labels.push((w.clone(), id));
            }
        }
    }
    if points.len() < 3 {
        return Err(usage(format!("MDS needs at least 3 points, found {}", points.len())));
    }
    let m = classical_mds(MdsInput::Points(&points), labels).compute_err(|| "MDS failed".into())?;
    write_file(&cli.out_dir, "mds.csv", m.to_csv())?;

    let mut human = format!("{:<20} {:>6} {:>10} {:>10}\n", "word", "points", "x", "y");
    for w in &words {
        let n = m.labels.iter().filter(|(l, _)| l == w).count();
        if let Some([x, y]) = m.centroid(w) {
            let _ = writeln!(human, "{w:<20} {n:>6} {x:>10.4} {y:>10.4}");
        }
    }
    let _ = writeln!(
        human,
        "top eigenvalues: {:.6}, {:.6}",
        m.eigenvalues[0], m.eigenvalues[1]
    );
    say(cli, &human);
    Ok(())
}

fn gradcheck(cli: &Cli, a: &GradcheckArgs) -> CliResult<()> {
    if !(a.epsilon > 0.0 && a.epsilon.is_finite()) || a.tolerance.is_nan() || a.tolerance <= 0.0 {
        return Err(usage("--epsilon and --tolerance must be positive"));
    }
    if a.models == 0 || a.sentences == 0 || a.sentence_len == 0 || a.fixed_frames == 0 {
        return Err(usage(
            "--models, --sentences, --sentence-len and --fixed-frames must be at least 1",
        ));
    }
    prepare_dir(&cli.out_dir)?;
    let cfg = ModelConfig {
        embedding_dim: a.dim,
        encoder_hidden: a.hidden,
        window: a.window,
        pooling: a.pooling.into(),
        shared_decoder: a.shared_decoder,
        feed_embedding: a.feed_embedding,
    };
    let mut csv = String::from("model,seed,n_params,max_rel_error,worst_tensor\n");
    let mut human = format!(
        "{:>5} {:>8} {:>13} {}\n",
        "model", "params", "max rel err", "worst tensor"
    );
    let mut worst = 0.0f64;
    for k in 0..a.models {
        let seed = cli.seed.wrapping_add(k);
        let params = ModelParams::init(&cfg, seed).usage_err(|| "invalid model configuration".into())?;
        let batch = random_batch(seed, a.sentences, a.sentence_len, a.fixed_frames);
        let r =
            grad_check(&params, &batch, a.window, a.epsilon).compute_err(|| format!("gradient check of model {k}"))?;
        worst = worst.max(r.max_rel_error);
        let _ = writeln!(
            csv,
            "{k},{seed},{},{:e},{}",
            r.n_params, r.max_rel_error, r.worst_tensor
        );
        let _ = writeln!(
            human,
            "{k:>5} {:>8} {:>13.3e} {}",
            r.n_params, r.max_rel_error, r.worst_tensor
        );
    }
    write_file(&cli.out_dir, "gradcheck.csv", csv)?;
    say(cli, &human);
    if worst >= a.tolerance {
        return Err(Failure {
            code: COMPUTE,
            error: anyhow::anyhow!("max relative error {worst:e} exceeds tolerance {:e}", a.tolerance),
        });
    }
    Ok(())
}
