//! Acceptance suite. Prints one PASS, FAIL or SKIP line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Criterion 5 needs external data, located through environment variables:
//!
//! * `S2V_OFFICIAL_EMBEDDINGS`: released 50-dim embedding file
//! * `S2V_HOMOPHONES_307`: the 307-pair homophone list
//! * `S2V_LIBRI_CLEAN`: directory of clean-100 + clean-360 transcripts
//! * `S2V_LIBRI_ALL`: directory of all LibriSpeech transcripts
//! * `S2V_MEN`: MEN benchmark file

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use walkdir::WalkDir;

use s2v_core::embed_store::EmbeddingTable;
use s2v_core::forensics::{homophone_rank, pair_similarity_stats, random_pair_baseline, HomophonePairSet};
use s2v_core::mds::{classical_mds, MdsInput};
use s2v_core::rng::seeded;
use s2v_core::simbench::{evaluate_suite, spearman, suite_csv, WordPairBenchmark};
use s2v_core::speech2vec::{
    encode, extract_word_embeddings, grad_check, make_synthetic_corpus, random_batch, skipgram_loss, train,
    ModelConfig, ModelParams, PaddedWord, SyntheticConfig, TrainConfig, MFCC_DIM,
};
use s2v_core::vocab::{benchmark_oov, filter_min_count, vocab_diff, CountOptions, Vocabulary, WordFrequency};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(start: Instant, limit: Duration, detail: String, ok: bool) -> Outcome {
    let t = start.elapsed();
    let detail = format!("{detail}; {:.2} s (limit {} s)", t.as_secs_f64(), limit.as_secs());
    check(ok && t < limit, detail)
}

// Independent oracle: rank by counting, then textbook Pearson.
fn oracle_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va.sqrt() * vb.sqrt())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded(1);
    let mut worst = 0.0f64;
    let mut cases = 0;
    while cases < 1000 {
        let n = rng.random_range(2..=50);
        // Small integer ranges force ties.
        let kx = rng.random_range(2..=12);
        let ky = rng.random_range(2..=60);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..kx) as f64 * 0.5).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0..ky) as f64 - 7.0).collect();
        if xs.iter().all(|&x| x == xs[0]) || ys.iter().all(|&y| y == ys[0]) {
            continue;
        }
        let expect = oracle_pearson(&oracle_ranks(&xs), &oracle_ranks(&ys));
        let got = match spearman(&xs, &ys) {
            Ok(v) => v,
            Err(e) => return Outcome::Fail(format!("spearman failed: {e}")),
        };
        worst = worst.max((got - expect).abs());
        cases += 1;
    }
    within(
        start,
        Duration::from_secs(5),
        format!("{cases} cases, max |rho - oracle| = {worst:.2e}"),
        worst <= 1e-12,
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig {
        embedding_dim: 4,
        encoder_hidden: 4,
        window: 1,
        ..ModelConfig::default()
    };
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let params = ModelParams::init(&cfg, seed).expect("valid config");
        let batch = random_batch(seed, 2, 3, 4);
        match grad_check(&params, &batch, 1, 1e-4) {
            Ok(r) => worst = worst.max(r.max_rel_error),
            Err(e) => return Outcome::Fail(format!("model {seed}: {e}")),
        }
    }
    within(
        start,
        Duration::from_secs(120),
        format!("20 models, max relative error {worst:.3e}"),
        worst < 1e-4,
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig::default();
    let params = ModelParams::init(&cfg, 3).expect("valid config");
    let mut rng = seeded(33);
    let fixed = 20;
    let mut mismatches = 0;
    for _ in 0..100 {
        let len = rng.random_range(1..=4);
        let sentence: Vec<PaddedWord> = (0..len)
            .map(|_| {
                let valid_len = rng.random_range(1..=fixed);
                let mut frames = vec![[0.0; MFCC_DIM]; fixed];
                for f in frames.iter_mut().take(valid_len) {
                    f.iter_mut().for_each(|x| *x = rng.random_range(-2.0..2.0));
                }
                PaddedWord { frames, valid_len }
            })
            .collect();
        let altered: Vec<PaddedWord> = sentence
            .iter()
            .map(|w| {
                let mut a = w.clone();
                for f in &mut a.frames[w.valid_len..] {
                    f.iter_mut().for_each(|x| *x = rng.random_range(-9.0..9.0));
                }
                for _ in 0..rng.random_range(0..5) {
                    a.frames.push([0.0; MFCC_DIM]);
                }
                a
            })
            .collect();
        let l1 = skipgram_loss(&params, &sentence, cfg.window).expect("loss").loss;
        let l2 = skipgram_loss(&params, &altered, cfg.window).expect("loss").loss;
        if l1.to_bits() != l2.to_bits() {
            mismatches += 1;
        }
        for (a, b) in sentence.iter().zip(&altered) {
            let ea = encode(&params, a).expect("encode");
            let eb = encode(&params, b).expect("encode");
            if ea.iter().zip(&eb).any(|(x, y)| x.to_bits() != y.to_bits()) {
                mismatches += 1;
            }
        }
    }
    within(
        start,
        Duration::from_secs(10),
        format!("100 inputs, {mismatches} bitwise mismatches"),
        mismatches == 0,
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let seed = 7;
    let syn = make_synthetic_corpus(&SyntheticConfig {
        vocab_size: 100,
        homophone_fraction: 0.1,
        sentences: 5000,
        seed,
        ..SyntheticConfig::default()
    })
    .expect("synthetic corpus");
    let cfg = TrainConfig {
        epochs: 50,
        seed,
        eval_every: 0,
        ..TrainConfig::default()
    };
    let out = match train(&cfg, &syn.corpus, &[], |_, _| Ok(())) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(format!("training failed: {e}")),
    };
    let table = extract_word_embeddings(&out.params, &out.corpus, cfg.fixed_frames).expect("extraction");
    let h = pair_similarity_stats(&table, &syn.homophones).expect("homophone stats");
    let r = random_pair_baseline(&table, 1000, seed).expect("random baseline");
    let first = out.metrics.first().map_or(f64::NAN, |m| m.mean_loss);
    let last = out.metrics.last().map_or(f64::NAN, |m| m.mean_loss);
    within(
        start,
        Duration::from_secs(30 * 60),
        format!(
            "{} homophone pairs mean {:.4} (std {:.4}) vs random mean {:.4} (std {:.4}); loss {first:.5} -> {last:.5}",
            h.n_evaluated, h.mean, h.std, r.mean, r.std
        ),
        h.mean >= r.mean + 0.05,
    )
}

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).map(PathBuf::from).filter(|p| p.exists())
}

fn count_transcripts(root: &Path) -> WordFrequency {
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "txt"))
        .map(|e| e.into_path())
        .collect();
    files.sort();
    let mut freq = WordFrequency::new();
    for f in files {
        let skip = f.to_string_lossy().ends_with(".trans.txt");
        let file = std::fs::File::open(&f).expect("transcript readable");
        freq.add_reader(std::io::BufReader::new(file), CountOptions { skip_first_token: skip })
            .expect("transcript readable");
    }
    freq
}

fn load_table(p: &Path) -> EmbeddingTable {
    EmbeddingTable::load(std::io::BufReader::new(
        std::fs::File::open(p).expect("embeddings readable"),
    ))
    .expect("embeddings parse")
}

fn criterion_5a() -> Outcome {
    let Some(emb) = env_path("S2V_OFFICIAL_EMBEDDINGS") else {
        return Outcome::Skip("S2V_OFFICIAL_EMBEDDINGS not set".into());
    };
    let table = load_table(&emb);
    let mut ok = true;
    let mut notes = Vec::new();
    if let Some(list) = env_path("S2V_HOMOPHONES_307") {
        let set = HomophonePairSet::load(std::io::BufReader::new(
            std::fs::File::open(list).expect("list readable"),
        ))
        .expect("list parses");
        let s = pair_similarity_stats(&table, &set).expect("stats");
        ok &= (s.mean - 0.33).abs() <= 0.005 && (s.std - 0.15).abs() <= 0.005;
        notes.push(format!(
            "homophone mean {:.4} std {:.4} over {}",
            s.mean, s.std, s.n_evaluated
        ));
    } else {
        notes.push("S2V_HOMOPHONES_307 not set, mean/std not checked".into());
    }
    let rank = homophone_rank(&table, "hail", "hale");
    ok &= matches!(rank, Ok(15_253));
    notes.push(format!("rank(hail, hale) = {rank:?}"));
    let nn: Vec<String> = table
        .knn("sea", 3)
        .map(|v| v.into_iter().map(|(w, _)| w).collect())
        .unwrap_or_default();
    ok &= nn == ["ocean", "shore", "waters"];
    notes.push(format!("knn(sea, 3) = {nn:?}"));
    check(ok, notes.join("; "))
}

fn criterion_5b() -> Outcome {
    let clean = env_path("S2V_LIBRI_CLEAN");
    let all = env_path("S2V_LIBRI_ALL");
    if clean.is_none() && all.is_none() {
        return Outcome::Skip("S2V_LIBRI_CLEAN and S2V_LIBRI_ALL not set".into());
    }
    let official: Option<Vocabulary> =
        env_path("S2V_OFFICIAL_EMBEDDINGS").map(|p| load_table(&p).words().iter().cloned().collect());
    let mut ok = true;
    let mut notes = Vec::new();
    if let Some(c) = clean {
        let freq = count_transcripts(&c);
        let all_words = filter_min_count(&freq, 1);
        let frequent = filter_min_count(&freq, 5);
        ok &= freq.distinct() == 66_721 && frequent.len() == 27_454;
        notes.push(format!(
            "clean distinct {} count>=5 {}",
            freq.distinct(),
            frequent.len()
        ));
        if let Some(o) = &official {
            let m1 = vocab_diff(o, &all_words).missing.len();
            let m2 = vocab_diff(o, &frequent).missing.len();
            ok &= m1 == 1_685 && m2 == 10_168;
            notes.push(format!("missing {m1} / {m2}"));
        }
    }
    if let Some(a) = all {
        let frequent = filter_min_count(&count_transcripts(&a), 5);
        ok &= frequent.len() == 37_622;
        notes.push(format!("all count>=5 {}", frequent.len()));
        if let Some(o) = &official {
            let m = vocab_diff(o, &frequent).missing.len();
            ok &= m == 0;
            notes.push(format!("missing {m}"));
        }
    }
    check(ok, notes.join("; "))
}

fn criterion_5c() -> Outcome {
    let (Some(men), Some(clean)) = (env_path("S2V_MEN"), env_path("S2V_LIBRI_CLEAN")) else {
        return Outcome::Skip("S2V_MEN and S2V_LIBRI_CLEAN not both set".into());
    };
    let bench = WordPairBenchmark::load(
        "MEN",
        std::io::BufReader::new(std::fs::File::open(men).expect("MEN readable")),
    )
    .expect("MEN parses");
    let vocab = filter_min_count(&count_transcripts(&clean), 1);
    let n = benchmark_oov(&bench, &vocab);
    check(n == 231, format!("MEN not-found pairs {n}"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded(6);
    let dim = 50;
    // Orthonormal pair (u, v) by Gram-Schmidt.
    let mut u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= nu);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&u).for_each(|(x, y)| *x -= d * y);
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let offset: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();

    let plane: Vec<[f64; 2]> = (0..30)
        .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
        .collect();
    let points: Vec<Vec<f64>> = plane
        .iter()
        .map(|p| (0..dim).map(|k| offset[k] + p[0] * u[k] + p[1] * v[k]).collect())
        .collect();
    let labels = (0..30).map(|i| (format!("p{i}"), 0)).collect();
    let m = match classical_mds(MdsInput::Points(&points), labels) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(format!("mds failed: {e}")),
    };
    let mut worst = 0.0f64;
    for i in 0..30 {
        for j in 0..30 {
            let truth = ((plane[i][0] - plane[j][0]).powi(2) + (plane[i][1] - plane[j][1]).powi(2)).sqrt();
            worst = worst.max((m.distance(i, j) - truth).abs());
        }
    }
    within(
        start,
        Duration::from_secs(1),
        format!("30 points, max pairwise distance error {worst:.2e}"),
        worst <= 1e-8,
    )
}

fn criterion_7() -> Outcome {
    let syn = make_synthetic_corpus(&SyntheticConfig {
        seed: 70,
        ..SyntheticConfig::default()
    })
    .expect("synthetic corpus");
    let params = ModelParams::init(&ModelConfig::default(), 70).expect("valid config");
    let benches = syn.benchmarks(100, 70);
    let run = || {
        let table = extract_word_embeddings(&params, &syn.corpus, 20).expect("extraction");
        evaluate_suite(&table, &benches)
    };
    let a = run();
    let b = run();
    let rhos: Vec<f64> = a.iter().filter_map(|r| r.rho).collect();
    let all_finite = rhos.len() == 13 && rhos.iter().all(|r| r.is_finite());
    let max_abs = rhos.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let same = suite_csv(&a) == suite_csv(&b);
    check(
        a.len() == 13 && all_finite && max_abs < 0.4 && same,
        format!(
            "{} results, {} finite, max |rho| {max_abs:.4}, reruns identical: {same}",
            a.len(),
            rhos.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_s2v");
    let dirs = [
        tempfile::tempdir().expect("tempdir"),
        tempfile::tempdir().expect("tempdir"),
    ];
    for d in &dirs {
        let status = Command::new(bin)
            .args(["--seed", "8", "--quiet", "--out-dir"])
            .arg(d.path())
            .args([
                "train",
                "--synthetic",
                "--vocab",
                "30",
                "--sentences",
                "300",
                "--epochs",
                "3",
                "--dim",
                "10",
                "--hidden",
                "8",
                "--fixed-frames",
                "10",
                "--optimizer",
                "adam",
            ])
            .status()
            .expect("binary runs");
        if !status.success() {
            return Outcome::Fail(format!("train exited with {status}"));
        }
    }
    let read = |d: &tempfile::TempDir, name: &str| std::fs::read(d.path().join(name)).unwrap_or_default();
    let ckpt = "checkpoints/epoch_0003.ckpt";
    let same_ckpt = !read(&dirs[0], ckpt).is_empty() && read(&dirs[0], ckpt) == read(&dirs[1], ckpt);
    let same_metrics =
        !read(&dirs[0], "metrics.csv").is_empty() && read(&dirs[0], "metrics.csv") == read(&dirs[1], "metrics.csv");
    let same_emb = !read(&dirs[0], "embeddings.txt").is_empty()
        && read(&dirs[0], "embeddings.txt") == read(&dirs[1], "embeddings.txt");
    check(
        same_ckpt && same_metrics && same_emb,
        format!("final checkpoint identical: {same_ckpt}; metrics.csv identical: {same_metrics}; embeddings.txt identical: {same_emb}"),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1", "Spearman equals rank-then-Pearson oracle", criterion_1),
        ("2", "analytic gradients match finite differences", criterion_2),
        ("3", "padding never changes loss or encoding", criterion_3),
        ("4", "trained homophone cosine exceeds random by 0.05", criterion_4),
        ("5a", "released-embedding golden numbers", criterion_5a),
        ("5b", "LibriSpeech vocabulary golden numbers", criterion_5b),
        ("5c", "MEN not-found pairs", criterion_5c),
        ("6", "MDS recovers planar distances", criterion_6),
        (
            "7",
            "random-init suite: 13 finite rho below 0.4, deterministic",
            criterion_7,
        ),
        (
            "8",
            "train twice gives identical checkpoint, metrics and embeddings",
            criterion_8,
        ),
    ];
    let only: Option<Vec<String>> = std::env::var("S2V_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let mut failed = 0;
    for (id, title, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == id)) {
            continue;
        }
        let (tag, detail) = match f() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {id:<3} {title}: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
