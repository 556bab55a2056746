use s2v_core::embed_store::EmbeddingTable;
use s2v_core::forensics::{forensic_report, HomophonePairSet, Verdict};
use s2v_core::speech2vec::{
    make_synthetic_corpus, train, ModelConfig, ModelParams, OptimizerKind, SyntheticConfig, TrainConfig,
};

fn small_synthetic(seed: u64) -> s2v_core::speech2vec::SyntheticCorpus {
    make_synthetic_corpus(&SyntheticConfig {
        vocab_size: 20,
        sentences: 200,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn small_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        model: ModelConfig {
            embedding_dim: 8,
            encoder_hidden: 8,
            window: 2,
            ..ModelConfig::default()
        },
        fixed_frames: 10,
        batch_size: 8,
        epochs,
        eval_every: 0,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn forensic_report_on_hand_built_table() {
    // Homophones share a direction; the two groups are orthogonal.
    let table = EmbeddingTable::from_entries(
        2,
        [
            ("ate", vec![1.0, 0.0]),
            ("eight", vec![3.0, 0.0]),
            ("sea", vec![0.0, 2.0]),
            ("see", vec![0.0, 0.5]),
        ],
    )
    .unwrap();
    let pairs = HomophonePairSet::new([("ate", "eight"), ("sea", "see")]).unwrap();
    let report = forensic_report(&table, &pairs, 6, 5, 0.02).unwrap();
    assert_eq!(report.homophone.n_evaluated, 2);
    assert_eq!(report.homophone.mean, 1.0);
    assert_eq!(report.homophone.std, 0.0);
    // n = 6 draws every pair: two score 1, four score 0.
    assert_eq!(report.random_baseline.n_evaluated, 6);
    assert!((report.random_baseline.mean - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(report.verdict, Verdict::PhoneticallyConsistent);
    assert_eq!(report, forensic_report(&table, &pairs, 6, 5, 0.02).unwrap());
}

#[test]
fn sgd_reduces_loss_over_ten_epochs() {
    let syn = small_synthetic(11);
    let mut cfg = small_config(30, 11);
    cfg.optimizer = OptimizerKind::Sgd;
    let out = train(&cfg, &syn.corpus, &[], |_, _| Ok(())).unwrap();
    assert_eq!(out.metrics.len(), 30);
    assert!(out.metrics.iter().all(|m| m.mean_loss.is_finite()));
    assert!(out.metrics[9].mean_loss < out.metrics[0].mean_loss);
}

#[test]
fn training_is_bitwise_deterministic() {
    let syn = small_synthetic(12);
    let cfg = small_config(2, 12);
    let a = train(&cfg, &syn.corpus, &[], |_, _| Ok(())).unwrap();
    let b = train(&cfg, &syn.corpus, &[], |_, _| Ok(())).unwrap();
    let bits = |p: &ModelParams| p.flatten().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.params), bits(&b.params));
    let losses =
        |o: &s2v_core::speech2vec::TrainOutput| o.metrics.iter().map(|m| m.mean_loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&b));
}

#[test]
fn checkpoint_round_trip_through_file() {
    let params = ModelParams::init(&small_config(1, 0).model, 13).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("epoch_0007.ckpt");
    params
        .save_checkpoint(7, std::fs::File::create(&path).unwrap())
        .unwrap();
    let (loaded, epoch) = ModelParams::load_checkpoint(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(epoch, 7);
    assert_eq!(loaded, params);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    assert!(ModelParams::load_checkpoint(bytes.as_slice()).is_err());
}
