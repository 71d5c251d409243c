use smartaug::cli::{cmd_train, load_splits, ExperimentConfig, METRICS_FILE};
use smartaug::data::split;
use smartaug::data::{gen_synthetic, SplitSpec, SyntheticSpec};
use smartaug::trainer::run_training;

fn tiny(num_net_a: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        num_net_a,
        seed,
        learning_rate: ExperimentConfig::default_learning_rate(num_net_a),
        epochs: 3,
        batch_size: 8,
        image_height: 8,
        image_width: 8,
        a_filters: 2,
        b_conv1: 2,
        b_conv2: 4,
        b_dense: 8,
        synthetic_train: 24,
        synthetic_val: 8,
        synthetic_test: 8,
        ..ExperimentConfig::default()
    }
}

fn csv_bytes(config: &ExperimentConfig) -> Vec<u8> {
    let out = tempfile::tempdir().unwrap();
    let m = cmd_train(config, out.path()).unwrap();
    std::fs::read(m.run_dir.join(METRICS_FILE)).unwrap()
}

#[test]
fn same_seed_gives_identical_metrics_files() {
    for n in [0, 1, 2] {
        let c = tiny(n, 5);
        assert_eq!(csv_bytes(&c), csv_bytes(&c), "num_net_a = {n}");
    }
}

#[test]
fn traditional_runs_are_reproducible() {
    let c = ExperimentConfig {
        traditional_aug: true,
        epochs: 1,
        synthetic_train: 6,
        ..tiny(1, 2)
    };
    assert_eq!(csv_bytes(&c), csv_bytes(&c));
}

#[test]
fn different_seeds_give_different_runs() {
    assert_ne!(csv_bytes(&tiny(1, 1)), csv_bytes(&tiny(1, 2)));
}

#[test]
fn in_memory_runs_match_checkpoint_for_checkpoint() {
    let c = tiny(1, 8);
    let s = load_splits(&c).unwrap();
    let a = run_training(&c, &s, &mut |_| {}).unwrap();
    let b = run_training(&c, &s, &mut |_| {}).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.best_checkpoint, b.best_checkpoint);
    assert_eq!(a.test_accuracy.to_bits(), b.test_accuracy.to_bits());
}

#[test]
fn splits_and_synthetic_data_are_seeded() {
    let spec = SyntheticSpec::new(8, 8);
    let ds = gen_synthetic(10, &spec, 3).unwrap();
    assert_eq!(ds, gen_synthetic(10, &spec, 3).unwrap());
    let sp = SplitSpec::default();
    assert_eq!(split(&ds, &sp, 4).unwrap(), split(&ds, &sp, 4).unwrap());
    assert_ne!(split(&ds, &sp, 4).unwrap(), split(&ds, &sp, 5).unwrap());
}
