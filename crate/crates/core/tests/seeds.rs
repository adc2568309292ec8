//! Seed-averaged runs: ordering, parallelism and resumption.

mod support;

use logicsent::distill::{parse_variant, DistillConfig};
use logicsent::experiment::{derive_seed, run_seeded, run_seeded_resumable, run_single};
use logicsent::rules::ProjectionConfig;

fn config(variant: &str) -> DistillConfig {
    let (mode, final_project) = parse_variant(variant).unwrap();
    DistillConfig {
        mode,
        final_project,
        projection: ProjectionConfig::default(),
        train: support::tiny_train_config(0),
    }
}

#[test]
fn matrix_equals_manual_reexecution() {
    let data = support::toy_data(10, [60, 20, 30], 0.3, 6);
    let cfg = config("distill,project");
    let m = run_seeded(&data, &cfg, 4, 100, 3).unwrap();
    assert_eq!(m.variant, "distill,project");
    assert!(!m.is_partial());
    for (i, run) in m.runs.iter().enumerate() {
        assert_eq!(run.index, i);
        assert_eq!(run.seed, 100 + i as u64);
        let (manual, _) = run_single(&data, &cfg, i, derive_seed(100, i)).unwrap();
        assert_eq!(run, &manual);
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let data = support::toy_data(11, [60, 20, 30], 0.3, 6);
    let cfg = config("no-distill,project");
    let one = run_seeded(&data, &cfg, 5, 7, 1).unwrap();
    let four = run_seeded(&data, &cfg, 5, 7, 4).unwrap();
    assert_eq!(one.runs, four.runs);
}

#[test]
fn resuming_after_interruption_matches_a_full_run() {
    let data = support::toy_data(12, [60, 20, 30], 0.3, 6);
    let cfg = config("no-distill,no-project");
    let full = run_seeded(&data, &cfg, 4, 1, 2).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let seeds = dir.path().join("seeds");
    run_seeded_resumable(&data, &cfg, "v", 2, 1, 2, &seeds).unwrap();
    // lose one finished seed, as if the process died while writing it
    std::fs::remove_file(seeds.join("seed-0001.json")).unwrap();
    std::fs::write(seeds.join("seed-0000.json.tmp"), "{").unwrap();
    let resumed = run_seeded_resumable(&data, &cfg, "v", 4, 1, 2, &seeds).unwrap();
    assert_eq!(resumed.runs, full.runs);
    assert!(seeds.join("seed-0003.json").exists());
}

#[test]
fn early_stopped_record_is_the_best_dev_epoch() {
    let data = support::toy_data(13, [60, 20, 30], 0.3, 6);
    let m = run_seeded(&data, &config("no-distill,no-project"), 3, 5, 3).unwrap();
    for run in &m.runs {
        let best = run
            .epochs
            .iter()
            .map(|e| e.eval.dev_acc)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.early_stopped.dev_acc, best);
        assert_eq!(run.early_stopped, run.epochs[run.best_epoch - 1].eval);
    }
    let summaries = m.summaries().unwrap();
    let tests = m.early_stopped_test();
    let (mean, _) = support::two_pass_mean_ci(&tests);
    assert!((summaries["test_acc"].mean - mean).abs() < 1e-12);
}

#[test]
fn toy_task_is_learnable() {
    let data = support::toy_data(14, [300, 60, 100], 0.0, 8);
    let mut cfg = config("no-distill,no-project");
    cfg.train.max_epochs = 15;
    cfg.train.patience = 15;
    let (run, _) = run_single(&data, &cfg, 0, 1).unwrap();
    assert!(run.early_stopped.test_acc > 0.9, "{:?}", run.early_stopped);
}
