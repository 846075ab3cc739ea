//! End-to-end runner behavior on the synthetic corpus: determinism, method
//! reductions, epoch accounting, divergence handling, comparison output.

use std::fs;

use batchboost::harness::{
    compare, metrics_to_csv, parse_manifest, run_experiment, ExperimentConfig, HarnessError,
};
use batchboost::{DatasetKind, Method};

fn blobs_config(method: Method) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(method, DatasetKind::Blobs);
    config.batch_size = 16;
    config.epochs = 3;
    config
}

#[test]
fn identical_configs_produce_identical_bytes() {
    let mut config = blobs_config(Method::Batchboost);
    config.seed = 42;
    let (rows_a, report_a) = run_experiment(&config).unwrap();
    let (rows_b, report_b) = run_experiment(&config).unwrap();
    assert_eq!(metrics_to_csv(&rows_a), metrics_to_csv(&rows_b));
    assert_eq!(report_a.final_test_accuracy, report_b.final_test_accuracy);
    assert_eq!(report_a.fresh_samples_drawn, report_b.fresh_samples_drawn);
}

#[test]
fn mixup_with_unit_lambda_reduces_to_baseline() {
    let mut mixup = blobs_config(Method::Mixup);
    mixup.fixed_lambda = Some(1.0);
    mixup.seed = 9;
    let mut baseline = blobs_config(Method::Baseline);
    baseline.seed = 9;
    let (rows_m, _) = run_experiment(&mixup).unwrap();
    let (rows_b, _) = run_experiment(&baseline).unwrap();
    assert_eq!(metrics_to_csv(&rows_m), metrics_to_csv(&rows_b));
}

#[test]
fn lineage_tracking_does_not_affect_metrics() {
    let mut on = blobs_config(Method::Batchboost);
    on.seed = 4;
    let mut off = on.clone();
    off.track_lineage = false;
    let (rows_on, _) = run_experiment(&on).unwrap();
    let (rows_off, _) = run_experiment(&off).unwrap();
    assert_eq!(metrics_to_csv(&rows_on), metrics_to_csv(&rows_off));
}

#[test]
fn fresh_consumption_matches_epoch_definition() {
    // Train split limited to 8, B=4: batchboost consumes 2 fresh per step,
    // so one epoch is ceil(8/2)=4 steps, plus B for the bootstrap batch.
    let mut config = ExperimentConfig::new(Method::Batchboost, DatasetKind::Blobs);
    config.limit = Some(8);
    config.batch_size = 4;
    config.epochs = 1;
    let (rows, report) = run_experiment(&config).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(report.fresh_samples_drawn, 4 + 4 * 2);

    // Baseline consumes B per step: ceil(8/4)=2 steps.
    config.method = Method::Baseline;
    let (_, report) = run_experiment(&config).unwrap();
    assert_eq!(report.fresh_samples_drawn, 2 * 4);

    // Over more epochs the per-epoch rate is exact.
    config.method = Method::Batchboost;
    config.epochs = 5;
    let (_, report) = run_experiment(&config).unwrap();
    assert_eq!(report.fresh_samples_drawn, 4 + 5 * 4 * 2);
}

#[test]
fn divergence_is_recorded_and_stops_after_three_bad_epochs() {
    // |1 - lr·wd| >> 1 grows the weights exponentially until the logits
    // overflow, which is the quickest honest route to non-finite losses.
    let mut config = blobs_config(Method::Baseline);
    config.lr = 1e4;
    config.weight_decay = 1e4;
    config.momentum = 0.0;
    config.epochs = 50;
    let (rows, report) = run_experiment(&config).unwrap();
    assert!(report.diverged);
    assert!(rows.len() < 50, "should early-stop, ran {}", rows.len());
    let bad_tail = rows
        .iter()
        .rev()
        .take_while(|r| !r.train_loss.is_finite() || !r.test_loss.is_finite())
        .count();
    assert_eq!(bad_tail, 3, "exactly three consecutive non-finite epochs");
    // Non-finite losses serialize as literals, not garbage.
    let csv = metrics_to_csv(&rows);
    assert!(csv.contains("nan") || csv.contains("inf"));
}

#[test]
fn zero_epochs_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    let mut config = blobs_config(Method::Baseline);
    config.epochs = 0;
    config.metrics_out = Some(path.clone());
    let (rows, report) = run_experiment(&config).unwrap();
    assert!(rows.is_empty());
    assert!(report.final_test_accuracy.is_nan());
    assert_eq!(
        fs::read_to_string(path).unwrap(),
        "epoch,train_loss,test_loss,test_accuracy,wall_ms\n"
    );
}

#[test]
fn grid_output_has_pgm_geometry_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.pgm");
    let mut config = blobs_config(Method::Batchboost);
    config.epochs = 1;
    config.grid_out = Some(grid.clone());
    run_experiment(&config).unwrap();

    // 16 samples of 16 features tile as 4x4 tiles of 4x4 pixels.
    let bytes = fs::read(&grid).unwrap();
    let header = b"P5\n16 16\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 256);

    let entries = parse_manifest(&fs::read_to_string(grid.with_extension("txt")).unwrap()).unwrap();
    assert_eq!(entries.len(), 16);
    // Feed half first (mixed, aged), fresh half after.
    assert!(entries[..8].iter().all(|e| e.age >= 1));
    assert!(entries[8..].iter().all(|e| e.age == 0 && e.origins == 1));
}

#[test]
fn validation_rejects_bad_configs() {
    let mut odd = blobs_config(Method::Baseline);
    odd.batch_size = 7;
    assert!(matches!(
        run_experiment(&odd),
        Err(HarnessError::InvalidConfig(_))
    ));

    let mut gamma = blobs_config(Method::Batchboost);
    gamma.gamma = 2.0;
    assert!(matches!(
        run_experiment(&gamma),
        Err(HarnessError::InvalidConfig(_))
    ));
    // The experimental flag opens the gate.
    gamma.experimental_gamma = true;
    gamma.epochs = 1;
    assert!(run_experiment(&gamma).is_ok());

    let mut lambda = blobs_config(Method::Mixup);
    lambda.fixed_lambda = Some(1.5);
    assert!(matches!(
        run_experiment(&lambda),
        Err(HarnessError::InvalidConfig(_))
    ));
}

#[test]
fn per_pair_lambda_mode_runs() {
    let mut config = blobs_config(Method::Batchboost);
    config.lambda_mode = "per-pair".parse().unwrap();
    config.epochs = 2;
    let (rows, report) = run_experiment(&config).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(!report.diverged);
}

#[test]
fn compare_aggregates_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let configs = vec![blobs_config(Method::Baseline), blobs_config(Method::Batchboost)];
    let seeds = [1u64, 2];
    let comparison = compare(&configs, &seeds, &out).unwrap();

    assert_eq!(comparison.summaries.len(), 2);
    for s in &comparison.summaries {
        assert_eq!(s.runs, 2);
        assert!(s.min_final_accuracy <= s.median_final_accuracy);
        assert!(s.median_final_accuracy <= s.max_final_accuracy);
    }
    for m in ["baseline", "batchboost"] {
        for s in seeds {
            assert!(out.join(format!("metrics_{m}_{s}.csv")).exists());
        }
    }
    let summary = fs::read_to_string(&comparison.summary_path).unwrap();
    assert!(summary.contains("batchboost vs baseline"));

    // Re-running the comparison reproduces the table byte for byte.
    let csv_a = fs::read(&comparison.csv_path).unwrap();
    let again = compare(&configs, &seeds, &dir.path().join("cmp2")).unwrap();
    assert_eq!(csv_a, fs::read(&again.csv_path).unwrap());
}

#[test]
fn compare_rejects_mismatched_configs() {
    let a = blobs_config(Method::Baseline);
    let mut b = blobs_config(Method::Batchboost);
    b.epochs = 99;
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        compare(&[a, b], &[1], dir.path()),
        Err(HarnessError::InvalidConfig(_))
    ));
}

#[test]
fn identical_methods_have_identical_medians() {
    let dir = tempfile::tempdir().unwrap();
    let configs = vec![blobs_config(Method::Mixup)];
    let a = compare(&configs, &[3, 4, 5], &dir.path().join("a")).unwrap();
    let b = compare(&configs, &[3, 4, 5], &dir.path().join("b")).unwrap();
    assert_eq!(
        a.summaries[0].median_final_accuracy,
        b.summaries[0].median_final_accuracy
    );
}
