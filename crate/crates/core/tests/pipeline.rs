use std::fs;
use std::path::Path;

use imfx::fixtures;
use imfx::nn::ModelKind;
use imfx::pipeline::*;
use imfx::Error;

fn small_config(dir: &Path, name: &str) -> PipelineConfig {
    let input = dir.join(format!("{name}.csv"));
    write_series_csv(&input, &fixtures::as_series("Close", fixtures::trend_tones(600, 5)).unwrap()).unwrap();
    PipelineConfig {
        input: Some(input),
        model: ModelChoice::Both,
        mlp_epochs: 4,
        lstm_epochs: 3,
        mlp_hidden: 8,
        lstm_units: 4,
        background: 12,
        seed: 17,
        out: dir.join("run"),
        ..Default::default()
    }
}

fn manifest_files(dir: &Path) -> Vec<String> {
    let m: Manifest = read_json(&dir.join("manifest.json")).unwrap();
    m.files.into_iter().map(|f| f.name).collect()
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "series");
    cfg.out = tmp.path().join("a");
    run_pipeline(&cfg).unwrap();
    cfg.out = tmp.path().join("b");
    run_pipeline(&cfg).unwrap();
    let mut names = manifest_files(&tmp.path().join("a"));
    names.push("manifest.json".into());
    for name in names {
        let a = fs::read(tmp.path().join("a").join(&name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(&name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
}

#[test]
fn manifest_lists_every_artifact_with_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "series");
    let run = run_pipeline(&cfg).unwrap();
    let listed = manifest_files(&cfg.out);
    for expected in [
        "decomposition.csv",
        "metrics.json",
        "predictions_mlp.csv",
        "predictions_lstm.csv",
        "attribution_mlp.json",
        "attribution_lstm.csv",
        "checkpoint_mlp.json",
        "overlay_mlp.svg",
        "importance_lstm.svg",
        "config.txt",
    ] {
        assert!(listed.iter().any(|n| n == expected), "{expected} missing from manifest");
    }
    let on_disk: Vec<String> = fs::read_dir(&cfg.out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json" && n != "timings.json")
        .collect();
    assert_eq!(on_disk.len(), listed.len());
    for rec in &run.manifest.files {
        assert_eq!(sha256_file(&cfg.out.join(&rec.name)).unwrap(), rec.sha256);
    }
    assert_eq!(run.manifest.config_digest, cfg.digest());
    assert_eq!(run.manifest.input.as_ref().unwrap().name, "series.csv");
}

#[test]
fn decomposition_file_feeds_training_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "series");
    cfg.model = ModelChoice::Mlp;
    let run = run_pipeline(&cfg).unwrap();
    let prepared = Prepared::from_decomposition_csv(&cfg.out.join("decomposition.csv"), &cfg).unwrap();
    let ckpt = train_model(&prepared, &cfg, ModelKind::Mlp, &[]).unwrap();
    assert_eq!(&ckpt, &run.checkpoints["mlp"]);
    let stored: Checkpoint = read_json(&cfg.out.join("checkpoint_mlp.json")).unwrap();
    assert_eq!(stored, ckpt);
    let p = predict(&prepared, &stored).unwrap();
    let (_, actual, predicted) = read_predictions_csv(&cfg.out.join("predictions_mlp.csv")).unwrap();
    assert_eq!(p.actual, actual);
    assert_eq!(p.predicted, predicted);
}

#[test]
fn predictions_align_with_validation_block() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "series");
    cfg.model = ModelChoice::Mlp;
    let run = run_pipeline(&cfg).unwrap();
    let (t, actual, _) = read_predictions_csv(&cfg.out.join("predictions_mlp.csv")).unwrap();
    let series = load_csv(cfg.input.as_ref().unwrap(), "Close").unwrap();
    let val_start = run.metrics.train_rows;
    assert_eq!(actual.len(), run.metrics.val_rows - cfg.window);
    assert_eq!(t[0], (val_start + cfg.window).to_string());
    assert_eq!(actual[0], series.values()[val_start + cfg.window]);
    assert_eq!(run.metrics.models["mlp"].metrics.samples, actual.len());
}

#[test]
fn ablation_block_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "series");
    cfg.model = ModelChoice::Mlp;
    cfg.exclude_imfs = vec![1];
    let run = run_pipeline(&cfg).unwrap();
    let block = run.metrics.ablation.as_ref().expect("ablation block");
    assert_eq!(block.excluded, vec![1]);
    assert_eq!(block.excluded_names, vec!["imf_1"]);
    let m = &block.models["mlp"];
    assert_eq!(m.mse_change, m.metrics.mse - run.metrics.models["mlp"].metrics.mse);
    let text = fs::read_to_string(cfg.out.join("metrics.json")).unwrap();
    assert!(text.contains("\"ablation\""));
}

#[test]
fn attribution_report_is_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "series");
    let run = run_pipeline(&cfg).unwrap();
    for tag in ["mlp", "lstm"] {
        let file: AttributionFile = read_json(&cfg.out.join(format!("attribution_{tag}.json"))).unwrap();
        assert_eq!(file.report, run.reports[tag]);
        assert_eq!(file.model, tag);
        assert_eq!(file.baselines, 12);
        assert_eq!(file.report.channel_names, run.metrics.channels);
        let pct: f64 = file.report.percent.unwrap().iter().sum();
        assert!((pct - 100.0).abs() < 1e-9);
    }
}

#[test]
fn stage_failures_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "series");
    cfg.column = "Open".into();
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(&err, Error::Stage { stage: "load", .. }), "{err}");
    assert!(err.to_string().contains("load stage failed"));

    let mut cfg = small_config(tmp.path(), "series");
    cfg.exclude_imfs = vec![40];
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(&err, Error::Stage { stage: "ablate", .. }), "{err}");
}

#[test]
fn config_file_round_trip_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "series");
    let path = tmp.path().join("run.conf");
    fs::write(&path, cfg.to_text()).unwrap();
    assert_eq!(PipelineConfig::from_file(&path).unwrap(), cfg);
}
