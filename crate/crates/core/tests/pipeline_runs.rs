//! End-to-end pipeline runs: outputs, manifest, atomicity and validation.

use std::fs;
use std::path::Path;

use mfhurst::pipeline::{
    run_pipeline, sha256_hex, InputSpec, Manifest, PipelineConfig, SyntheticInput, SyntheticKind,
    MANIFEST_FILE,
};
use mfhurst::{ErrorClass, SeriesKind};

fn fgn_input(n: usize, seed: u64) -> InputSpec {
    InputSpec::synthetic(SyntheticInput {
        kind: SyntheticKind::Fgn,
        n: Some(n),
        hurst: Some(0.6),
        weight: None,
        levels: None,
        seed,
    })
}

fn small_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        inputs: vec![fgn_input(1200, 1)],
        kinds: vec![SeriesKind::Returns],
        out_dir: out.to_path_buf(),
        ..PipelineConfig::default()
    };
    cfg.rolling.step = 20;
    cfg
}

fn read_manifest(dir: &Path) -> Manifest {
    serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn synthetic_fgn_run_lists_five_csvs_and_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let manifest = run_pipeline(&small_config(&out), Some(2)).unwrap();
    let files: Vec<&str> = manifest.outputs.iter().map(|r| r.file.as_str()).collect();
    assert_eq!(
        files,
        [
            "returns.csv",
            "abs_returns.csv",
            "vol_increments.csv",
            "stats.csv",
            "rolling_returns.csv"
        ]
    );
    assert_eq!(manifest.config_sha256.len(), 64);
    assert!(manifest.rng.as_deref().unwrap().contains("ChaCha"));
    for record in &manifest.outputs {
        let bytes = fs::read(out.join(&record.file)).unwrap();
        assert_eq!(sha256_hex(&bytes), record.sha256);
        assert_eq!(bytes.len() as u64, record.bytes);
    }
    assert_eq!(read_manifest(&out), manifest);
    assert_eq!(
        manifest.inputs[0].window, 1095,
        "synthetic dates include weekends"
    );
}

#[test]
fn manifest_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let manifest = run_pipeline(&small_config(&first), None).unwrap();

    let mut replay = manifest.config.clone();
    replay.out_dir = tmp.path().join("replay");
    let again = run_pipeline(&replay, Some(1)).unwrap();
    assert_eq!(again, manifest);
    assert_eq!(
        fs::read(first.join(MANIFEST_FILE)).unwrap(),
        fs::read(replay.out_dir.join(MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn file_inputs_are_checksummed_and_get_their_own_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("asset.csv");
    let mut text = String::from("date,close\n");
    let start = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    let mut price = 100.0f64;
    for i in 0..1300u32 {
        price *= 1.0 + 0.01 * ((i as f64 * 0.37).sin() + 0.3 * (i as f64 * 1.91).cos());
        let d = start + chrono::Duration::days(i as i64);
        text.push_str(&format!("{d},{price}\n"));
    }
    fs::write(&csv, &text).unwrap();
    let mut cfg = small_config(&tmp.path().join("out"));
    cfg.inputs = vec![InputSpec::file(&csv), fgn_input(1300, 2)];
    cfg.kinds = SeriesKind::DERIVED.to_vec();
    cfg.rolling.window = Some(800);
    cfg.rolling.step = 100;
    let manifest = run_pipeline(&cfg, None).unwrap();
    assert_eq!(manifest.outputs.len(), 14);
    assert!(manifest
        .outputs
        .iter()
        .any(|r| r.file == "asset/rolling_vol_increments.csv"));
    assert!(manifest
        .outputs
        .iter()
        .any(|r| r.file == "synthetic/stats.csv"));
    assert_eq!(
        manifest.inputs[0].sha256.as_deref(),
        Some(sha256_hex(text.as_bytes()).as_str())
    );
    assert_eq!(manifest.inputs[0].observations, 1300);
}

#[test]
fn failed_run_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut cfg = small_config(&out);
    cfg.inputs = vec![fgn_input(300, 3)];
    let err = run_pipeline(&cfg, None).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Numerical, "{err}");
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn rerun_replaces_a_previous_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    run_pipeline(&small_config(&out), None).unwrap();
    fs::write(out.join("stale.txt"), "x").unwrap();
    run_pipeline(&small_config(&out), None).unwrap();
    assert!(!out.join("stale.txt").exists());
}

#[test]
fn validation_rejects_bad_configs_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let foreign = tmp.path().join("foreign");
    fs::create_dir(&foreign).unwrap();
    fs::write(foreign.join("keep.txt"), "mine").unwrap();

    let mut cases = Vec::new();
    cases.push(PipelineConfig {
        inputs: vec![],
        ..small_config(&tmp.path().join("a"))
    });
    cases.push(PipelineConfig {
        kinds: vec![],
        ..small_config(&tmp.path().join("b"))
    });
    let mut asym = small_config(&tmp.path().join("c"));
    asym.mfdfa.q_min = -4.0;
    cases.push(asym);
    let mut coarse = small_config(&tmp.path().join("f"));
    (coarse.mfdfa.q_min, coarse.mfdfa.q_max) = (-3.0, 3.0);
    cases.push(coarse);
    let mut dup = small_config(&tmp.path().join("d"));
    dup.inputs.push(fgn_input(1200, 9));
    cases.push(dup);
    cases.push(small_config(&foreign));
    let mut tiny_window = small_config(&tmp.path().join("e"));
    tiny_window.rolling.window = Some(40);
    cases.push(tiny_window);

    for cfg in cases {
        assert!(run_pipeline(&cfg, None).is_err(), "{cfg:?}");
    }
    assert_eq!(
        fs::read_to_string(foreign.join("keep.txt")).unwrap(),
        "mine"
    );
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
}

#[test]
fn missing_input_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("out"));
    cfg.inputs = vec![InputSpec::file(tmp.path().join("absent.csv"))];
    assert_eq!(
        run_pipeline(&cfg, None).unwrap_err().class(),
        ErrorClass::Data
    );
}

#[test]
fn toml_config_drives_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("toml-run");
    let text = format!(
        r#"
        kinds = ["abs_returns"]
        out_dir = "{}"
        [rolling]
        window = 600
        step = 50
        [mfdfa]
        q_min = -5.0
        q_max = 5.0
        q_step = 0.5
        [[inputs]]
        instrument = "noise"
        synthetic = {{ kind = "noise", n = 900, seed = 4 }}
        "#,
        out.display()
    );
    let cfg = PipelineConfig::from_toml(&text).unwrap();
    let manifest = run_pipeline(&cfg, None).unwrap();
    assert!(out.join("rolling_abs_returns.csv").exists());
    assert_eq!(manifest.inputs[0].instrument, "noise");
}
