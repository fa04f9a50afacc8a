mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lifespan::core::curation::fractional_year;
use lifespan::curation::transport::FixtureEntry;
use lifespan::report::EvaluationSummary;
use sha2::{Digest, Sha256};

fn lifespan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifespan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lifespan(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn synth(dir: &Path, n: &str, dim: &str) -> PathBuf {
    let out = dir.join("syn");
    ok(&["synth", "--n", n, "--dim", dim, "--out", p(&out)]);
    out
}

#[test]
fn missing_manifest_names_the_path() {
    let out = lifespan(&["split", "--manifest", "/nonexistent/raw.jsonl", "--out", "/tmp/unused"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/raw.jsonl"), "{err}");
}

#[test]
fn baseline_on_toy_table_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("one.jsonl");
    // Age 0.5 at the photo (integer age 0), actual remaining lifespan 1.25 years.
    std::fs::write(
        &manifest,
        r#"{"id":"x","image_path":"x.jpg","birth_date":2000.0,"photo_date":2000.5,"death_date":2001.75,"dataset_tag":"faces"}"#,
    )
    .unwrap();
    let table = fixture("toy_life_table.csv");
    let stdout = ok(&["baseline", "--manifest", p(&manifest), "--life-table", p(&table), "--out", p(dir.path())]);
    assert!(stdout.contains("baseline MAE 0.0000 years over 1 records"), "{stdout}");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("baseline.json")).unwrap()).unwrap();
    assert_eq!(json["mae"], 0.0);
}

#[test]
fn baseline_accepts_a_table_directory() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "50", "4");
    let stdout = ok(&[
        "baseline",
        "--manifest",
        p(&syn.join("manifest.jsonl")),
        "--life-table",
        p(&fixture("life_tables")),
    ]);
    assert!(stdout.contains("average of 2 tables"), "{stdout}");
}

#[test]
fn synth_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = synth(a.path(), "300", "8");
    let sb = synth(b.path(), "300", "8");
    for f in ["embeddings.emb1", "manifest.jsonl", "ground_truth.csv", "synth_config.json"] {
        assert_eq!(sha(&sa.join(f)), sha(&sb.join(f)), "{f}");
    }
    let other = tempfile::tempdir().unwrap();
    let so = other.path().join("syn");
    ok(&["synth", "--n", "300", "--dim", "8", "--seed", "2", "--out", p(&so)]);
    assert_ne!(sha(&sa.join("embeddings.emb1")), sha(&so.join("embeddings.emb1")));
}

#[test]
fn split_counts_and_hash_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "1001", "2");
    let m = syn.join("manifest.jsonl");
    let s1 = dir.path().join("s1");
    let s2 = dir.path().join("s2");
    let out1 = ok(&["split", "--manifest", p(&m), "--out", p(&s1)]);
    let out2 = ok(&["split", "--manifest", p(&m), "--out", p(&s2)]);
    assert!(out1.contains("train 801, test 200"), "{out1}");
    assert_eq!(out1, out2);
    assert_eq!(sha(&s1.join("split.json")), sha(&s2.join("split.json")));
}

#[test]
fn evaluate_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "400", "4");
    let m = syn.join("manifest.jsonl");
    let records = lifespan::manifest::load_manifest(&m).unwrap();
    let perfect = dir.path().join("perfect.csv");
    let mut csv = String::from("id,mu,sigma\n");
    for r in &records {
        csv.push_str(&format!("{},{},1e-9\n", r.id(), r.remaining_lifespan()));
    }
    std::fs::write(&perfect, csv).unwrap();
    let out = dir.path().join("eval");
    ok(&["evaluate", "--manifest", p(&m), "--predictions", p(&perfect), "--out", p(&out)]);
    let summary: EvaluationSummary =
        serde_json::from_slice(&std::fs::read(out.join("eval_report.json")).unwrap()).unwrap();
    for r in [&summary.by_true_target, &summary.by_predicted_mu] {
        assert_eq!(r.n, 400);
        assert_eq!(r.mae, 0.0);
        assert!(r.ece_bucketed < 1e-8 && r.ece_one < 1e-8 && r.ece_pointwise < 1e-8);
    }
}

#[test]
fn train_evaluate_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "600", "6");
    let m = syn.join("manifest.jsonl");
    let e = syn.join("embeddings.emb1");
    let run = dir.path().join("run");
    ok(&[
        "train", "--manifest", p(&m), "--embeddings", p(&e), "--hidden-dim", "8",
        "--epochs-phase1", "3", "--epochs-phase2", "3", "--schedule", "two-phase", "--out", p(&run),
    ]);
    let log = std::fs::read_to_string(run.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 6);

    let ckpt = run.join("head.mve1");
    let split = run.join("split.json");
    let eval = dir.path().join("eval");
    ok(&[
        "evaluate", "--manifest", p(&m), "--checkpoint", p(&ckpt), "--embeddings", p(&e),
        "--split", p(&split), "--out", p(&eval),
    ]);
    let summary: EvaluationSummary =
        serde_json::from_slice(&std::fs::read(eval.join("eval_report.json")).unwrap()).unwrap();
    assert_eq!(summary.by_true_target.n, 120);
    assert!(summary.by_true_target.mean_gnll.is_some());

    // Same inputs, same artifacts.
    let rep1 = dir.path().join("rep1");
    let rep2 = dir.path().join("rep2");
    for rep in [&rep1, &rep2] {
        ok(&[
            "report", "--manifest", p(&m), "--checkpoint", p(&ckpt), "--embeddings", p(&e),
            "--split", p(&split), "--out", p(rep),
        ]);
    }
    let mut files: Vec<_> = std::fs::read_dir(&rep1).unwrap().map(|f| f.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files, ["buckets.csv", "report.json", "report.svg"]);
    for f in ["report.json", "report.svg"] {
        assert_eq!(sha(&rep1.join(f)), sha(&rep2.join(f)));
    }

    // Rendering from the evaluate output gives the same report.
    let rep3 = dir.path().join("rep3");
    ok(&["report", "--eval", p(&eval.join("eval_report.json")), "--out", p(&rep3)]);
    assert_eq!(sha(&rep1.join("report.json")), sha(&rep3.join("report.json")));
}

#[test]
fn checkpoint_errors() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "200", "6");
    let m = syn.join("manifest.jsonl");
    let e = syn.join("embeddings.emb1");
    let run = dir.path().join("run");
    ok(&["train", "--manifest", p(&m), "--embeddings", p(&e), "--hidden-dim", "4", "--epochs-phase2", "1", "--out", p(&run)]);

    let other = dir.path().join("other");
    ok(&["synth", "--n", "200", "--dim", "5", "--out", p(&other)]);
    let out = lifespan(&[
        "evaluate", "--manifest", p(&m), "--checkpoint", p(&run.join("head.mve1")),
        "--embeddings", p(&other.join("embeddings.emb1")), "--out", p(&dir.path().join("x")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dim mismatch"));

    std::fs::remove_file(run.join("head.json")).unwrap();
    let out = lifespan(&[
        "evaluate", "--manifest", p(&m), "--checkpoint", p(&run.join("head.mve1")),
        "--embeddings", p(&e), "--out", p(&dir.path().join("y")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing normalization sidecar"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), "300", "4");
    let m = syn.join("manifest.jsonl");
    let truth = syn.join("ground_truth.csv");
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"buckets": 5, "bucket_max": "auto"}"#).unwrap();
    let eval = |extra: &[&str]| -> EvaluationSummary {
        let out = dir.path().join("e");
        let mut args = vec!["--config", p(&config), "evaluate", "--manifest", p(&m), "--predictions", p(&truth), "--out", p(&out)];
        args.extend_from_slice(extra);
        ok(&args);
        serde_json::from_slice(&std::fs::read(out.join("eval_report.json")).unwrap()).unwrap()
    };
    let from_file = eval(&[]);
    assert_eq!(from_file.by_true_target.buckets.len(), 5);
    assert_eq!(from_file.by_true_target.bucket_spec.max, None);
    let flagged = eval(&["--buckets", "3", "--bucket-max", "40", "--bucket-mode", "pred"]);
    assert_eq!(flagged.by_true_target.buckets.len(), 3);
    assert_eq!(flagged.by_true_target.bucket_spec.max, Some(40.0));
    assert_eq!(flagged.selected, lifespan::core::BucketingMode::ByPredictedMu);

    std::fs::write(&config, r#"{"bucketz": 5}"#).unwrap();
    let out = lifespan(&["--config", p(&config), "evaluate", "--manifest", p(&m), "--predictions", p(&truth), "--out", p(dir.path())]);
    assert!(!out.status.success());
}

fn curation_setup(dir: &Path, n: usize) -> (PathBuf, PathBuf, PathBuf, common::Fixture) {
    let fx = common::build(dir, n);
    let raw = dir.join("raw.jsonl");
    let lines: Vec<String> = fx.raw.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    std::fs::write(&raw, lines.join("\n") + "\n").unwrap();
    let fixtures = dir.join("responses.json");
    let entries: &Vec<FixtureEntry> = &fx.entries;
    std::fs::write(&fixtures, serde_json::to_vec(entries).unwrap()).unwrap();
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "vlm": {"endpoint": common::VLM_ENDPOINT},
            "wikidata": {"base_url": common::WIKIDATA_BASE},
        })
        .to_string(),
    )
    .unwrap();
    (raw, fixtures, config, fx)
}

#[test]
fn curate_with_recorded_responses() {
    let dir = tempfile::tempdir().unwrap();
    let (raw, fixtures, config, fx) = curation_setup(dir.path(), 10);
    let out = dir.path().join("curated");
    let stdout = ok(&[
        "--config", p(&config), "curate", "--manifest", p(&raw), "--fixtures", p(&fixtures), "--out", p(&out),
    ]);
    assert!(stdout.contains("curated 10 records: 2 accepted, 8 rejected"), "{stdout}");
    let decisions = std::fs::read_to_string(out.join("decisions.jsonl")).unwrap();
    assert_eq!(decisions.lines().count(), 10);
    let clean = lifespan::manifest::load_manifest(&out.join("manifest.jsonl")).unwrap();
    let ids: Vec<&str> = clean.iter().map(|r| r.id()).collect();
    assert_eq!(ids, fx.accepted_ids());
    assert_eq!(clean[0].death_date(), fractional_year(1980 + 8 % 7, 6, 30));
}

#[test]
fn curate_dry_run_uses_local_checks_only() {
    let dir = tempfile::tempdir().unwrap();
    let (raw, _, _, _) = curation_setup(dir.path(), 10);
    // Unroutable endpoints: any request would fail and reject the sample.
    let config = dir.path().join("offline.json");
    std::fs::write(
        &config,
        r#"{"vlm": {"endpoint": "http://127.0.0.1:9/v1", "timeout_secs": 1}, "wikidata": {"base_url": "http://127.0.0.1:9", "timeout_secs": 1}}"#,
    )
    .unwrap();
    let out = dir.path().join("dry");
    let stdout = ok(&["--config", p(&config), "curate", "--manifest", p(&raw), "--dry-run", "--out", p(&out)]);
    assert!(stdout.contains("curated 10 records: 6 accepted, 4 rejected (dry run"), "{stdout}");
}
