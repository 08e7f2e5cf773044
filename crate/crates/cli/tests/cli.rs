use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn capforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capforge"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("spawn capforge")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stats_prints_table_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("stats.json");
    let hist = dir.path().join("hist.csv");
    let corpus = fixture("three_images.json");
    let o = capforge(&[
        "--deterministic",
        "stats",
        s(&corpus),
        "--report",
        s(&report),
        "--histogram",
        s(&hist),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("unique words"));
    let r = json(&report);
    assert_eq!(r["stats"]["unique_words"], 14);
    assert_eq!(r["stats"]["total_tokens"], 34);
    assert!(r["meta"].get("generated_unix_secs").is_none());
    assert!(std::fs::read_to_string(&hist).unwrap().lines().count() > 1);
}

#[test]
fn missing_corpus_exits_two_with_path() {
    let o = capforge(&["stats", "/nonexistent/corpus.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("/nonexistent/corpus.json"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(capforge(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        capforge(&["train", "x.json", "--epochs", "many"])
            .status
            .code(),
        Some(2)
    );
    let o = capforge(&["train", &fixture("synthetic_16.json").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn live_without_key_fails_before_any_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let corpus = fixture("three_images.json");
    let o = capforge(&["correct", s(&corpus), "--out", s(&out), "--live"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("OPENAI_API_KEY"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn correct_with_mock_is_cached_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("rsicd_fixture_50.json");
    let cache = dir.path().join("cache");
    let run = |tag: &str| {
        let out = dir.path().join(format!("{tag}.json"));
        let records = dir.path().join(format!("{tag}.csv"));
        let o = capforge(&[
            "--deterministic",
            "correct",
            s(&corpus),
            "--out",
            s(&out),
            "--records",
            s(&records),
            "--cache-dir",
            s(&cache),
            "--backoff-ms",
            "0",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (
            std::fs::read(out).unwrap(),
            std::fs::read_to_string(records).unwrap(),
            stdout(&o),
        )
    };
    let (first, first_records, first_out) = run("cold");
    let (second, second_records, second_out) = run("warm");
    assert_eq!(first, second);
    assert!(first_out.contains("fresh"));
    assert!(second_out.contains("fresh 0"), "{second_out}");
    assert!(first_records.contains("fresh") && second_records.contains("cached"));
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("Several planes are parked alongside a lengthy building at the airport."));
}

#[test]
fn mock_fixture_overrides_replies() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("mock.tsv");
    std::fs::write(
        &table,
        "a large building is near a road .\tA large building stands by the road.\n",
    )
    .unwrap();
    let out = dir.path().join("out.json");
    let corpus = fixture("three_images.json");
    let o = capforge(&[
        "correct",
        s(&corpus),
        "--out",
        s(&out),
        "--mock-fixture",
        s(&table),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

fn overfit_config(dir: &Path) -> PathBuf {
    let path = dir.join("overfit.conf");
    std::fs::write(
        &path,
        "# synthetic overfit run\n\
         synthetic_features = 7\nlocations = 16\nchannels = 8\n\
         embed = 16\nhidden = 32\nattention = 16\n\
         learning_rate = 0.5\nepochs = 500\nbatch_size = 1\nseed = 42\n\
         eval_split = train\n",
    )
    .unwrap();
    path
}

#[test]
fn train_from_config_file_overfits_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let conf = overfit_config(dir.path());
    let corpus = fixture("synthetic_16.json");
    let run = |tag: &str| {
        let report = dir.path().join(format!("{tag}.json"));
        let model = dir.path().join(format!("{tag}.model.json"));
        let o = capforge(&[
            "--config",
            s(&conf),
            "--deterministic",
            "train",
            s(&corpus),
            "--report",
            s(&report),
            "--params-out",
            s(&model),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (report, model)
    };
    let (r1, m1) = run("a");
    let (r2, _) = run("b");
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
    let report = json(&r1);
    let meteor = report["rows"][0]["meteor"].as_f64().unwrap();
    assert!(meteor >= 0.9, "METEOR {meteor}");
    assert_eq!(report["loss_curve"].as_array().unwrap().len(), 500);

    let eval_report = dir.path().join("eval.json");
    let o = capforge(&[
        "--deterministic",
        "eval",
        s(&corpus),
        "--model",
        s(&m1),
        "--split",
        "train",
        "--report",
        s(&eval_report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        json(&eval_report)["rows"][0]["meteor"].as_f64().unwrap(),
        meteor
    );
}

#[test]
fn command_line_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = overfit_config(dir.path());
    let corpus = fixture("synthetic_16.json");
    let report = dir.path().join("r.json");
    let o = capforge(&[
        "--config",
        s(&conf),
        "train",
        s(&corpus),
        "--epochs",
        "3",
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&report)["loss_curve"].as_array().unwrap().len(), 3);
}

#[test]
fn diverging_training_is_a_pipeline_error() {
    let corpus = fixture("synthetic_16.json");
    let o = capforge(&[
        "train",
        s(&corpus),
        "--synthetic-features",
        "1",
        "--locations",
        "4",
        "--channels",
        "4",
        "--embed",
        "4",
        "--hidden",
        "4",
        "--attention",
        "4",
        "--learning-rate",
        "1e300",
        "--clip-norm",
        "0",
        "--epochs",
        "3",
        "--eval-split",
        "train",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

fn eval_report(dir: &Path, label: &str, meteor: f64) -> PathBuf {
    let path = dir.join(format!("{label}.json"));
    let body = serde_json::json!({ "label": label, "rows": [{ "model": "ResNet-101", "meteor": meteor }] });
    std::fs::write(&path, body.to_string()).unwrap();
    path
}

#[test]
fn compare_reports_delta() {
    let dir = tempfile::tempdir().unwrap();
    let a = eval_report(dir.path(), "original", 0.6859);
    let b = eval_report(dir.path(), "corrected", 0.7033);
    let o = capforge(&["--deterministic", "compare", s(&a), s(&b), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let delta = r["meteor"][0]["delta"].as_f64().unwrap();
    assert!((delta - 0.0174).abs() < 1e-12);

    let table = capforge(&["compare", s(&a), s(&b)]);
    assert!(stdout(&table).contains("+0.0174"), "{}", stdout(&table));
}
