use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relop"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn setup(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), format!("out_dir = out\nruns = 3\nk_max = 10\n{extra}")).unwrap();
    dir
}

#[test]
fn full_chain_writes_every_artifact() {
    let dir = setup("synth_tweets = 2000\nsynth_users = 400\n");
    let o = relop(dir.path(), &["all", "--config", "run.cfg"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for f in [
        "posts.jsonl",
        "synth_truth.csv",
        "corpus.tsv",
        "vocab.tsv",
        "hashtag_graph.tsv",
        "hashtag_labels.csv",
        "training.tsv",
        "model.bin",
        "train_log.csv",
        "embeddings.tsv",
        "points.tsv",
        "state_summary.csv",
        "state_mds.tsv",
        "predictions.csv",
        "sweep.csv",
        "sweep_summary.csv",
        "pne.csv",
        "metrics.csv",
        "scatter.svg",
        "errors.svg",
        "manifest.jsonl",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(!out.join(".relop.lock").exists());
    let manifest = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = manifest.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 11);
    for r in &records {
        for key in ["stage", "config_hash", "seed", "duration_ms", "counts", "inputs", "outputs"] {
            assert!(r.get(key).is_some(), "{key} missing in {r}");
        }
    }
    // inputs of a stage carry the hashes its producer recorded as outputs
    let ingest = &records[1];
    assert_eq!(ingest["inputs"]["posts.jsonl"], records[0]["outputs"]["posts.jsonl"]);

    // verify on the trained model passes
    let o = relop(dir.path(), &["verify", "--config", "run.cfg"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{text}");
    assert!(text.contains("PASS model-gradients"), "{text}");
}

#[test]
fn rerun_gives_identical_artifacts() {
    let dir = setup("synth_tweets = 800\nsynth_users = 200\n");
    let hashes = || {
        let o = relop(dir.path(), &["all", "--config", "run.cfg"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| e.unwrap())
            .filter(|e| e.file_name() != "manifest.jsonl")
            .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
            .collect();
        files.sort();
        fs::remove_dir_all(dir.path().join("out")).unwrap();
        files
    };
    assert_eq!(hashes(), hashes());
}

#[test]
fn overrides_change_the_config_dump() {
    let dir = setup("");
    let o = relop(dir.path(), &["config", "print", "--config", "run.cfg", "--k", "11", "--alpha=0.25"]);
    assert_eq!(code(&o), 0);
    let dump = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = dump.lines().collect();
    for want in ["k = 11", "alpha = 0.25", "runs = 3"] {
        assert!(lines.contains(&want), "{want} not in dump");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = setup("");
    assert_eq!(code(&relop(dir.path(), &["frobnicate", "--config", "run.cfg"])), 1);
    assert_eq!(code(&relop(dir.path(), &["verify"])), 1);
    assert_eq!(code(&relop(dir.path(), &[])), 1);
    assert_eq!(code(&relop(dir.path(), &["ingest", "--config", "run.cfg", "--no_such_key", "1"])), 1);
    assert_eq!(code(&relop(dir.path(), &["ingest", "--config", "run.cfg", "--k", "many"])), 1);
    fs::write(dir.path().join("bad.cfg"), "this is not a config\n").unwrap();
    assert_eq!(code(&relop(dir.path(), &["ingest", "--config", "bad.cfg"])), 1);
}

#[test]
fn missing_input_exits_two_and_names_path() {
    let dir = setup("");
    let o = relop(dir.path(), &["train", "--config", "run.cfg"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("training.tsv"));
    let o = relop(dir.path(), &["ingest", "--config", "run.cfg", "--posts", "nowhere.jsonl"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.jsonl"));
    let o = relop(dir.path(), &["verify", "--config", "missing.cfg"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn corrupted_model_fails_verify_with_three() {
    let dir = setup("");
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("model.bin"), b"not a model at all").unwrap();
    let o = relop(dir.path(), &["verify", "--config", "run.cfg"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 3, "{text}");
    assert!(text.contains("FAIL model-gradients"), "{text}");
    assert!(text.contains("PASS hypergeometric"), "{text}");
}

#[test]
fn held_lock_is_rejected() {
    let dir = setup("");
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".relop.lock"), "1").unwrap();
    let o = relop(dir.path(), &["synth", "--config", "run.cfg"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("another run"));
    assert!(!out.join("posts.jsonl").exists());
}
