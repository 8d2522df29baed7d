use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vtrack")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small training set and vocabulary so the tests train in seconds.
fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let text = r#"{
        "seed": 3,
        "dataset": { "per_class": 8, "backgrounds": 8 },
        "vocabulary": { "k": 40, "max_descriptors": 2000 },
        "classifier": { "folds": 3 },
        "pipeline": { "annotate": false }
    }"#;
    fs::write(&path, text).unwrap();
    path
}

fn generate(dir: &Path, frames: usize) -> PathBuf {
    let out = dir.join("seq");
    let o = vtrack(&["generate", "--out", p(&out), "--scene", "cross2", "--frames", &frames.to_string(), "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn generate_writes_frames_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = generate(tmp.path(), 60);
    let ppm = fs::read_dir(&seq).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "ppm")).count();
    assert_eq!(ppm, 60);
    let truth = fs::read_to_string(seq.join("truth.jsonl")).unwrap();
    assert_eq!(truth.lines().count(), 60);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = vtrack(&["generate", "--out", "x", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--bogus"));
}

#[test]
fn config_is_required() {
    let o = vtrack(&["track", "--in", "a", "--out", "b"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--config"));
}

#[test]
fn no_subcommand_is_a_usage_error() {
    assert_eq!(vtrack(&[]).status.code(), Some(1));
}

#[test]
fn missing_model_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let seq = generate(tmp.path(), 5);
    let models = tmp.path().join("nowhere");
    let o = vtrack(&["track", "--config", p(&cfg), "--in", p(&seq), "--out", p(&tmp.path().join("t")), "--models", p(&models)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(p(&models.join("codebook.txt"))), "{}", stderr(&o));
}

#[test]
fn bad_config_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"tracker": {"etta": 1.0}}"#).unwrap();
    let o = vtrack(&["train-vocab", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(p(&cfg)));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let codebook = |seed: &str, dir: &str| {
        let models = tmp.path().join(dir);
        let o = vtrack(&["train-vocab", "--config", p(&cfg), "--seed", seed, "--models", p(&models)]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(models.join("codebook.txt")).unwrap()
    };
    let a = codebook("1", "a");
    assert_eq!(a, codebook("1", "b"));
    assert_ne!(a, codebook("2", "c"));
}

#[test]
fn train_detect_track_eval_and_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let seq = generate(tmp.path(), 30);
    let ok = |args: &[&str]| {
        let o = vtrack(args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        String::from_utf8(o.stdout).unwrap()
    };
    ok(&["train-vocab", "--config", p(&cfg)]);
    ok(&["train-svm", "--config", p(&cfg)]);
    let models = tmp.path().join("models");
    for f in ["codebook.txt", "svm.txt", "occurrences.txt", "parts.txt", "confusion.csv", "roc.csv", "metrics.csv"] {
        assert!(models.join(f).exists(), "{f}");
    }

    let det = tmp.path().join("det");
    ok(&["detect", "--config", p(&cfg), "--in", p(&seq), "--out", p(&det)]);
    assert!(det.join("mask_0029.pgm").exists());
    assert!(fs::read_to_string(det.join("metrics.csv")).unwrap().contains("mask_f1"));

    let trk = tmp.path().join("trk");
    ok(&["track", "--config", p(&cfg), "--in", p(&seq), "--out", p(&trk)]);
    let tracks = trk.join("tracks.jsonl");
    assert!(tracks.exists());
    assert!(trk.join("hypotheses.jsonl").exists());

    let csv = ok(&["eval", "--config", p(&cfg), "--tracks", p(&tracks), "--truth", p(&seq.join("truth.jsonl"))]);
    assert!(csv.starts_with("metric,value,definition"));
    assert!(csv.contains("success_rate,"));

    let run = |dir: &str| {
        let out = tmp.path().join(dir);
        ok(&["pipeline", "--config", p(&cfg), "--in", p(&seq), "--out", p(&out)]);
        assert!(fs::read_to_string(out.join("metrics.csv")).unwrap().contains("identity_switches"));
        fs::read(out.join("tracks.jsonl")).unwrap()
    };
    let first = run("o1");
    assert_eq!(first, run("o2"));
    assert_eq!(first, fs::read(&tracks).unwrap());
}
