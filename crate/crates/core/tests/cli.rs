//! The `playbook` binary: exit codes, error reports and run manifests.

use std::path::Path;
use std::process::{Command, Output};

use playbook::cli::RunManifest;

fn playbook(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_playbook"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn error_line(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("an error line on stderr");
    serde_json::from_str(line).unwrap()
}

fn generate(dir: &Path, matches: &str) -> String {
    let o = playbook(
        dir,
        &[
            "--seed",
            "3",
            "generate",
            "--preset",
            "small",
            "--matches",
            matches,
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("plays.jsonl").to_string_lossy().into_owned()
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        let o = playbook(dir.path(), &[flag]);
        assert_eq!(o.status.code(), Some(0), "{flag}");
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [vec!["generate", "--bogus"], vec!["train"], vec![]] {
        let o = playbook(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let e = error_line(&o);
        assert_eq!(e["error"], "usage");
        assert_eq!(e["exit_code"], 2);
    }
}

#[test]
fn missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.jsonl");
    let o = playbook(dir.path(), &["align", "--input", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let e = error_line(&o);
    assert_eq!(e["error"], "missing_file");
    assert!(e["message"].as_str().unwrap().contains("none.jsonl"));
    let o = playbook(
        dir.path(),
        &["--config", missing.to_str().unwrap(), "generate"],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn invalid_data_and_settings_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let bad_config = dir.path().join("bad.json");
    std::fs::write(&bad_config, "{\"tree\": {\"layers\": 2}}").unwrap();
    let o = playbook(
        dir.path(),
        &["--config", bad_config.to_str().unwrap(), "generate"],
    );
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_line(&o)["error"], "json");

    let bad_plays = dir.path().join("bad.jsonl");
    std::fs::write(&bad_plays, "not json\n").unwrap();
    let o = playbook(
        dir.path(),
        &["align", "--input", bad_plays.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(4));

    let input = generate(dir.path(), "12");
    let o = playbook(dir.path(), &["train", "--input", &input, "--layers", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_line(&o)["error"], "invalid_config");
    let o = playbook(
        dir.path(),
        &[
            "codebook",
            "--input",
            &input,
            "--tree",
            &input,
            "--bin-width",
            "0.3",
        ],
    );
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn evaluate_splits_matches_seventy_thirty_and_records_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let input = generate(dir.path(), "30");
    let o = playbook(dir.path(), &["train", "--input", &input, "--epochs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tree = dir.path().join("tree.json");
    let o = playbook(
        dir.path(),
        &[
            "evaluate",
            "--input",
            &input,
            "--tree",
            tree.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut reader = csv::Reader::from_path(dir.path().join("evaluation.csv")).unwrap();
    let rows: Vec<(String, String, usize, usize, f64)> =
        reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let matches = |split: &str| rows.iter().find(|r| r.1 == split).unwrap().2;
    let (train, test) = (matches("train"), matches("test"));
    assert_eq!(train + test, 30);
    assert!((train as f64 - 21.0).abs() <= 1.0 && (test as f64 - 9.0).abs() <= 1.0);
    assert!(rows.iter().all(|r| r.4.is_finite() && r.4 > 0.0));

    let manifest = RunManifest::load(dir.path().join("run_manifest.json")).unwrap();
    assert_eq!(manifest.subcommand, "evaluate");
    assert_eq!(manifest.inputs.len(), 2);
    assert_eq!(manifest.outputs.len(), 2);
    for a in manifest.inputs.iter().chain(&manifest.outputs) {
        assert_eq!(
            a.sha256,
            playbook::cli::sha256_file(&a.path).unwrap(),
            "{}",
            a.path.display()
        );
    }
}

#[test]
fn seed_flag_controls_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    for (out, seed) in [(&a, "1"), (&b, "1"), (&c, "2")] {
        assert!(
            playbook(out, &["--seed", seed, "generate", "--preset", "small"])
                .status
                .success()
        );
    }
    let read = |d: &Path| std::fs::read(d.join("plays.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let m = RunManifest::load(a.join("run_manifest.json")).unwrap();
    assert_eq!(m.seed, Some(1));
    assert_eq!(m.config.synthetic.rng_seed, 1);
}
