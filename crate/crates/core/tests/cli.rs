//! The `emomas` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emomas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emomas")).args(args).output().unwrap()
}

fn run(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    emomas(&args)
}

#[test]
fn run_writes_run_directory_and_is_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let flags = ["--domain", "education", "--negotiator", "coherence", "--generate", "6", "--seed", "3"];
    let a = run(&root.path().join("a"), &flags);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&root.path().join("b"), &flags);
    assert!(b.status.success());

    for f in ["config.json", "scenarios.jsonl", "transcripts.jsonl", "outcomes.jsonl", "weights.csv", "summary.json", "summary.txt"] {
        let x = fs::read(root.path().join("a").join(f)).unwrap_or_else(|_| panic!("missing {f}"));
        assert_eq!(x, fs::read(root.path().join("b").join(f)).unwrap(), "{f} differs");
    }
    let stdout = String::from_utf8(a.stdout).unwrap();
    assert_eq!(stdout.lines().next(), fs::read_to_string(root.path().join("a/summary.txt")).unwrap().lines().next());
}

#[test]
fn scenario_file_and_overrides_round_trip() {
    let root = tempfile::tempdir().unwrap();
    let first = root.path().join("first");
    assert!(run(&first, &["--domain", "debt", "--negotiator", "q_learning", "--generate", "4"]).status.success());

    let scenarios = first.join("scenarios.jsonl");
    let second = root.path().join("second");
    let out = run(
        &second,
        &[
            "--domain", "debt", "--negotiator", "q_learning",
            "--scenarios-file", scenarios.to_str().unwrap(), "--limit", "2",
            "--set", "rl.learning_rate=0.3",
            "--resume-qtable", first.join("qtable.txt").to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(second.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["hyperparameters"]["rl"]["learning_rate"], 0.3);
    assert_eq!(fs::read_to_string(second.join("outcomes.jsonl")).unwrap().lines().count(), 2);

    let cmp = emomas(&["compare", first.to_str().unwrap(), second.to_str().unwrap()]);
    assert!(cmp.status.success(), "{}", String::from_utf8_lossy(&cmp.stderr));
}

#[test]
fn usage_errors_exit_nonzero() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("x");
    for bad in [
        vec!["--domain", "debt", "--negotiator", "oracle"],
        vec!["--domain", "debt", "--generate", "0"],
        vec!["--domain", "travel"],
        vec!["--domain", "debt", "--opponent-strategy", "sulking"],
        vec!["--domain", "debt", "--set", "rl.learning_rate=7"],
        vec!["--domain", "debt", "--set", "no.such=1"],
        vec!["--domain", "debt", "--judge", "llm"],
    ] {
        let o = run(&out, &bad);
        assert_eq!(o.status.code(), Some(2), "{bad:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn compare_needs_matching_domains() {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    assert!(run(&a, &["--domain", "debt", "--negotiator", "vanilla", "--generate", "2"]).status.success());
    assert!(run(&b, &["--domain", "medical", "--negotiator", "vanilla", "--generate", "2"]).status.success());
    assert_ne!(emomas(&["compare", a.to_str().unwrap()]).status.code(), Some(0));
    assert_ne!(emomas(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn unreachable_remote_backend_exits_3() {
    let root = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let endpoint = format!("http://127.0.0.1:{port}/v1/chat/completions");
    let out = run(
        &root.path().join("r"),
        &["--domain", "debt", "--backend", "remote", "--endpoint", &endpoint, "--retries", "0", "--generate", "1", "--timeout", "2"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn hyperparameters_lists_every_key() {
    let out = emomas(&["hyperparameters"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["orchestrator.eta", "rl.learning_rate", "coherence.diversity_decay", "game_theory.favoritism", "judge.gap_threshold"] {
        assert!(text.contains(key), "{key} missing");
    }
}
