//! End-to-end tests of the `lsc` binary: every subcommand, the config
//! layering, determinism of repeated runs, and stage-tagged failures.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lsc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn lsc")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        text(&out.stdout),
        text(&out.stderr)
    );
    text(&out.stdout)
}

fn fails(out: &Output) -> String {
    assert!(
        !out.status.success(),
        "expected failure but got exit 0\nstdout:\n{}",
        text(&out.stdout)
    );
    text(&out.stderr)
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel))
        .unwrap_or_else(|e| panic!("reading {rel}: {e}"))
}

/// Deterministic 3,000-sentence corpus over 50 words with enough
/// co-occurrence structure for a 16-dimensional model, plus a two-word
/// target list.
fn write_base(dir: &Path) {
    let strides = [1usize, 7, 13, 19, 23, 29, 31, 37, 41, 43];
    let mut corpus = String::new();
    for i in 0..3000 {
        let toks: Vec<String> = strides
            .iter()
            .enumerate()
            .map(|(j, s)| format!("w{:02}", (i * s + j * (1 + i % 5)) % 50))
            .collect();
        corpus.push_str(&toks.join(" "));
        corpus.push('\n');
    }
    fs::write(dir.join("base.txt"), corpus).unwrap();
    fs::write(dir.join("targets.txt"), "w01\nw02\n").unwrap();
}

fn write_cfg(dir: &Path) {
    fs::write(
        dir.join("cfg.txt"),
        "# test pipeline configuration\n\
         corpus1 = run/synth/corpus1.txt\n\
         corpus2 = run/synth/corpus2.txt\n\
         dim = 16\n\
         epochs = 2\n\
         min-count = 5\n\
         window = 3\n\
         seed = 5\n\
         out = run\n",
    )
    .unwrap();
}

/// Base corpus, config file, and a generated synthetic pair under `run/`.
fn setup() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    write_base(tmp.path());
    write_cfg(tmp.path());
    ok(&lsc(
        tmp.path(),
        &[
            "synth",
            "--corpus1",
            "base.txt",
            "--targets",
            "targets.txt",
            "--out",
            "run",
            "--seed",
            "9",
            "--controls",
            "5",
        ],
    ));
    tmp
}

#[test]
fn synth_is_deterministic_and_writes_gold() {
    let tmp = setup();
    let dir = tmp.path();
    for rel in [
        "run/synth/corpus1.txt",
        "run/synth/corpus2.txt",
        "run/synth/targets.txt",
        "run/synth/gold/task1.txt",
        "run/synth/gold/task2.txt",
        "run/config.resolved",
    ] {
        assert!(dir.join(rel).exists(), "{rel} missing");
    }
    let gold: Vec<String> = read(dir, "run/synth/gold/task1.txt")
        .lines()
        .map(str::to_owned)
        .collect();
    assert_eq!(gold.len(), 7, "2 targets + 5 controls");
    assert_eq!(gold.iter().filter(|l| l.ends_with("\t1")).count(), 2);
    assert_eq!(gold.iter().filter(|l| l.ends_with("\t0")).count(), 5);

    // Same seed reproduces the rewritten corpus byte for byte; a different
    // seed rewrites different occurrences.
    let base = ["synth", "--corpus1", "base.txt", "--targets", "targets.txt"];
    let rerun: Vec<&str> = base.iter().copied().chain(["--out", "rerun", "--seed", "9", "--controls", "5"]).collect();
    let other: Vec<&str> = base.iter().copied().chain(["--out", "other", "--seed", "10", "--controls", "5"]).collect();
    ok(&lsc(dir, &rerun));
    ok(&lsc(dir, &other));
    let original = read(dir, "run/synth/corpus2.txt");
    assert_eq!(original, read(dir, "rerun/synth/corpus2.txt"));
    assert_ne!(original, read(dir, "other/synth/corpus2.txt"));
}

#[test]
fn train_is_reproducible_and_persists_embeddings() {
    let tmp = setup();
    let dir = tmp.path();
    let stdout = ok(&lsc(dir, &["train", "--config", "cfg.txt"]));
    assert!(stdout.contains("trained 50 words"), "stdout: {stdout}");
    let files = [
        "run/embeddings/corpus1.vec",
        "run/embeddings/corpus1.vocab",
        "run/embeddings/corpus2.vec",
        "run/embeddings/corpus2.vocab",
    ];
    let before: Vec<String> = files.iter().map(|f| read(dir, f)).collect();
    ok(&lsc(dir, &["train", "--config", "cfg.txt"]));
    let after: Vec<String> = files.iter().map(|f| read(dir, f)).collect();
    assert_eq!(before, after, "retraining with the same seed must be byte-identical");
}

#[test]
fn score_writes_artifacts_and_repeats_identically() {
    let tmp = setup();
    let dir = tmp.path();
    let score = ["score", "--config", "cfg.txt", "--targets", "run/synth/targets.txt"];
    let stdout = ok(&lsc(dir, &score));
    assert!(stdout.contains("landmarks") && stdout.contains("residual"), "stdout: {stdout}");

    assert!(read(dir, "run/features.csv").starts_with("word,cos,map,freq\n"));
    assert!(read(dir, "run/scores.csv").starts_with("word,p_cos,p_map,p_freq,score,label,rank\n"));
    assert!(dir.join("run/alignment.csv").exists());
    let resolved = read(dir, "run/config.resolved");
    assert!(resolved.contains("seed = 5"), "resolved:\n{resolved}");
    assert!(resolved.contains("targets = run/synth/targets.txt"));

    // Answer files carry exactly the requested target words, in rank order.
    let answers = read(dir, "run/answer/task1/answer.txt");
    let mut words: Vec<&str> = answers.lines().map(|l| l.split('\t').next().unwrap()).collect();
    words.sort_unstable();
    let mut requested: Vec<String> = read(dir, "run/synth/targets.txt").lines().map(str::to_owned).collect();
    requested.sort_unstable();
    assert_eq!(words, requested.iter().map(String::as_str).collect::<Vec<_>>());

    // Re-running the same command, and running from the persisted resolved
    // config, must reproduce every artifact byte for byte.
    let artifacts = [
        "run/features.csv",
        "run/scores.csv",
        "run/answer/task1/answer.txt",
        "run/answer/task2/answer.txt",
    ];
    let before: Vec<String> = artifacts.iter().map(|f| read(dir, f)).collect();
    let rerun_stdout = ok(&lsc(dir, &score));
    assert!(rerun_stdout.contains("loading cached embeddings"), "stdout: {rerun_stdout}");
    let after: Vec<String> = artifacts.iter().map(|f| read(dir, f)).collect();
    assert_eq!(before, after);
    ok(&lsc(dir, &["score", "--config", "run/config.resolved"]));
    let from_resolved: Vec<String> = artifacts.iter().map(|f| read(dir, f)).collect();
    assert_eq!(before, from_resolved);
}

#[test]
fn score_honors_feature_and_landmark_selection() {
    let tmp = setup();
    let dir = tmp.path();
    ok(&lsc(
        dir,
        &["score", "--config", "cfg.txt", "--features", "cos", "--landmarks", "top:20", "--out", "single"],
    ));
    assert!(read(dir, "single/features.csv").starts_with("word,cos\n"));
    assert!(read(dir, "single/scores.csv").starts_with("word,p_cos,score,label,rank\n"));

    let landmarks: String = (0..10).map(|i| format!("w{i:02}\n")).collect();
    fs::write(dir.join("lm.txt"), landmarks).unwrap();
    let stdout = ok(&lsc(
        dir,
        &["score", "--config", "cfg.txt", "--landmarks", "file:lm.txt", "--out", "explicit"],
    ));
    assert!(stdout.contains("10 landmarks"), "stdout: {stdout}");

    // A target absent from both corpora is answered by the missing-word
    // policy: `change` emits label 1 / score 1.0.
    fs::write(dir.join("extra.txt"), "w01\nzzz\n").unwrap();
    ok(&lsc(
        dir,
        &["score", "--config", "cfg.txt", "--targets", "extra.txt", "--out", "missing"],
    ));
    let labels = read(dir, "missing/answer/task1/answer.txt");
    assert!(labels.contains("zzz\t1"), "answers:\n{labels}");
    let scores = read(dir, "missing/answer/task2/answer.txt");
    assert!(scores.contains("zzz\t1.000000"), "answers:\n{scores}");
}

#[test]
fn eval_reports_metrics_and_perfect_self_agreement() {
    let tmp = setup();
    let dir = tmp.path();
    ok(&lsc(dir, &["score", "--config", "cfg.txt", "--targets", "run/synth/targets.txt"]));
    let stdout = ok(&lsc(
        dir,
        &[
            "eval",
            "--config",
            "cfg.txt",
            "--gold",
            "run/synth/gold/task1.txt",
            "--gold-graded",
            "run/synth/gold/task2.txt",
        ],
    ));
    assert!(stdout.contains("accuracy") && stdout.contains("majority-class baseline"), "stdout: {stdout}");
    let metrics = read(dir, "run/metrics.csv");
    assert!(metrics.starts_with("metric,value\n"));
    for name in ["accuracy,", "majority-class,", "majority-accuracy,", "spearman,"] {
        assert!(metrics.contains(name), "metrics:\n{metrics}");
    }

    // Evaluating the answers against themselves is exact.
    fs::copy(dir.join("run/answer/task1/answer.txt"), dir.join("self1.txt")).unwrap();
    fs::copy(dir.join("run/answer/task2/answer.txt"), dir.join("self2.txt")).unwrap();
    ok(&lsc(
        dir,
        &["eval", "--config", "cfg.txt", "--gold", "self1.txt", "--gold-graded", "self2.txt"],
    ));
    let metrics = read(dir, "run/metrics.csv");
    assert!(metrics.contains("accuracy,1.000000"), "metrics:\n{metrics}");
    assert!(metrics.contains("spearman,1.000000"), "metrics:\n{metrics}");
}

#[test]
fn sweep_emits_requested_and_default_grids() {
    let tmp = setup();
    let dir = tmp.path();
    ok(&lsc(
        dir,
        &[
            "sweep",
            "--config",
            "cfg.txt",
            "--gold",
            "run/synth/gold/task1.txt",
            "--gold-graded",
            "run/synth/gold/task2.txt",
            "--grid",
            "2,5,10",
        ],
    ));
    let sweep = read(dir, "run/sweep.csv");
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "n,t,features,accuracy,spearman");
    assert_eq!(lines.len(), 4, "header + one row per grid point:\n{sweep}");
    for (line, n) in lines[1..].iter().zip([2, 5, 10]) {
        assert!(line.starts_with(&format!("{n},0.75,cos+map+freq,")), "row: {line}");
    }

    // Without a grid the sweep covers up to the full intersection; the
    // 50-word intersection collapses the default grid to a single point.
    ok(&lsc(
        dir,
        &["sweep", "--config", "cfg.txt", "--gold", "run/synth/gold/task1.txt"],
    ));
    let sweep = read(dir, "run/sweep.csv");
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines.len(), 2, "sweep:\n{sweep}");
    assert!(lines[1].starts_with("50,"), "row: {}", lines[1]);
}

#[test]
fn failures_are_stage_tagged_and_nonzero() {
    let tmp = setup();
    let dir = tmp.path();

    let err = fails(&lsc(dir, &["score", "--corpus1", "nope.txt", "--corpus2", "base.txt", "--out", "e1"]));
    assert!(err.contains("stage config") && err.contains("corpus1"), "stderr: {err}");

    fs::write(dir.join("bad.txt"), "bogus = 1\n").unwrap();
    let err = fails(&lsc(dir, &["train", "--config", "bad.txt"]));
    assert!(err.contains("unknown configuration key"), "stderr: {err}");

    let err = fails(&lsc(dir, &["score", "--config", "cfg.txt", "--threshold", "1.5", "--out", "e2"]));
    assert!(err.contains("stage config") && err.contains("threshold"), "stderr: {err}");

    fs::write(dir.join("extra.txt"), "w01\nzzz\n").unwrap();
    let err = fails(&lsc(
        dir,
        &[
            "score",
            "--config",
            "cfg.txt",
            "--targets",
            "extra.txt",
            "--missing-word-policy",
            "error",
            "--out",
            "run",
        ],
    ));
    assert!(err.contains("stage targets") && err.contains("zzz"), "stderr: {err}");

    let err = fails(&lsc(dir, &["eval", "--gold", "run/synth/gold/task1.txt", "--out", "fresh"]));
    assert!(err.contains("stage eval"), "stderr: {err}");

    let err = fails(&lsc(dir, &["sweep", "--config", "cfg.txt"]));
    assert!(err.contains("sweep needs"), "stderr: {err}");
}
