use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_cscl");

fn cscl(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cscl(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("confusion.tsv"), "带\t戴代\n戴\t带\n美\t每\n每\t美\n坐\t造\n造\t坐\n").unwrap();
        fs::write(
            dir.path().join("nine.tsv"),
            (1..=9).map(|i| format!("s{i}\t他带着{i}\t他戴着{i}\n")).collect::<String>(),
        )
        .unwrap();
        fs::write(
            dir.path().join("tiny.tsv"),
            "a\t今天的夕阳真每啊\t今天的夕阳真美啊\n\
             b\t你们可以走路或造公交\t你们可以走路或坐公交\n\
             c\t他带着帽子\t他戴着帽子\n\
             d\t真美\t真美\n\
             e\t我每天坐车\t我每天坐车\n",
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn score_writes_one_line_per_sample_and_is_stable() {
    let f = Fixture::new();
    fs::write(f.path("three.tsv"), "x\tAB\tAC\ny\tAB\tAB\nz\t带着\t戴着\n").unwrap();
    let run = |out: &str| {
        ok(&["score", "--train", p(&f.path("three.tsv")), "--out-dir", p(&f.path(out))]);
        fs::read_to_string(f.path(out).join("scores.tsv")).unwrap()
    };
    let first = run("o1");
    assert_eq!(first.lines().count(), 3);
    assert!(first.lines().nth(1).unwrap().starts_with("y\t0.000000000\tcontextual"));
    assert_eq!(first, run("o2"));
    assert!(f.path("o1/resolved-config.toml").exists());
}

#[test]
fn char_similarity_without_confusion_is_a_usage_error() {
    let f = Fixture::new();
    let out = cscl(&["score", "--train", p(&f.path("nine.tsv")), "--scoring", "char_similarity", "--out-dir", p(&f.path("o"))]);
    assert_eq!(out.status.code(), Some(2));

    ok(&[
        "score", "--train", p(&f.path("nine.tsv")), "--scoring", "char_similarity",
        "--confusion", p(&f.path("confusion.tsv")), "--out-dir", p(&f.path("o")),
    ]);
    let scores = fs::read_to_string(f.path("o/scores.tsv")).unwrap();
    assert!(scores.lines().all(|l| l.ends_with("\t1.000000000\tchar_similarity")));
}

#[test]
fn arrange_stage_counts_and_errors() {
    let f = Fixture::new();
    let nine = f.path("nine.tsv");
    ok(&["arrange", "--train", p(&nine), "--policy", "annealing", "--k", "3", "--out-dir", p(&f.path("a"))]);
    let manifest = fs::read_to_string(f.path("a/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 4);

    ok(&["score", "--train", p(&nine), "--out-dir", p(&f.path("s"))]);
    ok(&[
        "arrange", "--train", p(&nine), "--scores", p(&f.path("s/scores.tsv")), "--policy", "sorted_only",
        "--out-dir", p(&f.path("b")),
    ]);
    let manifest = fs::read_to_string(f.path("b/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 1);

    let out = cscl(&["arrange", "--train", p(&nine), "--k", "10", "--out-dir", p(&f.path("c"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}

#[test]
fn malformed_corpus_is_a_data_error() {
    let f = Fixture::new();
    fs::write(f.path("bad.tsv"), "a\tABC\tAB\n").unwrap();
    let out = cscl(&["score", "--train", p(&f.path("bad.tsv")), "--out-dir", p(&f.path("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = cscl(&["score", "--train", p(&f.path("missing.tsv")), "--out-dir", p(&f.path("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_eval_on_tiny_corpus_reaches_perfect_correction() {
    let f = Fixture::new();
    let tiny = f.path("tiny.tsv");
    let args = |out: &str| {
        vec![
            "train".to_string(), "--train".into(), p(&tiny).into(), "--test".into(), p(&tiny).into(),
            "--confusion".into(), p(&f.path("confusion.tsv")).into(), "--k".into(), "2".into(),
            "--passes".into(), "3".into(), "--out-dir".into(), p(&f.path(out)).into(),
        ]
    };
    let a: Vec<String> = args("t1");
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let report = fs::read_to_string(f.path("t1/report.tsv")).unwrap();
    let correction = report.lines().find(|l| l.starts_with("correction")).unwrap();
    let f1: f64 = correction.split('\t').nth(4).unwrap().parse().unwrap();
    assert_eq!(f1, 1.0, "{report}");

    let b: Vec<String> = args("t2");
    ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(report, fs::read_to_string(f.path("t2/report.tsv")).unwrap());
    assert_eq!(
        fs::read_to_string(f.path("t1/model.tsv")).unwrap(),
        fs::read_to_string(f.path("t2/model.tsv")).unwrap()
    );

    ok(&[
        "evaluate", "--model", p(&f.path("t1/model.tsv")), "--test", p(&tiny),
        "--confusion", p(&f.path("confusion.tsv")), "--out-dir", p(&f.path("t3")),
    ]);
    assert_eq!(report, fs::read_to_string(f.path("t3/report.tsv")).unwrap());
}

#[test]
fn empty_test_corpus_is_rejected() {
    let f = Fixture::new();
    fs::write(f.path("empty.tsv"), "").unwrap();
    let out = cscl(&[
        "train", "--train", p(&f.path("tiny.tsv")), "--test", p(&f.path("empty.tsv")),
        "--confusion", p(&f.path("confusion.tsv")), "--k", "2", "--out-dir", p(&f.path("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ablate_table_shape() {
    let f = Fixture::new();
    let tiny = f.path("tiny.tsv");
    ok(&[
        "ablate", "--train", p(&tiny), "--test", p(&tiny), "--confusion", p(&f.path("confusion.tsv")),
        "--k", "2", "--seeds", "1,2,3", "--out-dir", p(&f.path("ab")),
    ]);
    let table = fs::read_to_string(f.path("ab/ablation.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("shuffled_baseline\t3\t"));
    assert!(table.lines().next().unwrap().ends_with("\tdelta"));
    assert!(rows[0].ends_with("\t+0.0000"));
}

#[test]
fn ablate_on_error_free_data_is_flat() {
    let f = Fixture::new();
    fs::write(f.path("clean.tsv"), "a\t真美\t真美\nb\t他戴着\t他戴着\nc\t坐车\t坐车\n").unwrap();
    let clean = f.path("clean.tsv");
    ok(&[
        "ablate", "--train", p(&clean), "--test", p(&clean), "--confusion", p(&f.path("confusion.tsv")),
        "--k", "2", "--seeds", "1,2", "--out-dir", p(&f.path("ab")),
    ]);
    let table = fs::read_to_string(f.path("ab/ablation.tsv")).unwrap();
    let f1s: Vec<&str> = table.lines().skip(1).map(|l| l.split('\t').nth(6).unwrap()).collect();
    assert!(f1s.iter().all(|x| *x == f1s[0]), "{table}");
}

#[test]
fn sweep_k_rows_and_duplicate_values() {
    let f = Fixture::new();
    fs::write(
        f.path("big.tsv"),
        (0..16).map(|i| format!("q{i:02}\t他带着{i}\t他戴着{i}\n")).collect::<String>(),
    )
    .unwrap();
    let big = f.path("big.tsv");
    let common = |out: &str, ks: &str| {
        cscl(&[
            "sweep-k", "--train", p(&big), "--test", p(&big), "--confusion", p(&f.path("confusion.tsv")),
            "--seeds", "1,2", "--k-values", ks, "--out-dir", p(&f.path(out)),
        ])
    };
    assert!(common("sw", "1,2,3,4,5,6,7,8").status.success());
    let table = fs::read_to_string(f.path("sw/sweep_k.tsv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 8);
    assert_eq!(common("dup", "1,2,2").status.code(), Some(2));
}

#[test]
fn config_file_with_flag_overrides() {
    let f = Fixture::new();
    let cfg = format!(
        "train = {:?}\nconfusion = {:?}\npolicy = \"random_stages\"\nk = 2\nseeds = [4]\nout_dir = {:?}\n",
        p(&f.path("nine.tsv")),
        p(&f.path("confusion.tsv")),
        p(&f.path("from-config")),
    );
    fs::write(f.path("exp.toml"), cfg).unwrap();
    ok(&["arrange", "--config", p(&f.path("exp.toml")), "--k", "3"]);
    let manifest = fs::read_to_string(f.path("from-config/manifest.jsonl")).unwrap();
    assert!(manifest.starts_with(r#"{"policy":"random_stages","k":3,"seed":4,"corpus":"nine","n":9}"#));
    let resolved = fs::read_to_string(f.path("from-config/resolved-config.toml")).unwrap();
    assert!(resolved.contains("k = 3"));

    fs::write(f.path("broken.toml"), "k = \"three\"\n").unwrap();
    assert_eq!(cscl(&["arrange", "--config", p(&f.path("broken.toml"))]).status.code(), Some(2));
}

#[test]
fn synth_and_inject() {
    let f = Fixture::new();
    let d = f.path("syn");
    ok(&["synth", "--out-dir", p(&d), "--train-size", "30", "--test-size", "10", "--seed", "5"]);
    assert_eq!(fs::read_to_string(d.join("train_clean.tsv")).unwrap().lines().count(), 30);
    let conf = fs::read_to_string(d.join("confusion.tsv")).unwrap();
    let entries: usize = conf.lines().map(|l| l.split('\t').nth(1).unwrap().chars().count()).sum();
    assert_eq!(entries, 200);

    let inject = |out: &str| {
        ok(&[
            "inject", "--input", p(&d.join("train_clean.tsv")), "--confusion", p(&d.join("confusion.tsv")),
            "--rate", "0.2", "--seed", "9", "--output", p(&d.join(out)),
        ]);
        fs::read_to_string(d.join(out)).unwrap()
    };
    let a = inject("a.tsv");
    assert_eq!(a, inject("b.tsv"));
    assert!(a.lines().any(|l| {
        let v: Vec<&str> = l.split('\t').collect();
        v[1] != v[2]
    }));
    let bad = cscl(&[
        "inject", "--input", p(&d.join("train_clean.tsv")), "--confusion", p(&d.join("confusion.tsv")),
        "--rate", "1.5", "--output", p(&d.join("c.tsv")),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn embedding_file_provider() {
    let f = Fixture::new();
    fs::write(f.path("two.tsv"), "a\tXY\tXZ\nb\tQ\tQ\n").unwrap();
    fs::write(
        f.path("emb.txt"),
        "dim=2\na\tsource\t0\t1,0\na\tsource\t1\t1,1\na\ttarget\t0\t1,0\na\ttarget\t1\t1,0\nb\tsource\t0\t0,1\nb\ttarget\t0\t0,1\n",
    )
    .unwrap();
    ok(&["score", "--train", p(&f.path("two.tsv")), "--embeddings", p(&f.path("emb.txt")), "--out-dir", p(&f.path("o"))]);
    let scores = fs::read_to_string(f.path("o/scores.tsv")).unwrap();
    assert_eq!(scores, "a\t0.707106781\tcontextual\nb\t0.000000000\tcontextual\n");
}
