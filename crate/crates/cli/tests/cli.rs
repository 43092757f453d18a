use std::path::Path;
use std::process::{Command, Output};

use sparsekit::load_graph;

fn sparsekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsekit"))
        .args(args)
        .env("SPARSEKIT_LOG", "error")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, family: &str, n: usize, seed: u64) -> std::path::PathBuf {
    let out = dir.join(name);
    let n = n.to_string();
    let seed = seed.to_string();
    let status = sparsekit(&[
        "gen",
        "--family",
        family,
        "--n",
        &n,
        "--seed",
        &seed,
        "--output",
        p(&out),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    out
}

#[test]
fn gen_writes_expected_sizes_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("complete", 7, 21),
        ("path", 9, 8),
        ("grid", 4, 24),
        ("barbell", 10, 21),
    ];
    for (family, n, m) in cases {
        let g = load_graph(gen(dir.path(), family, family, n, 0)).unwrap();
        assert_eq!(g.m(), m, "{family}");
    }
    let a = gen(dir.path(), "a.txt", "random-gnp", 30, 5);
    let b = gen(dir.path(), "b.txt", "random-gnp", 30, 5);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sparsekit(&[
        "sparsify",
        "--input",
        p(&dir.path().join("absent.txt")),
        "--output",
        p(&dir.path().join("h.txt")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exit_code"], 2);
    assert_eq!(err["error"], "input");
}

#[test]
fn out_of_range_epsilon_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen(dir.path(), "k6.txt", "complete", 6, 0);
    let out = sparsekit(&[
        "sparsify",
        "--input",
        p(&g),
        "--output",
        p(&dir.path().join("h")),
        "--epsilon",
        "0.3",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn graph_verified_against_itself_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen(dir.path(), "k10.txt", "complete", 10, 0);
    let out = sparsekit(&["--json", "verify", "--input", p(&g), "--sparsifier", p(&g)]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["eps_actual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn sparsify_then_verify_matches_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen(dir.path(), "k12.txt", "complete", 12, 0);
    let h = dir.path().join("h.txt");
    let out = sparsekit(&[
        "sparsify",
        "--input",
        p(&g),
        "--output",
        p(&h),
        "--seed",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sidecar: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("h.txt.json")).unwrap()).unwrap();
    let trace = std::fs::read_to_string(dir.path().join("h.txt.trace.jsonl")).unwrap();
    assert!(trace.lines().count() > 0);

    let out = sparsekit(&["--json", "verify", "--input", p(&g), "--sparsifier", p(&h)]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let a = report["eps_actual"].as_f64().unwrap();
    let b = sidecar["eps_actual"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
}

#[test]
fn bench_on_empty_corpus_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    let csv = dir.path().join("out.csv");
    let out = sparsekit(&["bench", "--input", p(&corpus), "--output", p(&csv)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("graph,n,m,epsilon,oracle,seed"));
}

#[test]
fn bench_covers_the_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    gen(&corpus, "k5.txt", "complete", 5, 0);
    gen(&corpus, "p6.txt", "path", 6, 0);
    gen(&corpus, "g2.txt", "grid", 2, 0);
    let csv = dir.path().join("out.csv");
    let out = sparsekit(&[
        "bench",
        "--input",
        p(&corpus),
        "--output",
        p(&csv),
        "--epsilon",
        "0.15,0.2",
        "--oracle",
        "sampling,sdp",
        "--seed",
        "1,2,3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_path(csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 36);
    for row in &rows {
        assert_eq!(&row[col("status")], "ok", "{row:?}");
        if let (Ok(it), Ok(cap)) = (
            row[col("iterations")].parse::<usize>(),
            row[col("max_iterations")].parse::<usize>(),
        ) {
            assert!(it <= cap);
        }
    }
}
