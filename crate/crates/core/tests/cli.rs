use std::process::{Command, Output};

use graphite::generators;
use graphite::graph::{load_graph, to_document};

fn graphite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphite"))
        .args(args)
        .output()
        .unwrap()
}

fn write_karate(dir: &tempfile::TempDir) -> String {
    let p = dir.path().join("karate.json");
    std::fs::write(&p, to_document(&generators::karate_club())).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn ingest_reports_shape() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.json");
    std::fs::write(&p, r#"{"nodes":[{"id":"a"},{"id":"b"}],"edges":[["a","b"],["b","a"],["a","a"]]}"#).unwrap();
    let out = graphite(&["ingest", p.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["vertices"], 2);
    assert_eq!(v["edges"], 1);
    assert_eq!(v["self_loops_dropped"], 1);
    assert_eq!(v["duplicates_merged"], 1);
}

#[test]
fn ingest_rejects_unknown_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.json");
    std::fs::write(&p, r#"{"nodes":[{"id":"a"}],"edges":[["a","zz"]]}"#).unwrap();
    let out = graphite(&["ingest", p.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz"));
}

#[test]
fn layout_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_karate(&dir);
    let run = |seed: &str, out: &str| {
        let o = dir.path().join(out);
        let r = graphite(&["layout", &input, "--iters", "300", "--seed", seed, "--out", o.to_str().unwrap()]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        std::fs::read(o).unwrap()
    };
    let a = run("7", "a.json");
    assert_eq!(a, run("7", "b.json"));
    assert_ne!(a, run("8", "c.json"));
    let (g, _) = load_graph(&a).unwrap();
    assert_eq!(g.vertex_count(), 34);
    assert!(g.vertices().all(|v| g.meta(v).position.is_some() && g.meta(v).cluster.is_some()));
}

#[test]
fn sample_writes_smaller_document() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_karate(&dir);
    let out = graphite(&["sample", &input, "--scheme", "rw", "--p", "0.15", "--fraction", "0.5", "--seed", "2"]);
    assert!(out.status.success());
    let (g, _) = load_graph(&out.stdout).unwrap();
    assert!(g.vertex_count() >= 17 && g.vertex_count() < 34);
    assert!(String::from_utf8_lossy(&out.stderr).contains("degree KS"));

    let bad = graphite(&["sample", &input, "--scheme", "xx", "--p", "0.5"]);
    assert!(!bad.status.success());
}

#[test]
fn simulate_emits_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("m.json");
    let out = graphite(&[
        "simulate", "--clients", "3", "--loss", "0.2", "--latency", "10:40", "--ticks", "90", "--seed", "4",
        "--out", o.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(o).unwrap()).unwrap();
    assert_eq!(v["clients"], 3);
    assert_eq!(v["converged"], true);
    assert!(v["per_type"]["Transform"]["dropped"].as_u64().unwrap() > 0);

    let bad = graphite(&["simulate", "--latency", "40"]);
    assert!(!bad.status.success());
}
