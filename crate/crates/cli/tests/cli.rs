use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use legiscout_core::model::{Entity, EntityType, LogGraph, RelType, Relationship};
use legiscout_testkit::chart::{render_rects, synthetic_chart, Rect, INK_LEVEL};
use legiscout_testkit::graphs::faulty_dataset;
use serde_json::Value;

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture() -> PathBuf {
    repo().join("fixtures/aca-case-study")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_legiscout"))
        .args(args)
        .env_remove("LEGISCOUT_CONFIG")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    assert_eq!(code(&run(&["validate", s(&fixture())])), 0);
    assert_eq!(code(&run(&["validate", "/no/such/bundle"])), 2);

    let dir = tempfile::tempdir().unwrap();
    for k in [1, 4, 9] {
        let f = faulty_dataset(100 + k as u64, k);
        let p = dir.path().join(format!("faulty{k}.json"));
        std::fs::write(&p, &f.json).unwrap();
        let o = run(&["validate", "--format", "json", s(&p)]);
        assert_eq!(code(&o), 1);
        let v = stdout_json(&o);
        assert_eq!(v["valid"], false);
        assert_eq!(v["violations"].as_array().unwrap().len(), k, "{}", v);
        let text = run(&["validate", s(&p)]);
        assert_eq!(String::from_utf8_lossy(&text.stdout).lines().count(), k + 1);
    }
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&run(&["validate", "--colour", "red", s(&fixture())])), 64);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&["layout", s(&fixture())])), 64);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn layout_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = repo().join("fixtures/synthetic-200/graph.json");
    let out = |name: &str, extra: &[&str]| {
        let p = dir.path().join(name);
        let mut args = vec!["layout", s(&bundle), "-o", s(&p)];
        args.extend_from_slice(extra);
        assert_eq!(code(&run(&args)), 0);
        std::fs::read(&p).unwrap()
    };
    let a = out("a.json", &["--seed", "3"]);
    let b = out("b.json", &["--seed", "3"]);
    assert_eq!(a, b);
    assert_ne!(a, out("c.json", &["--seed", "4"]));
    assert_eq!(out("d.json", &[]), out("e.json", &["--seed", "0"]));

    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[layout]\nseed = 3\n").unwrap();
    assert_eq!(out("f.json", &["--config", s(&cfg)]), a);
}

#[test]
fn layout_pair_reaches_k() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = LogGraph::new();
    g.add_entity(Entity::new("a", "A", EntityType::Program)).unwrap();
    g.add_entity(Entity::new("b", "B", EntityType::Program)).unwrap();
    g.add_relationship(Relationship::new("r", "a", "b", RelType::Funding)).unwrap();
    let graph = dir.path().join("pair.json");
    std::fs::write(&graph, g.to_json_pretty()).unwrap();
    let snap = dir.path().join("snap.json");
    assert_eq!(code(&run(&["layout", s(&graph), "--k", "1", "-o", s(&snap)])), 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&snap).unwrap()).unwrap();
    let p = |id: &str| [v["positions"][id][0].as_f64().unwrap(), v["positions"][id][1].as_f64().unwrap()];
    let (a, b) = (p("a"), p("b"));
    let d = (a[0] - b[0]).hypot(a[1] - b[1]);
    assert!((d - 1.0).abs() <= 0.02, "distance {d}");
}

#[test]
fn index_and_search() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("index.bin");
    assert_eq!(code(&run(&["index", s(&fixture()), "--embedder", "hash-ngram-v1", "-o", s(&idx)])), 0);
    let first = std::fs::read(&idx).unwrap();
    assert_eq!(code(&run(&["index", s(&fixture()), "-o", s(&idx)])), 0);
    assert_eq!(std::fs::read(&idx).unwrap(), first);

    let o = run(&["search", s(&idx), "-q", "coverage for dependents up to age 26", "-k", "3", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let hits = stdout_json(&o);
    assert_eq!(hits.as_array().unwrap().len(), 3);
    assert!(hits[0]["target"].as_str().unwrap().starts_with("SEC-1001#"));
    assert_eq!(hits[0]["bill_ref"]["page"], 42);

    let text = run(&["search", s(&idx), "-q", "coverage for dependents up to age 26", "-k", "1"]);
    let line = String::from_utf8_lossy(&text.stdout).to_string();
    assert!(line.contains("SEC-1001") && line.contains("p.42"), "{line}");

    assert_eq!(code(&run(&["search", s(&idx), "-q", ""])), 64);
    assert_eq!(code(&run(&["search", s(&idx), "-q", "  "])), 64);
    assert_eq!(code(&run(&["search", "/no/index", "-q", "x"])), 2);

    let mut doc: Value = serde_json::from_slice(&first).unwrap();
    doc["embedder_id"] = Value::from("other-model");
    let foreign = dir.path().join("foreign.bin");
    std::fs::write(&foreign, doc.to_string()).unwrap();
    assert_eq!(code(&run(&["search", s(&foreign), "-q", "coverage"])), 1);

    let bare = repo().join("fixtures/synthetic-200/graph.json");
    assert_eq!(code(&run(&["index", s(&bare), "-o", s(&dir.path().join("none.bin"))])), 1);
}

fn save(img: &legiscout_core::extract::RasterImage, path: &Path) {
    img.save(path).unwrap();
}

#[test]
fn extract_charts() {
    let dir = tempfile::tempdir().unwrap();
    let mut seed = 0;
    let chart = loop {
        let c = synthetic_chart(seed, 2);
        if c.boxes.len() == 2 && c.edges.len() == 1 {
            break c;
        }
        seed += 1;
    };
    let img = dir.path().join("two.png");
    save(&chart.image, &img);
    let out = dir.path().join("two.json");
    let o = run(&["extract", s(&img), "-o", s(&out), "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let g: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(g["entities"].as_array().unwrap().len(), 2);
    assert_eq!(g["relationships"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("two.report.json").exists());
    assert_eq!(stdout_json(&o)["relationship_count"], 1);

    let labels = dir.path().join("labels.json");
    std::fs::write(&labels, r#"{"HHS": 0, "Exchanges": 1}"#).unwrap();
    assert_eq!(code(&run(&["extract", s(&img), "--labels", s(&labels), "-o", s(&out)])), 0);
    assert!(std::fs::read_to_string(&out).unwrap().contains("\"Exchanges\""));

    let blank = dir.path().join("blank.pgm");
    save(&render_rects(&[], 120, 80), &blank);
    let out = dir.path().join("blank.json");
    assert_eq!(code(&run(&["extract", s(&blank), "-o", s(&out)])), 0);
    let g: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(g["entities"].as_array().unwrap().is_empty());

    let mut orphan = render_rects(&[Rect { x: 10, y: 10, w: 40, h: 20 }, Rect { x: 150, y: 10, w: 40, h: 20 }], 220, 120);
    for x in 40..180 {
        for y in 90..92 {
            orphan.set(x, y, INK_LEVEL);
        }
    }
    let path = dir.path().join("orphan.pgm");
    save(&orphan, &path);
    let out = dir.path().join("orphan.json");
    let o = run(&["extract", s(&path), "-o", s(&out), "--format", "json"]);
    assert_eq!(code(&o), 1);
    assert!(!stdout_json(&o)["unattached_segments"].as_array().unwrap().is_empty());
    assert!(!out.exists());

    let junk = dir.path().join("junk.png");
    std::fs::write(&junk, b"not an image").unwrap();
    assert_eq!(code(&run(&["extract", s(&junk), "-o", s(&out)])), 2);
}

#[test]
fn serve_reports_port_and_answers() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_legiscout"))
        .args(["serve", s(&fixture()), "--port", "0"])
        .env_remove("LEGISCOUT_CONFIG")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let port: u16 = line.trim().rsplit(':').next().unwrap().parse().unwrap_or_else(|_| panic!("{line}"));
    assert_ne!(port, 0);
    let resp = ureq::get(&format!("http://127.0.0.1:{port}/api/graph")).call();
    let status = resp.as_ref().map(|r| r.status().as_u16());

    let busy = run(&["serve", s(&fixture()), "--port", &port.to_string()]);
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(status.unwrap(), 200);
    assert_eq!(code(&busy), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, faulty_dataset(5, 2).json).unwrap();
    assert_eq!(code(&run(&["serve", s(&bad), "--port", "0"])), 1);
}
