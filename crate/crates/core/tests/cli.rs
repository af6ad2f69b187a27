mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqrec_audit::corpus::{read_binary, read_text, split_leave_one_out, SequenceDataset};
use seqrec_audit::eval::{read_predictions, run_model, Recommender, TghModel};
use seqrec_audit::graph::TransitionGraph;
use seqrec_audit::tgh::{Tgh, TghConfig};
use serde_json::Value;

fn cli(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqrec-audit"))
        .args(args)
        .env_remove("SEQREC_AUDIT_THREADS")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct World {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl World {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        common::write_interactions(&root.join("log.tsv"), &common::ring_world(120, 40, 3, 0.2, 4..=9, 3));
        common::write_torus_embeddings(&root.join("emb.txt"), 40, 5.0);
        World { _dir: dir, root }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

#[test]
fn stats_writes_every_column() {
    let w = World::new();
    let out = w.p("stats");
    let o = cli(&[&"stats", &"--interactions", &w.p("log.tsv"), &"--out", &out, &"--dataset", &"ring"]);
    ok(&o);
    let v = json(out.join("graph_stats.json"));
    for key in [
        "num_users",
        "num_items",
        "num_edges",
        "num_sources",
        "avg_seq_len",
        "avg_out_degree",
        "avg_edge_weight",
        "coverage",
        "out_degree_basis",
        "edge_weight_basis",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["num_users"], 120);
    let cov = v["coverage"].as_object().unwrap();
    assert_eq!(cov.keys().collect::<Vec<_>>(), ["1", "2", "3"]);
    assert!(out.join("graph.srtg").exists());
    assert!(out.join("config.json").exists());
    let text = fs::read_to_string(out.join("graph_stats.txt")).unwrap();
    assert!(text.contains("ring"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), text);
}

#[test]
fn eval_two_models_one_table() {
    let w = World::new();
    let out = w.p("eval");
    ok(&cli(&[
        &"eval",
        &"--interactions",
        &w.p("log.tsv"),
        &"--embeddings",
        &w.p("emb.txt"),
        &"--out",
        &out,
        &"--models",
        &"tgh1,semnn",
    ]));
    let mut files: Vec<String> = fs::read_dir(out.join("predictions"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["semnn.tsv", "tgh1.tsv"]);
    let rows = json(out.join("metrics.json"))["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 6);
    let text = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("tgh1") || l.contains("semnn")).count(), 2);
    for col in ["R@1", "N@1", "R@5", "N@5", "R@10", "N@10"] {
        assert!(text.contains(col));
    }

    // the written predictions read back as an external model with the same scores
    let back = w.p("back");
    fs::copy(out.join("predictions/tgh1.tsv"), w.p("copy.tsv")).unwrap();
    ok(&cli(&[
        &"eval",
        &"--interactions",
        &w.p("log.tsv"),
        &"--out",
        &back,
        &"--models",
        &format!("external:{}", w.p("copy.tsv").display()),
    ]));
    let original = json(out.join("metrics.json"));
    let reread = json(back.join("metrics.json"));
    let pick = |v: &Value, m: &str| -> Vec<Value> {
        v["rows"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["model"] == m)
            .map(|r| Value::from(vec![r["recall"].clone(), r["ndcg"].clone()]))
            .collect()
    };
    assert_eq!(pick(&original, "tgh1"), pick(&reread, "copy"));
}

#[test]
fn unknown_user_is_named() {
    let w = World::new();
    fs::write(w.p("ext.tsv"), "u0\ti1,i2\nnobody_here\ti3\n").unwrap();
    let o = cli(&[
        &"eval",
        &"--interactions",
        &w.p("log.tsv"),
        &"--out",
        &w.p("o"),
        &"--models",
        &format!("external:{}", w.p("ext.tsv").display()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nobody_here"));
}

#[test]
fn convert_embeddings_round_trip() {
    let w = World::new();
    let bin = w.p("emb.srae");
    let txt = w.p("back.txt");
    ok(&cli(&[&"convert-embeddings", &"--input", &w.p("emb.txt"), &"--output", &bin]));
    ok(&cli(&[&"convert-embeddings", &"--input", &bin, &"--output", &txt]));
    let (a, b, c) = (read_text(w.p("emb.txt"), None).unwrap(), read_binary(&bin).unwrap(), read_text(&txt, None).unwrap());
    assert_eq!(a.ids, b.ids);
    assert_eq!(a.values, b.values);
    assert_eq!(b.ids, c.ids);
    assert_eq!(b.values, c.values);

    fs::write(w.p("raw.txt"), "a 3 4\nb 0 0\n").unwrap();
    ok(&cli(&[
        &"convert-embeddings",
        &"--input",
        &w.p("raw.txt"),
        &"--output",
        &w.p("unit.txt"),
        &"--to",
        &"text",
        &"--normalize",
    ]));
    let unit = read_text(w.p("unit.txt"), None).unwrap();
    assert_eq!(unit.values, [0.6, 0.8, 0.0, 0.0]);

    fs::write(w.p("ragged.txt"), "a 1 2 3\nb 1 2\n").unwrap();
    let o = cli(&[&"convert-embeddings", &"--input", &w.p("ragged.txt"), &"--output", &w.p("r.srae")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension mismatch"));
    assert!(!w.p("r.srae").exists());
}

#[test]
fn exit_codes() {
    let w = World::new();
    let code = |o: Output| o.status.code();
    assert_eq!(code(cli(&[&"bogus"])), Some(1));
    assert_eq!(code(cli(&[&"eval", &"--interactions", &w.p("log.tsv"), &"--out", &w.p("a"), &"--models", &"nope"])), Some(1));
    assert_eq!(code(cli(&[&"eval", &"--interactions", &w.p("log.tsv"), &"--out", &w.p("a"), &"--ks", &"0"])), Some(1));
    fs::write(w.p("bad.json"), r#"{"no_such_field": 1}"#).unwrap();
    assert_eq!(code(cli(&[&"stats", &"--config", &w.p("bad.json")])), Some(1));
    assert_eq!(code(cli(&[&"stats", &"--interactions", &w.p("missing.tsv"), &"--out", &w.p("b")])), Some(2));
    fs::write(w.p("short.tsv"), "u\ta\t1\nu\tb\t2\n").unwrap();
    assert_eq!(code(cli(&[&"stats", &"--interactions", &w.p("short.tsv"), &"--out", &w.p("c")])), Some(2));
    assert_eq!(code(cli(&[&"stats", &"--interactions", &w.p("short.tsv"), &"--out", &w.p("c"), &"--min-len", &"1"])), Some(1));
    // embeddings that miss catalog items are a data error unless zero-filled
    fs::write(w.p("few.txt"), "i0 1 0\ni1 0 1\n").unwrap();
    let args = |extra: &'static str| {
        let mut v: Vec<String> = ["eval", "--interactions"].map(String::from).to_vec();
        v.push(w.p("log.tsv").display().to_string());
        v.extend(["--embeddings".into(), w.p("few.txt").display().to_string(), "--out".into()]);
        v.push(w.p("d").display().to_string());
        v.extend(["--models".into(), "semnn".into()]);
        if !extra.is_empty() {
            v.push(extra.into());
        }
        v
    };
    let run = |v: Vec<String>| Command::new(env!("CARGO_BIN_EXE_seqrec-audit")).args(v).output().unwrap();
    assert_eq!(run(args("")).status.code(), Some(2));
    assert_eq!(run(args("--zero-fill")).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_seqrec-audit"))
        .args(["stats", "--interactions"])
        .arg(w.p("log.tsv"))
        .arg("--out")
        .arg(w.p("e"))
        .env("SEQREC_AUDIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn batch_predictions_match_single_calls() {
    let split = split_leave_one_out(&SequenceDataset::from_id_sequences([
        ("u1", vec!["a", "b", "c", "d"]),
        ("u2", vec!["b", "c", "a", "b"]),
        ("u3", vec!["c", "d", "a", "c", "b"]),
    ]))
    .unwrap();
    let g = TransitionGraph::build(&split);
    let rows: Vec<f64> = split
        .vocab
        .ids()
        .iter()
        .flat_map(|id| match id.as_str() {
            "a" => [1.0, 0.0, 0.0],
            "b" => [0.8, 0.6, 0.0],
            "c" => [0.0, 1.0, 0.0],
            _ => [0.0, 0.6, 0.8],
        })
        .collect();
    let emb = seqrec_audit::corpus::EmbeddingMatrix::from_rows(3, rows).normalize_rows();
    let m = TghModel {
        name: "tgh1".into(),
        tgh: Tgh::new(TghConfig::tgh1(), &g, &emb).unwrap(),
    };
    let batch = run_model(&m, &split, 10).unwrap();
    for (u, su) in split.users.iter().enumerate() {
        assert_eq!(batch.lists[u], m.recommend(su.test_context(), 10).unwrap(), "user {}", su.user_id);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tgh1.tsv");
    seqrec_audit::eval::write_predictions(&path, &batch, &split).unwrap();
    assert_eq!(read_predictions(&path, &split, None).unwrap().lists, batch.lists);
}

#[test]
fn diagnose_schema() {
    let w = World::new();
    let out = w.p("diag");
    fs::write(w.p("mine.tsv"), "u0\ti1,i2,i3\n").unwrap();
    ok(&cli(&[
        &"diagnose",
        &"--interactions",
        &w.p("log.tsv"),
        &"--embeddings",
        &w.p("emb.txt"),
        &"--out",
        &out,
        &"--external",
        &w.p("mine.tsv"),
        &"--bpr-epochs",
        &"3",
    ]));
    for f in ["audit.json", "audit.md", "overlap.json", "hop_buckets.json", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let v = json(out.join("audit.json"));
    for key in ["dataset", "graph_stats", "metrics", "overlap", "hop_buckets", "shortcut_axes", "provenance"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let models: Vec<&str> = v["overlap"]["models"].as_array().unwrap().iter().map(|m| m.as_str().unwrap()).collect();
    assert_eq!(models, ["tgh1", "tgh2", "semnn", "idlast", "idsem", "mine"]);
    let buckets = v["hop_buckets"]["buckets"].as_array().unwrap();
    assert_eq!(buckets.len(), 4);
    let users: u64 = buckets.iter().map(|b| b["num_users"].as_u64().unwrap()).sum();
    assert_eq!(users, 120);
    let hashes = v["provenance"]["input_sha256"].as_object().unwrap();
    assert!(hashes.contains_key("interactions") && hashes.contains_key("embeddings") && hashes.contains_key("external:mine"));
    assert_eq!(json(out.join("overlap.json")), v["overlap"]);
    let md = fs::read_to_string(out.join("audit.md")).unwrap();
    assert!(md.starts_with('#'));
}
