use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn shadowcone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shadowcone")).args(args).env_remove("SHADOWCONE_SEED").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = shadowcone(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn manifest(dir: &Path) -> String {
    fs::read_to_string(dir.join("manifest.kv")).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Binary tree of depth 3 plus one redundant shortcut edge and a cycle.
fn write_input(dir: &Path) -> std::path::PathBuf {
    let mut tsv = String::new();
    for i in 1..8 {
        tsv.push_str(&format!("n{}\tn{}\n", i - 1, 2 * i - 1));
        tsv.push_str(&format!("n{}\tn{}\n", i - 1, 2 * i));
    }
    tsv.push_str("n0\tn3\n");
    tsv.push_str("n14\tn0\n");
    let path = dir.join("edges.tsv");
    fs::write(&path, tsv).unwrap();
    path
}

/// Runs preprocess and split, returning (graph dir, split dir).
fn prepare(tmp: &TempDir) -> (std::path::PathBuf, std::path::PathBuf) {
    let input = write_input(tmp.path());
    let graph = tmp.path().join("graph");
    let split = tmp.path().join("split");
    ok(&["preprocess", "--input", p(&input), "--out-dir", p(&graph)]);
    ok(&["split", "--input", p(&graph), "--p", "50", "--out", p(&split)]);
    (graph, split)
}

#[test]
fn full_pipeline() {
    let tmp = TempDir::new().unwrap();
    let (graph, split) = prepare(&tmp);
    let pre = manifest(&graph);
    assert!(pre.contains("nodes=15"), "{pre}");
    assert!(pre.contains("removed_edges=1"), "{pre}");
    assert!(pre.contains("basic_edges=14"), "{pre}");
    assert!(manifest(&split).contains("graph_hash="));

    let run = tmp.path().join("run");
    let stdout = ok(&["train", "--split", p(&split), "--out", p(&run), "--dim", "2", "--epochs", "20", "--eval-every", "10"]);
    assert!(stdout.starts_with("epochs=20 "), "{stdout}");
    for f in ["checkpoint.bin", "history.csv", "manifest.kv"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 22, "{history}");

    let ck = run.join("checkpoint.bin");
    let stdout = ok(&["eval", "--checkpoint", p(&ck), "--split", p(&split)]);
    assert!(stdout.starts_with("f1="), "{stdout}");
    let report = fs::read_to_string(run.join("eval.kv")).unwrap();
    assert!(report.contains("f1="), "{report}");

    let csv = run.join("emb.csv");
    ok(&["export", "--checkpoint", p(&ck), "--out", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert_eq!(lines[1], "label,x0,x1");
    assert_eq!(lines.len(), 2 + 15);

    let svg = run.join("plot.svg");
    ok(&["plot", "--checkpoint", p(&ck), "--graph", p(&split), "--cone-for", "n1", "--cone-for", "n2", "--out", p(&svg)]);
    let svg = fs::read_to_string(svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains(">n1</text>"));
}

#[test]
fn training_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (_, split) = prepare(&tmp);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let train = |out: &Path| ok(&["train", "--split", p(&split), "--out", p(out), "--dim", "2", "--epochs", "5", "--burnin", "1"]);
    train(&a);
    train(&b);
    assert_eq!(fs::read(a.join("checkpoint.bin")).unwrap(), fs::read(b.join("checkpoint.bin")).unwrap());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let (_, split) = prepare(&tmp);
    let cfg = tmp.path().join("train.kv");
    fs::write(&cfg, "dim=2\nepochs=7\nlr=0.005\ncone=umbral-origin\neval_radius=0.2\n").unwrap();
    let run = tmp.path().join("run");
    let stdout = ok(&["train", "--config", p(&cfg), "--split", p(&split), "--out", p(&run), "--epochs", "3", "--burnin", "1"]);
    assert!(stdout.starts_with("epochs=3 "), "{stdout}");
    let m = manifest(&run);
    assert!(m.contains("lr=0.005"), "{m}");
    assert!(m.contains("dim=2"), "{m}");
    assert!(m.contains("cone=umbral-origin"), "{m}");
    assert!(m.contains("eval_radius=0.2"), "{m}");
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let (graph, _) = prepare(&tmp);
    let out = tmp.path().join("seeded");
    let status = Command::new(env!("CARGO_BIN_EXE_shadowcone"))
        .args(["split", "--input", p(&graph), "--out", p(&out)])
        .env("SHADOWCONE_SEED", "17")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(manifest(&out).contains("seed=17"));

    let flagged = tmp.path().join("flagged");
    let status = Command::new(env!("CARGO_BIN_EXE_shadowcone"))
        .args(["split", "--input", p(&graph), "--out", p(&flagged), "--seed", "3"])
        .env("SHADOWCONE_SEED", "17")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(manifest(&flagged).contains("seed=3"));
}

#[test]
fn failed_command_removes_its_partial_outputs() {
    let tmp = TempDir::new().unwrap();
    let input = write_input(tmp.path());
    let out = tmp.path().join("graph");
    fs::create_dir_all(out.join("closure.tsv")).unwrap();
    let res = shadowcone(&["preprocess", "--input", p(&input), "--out-dir", p(&out)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("error: "));
    assert!(!out.join("nodes.txt").exists());
    assert!(out.join("closure.tsv").is_dir());
}

#[test]
fn invalid_arguments_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let (_, split) = prepare(&tmp);
    let run = tmp.path().join("run");
    let res = shadowcone(&["train", "--split", p(&split), "--out", p(&run), "--lr", "-1"]);
    assert!(!res.status.success());
    assert!(!run.exists());

    let res = shadowcone(&["eval", "--checkpoint", p(&tmp.path().join("missing.bin")), "--split", p(&split)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("missing.bin"));
}
