use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use log::{info, warn};
use shadowcone::eval::Scorer;
use shadowcone::graph::{self, Dag, NodeTable};
use shadowcone::kv::KvMap;
use shadowcone::objective::Pair;
use shadowcone::trainer::{self, Checkpoint, TrainData, TrainError};

use crate::args::*;
use crate::outputs::{read_manifest, Outputs, MANIFEST};
use crate::plot;

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Preprocess(a) => preprocess(&a),
        Command::Split(a) => split(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Export(a) => export(&a),
        Command::Plot(a) => plot::run(&a),
    }
}

fn read_nodes(dir: &Path) -> Result<NodeTable> {
    let path = dir.join("nodes.txt");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(NodeTable::from_labels(text.lines().map(str::to_string).collect()))
}

fn write_nodes(out: &mut Outputs, nodes: &NodeTable) -> Result<()> {
    let mut w = out.create("nodes.txt")?;
    for l in nodes.labels() {
        ensure!(!l.contains('\n') && !l.contains('\t'), "label {l:?} contains a tab or newline");
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs(dir: &Path, name: &str, nodes: &NodeTable) -> Result<Vec<Pair>> {
    let path = dir.join(name);
    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    graph::read_pairs(BufReader::new(f), nodes).with_context(|| format!("reading {}", path.display()))
}

fn write_pairs(out: &mut Outputs, name: &str, nodes: &NodeTable, pairs: &[Pair], hash: &str) -> Result<()> {
    let w = out.create(name)?;
    graph::write_tsv(w, nodes, pairs, Some(&format!("config_hash={hash}")))?;
    Ok(())
}

fn preprocess(a: &PreprocessArgs) -> Result<()> {
    let f = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let list = graph::read_tsv(BufReader::new(f), a.top_n).with_context(|| format!("reading {}", a.input.display()))?;
    let mut params = KvMap::new();
    params
        .set("command", "preprocess")
        .set("input", a.input.display())
        .set("top_n", a.top_n.map_or("all".to_string(), |n| n.to_string()))
        .set("seed", a.seed);
    let hash = params.short_digest();
    let pre = graph::preprocess(list, a.seed)?;
    if !pre.removed.is_empty() {
        warn!("removed {} edges to break cycles", pre.removed.len());
    }
    let mut out = Outputs::new(&a.out_dir)?;
    let nodes = &pre.dag.nodes;
    write_nodes(&mut out, nodes)?;
    write_pairs(&mut out, "closure.tsv", nodes, &pre.closure.iter().copied().collect::<Vec<_>>(), &hash)?;
    write_pairs(&mut out, "basic.tsv", nodes, &pre.basic.iter().copied().collect::<Vec<_>>(), &hash)?;
    write_pairs(&mut out, "removed.tsv", nodes, &pre.removed, &hash)?;
    params
        .set("config_hash", &hash)
        .set("nodes", nodes.len())
        .set("closure_edges", pre.closure.len())
        .set("basic_edges", pre.basic.len())
        .set("removed_edges", pre.removed.len());
    out.write(MANIFEST, &params.render())?;
    out.commit();
    println!("nodes={} closure={} basic={} removed={} config_hash={hash}", nodes.len(), pre.closure.len(), pre.basic.len(), pre.removed.len());
    Ok(())
}

fn split(a: &SplitArgs) -> Result<()> {
    let nodes = read_nodes(&a.input)?;
    let closure: BTreeSet<Pair> = read_pairs(&a.input, "closure.tsv", &nodes)?.into_iter().collect();
    let basic: BTreeSet<Pair> = read_pairs(&a.input, "basic.tsv", &nodes)?.into_iter().collect();
    let upstream = read_manifest(&a.input)?;
    let mut params = KvMap::new();
    params
        .set("command", "split")
        .set("graph_hash", upstream.require("config_hash")?)
        .set("p", a.p)
        .set("neg_ratio", a.neg_ratio)
        .set("seed", a.seed);
    let hash = params.short_digest();
    let s = graph::make_split(&closure, &basic, nodes.len(), a.p, a.neg_ratio, a.seed)?;
    let mut out = Outputs::new(&a.out)?;
    write_nodes(&mut out, &nodes)?;
    write_pairs(&mut out, "basic.tsv", &nodes, &basic.iter().copied().collect::<Vec<_>>(), &hash)?;
    write_pairs(&mut out, "train.tsv", &nodes, &s.train, &hash)?;
    write_pairs(&mut out, "valid.tsv", &nodes, &s.valid, &hash)?;
    write_pairs(&mut out, "test.tsv", &nodes, &s.test, &hash)?;
    write_pairs(&mut out, "valid_neg.tsv", &nodes, &s.valid_neg, &hash)?;
    write_pairs(&mut out, "test_neg.tsv", &nodes, &s.test_neg, &hash)?;
    params
        .set("config_hash", &hash)
        .set("nodes", nodes.len())
        .set("train", s.train.len())
        .set("valid", s.valid.len())
        .set("test", s.test.len())
        .set("valid_neg", s.valid_neg.len())
        .set("test_neg", s.test_neg.len());
    out.write(MANIFEST, &params.render())?;
    out.commit();
    println!(
        "train={} valid={} test={} valid_neg={} test_neg={} config_hash={hash}",
        s.train.len(),
        s.valid.len(),
        s.test.len(),
        s.valid_neg.len(),
        s.test_neg.len()
    );
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let config = a.config();
    config.validate()?;
    let hash = config.hash();
    let nodes = read_nodes(&a.split)?;
    let data = TrainData {
        n_nodes: nodes.len(),
        train: read_pairs(&a.split, "train.tsv", &nodes)?,
        valid: read_pairs(&a.split, "valid.tsv", &nodes)?,
        valid_neg: read_pairs(&a.split, "valid_neg.tsv", &nodes)?,
    };
    let split_hash = read_manifest(&a.split)?.require("config_hash")?.to_string();
    let mut out = Outputs::new(&a.out)?;
    info!("training {} on {} pairs, config_hash={hash}", config.family, data.train.len());
    let run = match trainer::train(&data, &config) {
        Ok(run) => run,
        Err(TrainError::Diverged { epoch, .. }) => bail!("training diverged in epoch {}; try a smaller --lr", epoch + 1),
        Err(e) => return Err(e.into()),
    };
    let ck = Checkpoint::from_run(&config, nodes.labels().to_vec(), run.table);
    ck.save(&out.track("checkpoint.bin"))?;
    out.write("history.csv", &format!("# config_hash={hash}\n{}", run.history.to_csv()))?;
    let mut manifest = config.to_kv();
    manifest.set("command", "train").set("split_hash", &split_hash).set("config_hash", &hash);
    if let Some(last) = run.history.0.last() {
        manifest.set("final_loss", last.loss).set("wallclock", last.wallclock);
        if let Some(f) = run.history.0.iter().rev().find_map(|r| r.val_f1) {
            manifest.set("val_f1", f);
        }
    }
    out.write(MANIFEST, &manifest.render())?;
    out.commit();
    let last = run.history.0.last();
    println!(
        "epochs={} loss={:.6} val_f1={} config_hash={hash}",
        config.epochs,
        last.map_or(f64::NAN, |r| r.loss),
        manifest.get("val_f1").unwrap_or("n/a")
    );
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let mut ck = Checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    if let Some(r) = a.eval_radius {
        ensure!(ck.spec.family.is_umbral(), "--eval-radius only applies to umbral cones");
        ck.eval_radius = r;
    }
    let nodes = read_nodes(&a.split)?;
    ensure!(nodes.labels() == ck.labels.as_slice(), "split nodes do not match the checkpoint labels");
    let spec = ck.eval_spec();
    spec.validate()?;
    let mut table = ck.table.clone();
    table.project(&spec);
    let scorer = Scorer { spec: &spec, energy: ck.energy, table: &table };
    let tau = scorer.select_threshold(&read_pairs(&a.split, "valid.tsv", &nodes)?, &read_pairs(&a.split, "valid_neg.tsv", &nodes)?)?;
    let basic = read_pairs(&a.split, "basic.tsv", &nodes)?;
    let depths = Dag::from_edges(nodes.len(), basic)?.depths();
    let report = scorer.evaluate(
        &read_pairs(&a.split, "test.tsv", &nodes)?,
        &read_pairs(&a.split, "test_neg.tsv", &nodes)?,
        tau,
        Some(&depths),
    )?;
    let dir = match &a.out {
        Some(d) => d.clone(),
        None => a.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut out = Outputs::new(&dir)?;
    let mut kv = report.to_kv();
    kv.set("config_hash", &ck.config_hash).set("eval_radius", ck.eval_radius).set("cone", ck.spec.family.name());
    out.write("eval.kv", &kv.render())?;
    out.write("eval.csv", &format!("# config_hash={}\n{}", ck.config_hash, report.to_csv()))?;
    out.commit();
    println!(
        "f1={:.4} precision={:.4} recall={:.4} threshold={:.6} config_hash={}",
        report.f1, report.precision, report.recall, report.threshold, ck.config_hash
    );
    Ok(())
}

fn export(a: &ExportArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let ExportFormat::Csv = a.format;
    let mut text = format!("# config_hash={} model={} k={}\nlabel", ck.config_hash, ck.table.model().name(), ck.spec.k);
    for i in 0..ck.table.dim() {
        text.push_str(&format!(",x{i}"));
    }
    text.push('\n');
    for (label, row) in ck.labels.iter().zip(ck.table.rows()) {
        ensure!(!label.contains(',') && !label.contains('"'), "label {label:?} needs quoting");
        text.push_str(label);
        for c in row {
            text.push_str(&format!(",{c:?}"));
        }
        text.push('\n');
    }
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = a.out.file_name().context("--out must name a file")?.to_string_lossy().into_owned();
    let mut out = Outputs::new(dir)?;
    out.write(&name, &text)?;
    out.commit();
    Ok(())
}
