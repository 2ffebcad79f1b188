//! SVG rendering of 2-D embeddings.
//!
//! Everything is drawn in the Poincaré disk; half-space checkpoints are
//! converted first. Cones are drawn by shading the grid cells whose centers
//! the cone contains, which works for every family without tracing
//! boundary curves.

use std::fmt::Write as _;

use anyhow::{ensure, Context, Result};
use shadowcone::manifold::{convert_coords, Model};
use shadowcone::trainer::Checkpoint;

use crate::args::PlotArgs;
use crate::commands::read_pairs;
use crate::outputs::Outputs;
use shadowcone::graph::NodeTable;

const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const GRID: usize = 200;

pub fn run(a: &PlotArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    ensure!(ck.table.dim() == 2, "plot needs a 2-D checkpoint, this one has dim {}", ck.table.dim());
    let spec = ck.eval_spec();
    // cones are drawn from the apexes eval actually scores
    let mut projected = ck.table.clone();
    projected.project(&spec);
    let model = ck.table.model();
    let k = ck.spec.k;
    let radius = 1.0 / k.sqrt();
    let size = a.size as f64;
    let half = size / 2.0;
    let scale = 0.95 * half / radius;
    let to_disk = |c: &[f64]| -> [f64; 2] {
        let b = if model == Model::Ball { c.to_vec() } else { convert_coords(c, model, Model::Ball, k) };
        [b[0], b[1]]
    };
    let px = |p: [f64; 2]| (half + p[0] * scale, half - p[1] * scale);

    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#)?;
    writeln!(svg, "<!-- config_hash={} cone={} -->", ck.config_hash, ck.spec.family)?;
    writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##)?;
    writeln!(svg, r##"<circle cx="{half}" cy="{half}" r="{:.2}" fill="none" stroke="#444" stroke-width="1"/>"##, radius * scale)?;

    let labels = NodeTable::from_labels(ck.labels.clone());
    let cell = 2.0 * radius / GRID as f64;
    for (ci, name) in a.cone_for.iter().enumerate() {
        let u = labels.id(name).with_context(|| format!("no node labelled {name:?}"))?;
        let apex = projected.row(u);
        let color = PALETTE[ci % PALETTE.len()];
        writeln!(svg, r#"<g fill="{color}" fill-opacity="0.25" stroke="none">"#)?;
        for i in 0..GRID {
            for j in 0..GRID {
                let b = [-radius + (i as f64 + 0.5) * cell, -radius + (j as f64 + 0.5) * cell];
                if b[0] * b[0] + b[1] * b[1] >= radius * radius * 0.999 {
                    continue;
                }
                let v = if model == Model::Ball { b.to_vec() } else { convert_coords(&b, Model::Ball, model, k) };
                if spec.query(apex, &v).map(|q| q.member).unwrap_or(false) {
                    let (x, y) = px([b[0] - cell / 2.0, b[1] + cell / 2.0]);
                    writeln!(svg, r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{w:.2}"/>"#, w = cell * scale)?;
                }
            }
        }
        writeln!(svg, "</g>")?;
    }

    if let Some(dir) = &a.graph {
        let edges = read_pairs(dir, "basic.tsv", &labels)?;
        writeln!(svg, r##"<g stroke="#888" stroke-width="0.6" stroke-opacity="0.7">"##)?;
        for (u, v) in edges {
            let (x1, y1) = px(to_disk(ck.table.row(u)));
            let (x2, y2) = px(to_disk(ck.table.row(v)));
            writeln!(svg, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#)?;
        }
        writeln!(svg, "</g>")?;
    }

    writeln!(svg, r##"<g fill="#222">"##)?;
    for row in ck.table.rows() {
        let (x, y) = px(to_disk(row));
        writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2"/>"#)?;
    }
    writeln!(svg, "</g>")?;
    for (ci, name) in a.cone_for.iter().enumerate() {
        let u = labels.id(name).expect("checked above");
        let (x, y) = px(to_disk(ck.table.row(u)));
        let color = PALETTE[ci % PALETTE.len()];
        writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#)?;
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#, x + 6.0, y - 6.0, escape(name))?;
    }
    writeln!(svg, "</svg>")?;

    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
    let name = a.out.file_name().context("--out must name a file")?.to_string_lossy().into_owned();
    let mut out = Outputs::new(dir)?;
    out.write(&name, &svg)?;
    out.commit();
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
