//! DAG ingestion and preprocessing.
//!
//! A TSV line `u<TAB>v[<TAB>confidence]` means `u ⪯ v`: `u` is the ancestor
//! and `v` must lie in its cone. Preprocessing prunes cycles, then splits the
//! transitive closure into basic edges (the transitive reduction) and
//! non-basic edges, which feed the train/valid/test splits.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::objective::Pair;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("graph contains a cycle through {0}")]
    Cyclic(String),
    #[error("edge endpoint {0} is out of range")]
    UnknownNode(usize),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("negative ratio must be even and positive, got {0}")]
    InvalidRatio(usize),
}

/// Node labels with a reverse index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeTable {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_labels(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Self { labels, index }
    }

    pub fn intern(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), self.labels.len() - 1);
        self.labels.len() - 1
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Raw edge list as read from disk, possibly cyclic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeList {
    pub nodes: NodeTable,
    pub edges: Vec<Pair>,
}

/// Reads `parent<TAB>child[<TAB>confidence]` lines. `#` lines and blank lines
/// are skipped; self-loops and duplicate edges are dropped. With `top_n`, only
/// the `top_n` edges of highest confidence are kept (file order breaks ties;
/// a missing confidence counts as 1).
pub fn read_tsv<R: BufRead>(reader: R, top_n: Option<usize>) -> Result<EdgeList, GraphError> {
    let mut raw: Vec<(String, String, f64)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let (u, v) = match (fields.next(), fields.next()) {
            (Some(u), Some(v)) if !u.is_empty() && !v.is_empty() => (u, v),
            _ => return Err(GraphError::Parse { line: i + 1, msg: "expected parent<TAB>child".into() }),
        };
        let conf = match fields.next() {
            Some(c) => c.trim().parse::<f64>().map_err(|_| GraphError::Parse {
                line: i + 1,
                msg: format!("bad confidence {c:?}"),
            })?,
            None => 1.0,
        };
        if fields.next().is_some() {
            return Err(GraphError::Parse { line: i + 1, msg: "too many columns".into() });
        }
        raw.push((u.to_string(), v.to_string(), conf));
    }
    if let Some(n) = top_n {
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| raw[b].2.total_cmp(&raw[a].2).then(a.cmp(&b)));
        order.truncate(n);
        order.sort_unstable();
        raw = order.into_iter().map(|i| std::mem::take(&mut raw[i])).collect();
    }
    let mut out = EdgeList::default();
    let mut seen = HashSet::new();
    for (u, v, _) in raw {
        let a = out.nodes.intern(&u);
        let b = out.nodes.intern(&v);
        if a != b && seen.insert((a, b)) {
            out.edges.push((a, b));
        }
    }
    Ok(out)
}

pub fn write_tsv<W: Write>(mut w: W, nodes: &NodeTable, edges: &[Pair], header: Option<&str>) -> Result<(), GraphError> {
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    for &(u, v) in edges {
        writeln!(w, "{}\t{}", nodes.label(u), nodes.label(v))?;
    }
    Ok(())
}

/// Reads a TSV against an existing node table; unknown labels are an error.
pub fn read_pairs<R: BufRead>(reader: R, nodes: &NodeTable) -> Result<Vec<Pair>, GraphError> {
    let list = read_tsv(reader, None)?;
    list.edges
        .iter()
        .map(|&(u, v)| {
            let lookup = |i: usize| {
                let l = list.nodes.label(i);
                nodes.id(l).ok_or_else(|| GraphError::Parse { line: 0, msg: format!("unknown node {l:?}") })
            };
            Ok((lookup(u)?, lookup(v)?))
        })
        .collect()
}

/// An acyclic graph over `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    pub nodes: NodeTable,
    children: Vec<Vec<usize>>,
    edges: BTreeSet<Pair>,
}

impl Dag {
    pub fn new(nodes: NodeTable, edges: impl IntoIterator<Item = Pair>) -> Result<Self, GraphError> {
        let n = nodes.len();
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::UnknownNode(u.max(v)));
            }
            if u == v {
                return Err(GraphError::Cyclic(nodes.label(u).to_string()));
            }
            set.insert((u, v));
        }
        let mut children = vec![Vec::new(); n];
        for &(u, v) in &set {
            children[u].push(v);
        }
        let dag = Self { nodes, children, edges: set };
        if let Some(c) = find_cycle(&dag.children) {
            return Err(GraphError::Cyclic(dag.nodes.label(c[0]).to_string()));
        }
        Ok(dag)
    }

    /// Graph over unlabeled nodes `0..n` (labels are the decimal ids).
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Pair>) -> Result<Self, GraphError> {
        Self::new(NodeTable::from_labels((0..n).map(|i| i.to_string()).collect()), edges)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> &BTreeSet<Pair> {
        &self.edges
    }

    pub fn edge_vec(&self) -> Vec<Pair> {
        self.edges.iter().copied().collect()
    }

    pub fn children(&self, u: usize) -> &[usize] {
        &self.children[u]
    }

    pub fn with_edges(&self, edges: impl IntoIterator<Item = Pair>) -> Result<Self, GraphError> {
        Self::new(self.nodes.clone(), edges)
    }

    /// Nodes in topological order (ancestors first).
    pub fn topo_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut indeg = vec![0usize; n];
        for &(_, v) in &self.edges {
            indeg[v] += 1;
        }
        let mut stack: Vec<usize> = (0..n).rev().filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = stack.pop() {
            order.push(u);
            for &c in self.children[u].iter().rev() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
        order
    }

    /// Strict descendants of every node, each sorted ascending.
    pub fn descendants(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut stamp = vec![usize::MAX; n];
        let mut out = Vec::with_capacity(n);
        let mut stack = Vec::new();
        for u in 0..n {
            let mut desc = Vec::new();
            stack.extend_from_slice(&self.children[u]);
            while let Some(w) = stack.pop() {
                if stamp[w] == u {
                    continue;
                }
                stamp[w] = u;
                desc.push(w);
                stack.extend_from_slice(&self.children[w]);
            }
            desc.sort_unstable();
            out.push(desc);
        }
        out
    }

    /// Shortest number of edges from any root, per node.
    pub fn depths(&self) -> Vec<usize> {
        let n = self.len();
        let mut depth = vec![usize::MAX; n];
        let mut indeg = vec![0usize; n];
        for &(_, v) in &self.edges {
            indeg[v] += 1;
        }
        let mut queue: std::collections::VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        for &r in &queue {
            depth[r] = 0;
        }
        while let Some(u) = queue.pop_front() {
            for &c in &self.children[u] {
                if depth[c] == usize::MAX {
                    depth[c] = depth[u] + 1;
                    queue.push_back(c);
                }
            }
        }
        depth
    }
}

/// Iterative DFS from the lowest id; returns the node sequence of the first
/// cycle found.
fn find_cycle(children: &[Vec<usize>]) -> Option<Vec<usize>> {
    find_cycle_ordered(children, &(0..children.len()).collect::<Vec<_>>())
}

fn find_cycle_ordered(children: &[Vec<usize>], roots: &[usize]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut mark = vec![Mark::New; children.len()];
    let mut path: Vec<(usize, usize)> = Vec::new();
    for &root in roots {
        if mark[root] != Mark::New {
            continue;
        }
        mark[root] = Mark::Open;
        path.push((root, 0));
        while let Some(&mut (u, ref mut next)) = path.last_mut() {
            if *next < children[u].len() {
                let c = children[u][*next];
                *next += 1;
                match mark[c] {
                    Mark::New => {
                        mark[c] = Mark::Open;
                        path.push((c, 0));
                    }
                    Mark::Open => {
                        let start = path.iter().position(|&(w, _)| w == c).expect("open node is on the path");
                        return Some(path[start..].iter().map(|&(w, _)| w).collect());
                    }
                    Mark::Done => {}
                }
            } else {
                mark[u] = Mark::Done;
                path.pop();
            }
        }
    }
    None
}

/// Breaks every cycle by deleting one uniformly chosen edge of each detected
/// cycle. DFS starts from nodes in lexicographic label order.
pub fn prune_cycles(list: EdgeList, seed: u64) -> Result<(Dag, Vec<Pair>), GraphError> {
    let n = list.nodes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roots: Vec<usize> = (0..n).collect();
    roots.sort_by(|&a, &b| list.nodes.label(a).cmp(list.nodes.label(b)));
    let mut children = vec![Vec::new(); n];
    for &(u, v) in &list.edges {
        if u >= n || v >= n {
            return Err(GraphError::UnknownNode(u.max(v)));
        }
        children[u].push(v);
    }
    for c in &mut children {
        c.sort_by(|&a, &b| list.nodes.label(a).cmp(list.nodes.label(b)));
    }
    let mut removed = Vec::new();
    while let Some(cycle) = find_cycle_ordered(&children, &roots) {
        let i = rng.gen_range(0..cycle.len());
        let (u, v) = (cycle[i], cycle[(i + 1) % cycle.len()]);
        children[u].retain(|&c| c != v);
        removed.push((u, v));
    }
    let removed_set: HashSet<Pair> = removed.iter().copied().collect();
    let kept = list.edges.into_iter().filter(|e| !removed_set.contains(e));
    Ok((Dag::new(list.nodes, kept)?, removed))
}

pub fn transitive_closure(dag: &Dag) -> BTreeSet<Pair> {
    dag.descendants()
        .into_iter()
        .enumerate()
        .flat_map(|(u, d)| d.into_iter().map(move |v| (u, v)))
        .collect()
}

/// Keeps `u → v` only if `v` is not reachable from another child of `u`.
pub fn transitive_reduction(dag: &Dag) -> BTreeSet<Pair> {
    let desc = dag.descendants();
    let mut covered = vec![usize::MAX; dag.len()];
    let mut out = BTreeSet::new();
    for u in 0..dag.len() {
        for &c in dag.children(u) {
            for &w in &desc[c] {
                covered[w] = u;
            }
        }
        for &c in dag.children(u) {
            if covered[c] != u {
                out.insert((u, c));
            }
        }
    }
    out
}

/// Closure split into basic (reduction) and non-basic edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub dag: Dag,
    pub closure: BTreeSet<Pair>,
    pub basic: BTreeSet<Pair>,
    pub removed: Vec<Pair>,
}

impl Preprocessed {
    pub fn non_basic(&self) -> Vec<Pair> {
        self.closure.difference(&self.basic).copied().collect()
    }
}

/// Cycle pruning, reduction and closure in one go.
pub fn preprocess(list: EdgeList, seed: u64) -> Result<Preprocessed, GraphError> {
    let (dag, removed) = prune_cycles(list, seed)?;
    let closure = transitive_closure(&dag);
    let basic = transitive_reduction(&dag);
    Ok(Preprocessed { dag, closure, basic, removed })
}

/// Train/valid/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub p: f64,
    pub train: Vec<Pair>,
    pub valid: Vec<Pair>,
    pub test: Vec<Pair>,
    pub valid_neg: Vec<Pair>,
    pub test_neg: Vec<Pair>,
}

pub const HOLDOUT_FRACTION: f64 = 0.05;
pub const MAX_TRAIN_PERCENT: f64 = 90.0;

/// Holds out 5% + 5% of the non-basic edges for valid/test (fixed per seed),
/// then adds `p`% of all non-basic edges to the basic ones for training.
/// Splits for different `p` under one seed are nested.
pub fn make_split(closure: &BTreeSet<Pair>, basic: &BTreeSet<Pair>, n_nodes: usize, p: f64, neg_ratio: usize, seed: u64) -> Result<Split, GraphError> {
    if !(0.0..=MAX_TRAIN_PERCENT).contains(&p) {
        return Err(GraphError::InvalidSplit(format!("p must lie in [0, 90], got {p}")));
    }
    if let Some(e) = basic.iter().find(|e| !closure.contains(e)) {
        return Err(GraphError::InvalidSplit(format!("basic edge {e:?} missing from the closure")));
    }
    let mut non_basic: Vec<Pair> = closure.difference(basic).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    non_basic.shuffle(&mut rng);
    let nb = non_basic.len();
    let hold = (nb as f64 * HOLDOUT_FRACTION).round() as usize;
    let valid = non_basic[..hold].to_vec();
    let test = non_basic[hold..2 * hold].to_vec();
    let rest = &non_basic[2 * hold..];
    let take = ((nb as f64 * p / 100.0).round() as usize).min(rest.len());
    let take = if p >= MAX_TRAIN_PERCENT { rest.len() } else { take };
    let mut train: Vec<Pair> = basic.iter().copied().collect();
    train.extend_from_slice(&rest[..take]);
    let mut neg_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0e9a);
    let valid_neg = sample_negatives(&valid, n_nodes, closure, neg_ratio, &mut neg_rng)?.into_iter().flatten().collect();
    let test_neg = sample_negatives(&test, n_nodes, closure, neg_ratio, &mut neg_rng)?.into_iter().flatten().collect();
    Ok(Split { p, train, valid, test, valid_neg, test_neg })
}

/// Corrupts each pair `ratio / 2` times in the tail (`(u, v')`) and
/// `ratio / 2` times in the head (`(u', v)`), rejecting self-pairs and
/// anything in `exclude`. Pass the closure to get clean evaluation negatives,
/// or the training positives for per-epoch training negatives. A pair whose
/// corruptions keep getting rejected gets a short group and a warning.
pub fn sample_negatives<R: Rng, S: Contains>(
    pairs: &[Pair],
    n_nodes: usize,
    exclude: &S,
    ratio: usize,
    rng: &mut R,
) -> Result<Vec<Vec<Pair>>, GraphError> {
    if !ratio.is_multiple_of(2) {
        return Err(GraphError::InvalidRatio(ratio));
    }
    let half = ratio / 2;
    let max_attempts = 100 * ratio.max(1);
    let mut out = Vec::with_capacity(pairs.len());
    let mut short = 0usize;
    for &(u, v) in pairs {
        let mut group = Vec::with_capacity(ratio);
        for head in [false, true] {
            let mut got = 0;
            let mut attempts = 0;
            while got < half && attempts < max_attempts {
                attempts += 1;
                let w = rng.gen_range(0..n_nodes);
                let cand = if head { (w, v) } else { (u, w) };
                if cand.0 != cand.1 && !exclude.has(&cand) {
                    group.push(cand);
                    got += 1;
                }
            }
            if got < half {
                short += 1;
            }
        }
        out.push(group);
    }
    if short > 0 {
        warn!("{short} corruption sides ran out of valid negatives");
    }
    Ok(out)
}

/// Membership test over a pair set.
pub trait Contains {
    fn has(&self, p: &Pair) -> bool;
}

impl Contains for BTreeSet<Pair> {
    fn has(&self, p: &Pair) -> bool {
        self.contains(p)
    }
}

impl Contains for HashSet<Pair> {
    fn has(&self, p: &Pair) -> bool {
        self.contains(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(edges: &[(&str, &str)]) -> EdgeList {
        let text: String = edges.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect();
        read_tsv(text.as_bytes(), None).unwrap()
    }

    #[test]
    fn two_cycle_keeps_one_edge() {
        let (dag, removed) = prune_cycles(list(&[("a", "b"), ("b", "a")]), 0).unwrap();
        assert_eq!(dag.edges().len(), 1);
        assert_eq!(removed.len(), 1);
    }

    #[test]
    fn three_cycle_keeps_two_edges() {
        for seed in 0..10 {
            let (dag, _) = prune_cycles(list(&[("a", "b"), ("b", "c"), ("c", "a")]), seed).unwrap();
            assert_eq!(dag.edges().len(), 2);
        }
    }

    #[test]
    fn acyclic_input_unchanged() {
        let l = list(&[("a", "b"), ("a", "c"), ("b", "d")]);
        let edges = l.edges.clone();
        let (dag, removed) = prune_cycles(l, 3).unwrap();
        assert!(removed.is_empty());
        assert_eq!(dag.edge_vec(), edges.into_iter().collect::<BTreeSet<_>>().into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn chain_closure_and_reduction() {
        let dag = Dag::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(transitive_closure(&dag), BTreeSet::from([(0, 1), (1, 2), (0, 2)]));
        assert_eq!(transitive_reduction(&dag), BTreeSet::from([(0, 1), (1, 2)]));
        assert!(transitive_closure(&Dag::from_edges(4, []).unwrap()).is_empty());
    }

    #[test]
    fn diamond_reduction() {
        let dag = Dag::from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3), (0, 3)]).unwrap();
        assert_eq!(transitive_reduction(&dag), BTreeSet::from([(0, 1), (0, 2), (1, 3), (2, 3)]));
    }

    #[test]
    fn cyclic_dag_rejected() {
        assert!(matches!(Dag::from_edges(2, [(0, 1), (1, 0)]), Err(GraphError::Cyclic(_))));
    }

    #[test]
    fn confidence_top_n() {
        let text = "# c\na\tb\t0.2\nb\tc\t0.9\nc\td\t0.5\n";
        let l = read_tsv(text.as_bytes(), Some(2)).unwrap();
        let named: Vec<(&str, &str)> = l.edges.iter().map(|&(u, v)| (l.nodes.label(u), l.nodes.label(v))).collect();
        assert_eq!(named, vec![("b", "c"), ("c", "d")]);
        assert!(read_tsv("a\tb\tx\n".as_bytes(), None).is_err());
        assert!(read_tsv("lonely\n".as_bytes(), None).is_err());
    }

    #[test]
    fn two_node_graph_has_no_negatives() {
        let closure = BTreeSet::from([(0, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let neg = sample_negatives(&[(0, 1)], 2, &closure, 10, &mut rng).unwrap();
        assert!(neg[0].is_empty());
        assert!(sample_negatives(&[(0, 1)], 2, &closure, 3, &mut rng).is_err());
    }

    #[test]
    fn depths_of_chain() {
        let dag = Dag::from_edges(4, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(dag.depths(), vec![0, 1, 1, 0]);
    }
}
