mod common;

use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadowcone::graph;
use shadowcone::objective::Pair;

#[test]
fn closure_and_reduction_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..100 {
        let n = rng.gen_range(1..=if case < 80 { 50 } else { 100 });
        let density = rng.gen_range(0.01..0.2);
        let dag = random_dag(&mut rng, n, density);
        let closure = graph::transitive_closure(&dag);
        assert_eq!(closure, closure_oracle(n, dag.edges()));
        let reduction = graph::transitive_reduction(&dag);
        assert_eq!(graph::transitive_closure(&dag.with_edges(reduction.iter().copied()).unwrap()), closure);
        if n <= 50 {
            assert_eq!(reduction, reduction_oracle(n, dag.edges()));
        }
    }
}

#[test]
fn pruned_graphs_are_acyclic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let n = rng.gen_range(2..40);
        let mut list = graph::EdgeList::default();
        for i in 0..n {
            list.nodes.intern(&format!("n{i}"));
        }
        for _ in 0..rng.gen_range(1..4 * n) {
            let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if u != v && !list.edges.contains(&(u, v)) {
                list.edges.push((u, v));
            }
        }
        let total = list.edges.len();
        let (dag, removed) = graph::prune_cycles(list.clone(), 9).unwrap();
        assert_eq!(dag.topo_order().len(), n);
        assert_eq!(dag.edges().len() + removed.len(), total);
        let (again, _) = graph::prune_cycles(list, 9).unwrap();
        assert_eq!(again, dag);
    }
}

fn toy_closure(rng: &mut ChaCha8Rng) -> (usize, BTreeSet<Pair>, BTreeSet<Pair>) {
    let dag = random_dag(rng, 80, 0.06);
    (80, graph::transitive_closure(&dag), graph::transitive_reduction(&dag))
}

#[test]
fn splits_are_nested_and_disjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (n, closure, basic) = toy_closure(&mut rng);
    let nb = closure.len() - basic.len();
    let mut prev: Option<HashSet<Pair>> = None;
    for p in [0.0, 10.0, 25.0, 50.0, 90.0] {
        let s = graph::make_split(&closure, &basic, n, p, 10, 3).unwrap();
        let train: HashSet<Pair> = s.train.iter().copied().collect();
        assert!(basic.iter().all(|e| train.contains(e)));
        assert!(s.valid.iter().chain(&s.test).all(|e| !train.contains(e)));
        let hold = (nb as f64 * 0.05).round() as usize;
        assert_eq!(s.valid.len(), hold);
        assert_eq!(s.test.len(), hold);
        if p == 0.0 {
            assert_eq!(train.len(), basic.len());
        }
        if p == 90.0 {
            assert_eq!(train.len() + 2 * hold, closure.len());
        }
        if let Some(prev) = &prev {
            assert!(prev.is_subset(&train));
        }
        for e in s.valid_neg.iter().chain(&s.test_neg) {
            assert!(!closure.contains(e) && e.0 != e.1);
        }
        prev = Some(train);
    }
    assert!(graph::make_split(&closure, &basic, n, 91.0, 10, 3).is_err());
}

#[test]
fn negatives_split_evenly_between_heads_and_tails() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, closure, _) = toy_closure(&mut rng);
    let pairs: Vec<Pair> = closure.iter().copied().take(50).collect();
    let groups = graph::sample_negatives(&pairs, n, &closure, 10, &mut rng).unwrap();
    for (&(u, v), g) in pairs.iter().zip(&groups) {
        let tails = g.iter().filter(|e| e.0 == u && e.1 != v).count();
        let heads = g.iter().filter(|e| e.1 == v && e.0 != u).count();
        assert_eq!((tails, heads), (5, 5));
        assert!(g.iter().all(|e| !closure.contains(e)));
    }
}

fn mammal_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mammal_closure.tsv")
}

#[test]
fn mammal_statistics() {
    let file = std::fs::File::open(mammal_path()).unwrap();
    let list = graph::read_tsv(std::io::BufReader::new(file), None).unwrap();
    let pre = graph::preprocess(list, 0).unwrap();
    assert!(pre.removed.is_empty());
    assert_eq!(pre.dag.len(), 1179);
    assert_eq!(pre.basic.len(), 1176);
    assert_eq!(pre.closure.len(), 5361);
}
