//! Threshold selection and F1 reports.
//!
//! A pair is predicted positive when its energy is at most `τ`; `τ` is the
//! observed validation energy that maximizes validation F1 (smallest on ties).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cones::ConeSpec;
use crate::kv::KvMap;
use crate::objective::{pair_energies, EnergyKind, ObjectiveError, Pair};
use crate::optim::EmbeddingTable;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Counts {
    pub fn from_energies(pos: &[f64], neg: &[f64], tau: f64) -> Self {
        let tp = pos.iter().filter(|&&e| e <= tau).count();
        let fp = neg.iter().filter(|&&e| e <= tau).count();
        Counts { tp, fp, fn_: pos.len() - tp, tn: neg.len() - fp }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2PR / (P + R)`, zero when both vanish.
    pub fn f1(&self) -> f64 {
        f1(self.tp, self.fp, self.fn_)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    ratio(2 * tp, denom)
}

/// Energy threshold maximizing F1 over the observed energies.
pub fn select_threshold(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&e| (e, true)).chain(neg.iter().map(|&e| (e, false))).collect();
    if all.is_empty() {
        return 0.0;
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = (f64::NEG_INFINITY, all[0].0);
    let mut i = 0;
    while i < all.len() {
        let tau = all[i].0;
        while i < all.len() && all[i].0 == tau {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let score = f1(tp, fp, pos.len() - tp);
        if score > best.0 {
            best = (score, tau);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub threshold: f64,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Test F1 keyed by the depth of the child node.
    pub per_depth: BTreeMap<usize, f64>,
}

impl EvalReport {
    pub fn from_energies(pos: &[f64], neg: &[f64], tau: f64) -> Self {
        let counts = Counts::from_energies(pos, neg, tau);
        EvalReport {
            threshold: tau,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            per_depth: BTreeMap::new(),
        }
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        m.set("threshold", self.threshold)
            .set("precision", self.precision)
            .set("recall", self.recall)
            .set("f1", self.f1)
            .set("tp", self.counts.tp)
            .set("fp", self.counts.fp)
            .set("fn", self.counts.fn_)
            .set("tn", self.counts.tn)
            .set("decision_rule", "energy<=threshold");
        for (d, f) in &self.per_depth {
            m.set(&format!("f1_depth_{d:02}"), f);
        }
        m
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in &self.to_kv().0 {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }
}

/// Energies of labeled pairs against one table.
pub struct Scorer<'a> {
    pub spec: &'a ConeSpec,
    pub energy: EnergyKind,
    pub table: &'a EmbeddingTable,
}

impl Scorer<'_> {
    pub fn energies(&self, pairs: &[Pair]) -> Result<Vec<f64>, ObjectiveError> {
        pair_energies(self.energy, self.spec, self.table, pairs)
    }

    pub fn select_threshold(&self, valid_pos: &[Pair], valid_neg: &[Pair]) -> Result<f64, ObjectiveError> {
        Ok(select_threshold(&self.energies(valid_pos)?, &self.energies(valid_neg)?))
    }

    /// Test report at threshold `tau`. With `depths`, also reports F1 per
    /// depth of the child node (negatives bucketed the same way).
    pub fn evaluate(&self, test_pos: &[Pair], test_neg: &[Pair], tau: f64, depths: Option<&[usize]>) -> Result<EvalReport, ObjectiveError> {
        let pe = self.energies(test_pos)?;
        let ne = self.energies(test_neg)?;
        let mut report = EvalReport::from_energies(&pe, &ne, tau);
        if let Some(depths) = depths {
            let mut buckets: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for (&(_, v), &e) in test_pos.iter().zip(&pe) {
                buckets.entry(depths[v]).or_default().0.push(e);
            }
            for (&(_, v), &e) in test_neg.iter().zip(&ne) {
                buckets.entry(depths[v]).or_default().1.push(e);
            }
            report.per_depth = buckets
                .into_iter()
                .filter(|(_, (p, _))| !p.is_empty())
                .map(|(d, (p, n))| (d, Counts::from_energies(&p, &n, tau).f1()))
                .collect();
        }
        Ok(report)
    }
}
