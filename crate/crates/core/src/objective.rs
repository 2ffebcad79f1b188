//! Energies, losses and their gradients over pair batches.
//!
//! The energy of a pair is the signed shortest distance from `v` to the cone
//! of `u` ([`EnergyKind::Distance`]), or the legacy clipped angle energy
//! `max(0, φ - θ)` ([`EnergyKind::Angle`]) kept as a baseline. All losses are
//! minimized:
//!
//! - max-margin: `Σ_P E + Σ_N max(0, γ - E)`
//! - contrastive, per positive with its negative group `N`:
//!   `E_pos + log Σ_N exp(-E)`
//! - shadow: `max(E_pos, γ2) + log Σ_N exp(max(γ1 - E, 0))`

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::cones::{ConeError, ConeSpec, GradSink};
use crate::optim::EmbeddingTable;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("node {0} is not in the embedding table")]
    UnknownNode(usize),
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("invalid loss setting: {0}")]
    InvalidConfig(String),
}

pub type Pair = (usize, usize);

/// Positives with one negative group per positive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairBatch {
    pub positives: Vec<Pair>,
    pub negatives: Vec<Vec<Pair>>,
}

impl PairBatch {
    pub fn new(positives: Vec<Pair>, negatives: Vec<Vec<Pair>>) -> Self {
        Self { positives, negatives }
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn validate(&self, n_nodes: usize) -> Result<(), ObjectiveError> {
        if self.negatives.len() != self.positives.len() {
            return Err(ObjectiveError::InvalidBatch(format!(
                "{} positives but {} negative groups",
                self.positives.len(),
                self.negatives.len()
            )));
        }
        let pos: HashSet<Pair> = self.positives.iter().copied().collect();
        for &(u, v) in self.positives.iter().chain(self.negatives.iter().flatten()) {
            let bad = if u >= n_nodes { Some(u) } else if v >= n_nodes { Some(v) } else { None };
            if let Some(b) = bad {
                return Err(ObjectiveError::UnknownNode(b));
            }
        }
        if let Some(p) = self.negatives.iter().flatten().find(|p| pos.contains(p)) {
            return Err(ObjectiveError::InvalidBatch(format!("pair {p:?} is both positive and negative")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    MaxMargin,
    Contrastive,
    Shadow,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::MaxMargin => "max-margin",
            LossKind::Contrastive => "contrastive",
            LossKind::Shadow => "shadow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [LossKind::MaxMargin, LossKind::Contrastive, LossKind::Shadow].into_iter().find(|l| l.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    Distance,
    Angle,
}

impl EnergyKind {
    pub fn name(self) -> &'static str {
        match self {
            EnergyKind::Distance => "distance",
            EnergyKind::Angle => "angle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "distance" => Some(EnergyKind::Distance),
            "angle" => Some(EnergyKind::Angle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Max-margin margin.
    pub gamma: f64,
    /// Shadow loss: negatives deeper than `γ1` outside stop contributing.
    pub gamma1: f64,
    /// Shadow loss: positives deeper than `γ2` inside stop contributing.
    pub gamma2: f64,
    pub energy: EnergyKind,
}

impl LossConfig {
    pub fn new(kind: LossKind) -> Self {
        Self { kind, gamma: 0.01, gamma1: 0.01, gamma2: 0.0, energy: EnergyKind::Distance }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.gamma) || !ok(self.gamma1) || !ok(self.gamma2) {
            return Err(ObjectiveError::InvalidConfig("margins must be finite and >= 0".into()));
        }
        if self.kind == LossKind::Shadow && self.gamma1 <= 0.0 {
            return Err(ObjectiveError::InvalidConfig("shadow loss needs gamma1 > 0".into()));
        }
        Ok(())
    }
}

fn row(table: &EmbeddingTable, i: usize) -> Result<&[f64], ObjectiveError> {
    table.get(i).ok_or(ObjectiveError::UnknownNode(i))
}

/// Distance energy `E(u, v)`: signed shortest distance from `v` to the cone
/// of `u`.
pub fn energy(spec: &ConeSpec, u: &[f64], v: &[f64]) -> Result<f64, ObjectiveError> {
    Ok(spec.signed_cone_distance(u, v)?)
}

pub fn energy_of(kind: EnergyKind, spec: &ConeSpec, u: &[f64], v: &[f64]) -> Result<f64, ObjectiveError> {
    Ok(match kind {
        EnergyKind::Distance => spec.signed_cone_distance(u, v)?,
        EnergyKind::Angle => spec.angle_energy(u, v)?,
    })
}

/// Energies of `pairs` looked up in `table`.
pub fn pair_energies(kind: EnergyKind, spec: &ConeSpec, table: &EmbeddingTable, pairs: &[Pair]) -> Result<Vec<f64>, ObjectiveError> {
    pairs.iter().map(|&(u, v)| energy_of(kind, spec, row(table, u)?, row(table, v)?)).collect()
}

fn energy_grad(kind: EnergyKind, spec: &ConeSpec, u: &[f64], v: &[f64], sink: &mut GradSink<'_>) -> Result<f64, ObjectiveError> {
    Ok(match kind {
        EnergyKind::Distance => spec.energy_grad(u, v, sink)?,
        EnergyKind::Angle => spec.angle_energy_grad(u, v, sink)?,
    })
}

/// `log Σ exp(x_i)` and the softmax weights, computed stably.
fn log_sum_exp(xs: &[f64]) -> (f64, Vec<f64>) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = w.iter().sum();
    (max + s.ln(), w.into_iter().map(|x| x / s).collect())
}

/// Loss value plus `dL/dE` for every positive and every negative.
fn loss_weights(config: &LossConfig, pos: &[f64], neg: &[Vec<f64>]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let mut loss = 0.0;
    let mut wp = Vec::with_capacity(pos.len());
    let mut wn = Vec::with_capacity(neg.len());
    for (&ep, group) in pos.iter().zip(neg) {
        match config.kind {
            LossKind::MaxMargin => {
                loss += ep;
                wp.push(1.0);
                let mut w = Vec::with_capacity(group.len());
                for &en in group {
                    let m = config.gamma - en;
                    if m > 0.0 {
                        loss += m;
                        w.push(-1.0);
                    } else {
                        w.push(0.0);
                    }
                }
                wn.push(w);
            }
            LossKind::Contrastive => {
                loss += ep;
                wp.push(1.0);
                if group.is_empty() {
                    wn.push(Vec::new());
                    continue;
                }
                let xs: Vec<f64> = group.iter().map(|e| -e).collect();
                let (lse, soft) = log_sum_exp(&xs);
                loss += lse;
                wn.push(soft.into_iter().map(|s| -s).collect());
            }
            LossKind::Shadow => {
                if ep > config.gamma2 {
                    loss += ep;
                    wp.push(1.0);
                } else {
                    loss += config.gamma2;
                    wp.push(0.0);
                }
                if group.is_empty() {
                    wn.push(Vec::new());
                    continue;
                }
                let xs: Vec<f64> = group.iter().map(|e| (config.gamma1 - e).max(0.0)).collect();
                let (lse, soft) = log_sum_exp(&xs);
                loss += lse;
                let w = soft
                    .into_iter()
                    .zip(group)
                    .map(|(s, &e)| if config.gamma1 - e > 0.0 { -s } else { 0.0 })
                    .collect();
                wn.push(w);
            }
        }
    }
    (loss, wp, wn)
}

fn batch_energies(
    config: &LossConfig,
    spec: &ConeSpec,
    table: &EmbeddingTable,
    batch: &PairBatch,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), ObjectiveError> {
    batch.validate(table.len())?;
    let pos = pair_energies(config.energy, spec, table, &batch.positives)?;
    let neg = batch
        .negatives
        .iter()
        .map(|g| pair_energies(config.energy, spec, table, g))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((pos, neg))
}

pub fn loss(batch: &PairBatch, config: &LossConfig, spec: &ConeSpec, table: &EmbeddingTable) -> Result<f64, ObjectiveError> {
    let (pos, neg) = batch_energies(config, spec, table, batch)?;
    Ok(loss_weights(config, &pos, &neg).0)
}

/// Sparse Euclidean gradient, node id → vector.
pub type GradMap = BTreeMap<usize, Vec<f64>>;

pub fn grad(batch: &PairBatch, config: &LossConfig, spec: &ConeSpec, table: &EmbeddingTable) -> Result<GradMap, ObjectiveError> {
    Ok(loss_and_grad(batch, config, spec, table)?.1)
}

/// Loss and its gradient in one pass over the batch.
pub fn loss_and_grad(
    batch: &PairBatch,
    config: &LossConfig,
    spec: &ConeSpec,
    table: &EmbeddingTable,
) -> Result<(f64, GradMap), ObjectiveError> {
    let (pos, neg) = batch_energies(config, spec, table, batch)?;
    let (loss, wp, wn) = loss_weights(config, &pos, &neg);
    let dim = table.dim();
    let mut grads = GradMap::new();
    let mut gu = vec![0.0; dim];
    let mut gv = vec![0.0; dim];
    let weighted = batch
        .positives
        .iter()
        .zip(&wp)
        .chain(batch.negatives.iter().flatten().zip(wn.iter().flatten()));
    for (&(u, v), &w) in weighted {
        if w == 0.0 {
            continue;
        }
        gu.iter_mut().for_each(|g| *g = 0.0);
        gv.iter_mut().for_each(|g| *g = 0.0);
        let mut sink = GradSink { scale: w, gu: &mut gu, gv: &mut gv };
        energy_grad(config.energy, spec, table.row(u), table.row(v), &mut sink)?;
        for (node, g) in [(u, &gu), (v, &gv)] {
            let acc = grads.entry(node).or_insert_with(|| vec![0.0; dim]);
            acc.iter_mut().zip(g.iter()).for_each(|(a, b)| *a += b);
        }
    }
    Ok((loss, grads))
}
