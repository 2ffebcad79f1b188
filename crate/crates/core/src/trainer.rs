//! Training loop, history and binary checkpoints.
//!
//! Each epoch shuffles the training positives, draws fresh corrupted
//! negatives for every positive, and applies one optimizer step per batch.
//! The first `burnin_epochs` run with a reduced learning rate.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cones::{ConeError, ConeFamily, ConeSpec, DEFAULT_GAMMA3};
use crate::eval::{select_threshold, Counts};
use crate::graph::{sample_negatives, GraphError};
use crate::kv::{KvError, KvMap};
use crate::manifold::{Geometry, GeometryError, Model};
use crate::objective::{loss_and_grad, pair_energies, EnergyKind, LossConfig, LossKind, ObjectiveError, Pair, PairBatch};
use crate::optim::{init_embeddings, EmbeddingTable, OptimError, OptimizerKind, OptimizerState};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error("loss diverged in epoch {epoch}")]
    Diverged { epoch: usize, last_good: Box<EmbeddingTable> },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint: {0}")]
    Format(String),
}

/// Every hyperparameter of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub family: ConeFamily,
    pub dim: usize,
    pub k: f64,
    /// Object radius (umbral) or source radius (penumbral ball) in training.
    pub r: f64,
    /// Exponentiated horosphere height `√k e^{√k h}`.
    pub height: f64,
    pub gamma3: f64,
    /// Umbral radius used at evaluation time.
    pub eval_radius: f64,
    pub loss: LossKind,
    pub energy: EnergyKind,
    pub gamma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `None` picks SGD for half-space families and Adam for ball families.
    pub optimizer: Option<OptimizerKind>,
    pub lr: f64,
    pub epochs: usize,
    pub burnin_epochs: usize,
    pub burnin_multiplier: f64,
    pub batch_size: usize,
    pub neg_ratio: usize,
    pub init_eps: f64,
    pub seed: u64,
    /// Validation F1 is computed every this many epochs (and after the last).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            family: ConeFamily::UmbralInfinity,
            dim: 5,
            k: 1.0,
            r: 0.05,
            height: 20.0,
            gamma3: DEFAULT_GAMMA3,
            eval_radius: 0.1,
            loss: LossKind::Shadow,
            energy: EnergyKind::Distance,
            gamma: 0.01,
            gamma1: 0.01,
            gamma2: 0.0,
            optimizer: None,
            lr: 0.01,
            epochs: 400,
            burnin_epochs: 20,
            burnin_multiplier: 0.01,
            batch_size: 16,
            neg_ratio: 10,
            init_eps: 1e-3,
            seed: 0,
            eval_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn optimizer_kind(&self) -> OptimizerKind {
        self.optimizer.unwrap_or_else(|| OptimizerKind::default_for(self.family.model()))
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig { kind: self.loss, gamma: self.gamma, gamma1: self.gamma1, gamma2: self.gamma2, energy: self.energy }
    }

    fn spec_with_radius(&self, r: f64) -> ConeSpec {
        let spec = ConeSpec::new(self.family, self.k, r).with_gamma3(self.gamma3);
        match self.family {
            ConeFamily::PenumbralHorosphere => spec.with_source_height(self.height),
            _ => spec,
        }
    }

    pub fn train_spec(&self) -> ConeSpec {
        self.spec_with_radius(self.r)
    }

    /// Training spec with the umbral radius replaced by `eval_radius`.
    pub fn eval_spec(&self) -> ConeSpec {
        if self.family.is_umbral() {
            self.spec_with_radius(self.eval_radius)
        } else {
            self.train_spec()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.dim < 2 {
            return bad(format!("dim must be >= 2, got {}", self.dim));
        }
        if self.epochs < self.burnin_epochs {
            return bad(format!("epochs ({}) < burn-in epochs ({})", self.epochs, self.burnin_epochs));
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1".into());
        }
        if !self.neg_ratio.is_multiple_of(2) {
            return bad(format!("negative ratio must be even, got {}", self.neg_ratio));
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1".into());
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return bad(format!("height must be > 0, got {}", self.height));
        }
        if self.family.is_umbral() && !(self.eval_radius >= self.r) {
            return bad(format!("eval radius {} is below the training radius {}", self.eval_radius, self.r));
        }
        if self.energy == EnergyKind::Angle && self.family == ConeFamily::UmbralOrigin {
            return bad("angle energy is not defined for umbral-origin".into());
        }
        self.train_spec().validate()?;
        self.eval_spec().validate()?;
        self.loss_config().validate()?;
        OptimizerState::new(self.optimizer_kind(), self.lr, self.burnin_multiplier)?;
        if !(self.init_eps > 0.0) {
            return bad(format!("init spread must be > 0, got {}", self.init_eps));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        m.set("cone", self.family.name())
            .set("dim", self.dim)
            .set("k", self.k)
            .set("r", self.r)
            .set("height", self.height)
            .set("gamma3", self.gamma3)
            .set("eval_radius", self.eval_radius)
            .set("loss", self.loss.name())
            .set("energy", self.energy.name())
            .set("gamma", self.gamma)
            .set("gamma1", self.gamma1)
            .set("gamma2", self.gamma2)
            .set("optimizer", self.optimizer_kind().name())
            .set("lr", self.lr)
            .set("epochs", self.epochs)
            .set("burnin", self.burnin_epochs)
            .set("burnin_multiplier", self.burnin_multiplier)
            .set("batch_size", self.batch_size)
            .set("neg_ratio", self.neg_ratio)
            .set("init_eps", self.init_eps)
            .set("seed", self.seed)
            .set("eval_every", self.eval_every);
        m
    }

    /// Short hash of the resolved configuration.
    pub fn hash(&self) -> String {
        self.to_kv().short_digest()
    }
}

/// Data a run consumes.
#[derive(Debug, Clone, Default)]
pub struct TrainData {
    pub n_nodes: usize,
    pub train: Vec<Pair>,
    pub valid: Vec<Pair>,
    pub valid_neg: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_f1: Option<f64>,
    pub wallclock: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History(pub Vec<EpochRecord>);

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,val_f1,wallclock\n");
        for r in &self.0 {
            let f1 = r.val_f1.map(|f| f.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{:.3}", r.epoch, r.loss, f1, r.wallclock);
        }
        s
    }

    pub fn losses(&self) -> Vec<f64> {
        self.0.iter().map(|r| r.loss).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub table: EmbeddingTable,
    pub history: History,
}

/// Best-threshold F1 of `pos` against `neg` under the evaluation spec.
pub fn validation_f1(config: &TrainConfig, table: &EmbeddingTable, pos: &[Pair], neg: &[Pair]) -> Result<f64, TrainError> {
    let spec = config.eval_spec();
    let mut snapshot = table.clone();
    snapshot.project(&spec);
    let pe = pair_energies(config.energy, &spec, &snapshot, pos)?;
    let ne = pair_energies(config.energy, &spec, &snapshot, neg)?;
    let tau = select_threshold(&pe, &ne);
    Ok(Counts::from_energies(&pe, &ne, tau).f1())
}

pub fn train(data: &TrainData, config: &TrainConfig) -> Result<TrainOutput, TrainError> {
    train_with(data, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(data: &TrainData, config: &TrainConfig, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainOutput, TrainError> {
    config.validate()?;
    if let Some(&(u, v)) = data.train.iter().chain(&data.valid).chain(&data.valid_neg).find(|&&(u, v)| u >= data.n_nodes || v >= data.n_nodes) {
        return Err(ObjectiveError::UnknownNode(u.max(v)).into());
    }
    let spec = config.train_spec();
    let loss_cfg = config.loss_config();
    let mut table = init_embeddings(data.n_nodes, config.dim, &spec, config.init_eps, config.seed)?;
    let mut opt = OptimizerState::new(config.optimizer_kind(), config.lr, config.burnin_multiplier)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let positives: HashSet<Pair> = data.train.iter().copied().collect();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut history = History::default();
    let start = Instant::now();
    for epoch in 0..config.epochs {
        let last_good = table.clone();
        let burnin = epoch < config.burnin_epochs;
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let pos: Vec<Pair> = chunk.iter().map(|&i| data.train[i]).collect();
            let neg = sample_negatives(&pos, data.n_nodes, &positives, config.neg_ratio, &mut rng)?;
            let batch = PairBatch::new(pos, neg);
            let (loss, grads) = loss_and_grad(&batch, &loss_cfg, &spec, &table)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch, last_good: Box::new(last_good) });
            }
            total += loss;
            opt.step(&spec, &mut table, &grads, burnin)?;
        }
        if !total.is_finite() || table.as_slice().iter().any(|c| !c.is_finite()) {
            return Err(TrainError::Diverged { epoch, last_good: Box::new(last_good) });
        }
        let done = epoch + 1;
        let val_f1 = if !data.valid.is_empty() && (done % config.eval_every == 0 || done == config.epochs) {
            Some(validation_f1(config, &table, &data.valid, &data.valid_neg)?)
        } else {
            None
        };
        let rec = EpochRecord { epoch: done, loss: total, val_f1, wallclock: start.elapsed().as_secs_f64() };
        match val_f1 {
            Some(f) => info!("epoch {done}: loss {total:.4} val_f1 {f:.4}"),
            None => debug!("epoch {done}: loss {total:.4}"),
        }
        on_epoch(&rec);
        history.0.push(rec);
    }
    if opt.skipped > 0 {
        log::warn!("{} non-finite node gradients were skipped", opt.skipped);
    }
    Ok(TrainOutput { table, history })
}

const MAGIC: &[u8; 8] = b"SHADCONE";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Embeddings plus everything needed to evaluate them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ConeSpec,
    pub eval_radius: f64,
    pub energy: EnergyKind,
    pub config_hash: String,
    pub labels: Vec<String>,
    pub table: EmbeddingTable,
}

impl Checkpoint {
    pub fn from_run(config: &TrainConfig, labels: Vec<String>, table: EmbeddingTable) -> Self {
        Self {
            spec: config.train_spec(),
            eval_radius: config.eval_radius,
            energy: config.energy,
            config_hash: config.hash(),
            labels,
            table,
        }
    }

    /// Spec used for evaluation: umbral radius replaced by `eval_radius`.
    pub fn eval_spec(&self) -> ConeSpec {
        if self.spec.family.is_umbral() {
            self.spec.clone().with_radius(self.eval_radius)
        } else {
            self.spec.clone()
        }
    }

    fn metadata(&self) -> KvMap {
        let mut m = KvMap::new();
        m.set("model", self.table.model().name())
            .set("family", self.spec.family.name())
            .set("k", format!("{:?}", self.spec.k))
            .set("dim", self.table.dim())
            .set("nodes", self.table.len())
            .set("r", format!("{:?}", self.spec.r))
            .set("h", format!("{:?}", self.spec.h))
            .set("gamma3", format!("{:?}", self.spec.gamma3))
            .set("eval_radius", format!("{:?}", self.eval_radius))
            .set("energy", self.energy.name())
            .set("config_hash", &self.config_hash);
        m
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TrainError> {
        if self.labels.len() != self.table.len() {
            return Err(TrainError::Format(format!("{} labels for {} rows", self.labels.len(), self.table.len())));
        }
        let meta = self.metadata().render();
        w.write_all(MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(meta.as_bytes())?;
        for c in self.table.as_slice() {
            w.write_all(&c.to_le_bytes())?;
        }
        for l in &self.labels {
            w.write_all(&(l.len() as u32).to_le_bytes())?;
            w.write_all(l.as_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, TrainError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TrainError::Format("not a shadow-cone checkpoint".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(TrainError::Format(format!("unsupported version {version}")));
        }
        let len = read_u32(&mut r)? as usize;
        let mut meta = vec![0u8; len];
        r.read_exact(&mut meta)?;
        let meta = KvMap::parse(&String::from_utf8(meta).map_err(|_| TrainError::Format("metadata is not UTF-8".into()))?)?;
        let family = ConeFamily::parse(meta.require("family")?)
            .ok_or_else(|| TrainError::Format(format!("unknown family {:?}", meta.get("family"))))?;
        let model = Model::parse(meta.require("model")?).ok_or_else(|| TrainError::Format("unknown model".into()))?;
        if model != family.model() {
            return Err(TrainError::Format(format!("family {family} does not live in the {} model", model.name())));
        }
        let energy = EnergyKind::parse(meta.require("energy")?).ok_or_else(|| TrainError::Format("unknown energy".into()))?;
        let k: f64 = meta.parse_value("k")?;
        let dim: usize = meta.parse_value("dim")?;
        let n: usize = meta.parse_value("nodes")?;
        let spec = ConeSpec {
            family,
            k,
            r: meta.parse_value("r")?,
            h: meta.parse_value("h")?,
            gamma3: meta.parse_value("gamma3")?,
            source: None,
        };
        let mut coords = vec![0.0; n * dim];
        let mut buf = [0u8; 8];
        for c in &mut coords {
            r.read_exact(&mut buf)?;
            *c = f64::from_le_bytes(buf);
        }
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let l = read_u32(&mut r)? as usize;
            let mut s = vec![0u8; l];
            r.read_exact(&mut s)?;
            labels.push(String::from_utf8(s).map_err(|_| TrainError::Format("label is not UTF-8".into()))?);
        }
        let table = EmbeddingTable::new(Geometry::new(model, k)?, dim, coords)?;
        Ok(Self {
            spec,
            eval_radius: meta.parse_value("eval_radius")?,
            energy,
            config_hash: meta.require("config_hash")?.to_string(),
            labels,
            table,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    /// Loads and checks the embedding dimension.
    pub fn load_expecting(path: &Path, dim: usize) -> Result<Self, TrainError> {
        let ck = Self::load(path)?;
        if ck.table.dim() != dim {
            return Err(TrainError::Format(format!("checkpoint has dim {}, expected {dim}", ck.table.dim())));
        }
        Ok(ck)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, TrainError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epochs_returns_init() {
        let cfg = TrainConfig { epochs: 0, burnin_epochs: 0, dim: 3, ..TrainConfig::default() };
        let data = TrainData { n_nodes: 4, train: vec![(0, 1)], ..TrainData::default() };
        let out = train(&data, &cfg).unwrap();
        let init = init_embeddings(4, 3, &cfg.train_spec(), cfg.init_eps, cfg.seed).unwrap();
        assert_eq!(out.table, init);
        assert!(out.history.0.is_empty());
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig { epochs: 5, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { neg_ratio: 3, ..TrainConfig::default() },
            TrainConfig { eval_radius: 0.01, ..TrainConfig::default() },
            TrainConfig { dim: 1, ..TrainConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let cfg = TrainConfig { family: ConeFamily::PenumbralHorosphere, dim: 3, ..TrainConfig::default() };
        let table = init_embeddings(3, 3, &cfg.train_spec(), 1e-3, 9).unwrap();
        let ck = Checkpoint::from_run(&cfg, vec!["a".into(), "b".into(), "c c".into()], table);
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        let back = Checkpoint::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, ck);
        bytes[0] = b'X';
        assert!(Checkpoint::read_from(bytes.as_slice()).is_err());
    }

    #[test]
    fn history_csv() {
        let h = History(vec![EpochRecord { epoch: 1, loss: 2.5, val_f1: None, wallclock: 0.0 }]);
        assert_eq!(h.to_csv(), "epoch,loss,val_f1,wallclock\n1,2.5,,0.000\n");
    }
}
