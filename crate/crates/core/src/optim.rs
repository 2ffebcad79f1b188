//! Riemannian SGD and Adam over an [`EmbeddingTable`].
//!
//! Euclidean gradients are rescaled by the inverse metric, the update is an
//! exact exponential-map step, and every touched point is projected back onto
//! the feasible set of its cone family.

use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cones::ConeSpec;
use crate::manifold::{Geometry, GeometryError, Model, Point};

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("node {0} is out of range")]
    UnknownNode(usize),
    #[error("gradient for node {node} has length {got}, expected {expected}")]
    GradientDim { node: usize, got: usize, expected: usize },
    #[error("invalid optimizer setting: {0}")]
    Invalid(String),
}

/// Node-indexed points stored as one flat coordinate buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    geometry: Geometry,
    dim: usize,
    coords: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(geometry: Geometry, dim: usize, coords: Vec<f64>) -> Result<Self, GeometryError> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(GeometryError::DimensionMismatch(dim, coords.len()));
        }
        if let Some(bad) = coords.chunks(dim).position(|x| !geometry.contains(x)) {
            log::debug!("row {bad} outside the {} domain", geometry.model.name());
            return Err(GeometryError::OutsideDomain(geometry.model));
        }
        Ok(Self { geometry, dim, coords })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn model(&self) -> Model {
        self.geometry.model
    }

    pub fn k(&self) -> f64 {
        self.geometry.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, i: usize) -> Option<&[f64]> {
        (i < self.len()).then(|| self.row(i))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> Point {
        Point::new(self.model(), self.row(i).to_vec(), self.k()).expect("table rows stay in the domain")
    }

    /// Projects every row onto the feasible set of `spec`.
    pub fn project(&mut self, spec: &ConeSpec) {
        for x in self.coords.chunks_mut(self.dim) {
            spec.project(x);
        }
    }
}

/// Uniform `[-eps, eps]` noise around the model origin, projected out of the
/// hole (ball families) or below the horosphere.
pub fn init_embeddings(n_nodes: usize, dim: usize, spec: &ConeSpec, eps: f64, seed: u64) -> Result<EmbeddingTable, OptimError> {
    if dim < 2 {
        return Err(OptimError::Invalid(format!("dimension must be >= 2, got {dim}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(OptimError::Invalid(format!("init spread must be > 0, got {eps}")));
    }
    let geometry = spec.geometry();
    let origin = geometry.origin(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(n_nodes * dim);
    for _ in 0..n_nodes {
        let start = coords.len();
        coords.extend(origin.iter().map(|o| o + rng.gen_range(-eps..=eps)));
        spec.project(&mut coords[start..]);
    }
    Ok(EmbeddingTable::new(geometry, dim, coords)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Rsgd,
    Radam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Rsgd => "rsgd",
            OptimizerKind::Radam => "radam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rsgd" => Some(OptimizerKind::Rsgd),
            "radam" => Some(OptimizerKind::Radam),
            _ => None,
        }
    }

    /// SGD for the half-space families, Adam for the ball families.
    pub fn default_for(model: Model) -> Self {
        match model {
            Model::HalfSpace => OptimizerKind::Rsgd,
            Model::Ball => OptimizerKind::Radam,
        }
    }
}

/// Optimizer hyperparameters plus lazily grown per-node Adam moments.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub burnin_multiplier: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: Vec<u32>,
    /// Non-finite gradients skipped so far.
    pub skipped: usize,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64, burnin_multiplier: f64) -> Result<Self, OptimError> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(OptimError::Invalid(format!("learning rate must be > 0, got {lr}")));
        }
        if !(burnin_multiplier > 0.0 && burnin_multiplier.is_finite()) {
            return Err(OptimError::Invalid(format!("burn-in multiplier must be > 0, got {burnin_multiplier}")));
        }
        Ok(Self {
            kind,
            lr,
            burnin_multiplier,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: Vec::new(),
            second: Vec::new(),
            steps: Vec::new(),
            skipped: 0,
        })
    }

    /// Applies one update for every node in `grads`. During burn-in the
    /// learning rate is multiplied by `burnin_multiplier`.
    pub fn step(
        &mut self,
        spec: &ConeSpec,
        table: &mut EmbeddingTable,
        grads: &BTreeMap<usize, Vec<f64>>,
        burnin: bool,
    ) -> Result<(), OptimError> {
        let lr = if burnin { self.lr * self.burnin_multiplier } else { self.lr };
        let dim = table.dim();
        let geom = table.geometry();
        if self.kind == OptimizerKind::Radam && self.steps.len() < table.len() {
            self.first.resize(table.len() * dim, 0.0);
            self.second.resize(table.len(), 0.0);
            self.steps.resize(table.len(), 0);
        }
        let mut dir = vec![0.0; dim];
        for (&node, g) in grads {
            if node >= table.len() {
                return Err(OptimError::UnknownNode(node));
            }
            if g.len() != dim {
                return Err(OptimError::GradientDim { node, got: g.len(), expected: dim });
            }
            if g.iter().any(|c| !c.is_finite()) {
                self.skipped += 1;
                warn!("skipping non-finite gradient for node {node}");
                continue;
            }
            let x = table.row(node);
            let lambda = geom.inverse_metric_factor(x);
            match self.kind {
                OptimizerKind::Rsgd => {
                    for (d, gi) in dir.iter_mut().zip(g) {
                        *d = -lr * lambda * gi;
                    }
                }
                OptimizerKind::Radam => {
                    let m = &mut self.first[node * dim..(node + 1) * dim];
                    // Riemannian squared norm of the Riemannian gradient,
                    // i.e. the squared Euclidean gradient norm scaled by λ.
                    let sq: f64 = lambda * g.iter().map(|c| c * c).sum::<f64>();
                    for (mi, gi) in m.iter_mut().zip(g) {
                        *mi = self.beta1 * *mi + (1.0 - self.beta1) * lambda * gi;
                    }
                    let v = &mut self.second[node];
                    *v = self.beta2 * *v + (1.0 - self.beta2) * sq;
                    self.steps[node] += 1;
                    let t = self.steps[node] as i32;
                    let bc1 = 1.0 - self.beta1.powi(t);
                    let bc2 = 1.0 - self.beta2.powi(t);
                    let denom = (*v / bc2).sqrt() + self.eps;
                    for (d, mi) in dir.iter_mut().zip(m.iter()) {
                        *d = -lr * (mi / bc1) / denom;
                    }
                }
            }
            if dir.iter().all(|&d| d == 0.0) {
                continue;
            }
            let mut next = geom.exp(x, &dir);
            if next.iter().any(|c| !c.is_finite()) {
                next = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
            }
            spec.project(&mut next);
            table.row_mut(node).copy_from_slice(&next);
        }
        Ok(())
    }
}
