//! Shadow-cone embeddings of partial orders in hyperbolic space.
//!
//! Each node of a DAG is embedded as a point; `u ⪯ v` is encoded by `v`
//! lying in the shadow cone cast by `u` from a light source. Four axially
//! symmetric cone families are supported (see [`cones::ConeFamily`]).
//!
//! Layout:
//! - [`manifold`]: distances, exp/log maps and isometries of the Poincaré
//!   ball and half-space.
//! - [`cones`]: cone membership, temperature, altitude and signed distance.
//! - [`objective`]: energies, the three losses and their gradients.
//! - [`optim`]: Riemannian SGD / Adam with feasibility projection.
//! - [`graph`]: DAG preprocessing, splits and negative sampling.
//! - [`trainer`]: the training loop and binary checkpoints.
//! - [`eval`]: threshold selection and F1 reports.

pub mod cones;
pub mod eval;
pub mod graph;
pub mod kv;
pub mod manifold;
pub mod objective;
pub mod optim;
pub mod trainer;

pub use cones::{ConeFamily, ConeQuery, ConeSpec};
pub use manifold::{Geometry, Model, Point, TangentVector};
