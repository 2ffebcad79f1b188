//! Shared samplers and brute-force oracles for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use std::collections::BTreeSet;

use shadowcone::cones::{ConeFamily, ConeSpec};
use shadowcone::graph::Dag;
use shadowcone::objective::Pair;
use shadowcone::manifold::{Geometry, Model};
use shadowcone::objective::{loss, EnergyKind, GradMap, LossConfig, PairBatch};
use shadowcone::optim::EmbeddingTable;

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Uniform random unit vector.
pub fn unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = norm(&v);
        if m > 1e-3 && m <= 1.0 {
            return v.into_iter().map(|c| c / m).collect();
        }
    }
}

/// Point at hyperbolic distance `d` from `x` in Euclidean direction `dir`.
pub fn walk(geom: &Geometry, x: &[f64], dir: &[f64], d: f64) -> Vec<f64> {
    let lambda = geom.conformal_factor(x);
    let m = norm(dir);
    let v: Vec<f64> = dir.iter().map(|c| c * d / (lambda * m)).collect();
    let mut y = geom.exp(x, &v);
    geom.clamp(&mut y);
    y
}

/// Random point in the model: half-space heights in `e^[-2, 2]`, ball
/// points at distance `[lo, hi]` from the origin.
pub fn random_point<R: Rng>(rng: &mut R, geom: &Geometry, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match geom.model {
        Model::HalfSpace => {
            let mut x: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            x.push(rng.gen_range(-2.0f64..2.0).exp() / geom.sqrt_k());
            x
        }
        Model::Ball => {
            let d = rng.gen_range(lo..hi);
            walk(geom, &vec![0.0; n], &unit(rng, n), d)
        }
    }
}

/// Apex satisfying the family's constraints.
pub fn random_apex<R: Rng>(rng: &mut R, spec: &ConeSpec, n: usize) -> Vec<f64> {
    let geom = spec.geometry();
    loop {
        let u = random_point(rng, &geom, n, spec.r + 0.05, 3.5);
        if spec.check_apex(&u).is_ok() {
            return u;
        }
    }
}

/// Random query point within hyperbolic distance `max_d` of `u`.
pub fn random_near<R: Rng>(rng: &mut R, spec: &ConeSpec, u: &[f64], max_d: f64) -> Vec<f64> {
    let geom = spec.geometry();
    let d = rng.gen_range(0.05..max_d);
    walk(&geom, u, &unit(rng, u.len()), d)
}

/// Euclidean unit direction of the central axis at `u`.
pub fn axis(spec: &ConeSpec, u: &[f64]) -> Vec<f64> {
    match spec.family.model() {
        Model::HalfSpace => {
            let mut a = vec![0.0; u.len()];
            a[u.len() - 1] = -1.0;
            a
        }
        Model::Ball => {
            let m = norm(u);
            u.iter().map(|c| c / m).collect()
        }
    }
}

/// Random point biased towards the cone of `u` (directions within about
/// twice the aperture of the axis).
pub fn random_towards_cone<R: Rng>(rng: &mut R, spec: &ConeSpec, u: &[f64], max_d: f64) -> Vec<f64> {
    let a = axis(spec, u);
    let wobble = rng.gen_range(0.0..1.5);
    let noise = unit(rng, u.len());
    let dir: Vec<f64> = a.iter().zip(&noise).map(|(x, y)| x + wobble * y).collect();
    let d = rng.gen_range(0.02..max_d);
    walk(&spec.geometry(), u, &dir, d)
}

// ---------------------------------------------------------------------------
// Brute-force cone boundaries in two dimensions.

/// A boundary curve `s ↦ point` with `s ∈ [0, len]` starting at the apex.
pub struct Curve<'a> {
    pub at: Box<dyn Fn(f64) -> [f64; 2] + 'a>,
    pub len: f64,
}

fn rot(v: [f64; 2], a: f64) -> [f64; 2] {
    let (s, c) = a.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// The two boundary curves of the 2D cone at `u`, each long enough to
/// contain the nearest boundary point of anything within `reach` of `u`.
/// Built from Euclidean constructions: rays for the umbral half-plane cone,
/// geodesic semicircles tangent to the horosphere, hypercycle arcs around
/// tangent light paths, and geodesics tangent to the source disk (found by
/// bisection on the distance to the origin).
pub fn boundary_curves<'a>(spec: &'a ConeSpec, u: [f64; 2], reach: f64) -> Vec<Curve<'a>> {
    let k = spec.k;
    let sk = k.sqrt();
    let geom = spec.geometry();
    let len = 2.0 * reach + 1.0;
    match spec.family {
        ConeFamily::UmbralInfinity => {
            let sh = (sk * spec.r).sinh();
            let ch = (sk * spec.r).cosh();
            [-1.0, 1.0]
                .into_iter()
                .map(|side| Curve {
                    at: Box::new(move |s: f64| {
                        let y = u[1] * (-s * sk / ch).exp();
                        [u[0] + side * (u[1] - y) * sh, y]
                    }),
                    len,
                })
                .collect()
        }
        ConeFamily::PenumbralHorosphere => {
            let big = spec.source_height();
            let off = (big * big - u[1] * u[1]).sqrt();
            [-1.0, 1.0]
                .into_iter()
                .map(|side| {
                    // semicircle of radius `big` centred at c, x = c + R tanh τ,
                    // y = R / cosh τ; unit-speed in τ / √k
                    let c = u[0] - side * off;
                    let tau_u = ((u[0] - c) / big).atanh();
                    Curve {
                        at: Box::new(move |s: f64| {
                            let tau = tau_u + side * s * sk;
                            [c + big * tau.tanh(), big / tau.cosh()]
                        }),
                        len,
                    }
                })
                .collect()
        }
        ConeFamily::UmbralOrigin => {
            let m = norm(&u);
            let du = geom.dist_to_origin(&u);
            let sin_beta = ((sk * spec.r).sinh() / (sk * du).sinh()).min(1.0);
            let beta = sin_beta.asin();
            let tau_u = ((sk * du).cosh() / (sk * spec.r).cosh()).acosh() / sk;
            let radial = [u[0] / m, u[1] / m];
            [-1.0, 1.0]
                .into_iter()
                .map(|side| {
                    let e = rot(radial, side * beta);
                    // normal to the light path pointing towards u
                    let nrm = rot(e, -side * std::f64::consts::FRAC_PI_2);
                    Curve {
                        at: Box::new(move |s: f64| {
                            let tau = tau_u + s;
                            let rr = (0.5 * sk * tau).tanh() / sk;
                            let p = [rr * e[0], rr * e[1]];
                            let lam = geom.conformal_factor(&p);
                            let v = [nrm[0] * spec.r / lam, nrm[1] * spec.r / lam];
                            let q = geom.exp(&p, &v);
                            [q[0], q[1]]
                        }),
                        len,
                    }
                })
                .collect()
        }
        ConeFamily::PenumbralBall => {
            let psi = tangent_angle_by_bisection(&geom, u, spec.r);
            let m = norm(&u);
            let radial = [u[0] / m, u[1] / m];
            [-1.0, 1.0]
                .into_iter()
                .map(|side| {
                    let w = rot(radial, side * psi);
                    let lam = geom.conformal_factor(&u);
                    Curve {
                        at: Box::new(move |s: f64| {
                            let q = geom.exp(&u, &[w[0] * s / lam, w[1] * s / lam]);
                            [q[0], q[1]]
                        }),
                        len,
                    }
                })
                .collect()
        }
    }
}

/// Angle between the outward radial direction at `u` and the geodesic
/// through `u` that touches the disk of radius `r` around the origin.
fn tangent_angle_by_bisection(geom: &Geometry, u: [f64; 2], r: f64) -> f64 {
    let m = norm(&u);
    let radial = [u[0] / m, u[1] / m];
    let du = geom.dist_to_origin(&u);
    let lam = geom.conformal_factor(&u);
    // smallest distance from O along the full geodesic leaving u at `psi`
    let closest = |psi: f64| {
        let w = rot(radial, std::f64::consts::PI - psi);
        let f = |s: f64| geom.dist_to_origin(&geom.exp(&u, &[w[0] * s / lam, w[1] * s / lam]));
        golden_min(&f, 0.0, 2.0 * du + 1.0, 400).1
    };
    let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if closest(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizes a unimodal-ish function: coarse grid then golden section.
pub fn golden_min(f: &dyn Fn(f64) -> f64, a: f64, b: f64, grid: usize) -> (f64, f64) {
    let step = (b - a) / grid as f64;
    let mut best = (a, f(a));
    for i in 1..=grid {
        let s = a + step * i as f64;
        let v = f(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    let (mut lo, mut hi) = ((best.0 - step).max(a), (best.0 + step).min(b));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) < f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let s = 0.5 * (lo + hi);
    let v = f(s);
    if v < best.1 {
        (s, v)
    } else {
        best
    }
}

/// Brute-force unsigned distance from `v` to the cone boundary of `u`.
pub fn oracle_boundary_distance(spec: &ConeSpec, u: [f64; 2], v: [f64; 2]) -> f64 {
    let geom = spec.geometry();
    let reach = geom.dist(&u, &v);
    boundary_curves(spec, u, reach)
        .iter()
        .map(|c| golden_min(&|s| geom.dist(&(c.at)(s), &v), 0.0, c.len, 4000).1)
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// Finite differences.

/// Central finite-difference gradient of the batch loss.
pub fn fd_grad(batch: &PairBatch, cfg: &LossConfig, spec: &ConeSpec, table: &EmbeddingTable, h: f64) -> GradMap {
    let mut nodes: Vec<usize> = batch
        .positives
        .iter()
        .chain(batch.negatives.iter().flatten())
        .flat_map(|&(u, v)| [u, v])
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut out = GradMap::new();
    for node in nodes {
        let mut g = vec![0.0; table.dim()];
        for (i, gi) in g.iter_mut().enumerate() {
            let mut plus = table.clone();
            plus.row_mut(node)[i] += h;
            let mut minus = table.clone();
            minus.row_mut(node)[i] -= h;
            let lp = loss(batch, cfg, spec, &plus).unwrap();
            let lm = loss(batch, cfg, spec, &minus).unwrap();
            *gi = (lp - lm) / (2.0 * h);
        }
        out.insert(node, g);
    }
    out
}

/// `‖a - b‖ / max(‖a‖, ‖b‖, floor)` over the union of keys.
pub fn grad_rel_error(a: &GradMap, b: &GradMap, floor: f64) -> f64 {
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    let keys: std::collections::BTreeSet<usize> = a.keys().chain(b.keys()).copied().collect();
    for k in keys {
        let dim = a.get(&k).or(b.get(&k)).map(|v| v.len()).unwrap_or(0);
        let zero = vec![0.0; dim];
        let x = a.get(&k).unwrap_or(&zero);
        let y = b.get(&k).unwrap_or(&zero);
        for (p, q) in x.iter().zip(y) {
            diff += (p - q) * (p - q);
            na += p * p;
            nb += q * q;
        }
    }
    diff.sqrt() / na.sqrt().max(nb.sqrt()).max(floor)
}

// ---------------------------------------------------------------------------
// Gradient-check cases.

pub fn gradient_spec<R: Rng>(family: ConeFamily, rng: &mut R) -> ConeSpec {
    let k = rng.gen_range(0.5..2.0);
    match family {
        ConeFamily::PenumbralHorosphere => ConeSpec::penumbral_horosphere(k, 0.0).with_source_height(rng.gen_range(5.0..20.0)),
        f => ConeSpec::new(f, k, rng.gen_range(0.05..0.4)),
    }
}

/// Random table of `n` nodes plus a batch whose pairs stay clear of kinks.
pub fn gradient_case<R: Rng>(rng: &mut R, spec: &ConeSpec, cfg: &LossConfig, dim: usize) -> Option<(EmbeddingTable, PairBatch, usize, usize)> {
    let n = 6;
    let mut coords = Vec::new();
    let apex = random_apex(rng, spec, dim);
    for i in 0..n {
        let p = if i == 0 { apex.clone() } else if i % 2 == 0 { random_towards_cone(rng, spec, &apex, 2.5) } else { random_apex(rng, spec, dim) };
        if spec.check_apex(&p).is_err() {
            return None;
        }
        coords.extend(p);
    }
    let table = EmbeddingTable::new(spec.geometry(), dim, coords).ok()?;
    let batch = PairBatch::new(vec![(0, 2), (1, 4)], vec![vec![(0, 3), (0, 5)], vec![(1, 3), (5, 4)]]);
    let (mut apex_pairs, mut boundary_pairs) = (0, 0);
    for &(u, v) in batch.positives.iter().chain(batch.negatives.iter().flatten()) {
        let q = spec.query(table.row(u), table.row(v)).ok()?;
        if q.altitude.abs() < 1e-5 || q.t.abs() < 1e-6 {
            return None;
        }
        if q.altitude > 0.0 {
            apex_pairs += 1;
        } else {
            boundary_pairs += 1;
        }
        let e = match cfg.energy {
            EnergyKind::Distance => q.signed_dist,
            EnergyKind::Angle => {
                let a = spec.angle_energy(table.row(u), table.row(v)).ok()?;
                if a == 0.0 && spec.axis_angle(table.row(u), table.row(v)).ok()? > spec.half_aperture(table.row(u)).ok()? - 1e-5 {
                    return None;
                }
                a
            }
        };
        for edge in [cfg.gamma, cfg.gamma1, cfg.gamma2] {
            if (e - edge).abs() < 1e-5 {
                return None;
            }
        }
    }
    Some((table, batch, apex_pairs, boundary_pairs))
}

// ---------------------------------------------------------------------------
// Graph oracles.

/// Random DAG: edges only go from lower to higher id of a shuffled order.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> Dag {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                edges.push((perm[i], perm[j]));
            }
        }
    }
    Dag::from_edges(n, edges).unwrap()
}

/// Warshall on a dense boolean matrix.
pub fn closure_oracle(n: usize, edges: &BTreeSet<Pair>) -> BTreeSet<Pair> {
    let mut m = vec![vec![false; n]; n];
    for &(u, v) in edges {
        m[u][v] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| m[i][j]).collect()
}

/// An edge is kept iff dropping it from the closure changes the closure.
pub fn reduction_oracle(n: usize, edges: &BTreeSet<Pair>) -> BTreeSet<Pair> {
    let full = closure_oracle(n, edges);
    full.iter()
        .copied()
        .filter(|e| {
            let mut without = full.clone();
            without.remove(e);
            closure_oracle(n, &without) != full
        })
        .collect()
}
