//! Hyperbolic geometry on the Poincaré ball and the Poincaré upper half-space.
//!
//! Both models are conformal, so tangent vectors are stored in plain Euclidean
//! coordinates and the metric is a scalar multiple of the Euclidean one:
//!
//! ```text
//! ball:        g_x = (2 / (1 - k|x|^2))^2 g_e,   |x| < 1/sqrt(k)
//! half-space:  g_x = g_e / (k x_n^2),             x_n > 0
//! ```
//!
//! The hot paths (training, cone queries) work on raw `&[f64]` slices through
//! [`Geometry`]. [`Point`] and [`TangentVector`] are the validated public
//! surface used by the free functions at the bottom of this module.

use thiserror::Error;

/// Points of the ball are kept within this relative margin of the boundary.
pub const BALL_MARGIN: f64 = 1e-5;
/// Smallest admissible last coordinate in the half-space.
pub const MIN_HEIGHT: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("model mismatch: {0:?} vs {1:?}")]
    ModelMismatch(Model, Model),
    #[error("curvature mismatch: k = {0} vs k = {1}")]
    CurvatureMismatch(f64, f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("curvature parameter must be positive and finite, got {0}")]
    InvalidCurvature(f64),
    #[error("coordinates lie outside the {0:?} model")]
    OutsideDomain(Model),
    #[error("point must have at least one coordinate")]
    Empty,
    #[error("operation requires the {0:?} model")]
    WrongModel(Model),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Ball,
    HalfSpace,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Ball => "ball",
            Model::HalfSpace => "halfspace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ball" => Some(Model::Ball),
            "halfspace" | "half-space" => Some(Model::HalfSpace),
            _ => None,
        }
    }
}

/// A model of hyperbolic space with curvature `-k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub model: Model,
    pub k: f64,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `s / sinh(s)`, equal to 1 at the origin.
#[inline]
fn s_over_sinh(s: f64) -> f64 {
    if s.abs() < 1e-8 {
        1.0 - s * s / 6.0
    } else {
        s / s.sinh()
    }
}

impl Geometry {
    pub fn new(model: Model, k: f64) -> Result<Self, GeometryError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(GeometryError::InvalidCurvature(k));
        }
        Ok(Self { model, k })
    }

    pub fn ball(k: f64) -> Result<Self, GeometryError> {
        Self::new(Model::Ball, k)
    }

    pub fn half_space(k: f64) -> Result<Self, GeometryError> {
        Self::new(Model::HalfSpace, k)
    }

    #[inline]
    pub fn sqrt_k(&self) -> f64 {
        self.k.sqrt()
    }

    /// The model's origin: `0` in the ball, `(0, …, 0, 1/√k)` in the half-space.
    pub fn origin(&self, dim: usize) -> Vec<f64> {
        let mut o = vec![0.0; dim];
        if self.model == Model::HalfSpace {
            o[dim - 1] = 1.0 / self.sqrt_k();
        }
        o
    }

    /// Largest admissible Euclidean norm in the ball.
    #[inline]
    pub fn max_ball_norm(&self) -> f64 {
        (1.0 - BALL_MARGIN) / self.sqrt_k()
    }

    /// Strict membership in the open model (no margin applied).
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.is_empty() || x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self.model {
            Model::Ball => self.k * norm_sq(x) < 1.0,
            Model::HalfSpace => x[x.len() - 1] > 0.0,
        }
    }

    /// Pulls `x` back inside the numerically safe region of the model.
    pub fn clamp(&self, x: &mut [f64]) {
        match self.model {
            Model::Ball => {
                let n = norm_sq(x).sqrt();
                let max = self.max_ball_norm();
                if n > max {
                    let s = max / n;
                    x.iter_mut().for_each(|c| *c *= s);
                }
            }
            Model::HalfSpace => {
                let last = x.len() - 1;
                if !(x[last] >= MIN_HEIGHT) {
                    x[last] = MIN_HEIGHT;
                }
            }
        }
    }

    /// `cosh(√k d) - 1` between two points, the quantity both distance
    /// formulas feed into arcosh.
    #[inline]
    fn cosh_minus_one(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.model {
            Model::Ball => {
                let alpha = 1.0 - self.k * norm_sq(x);
                let beta = 1.0 - self.k * norm_sq(y);
                2.0 * self.k * dist_sq(x, y) / (alpha * beta)
            }
            Model::HalfSpace => {
                let n = x.len() - 1;
                dist_sq(x, y) / (2.0 * x[n] * y[n])
            }
        }
    }

    /// Geodesic distance.
    ///
    /// Evaluated as `(2/√k) asinh(sqrt(δ/2))` with `δ = cosh(√k d) - 1`, which is
    /// algebraically `arcosh(1 + δ)/√k` but never sees an argument below 1.
    #[inline]
    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        let delta = self.cosh_minus_one(x, y).max(0.0);
        2.0 * (0.5 * delta).sqrt().asinh() / self.sqrt_k()
    }

    /// Distance plus its Euclidean gradient; `scale * ∂d/∂x` is added to `gx`
    /// and `scale * ∂d/∂y` to `gy`. Coincident points contribute nothing.
    pub fn dist_grad(
        &self,
        x: &[f64],
        y: &[f64],
        scale: f64,
        gx: &mut [f64],
        gy: &mut [f64],
    ) -> f64 {
        let delta = self.cosh_minus_one(x, y).max(0.0);
        let d = 2.0 * (0.5 * delta).sqrt().asinh() / self.sqrt_k();
        let denom = (delta * (delta + 2.0)).sqrt();
        if denom < 1e-300 || scale == 0.0 {
            return d;
        }
        let dd = scale / (self.sqrt_k() * denom);
        match self.model {
            Model::Ball => {
                let alpha = 1.0 - self.k * norm_sq(x);
                let beta = 1.0 - self.k * norm_sq(y);
                let c = 4.0 * self.k / (alpha * beta);
                for i in 0..x.len() {
                    let diff = x[i] - y[i];
                    gx[i] += dd * (c * diff + delta * 2.0 * self.k * x[i] / alpha);
                    gy[i] += dd * (-c * diff + delta * 2.0 * self.k * y[i] / beta);
                }
            }
            Model::HalfSpace => {
                let n = x.len() - 1;
                let c = 1.0 / (x[n] * y[n]);
                for i in 0..x.len() {
                    let diff = x[i] - y[i];
                    gx[i] += dd * c * diff;
                    gy[i] -= dd * c * diff;
                }
                gx[n] -= dd * delta / x[n];
                gy[n] -= dd * delta / y[n];
            }
        }
        d
    }

    /// Distance from the model origin.
    pub fn dist_to_origin(&self, x: &[f64]) -> f64 {
        match self.model {
            Model::Ball => 2.0 * (self.sqrt_k() * norm_sq(x).sqrt()).min(1.0).atanh() / self.sqrt_k(),
            Model::HalfSpace => self.dist(x, &self.origin(x.len())),
        }
    }

    /// Conformal factor `λ(x)` with `g_x = λ(x)^2 g_e`.
    #[inline]
    pub fn conformal_factor(&self, x: &[f64]) -> f64 {
        match self.model {
            Model::Ball => 2.0 / (1.0 - self.k * norm_sq(x)),
            Model::HalfSpace => 1.0 / (self.sqrt_k() * x[x.len() - 1]),
        }
    }

    /// Factor turning a Euclidean gradient into the Riemannian one (`1/λ²`).
    #[inline]
    pub fn inverse_metric_factor(&self, x: &[f64]) -> f64 {
        match self.model {
            Model::Ball => {
                let a = 0.5 * (1.0 - self.k * norm_sq(x));
                a * a
            }
            Model::HalfSpace => {
                let h = x[x.len() - 1];
                self.k * h * h
            }
        }
    }

    pub fn inner(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let l = self.conformal_factor(x);
        l * l * dot(a, b)
    }

    pub fn norm(&self, x: &[f64], v: &[f64]) -> f64 {
        self.conformal_factor(x) * norm_sq(v).sqrt()
    }

    /// Logarithm map `log_x(y)` in Euclidean coordinates of the tangent space.
    pub fn log(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.log_into(x, y, &mut out);
        out
    }

    pub fn log_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self.model {
            Model::Ball => {
                let neg_x: Vec<f64> = x.iter().map(|c| -c).collect();
                let w = mobius_add(&neg_x, y, self.k);
                let wn = norm_sq(&w).sqrt();
                if wn == 0.0 {
                    out.iter_mut().for_each(|c| *c = 0.0);
                    return;
                }
                // artanh(√k|w|) = √k d/2, but taken from `dist` which keeps
                // its precision where |w| is close to the boundary
                let sk = self.sqrt_k();
                let a = 0.5 * sk * self.dist(x, y);
                let c = (1.0 - self.k * norm_sq(x)) / sk * a / wn;
                for (o, wi) in out.iter_mut().zip(&w) {
                    *o = c * wi;
                }
            }
            Model::HalfSpace => {
                let n = x.len() - 1;
                let s = self.sqrt_k() * self.dist(x, y);
                let f = s_over_sinh(s);
                let ratio = x[n] / y[n];
                for i in 0..n {
                    out[i] = ratio * f * (y[i] - x[i]);
                }
                // cosh s - x_n/y_n, written through δ = cosh s - 1 to avoid cancellation
                let delta = self.cosh_minus_one(x, y);
                out[n] = f * (delta + (y[n] - x[n]) / y[n]) * x[n];
            }
        }
    }

    /// Exponential map `exp_x(v)`, clamped into the safe region.
    pub fn exp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let vn = norm_sq(v).sqrt();
        if vn == 0.0 {
            return x.to_vec();
        }
        let mut y = match self.model {
            Model::Ball => {
                let sk = self.sqrt_k();
                let lambda = self.conformal_factor(x);
                let c = (0.5 * sk * lambda * vn).tanh() / (sk * vn);
                let step: Vec<f64> = v.iter().map(|vi| c * vi).collect();
                mobius_add(x, &step, self.k)
            }
            Model::HalfSpace => {
                let n = x.len() - 1;
                let s = vn / x[n];
                let un = v[n] / vn;
                // cosh s - u_n sinh s, split to stay positive for u_n → 1
                let (e_pos, e_neg) = ((0.5 * s.exp()), (0.5 * (-s).exp()));
                let den = e_pos * (1.0 - un) + e_neg * (1.0 + un);
                let sh = s.sinh();
                let mut y = vec![0.0; x.len()];
                for i in 0..n {
                    y[i] = x[i] + v[i] / vn * x[n] * sh / den;
                }
                y[n] = x[n] / den;
                y
            }
        };
        self.clamp(&mut y);
        y
    }
}

/// Möbius addition `x ⊕_k y` in the ball of radius `1/√k`.
pub fn mobius_add(x: &[f64], y: &[f64], k: f64) -> Vec<f64> {
    let xy = dot(x, y);
    let xx = norm_sq(x);
    let yy = norm_sq(y);
    let a = 1.0 + 2.0 * k * xy + k * yy;
    let b = 1.0 - k * xx;
    let den = 1.0 + 2.0 * k * xy + k * k * xx * yy;
    x.iter().zip(y).map(|(xi, yi)| (a * xi + b * yi) / den).collect()
}

/// A validated point of one hyperbolic model.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    model: Model,
    coords: Vec<f64>,
    k: f64,
}

impl Point {
    pub fn new(model: Model, coords: Vec<f64>, k: f64) -> Result<Self, GeometryError> {
        let geom = Geometry::new(model, k)?;
        if coords.is_empty() {
            return Err(GeometryError::Empty);
        }
        if !geom.contains(&coords) {
            return Err(GeometryError::OutsideDomain(model));
        }
        Ok(Self { model, coords, k })
    }

    pub fn ball(coords: Vec<f64>, k: f64) -> Result<Self, GeometryError> {
        Self::new(Model::Ball, coords, k)
    }

    pub fn half_space(coords: Vec<f64>, k: f64) -> Result<Self, GeometryError> {
        Self::new(Model::HalfSpace, coords, k)
    }

    pub fn origin(model: Model, dim: usize, k: f64) -> Result<Self, GeometryError> {
        let geom = Geometry::new(model, k)?;
        Self::new(model, geom.origin(dim), k)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn geometry(&self) -> Geometry {
        Geometry { model: self.model, k: self.k }
    }

    fn compatible(&self, other: &Point) -> Result<Geometry, GeometryError> {
        if self.model != other.model {
            return Err(GeometryError::ModelMismatch(self.model, other.model));
        }
        if self.k != other.k {
            return Err(GeometryError::CurvatureMismatch(self.k, other.k));
        }
        if self.dim() != other.dim() {
            return Err(GeometryError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self.geometry())
    }
}

/// A tangent vector in Euclidean coordinates, attached to its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: Point,
    components: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: Point, components: Vec<f64>) -> Result<Self, GeometryError> {
        if components.len() != base.dim() {
            return Err(GeometryError::DimensionMismatch(base.dim(), components.len()));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::OutsideDomain(base.model));
        }
        Ok(Self { base, components })
    }

    pub fn zero(base: Point) -> Self {
        let components = vec![0.0; base.dim()];
        Self { base, components }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Length under the Riemannian metric at the base point.
    pub fn riemannian_norm(&self) -> f64 {
        self.base.geometry().norm(self.base.coords(), &self.components)
    }
}

pub fn dist(a: &Point, b: &Point) -> Result<f64, GeometryError> {
    let geom = a.compatible(b)?;
    Ok(geom.dist(a.coords(), b.coords()))
}

pub fn log_map(x: &Point, y: &Point) -> Result<TangentVector, GeometryError> {
    let geom = x.compatible(y)?;
    let components = geom.log(x.coords(), y.coords());
    Ok(TangentVector { base: x.clone(), components })
}

pub fn exp_map(x: &Point, v: &TangentVector) -> Result<Point, GeometryError> {
    let geom = x.compatible(v.base())?;
    if x.coords() != v.base().coords() {
        return Err(GeometryError::OutsideDomain(x.model));
    }
    let coords = geom.exp(x.coords(), v.components());
    Ok(Point { model: x.model, coords, k: x.k })
}

/// Inversion in the sphere of radius `1/√k`.
fn invert(x: &[f64], k: f64) -> Vec<f64> {
    let s = 1.0 / (k * norm_sq(x));
    x.iter().map(|c| c * s).collect()
}

/// Ball isometry `T_s(x) = -s + (1 - k|s|^2) Inv(Inv(x) - s)` taking `s` to
/// the origin. This is the Möbius translation `(-s) ⊕_k x`.
pub fn translate_coords(s: &[f64], x: &[f64], k: f64) -> Vec<f64> {
    if norm_sq(s) == 0.0 {
        return x.to_vec();
    }
    if norm_sq(x) == 0.0 {
        return s.iter().map(|c| -c).collect();
    }
    let inv_x = invert(x, k);
    let shifted: Vec<f64> = inv_x.iter().zip(s).map(|(a, b)| a - b).collect();
    if norm_sq(&shifted) == 0.0 {
        // Inv(x) = s only happens outside the ball; fall back to the Möbius form.
        let neg: Vec<f64> = s.iter().map(|c| -c).collect();
        return mobius_add(&neg, x, k);
    }
    let factor = 1.0 - k * norm_sq(s);
    invert(&shifted, k)
        .iter()
        .zip(s)
        .map(|(w, si)| factor * w - si)
        .collect()
}

pub fn translate_to_origin(s: &Point, x: &Point) -> Result<Point, GeometryError> {
    let geom = s.compatible(x)?;
    if geom.model != Model::Ball {
        return Err(GeometryError::WrongModel(Model::Ball));
    }
    let mut coords = translate_coords(s.coords(), x.coords(), s.k);
    geom.clamp(&mut coords);
    Ok(Point { model: Model::Ball, coords, k: s.k })
}

/// Inverse of [`translate_to_origin`]: `T_s^{-1} = T_{-s}`.
pub fn translate_from_origin(s: &Point, y: &Point) -> Result<Point, GeometryError> {
    let geom = s.compatible(y)?;
    if geom.model != Model::Ball {
        return Err(GeometryError::WrongModel(Model::Ball));
    }
    let neg: Vec<f64> = s.coords().iter().map(|c| -c).collect();
    let mut coords = translate_coords(&neg, y.coords(), s.k);
    geom.clamp(&mut coords);
    Ok(Point { model: Model::Ball, coords, k: s.k })
}

/// Cayley-type isometry between the unit ball and the unit half-space,
/// rescaled by `1/√k`. The ball origin maps to `(0, …, 0, 1/√k)`.
pub fn convert_coords(coords: &[f64], from: Model, to: Model, k: f64) -> Vec<f64> {
    if from == to {
        return coords.to_vec();
    }
    let sk = k.sqrt();
    let n = coords.len() - 1;
    let z: Vec<f64> = coords.iter().map(|c| c * sk).collect();
    let zz = norm_sq(&z);
    let mut out = vec![0.0; coords.len()];
    match to {
        Model::HalfSpace => {
            // y = (2 z', 1 - |z|^2) / |z - e_n|^2
            let den = zz - 2.0 * z[n] + 1.0;
            for i in 0..n {
                out[i] = 2.0 * z[i] / den;
            }
            out[n] = (1.0 - zz) / den;
        }
        Model::Ball => {
            // x = (2 z', |z|^2 - 1) / |z + e_n|^2
            let den = zz + 2.0 * z[n] + 1.0;
            for i in 0..n {
                out[i] = 2.0 * z[i] / den;
            }
            out[n] = (zz - 1.0) / den;
        }
    }
    out.iter_mut().for_each(|c| *c /= sk);
    Geometry { model: to, k }.clamp(&mut out);
    out
}

pub fn convert(p: &Point, target: Model) -> Point {
    Point {
        model: target,
        coords: convert_coords(p.coords(), p.model, target, p.k),
        k: p.k,
    }
}
