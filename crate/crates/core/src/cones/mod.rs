//! Axially symmetric shadow cones.
//!
//! A light source casts shadows; `v` lies in the cone of `u` when it is
//! occluded by `u`. Umbral cones block a point source with a ball of
//! radius `r` around every embedded point. Penumbral cones use an extended
//! source and point-like objects.
//!
//! | family                | model      | source                      |
//! |-----------------------|------------|-----------------------------|
//! | `UmbralInfinity`      | half-space | ideal point at `x_n = ∞`    |
//! | `UmbralOrigin`        | ball       | point at the origin         |
//! | `PenumbralBall`       | ball       | ball of radius `r` at O     |
//! | `PenumbralHorosphere` | half-space | horosphere `x_n = √k e^{√k h}` |
//!
//! Every query reduces to a temperature `t`, a relative altitude `H` and a
//! signed distance. `H > 0` means the nearest cone point is the apex; `H ≤ 0`
//! means it lies on the boundary, whose signed distance is negative inside.
//!
//! Antumbral cones are not provided: the antumbral shadow of `u` equals the
//! penumbral shadow of a surrogate apex, so a penumbral spec covers them.
//! Penumbral cones with a ball source at the origin are the hyperbolic
//! entailment cones of Ganea et al.

mod kernel;

use std::borrow::Cow;

use thiserror::Error;

use crate::manifold::{self, Geometry, GeometryError, Model};

pub(crate) use kernel::GradSink;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("apex lies inside the source hole: d(u, O) = {dist} <= r = {r}")]
    InsideHole { dist: f64, r: f64 },
    #[error("apex lies on or above the horosphere source: u_n = {height} >= {ceiling}")]
    AboveHorosphere { height: f64, ceiling: f64 },
    #[error("axis angle is undefined for coincident points")]
    UndefinedAngle,
    #[error("invalid cone parameters: {0}")]
    InvalidSpec(String),
    #[error("{0}")]
    Unsupported(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeFamily {
    UmbralInfinity,
    UmbralOrigin,
    PenumbralBall,
    PenumbralHorosphere,
}

impl ConeFamily {
    pub const ALL: [ConeFamily; 4] = [
        ConeFamily::UmbralInfinity,
        ConeFamily::UmbralOrigin,
        ConeFamily::PenumbralBall,
        ConeFamily::PenumbralHorosphere,
    ];

    pub fn model(self) -> Model {
        match self {
            ConeFamily::UmbralInfinity | ConeFamily::PenumbralHorosphere => Model::HalfSpace,
            ConeFamily::UmbralOrigin | ConeFamily::PenumbralBall => Model::Ball,
        }
    }

    pub fn is_umbral(self) -> bool {
        matches!(self, ConeFamily::UmbralInfinity | ConeFamily::UmbralOrigin)
    }

    /// Families whose source sits inside the space and carves out a hole.
    pub fn has_hole(self) -> bool {
        self.model() == Model::Ball
    }

    pub fn name(self) -> &'static str {
        match self {
            ConeFamily::UmbralInfinity => "umbral-infinity",
            ConeFamily::UmbralOrigin => "umbral-origin",
            ConeFamily::PenumbralBall => "penumbral-ball",
            ConeFamily::PenumbralHorosphere => "penumbral-horosphere",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

impl std::fmt::Display for ConeFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Cone family plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    pub family: ConeFamily,
    /// The space has curvature `-k`.
    pub k: f64,
    /// Object radius (umbral) or source radius (penumbral ball).
    pub r: f64,
    /// Horosphere level; the source plane sits at `x_n = √k e^{√k h}`.
    pub h: f64,
    /// Apex push along the central axis used by the apex branch.
    pub gamma3: f64,
    /// Off-origin light source for the ball families, mapped to the origin
    /// with [`manifold::translate_coords`] before every query.
    pub source: Option<Vec<f64>>,
}

pub const DEFAULT_GAMMA3: f64 = 1e-4;

/// Result of one cone query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeQuery {
    pub t: f64,
    pub altitude: f64,
    pub signed_dist: f64,
    pub member: bool,
}

impl ConeSpec {
    pub fn new(family: ConeFamily, k: f64, r: f64) -> Self {
        Self { family, k, r, h: 0.0, gamma3: DEFAULT_GAMMA3, source: None }
    }

    pub fn umbral_infinity(k: f64, r: f64) -> Self {
        Self::new(ConeFamily::UmbralInfinity, k, r)
    }

    pub fn umbral_origin(k: f64, r: f64) -> Self {
        Self::new(ConeFamily::UmbralOrigin, k, r)
    }

    pub fn penumbral_ball(k: f64, r: f64) -> Self {
        Self::new(ConeFamily::PenumbralBall, k, r)
    }

    pub fn penumbral_horosphere(k: f64, h: f64) -> Self {
        Self { h, ..Self::new(ConeFamily::PenumbralHorosphere, k, 0.0) }
    }

    pub fn with_gamma3(mut self, gamma3: f64) -> Self {
        self.gamma3 = gamma3;
        self
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn with_source(mut self, source: Vec<f64>) -> Self {
        self.source = Some(source);
        self
    }

    /// Sets `h` so that the horosphere sits at `x_n = height`.
    pub fn with_source_height(mut self, height: f64) -> Self {
        let sk = self.k.sqrt();
        self.h = (height / sk).ln() / sk;
        self
    }

    /// Height of the horosphere source plane, `√k e^{√k h}`.
    pub fn source_height(&self) -> f64 {
        let sk = self.k.sqrt();
        sk * (sk * self.h).exp()
    }

    pub fn geometry(&self) -> Geometry {
        Geometry { model: self.family.model(), k: self.k }
    }

    pub fn validate(&self) -> Result<(), ConeError> {
        Geometry::new(self.family.model(), self.k)?;
        if !(self.gamma3.is_finite() && self.gamma3 >= 0.0) {
            return Err(ConeError::InvalidSpec(format!("gamma3 must be >= 0, got {}", self.gamma3)));
        }
        match self.family {
            ConeFamily::PenumbralHorosphere => {
                if !self.h.is_finite() {
                    return Err(ConeError::InvalidSpec("horosphere level must be finite".into()));
                }
            }
            _ => {
                if !(self.r.is_finite() && self.r > 0.0) {
                    return Err(ConeError::InvalidSpec(format!("radius must be > 0, got {}", self.r)));
                }
            }
        }
        if let Some(s) = &self.source {
            if !self.family.has_hole() {
                return Err(ConeError::InvalidSpec("only ball families take a source point".into()));
            }
            if !self.geometry().contains(s) {
                return Err(GeometryError::OutsideDomain(Model::Ball).into());
            }
        }
        Ok(())
    }

    /// Smallest admissible Euclidean norm of an apex in the ball families.
    pub fn hole_norm(&self) -> f64 {
        let sk = self.k.sqrt();
        (0.5 * sk * self.r).tanh() / sk
    }

    /// Checks the apex constraint (outside the hole / below the horosphere).
    pub fn check_apex(&self, u: &[f64]) -> Result<(), ConeError> {
        let geom = self.geometry();
        if !geom.contains(u) {
            return Err(GeometryError::OutsideDomain(geom.model).into());
        }
        match self.family {
            ConeFamily::UmbralOrigin | ConeFamily::PenumbralBall => {
                let d = geom.dist_to_origin(u);
                if !(d > self.r) {
                    return Err(ConeError::InsideHole { dist: d, r: self.r });
                }
            }
            ConeFamily::PenumbralHorosphere => {
                let hs = self.source_height();
                let un = u[u.len() - 1];
                if !(un < hs) {
                    return Err(ConeError::AboveHorosphere { height: un, ceiling: hs });
                }
            }
            ConeFamily::UmbralInfinity => {}
        }
        Ok(())
    }

    /// Applies the source isometry and validates both points.
    fn prepare<'a>(&self, u: &'a [f64], v: &'a [f64]) -> Result<(Cow<'a, [f64]>, Cow<'a, [f64]>), ConeError> {
        if u.len() != v.len() {
            return Err(GeometryError::DimensionMismatch(u.len(), v.len()).into());
        }
        if u.len() < 2 {
            return Err(ConeError::InvalidSpec("cones need at least two dimensions".into()));
        }
        let geom = self.geometry();
        if !geom.contains(v) {
            return Err(GeometryError::OutsideDomain(geom.model).into());
        }
        let (u, v) = match &self.source {
            Some(s) => (
                Cow::Owned(manifold::translate_coords(s, u, self.k)),
                Cow::Owned(manifold::translate_coords(s, v, self.k)),
            ),
            None => (Cow::Borrowed(u), Cow::Borrowed(v)),
        };
        self.check_apex(&u)?;
        Ok((u, v))
    }

    fn evaluate(&self, u: &[f64], v: &[f64]) -> Result<kernel::Eval, ConeError> {
        let (u, v) = self.prepare(u, v)?;
        Ok(kernel::eval(self, &u, &v, None))
    }

    /// Half aperture of the cone at apex `u`.
    pub fn half_aperture(&self, u: &[f64]) -> Result<f64, ConeError> {
        let (u, _) = self.prepare(u, u)?;
        Ok(match self.family {
            ConeFamily::UmbralInfinity => (self.k.sqrt() * self.r).sinh().atan(),
            ConeFamily::UmbralOrigin => kernel::umbral_origin_aperture(self, &u),
            _ => kernel::penumbral_aperture(self, &u, None),
        })
    }

    /// Angle at `u` between the central axis (pointing into the cone) and
    /// the geodesic towards `v`.
    pub fn axis_angle(&self, u: &[f64], v: &[f64]) -> Result<f64, ConeError> {
        let (u, v) = self.prepare(u, v)?;
        if u == v {
            return Err(ConeError::UndefinedAngle);
        }
        Ok(match self.family {
            ConeFamily::UmbralInfinity => kernel::vertical_axis_angle(&u, &v, None),
            ConeFamily::PenumbralHorosphere => kernel::log_axis_angle(&u, &v, None),
            _ => kernel::ball_axis_angle(self.k, &u, &v, None),
        })
    }

    pub fn temperature(&self, u: &[f64], v: &[f64]) -> Result<f64, ConeError> {
        Ok(self.evaluate(u, v)?.t)
    }

    pub fn relative_altitude(&self, u: &[f64], v: &[f64]) -> Result<f64, ConeError> {
        Ok(self.evaluate(u, v)?.altitude)
    }

    /// Signed distance to the cone boundary, whichever branch applies.
    pub fn boundary_distance(&self, u: &[f64], v: &[f64]) -> Result<f64, ConeError> {
        Ok(self.evaluate(u, v)?.boundary)
    }

    /// Shortest signed distance from `v` to the cone of `u`: the distance to
    /// the pushed apex when `H > 0`, the signed boundary distance otherwise.
    pub fn signed_cone_distance(&self, u: &[f64], v: &[f64]) -> Result<f64, ConeError> {
        Ok(self.evaluate(u, v)?.energy)
    }

    pub fn query(&self, u: &[f64], v: &[f64]) -> Result<ConeQuery, ConeError> {
        let e = self.evaluate(u, v)?;
        let member = u == v || (e.altitude <= 0.0 && e.boundary <= 0.0);
        Ok(ConeQuery { t: e.t, altitude: e.altitude, signed_dist: e.energy, member })
    }

    /// Membership from altitude and signed boundary distance. Reflexive.
    pub fn is_member(&self, u: &[f64], v: &[f64]) -> Result<bool, ConeError> {
        Ok(self.query(u, v)?.member)
    }

    /// Membership by comparing the axis angle with the half aperture.
    /// Not defined for `UmbralOrigin`, whose boundary is not a geodesic or a
    /// straight Euclidean ray.
    pub fn is_member_by_angle(&self, u: &[f64], v: &[f64]) -> Result<bool, ConeError> {
        if self.family == ConeFamily::UmbralOrigin {
            return Err(ConeError::Unsupported("umbral-origin membership has no angle test"));
        }
        if u == v {
            return Ok(true);
        }
        Ok(self.axis_angle(u, v)? <= self.half_aperture(u)?)
    }

    /// Apex pushed a distance γ3 along the central axis into the cone.
    pub fn pushed_apex(&self, u: &[f64]) -> Vec<f64> {
        let sk = self.k.sqrt();
        match self.family.model() {
            Model::HalfSpace => {
                let mut p = u.to_vec();
                let n = p.len() - 1;
                p[n] *= (-sk * self.gamma3).exp();
                p
            }
            Model::Ball => {
                let m = manifold::norm_sq(u).sqrt();
                let d = 2.0 * (sk * m).atanh() / sk + self.gamma3;
                let target = (0.5 * sk * d).tanh() / sk;
                u.iter().map(|c| c * target / m).collect()
            }
        }
    }

    /// Energy `E(u, v)` with `scale * ∂E` added to the gradient buffers.
    pub(crate) fn energy_grad(&self, u: &[f64], v: &[f64], sink: &mut GradSink<'_>) -> Result<f64, ConeError> {
        if self.source.is_some() {
            return Err(ConeError::Unsupported("gradients need the source at the origin"));
        }
        self.prepare(u, v)?;
        Ok(kernel::eval(self, u, v, Some(sink)).energy)
    }

    /// The angle energy `max(0, φ - θ)` used by entailment-cone training.
    pub fn angle_energy(&self, u: &[f64], v: &[f64]) -> Result<f64, ConeError> {
        let mut gu = vec![0.0; u.len()];
        let mut gv = vec![0.0; v.len()];
        self.angle_energy_grad(u, v, &mut GradSink { scale: 0.0, gu: &mut gu, gv: &mut gv })
    }

    pub(crate) fn angle_energy_grad(&self, u: &[f64], v: &[f64], sink: &mut GradSink<'_>) -> Result<f64, ConeError> {
        if self.family == ConeFamily::UmbralOrigin {
            return Err(ConeError::Unsupported("umbral-origin has no axis-angle energy"));
        }
        if self.source.is_some() {
            return Err(ConeError::Unsupported("gradients need the source at the origin"));
        }
        self.prepare(u, v)?;
        if u == v {
            return Ok(0.0);
        }
        let (phi, theta) = match self.family {
            ConeFamily::UmbralInfinity => (
                kernel::vertical_axis_angle(u, v, None),
                (self.k.sqrt() * self.r).sinh().atan(),
            ),
            _ => (
                kernel::penumbral_axis_angle(self, u, v, None),
                kernel::penumbral_aperture(self, u, None),
            ),
        };
        let e = phi - theta;
        if e <= 0.0 {
            return Ok(0.0);
        }
        if sink.scale != 0.0 {
            match self.family {
                ConeFamily::UmbralInfinity => {
                    kernel::vertical_axis_angle(u, v, Some(sink));
                }
                _ => {
                    kernel::penumbral_axis_angle(self, u, v, Some(sink));
                    let neg = -sink.scale;
                    kernel::penumbral_aperture(self, u, Some((neg, &mut *sink.gu)));
                }
            }
        }
        Ok(e)
    }

    /// Projects `x` onto the feasible set: model domain clamp, then the hole
    /// (ball families) or the horosphere ceiling.
    pub fn project(&self, x: &mut [f64]) {
        let geom = self.geometry();
        geom.clamp(x);
        match self.family {
            ConeFamily::UmbralOrigin | ConeFamily::PenumbralBall => {
                let min = self.hole_norm() * (1.0 + HOLE_MARGIN);
                let m = manifold::norm_sq(x).sqrt();
                if m < min {
                    if m == 0.0 {
                        x[0] = min;
                    } else {
                        let s = min / m;
                        x.iter_mut().for_each(|c| *c *= s);
                    }
                }
            }
            ConeFamily::PenumbralHorosphere => {
                let n = x.len() - 1;
                let max = self.source_height() * (1.0 - HOLE_MARGIN);
                if x[n] > max {
                    x[n] = max;
                }
            }
            ConeFamily::UmbralInfinity => {}
        }
    }
}

/// Relative clearance kept from the hole boundary and the horosphere.
pub const HOLE_MARGIN: f64 = 1e-6;
