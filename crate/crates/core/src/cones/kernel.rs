//! Closed-form cone quantities and their Euclidean gradients.
//!
//! Every routine takes apex `u` and query point `v` already validated (and,
//! for an off-origin source, already translated). When a [`GradSink`] is
//! passed, `scale * ∂E/∂u` and `scale * ∂E/∂v` are added to its buffers.
//!
//! Kinks (v on the central axis, coincident points) contribute a zero
//! subgradient for the non-differentiable factor.

use std::f64::consts::FRAC_PI_2;

use crate::manifold::{dist_sq, dot, norm_sq, Geometry};

use super::{ConeFamily, ConeSpec};

pub(crate) struct GradSink<'a> {
    pub scale: f64,
    pub gu: &'a mut [f64],
    pub gv: &'a mut [f64],
}

impl GradSink<'_> {
    fn rescaled(&mut self, scale: f64) -> GradSink<'_> {
        GradSink { scale: self.scale * scale, gu: &mut *self.gu, gv: &mut *self.gv }
    }
}

/// Everything one cone evaluation produces.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Eval {
    pub t: f64,
    /// Positive exactly when the nearest cone point is the apex.
    pub altitude: f64,
    /// Signed distance to the cone boundary (the `altitude <= 0` formula).
    pub boundary: f64,
    /// Shortest signed distance to the cone, with the apex pushed by γ3.
    pub energy: f64,
}

const ANGLE_EPS: f64 = 1e-12;

#[inline]
fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

pub(crate) fn eval(spec: &ConeSpec, u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> Eval {
    match spec.family {
        ConeFamily::UmbralInfinity => umbral_infinity(spec, u, v, grad),
        ConeFamily::UmbralOrigin => umbral_origin(spec, u, v, grad),
        ConeFamily::PenumbralBall => penumbral(spec, u, v, grad),
        ConeFamily::PenumbralHorosphere => penumbral(spec, u, v, grad),
    }
}

// ---------------------------------------------------------------------------
// Apex branch: distance from v to the apex pushed γ3 along the central axis.

fn apex_half_space(spec: &ConeSpec, u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> f64 {
    let geom = spec.geometry();
    let n = u.len() - 1;
    let shrink = (-geom.sqrt_k() * spec.gamma3).exp();
    let mut pushed = u.to_vec();
    pushed[n] *= shrink;
    match grad {
        None => geom.dist(&pushed, v),
        Some(g) => {
            let before = g.gu[n];
            let d = geom.dist_grad(&pushed, v, g.scale, g.gu, g.gv);
            g.gu[n] = before + (g.gu[n] - before) * shrink;
            d
        }
    }
}

fn apex_ball(spec: &ConeSpec, u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> f64 {
    let geom = spec.geometry();
    if spec.gamma3 == 0.0 {
        return match grad {
            None => geom.dist(u, v),
            Some(g) => geom.dist_grad(u, v, g.scale, g.gu, g.gv),
        };
    }
    // |u'| = tanh(atanh(√k|u|) + √k γ3 / 2) / √k, written as u' = s(|u|) u.
    let sk = geom.sqrt_k();
    let m = norm_sq(u).sqrt();
    let tt = (0.5 * sk * spec.gamma3).tanh();
    let f = (sk * m + tt) / (1.0 + sk * m * tt);
    let s = f / (sk * m);
    let pushed: Vec<f64> = u.iter().map(|c| c * s).collect();
    match grad {
        None => geom.dist(&pushed, v),
        Some(g) => {
            let mut gp = vec![0.0; u.len()];
            let d = geom.dist_grad(&pushed, v, g.scale, &mut gp, g.gv);
            let fp = sk * (1.0 - tt * tt) / (1.0 + sk * m * tt).powi(2);
            let sp = (fp * m - f) / (sk * m * m);
            let ug = dot(u, &gp);
            for i in 0..u.len() {
                g.gu[i] += s * gp[i] + sp / m * ug * u[i];
            }
            d
        }
    }
}

fn apex(spec: &ConeSpec, u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> f64 {
    match spec.family.model() {
        crate::manifold::Model::Ball => apex_ball(spec, u, v, grad),
        crate::manifold::Model::HalfSpace => apex_half_space(spec, u, v, grad),
    }
}

// ---------------------------------------------------------------------------
// Umbral, source at x_n = ∞ (half-space).

fn umbral_infinity(spec: &ConeSpec, u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> Eval {
    let sk = spec.k.sqrt();
    let n = u.len() - 1;
    let skr = sk * spec.r;
    let (rs, rc) = (skr.sinh(), skr.cosh());
    let rho = dist_sq(&u[..n], &v[..n]).sqrt();
    let t = (rho - rs * u[n]) / v[n];
    let altitude = v[n] * v[n] * (1.0 + t * t) - u[n] * u[n] * rc * rc;
    let boundary = t.asinh() / sk + spec.r;
    if altitude > 0.0 {
        let energy = apex(spec, u, v, grad);
        return Eval { t, altitude, boundary, energy };
    }
    if let Some(g) = grad {
        let de = g.scale / (sk * (1.0 + t * t).sqrt());
        if rho > 0.0 {
            for i in 0..n {
                let dt = (v[i] - u[i]) / (rho * v[n]);
                g.gu[i] -= de * dt;
                g.gv[i] += de * dt;
            }
        }
        g.gu[n] -= de * rs / v[n];
        g.gv[n] -= de * t / v[n];
    }
    Eval { t, altitude, boundary, energy: boundary }
}

// ---------------------------------------------------------------------------
// Ball helpers shared by the origin-source families.

/// `sinh(√k r) / sinh(√k d(u, O))` as a function of `m = |u|`, and its
/// derivative in `m`.
fn ball_sine_ratio(k: f64, r: f64, m: f64) -> (f64, f64) {
    let sk = k.sqrt();
    let srs = (sk * r).sinh();
    let val = srs * (1.0 - k * m * m) / (2.0 * sk * m);
    let der = srs / (2.0 * sk) * (-1.0 / (m * m) - k);
    (val, der)
}

/// Angle at the hole-side of `u` spanned by the source (penumbral half
/// aperture, umbral β). Adds `scale * ∂/∂u` when asked.
fn ball_source_angle(k: f64, r: f64, u: &[f64], grad: Option<(f64, &mut [f64])>) -> f64 {
    let m = norm_sq(u).sqrt();
    let (s, ds) = ball_sine_ratio(k, r, m);
    let angle = clamp_unit(s).asin();
    if let Some((scale, gu)) = grad {
        let c = (1.0 - s * s).sqrt();
        if c > ANGLE_EPS {
            let f = scale * ds / (c * m);
            for (g, ui) in gu.iter_mut().zip(u) {
                *g += f * ui;
            }
        }
    }
    angle
}

/// Angle at `u` between the outward central axis and the geodesic to `v`
/// in the ball (π minus the angle O-u-v).
pub(crate) fn ball_axis_angle(k: f64, u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> f64 {
    let uu = norm_sq(u);
    let vv = norm_sq(v);
    let uv = dot(u, v);
    let m = uu.sqrt();
    let duv = dist_sq(u, v);
    let num = uv * (1.0 + k * uu) - uu * (1.0 + k * vv);
    let qq = 1.0 + k * k * uu * vv - 2.0 * k * uv;
    let den = m * duv.sqrt() * qq.sqrt();
    if den <= 0.0 {
        return 0.0;
    }
    let q = clamp_unit(num / den);
    let phi = q.acos();
    if let Some(g) = grad {
        let sin_phi = (1.0 - q * q).sqrt();
        if sin_phi > ANGLE_EPS {
            let c = -g.scale / sin_phi;
            for i in 0..u.len() {
                let dnum_u = v[i] * (1.0 + k * uu) + 2.0 * k * uv * u[i] - 2.0 * u[i] * (1.0 + k * vv);
                let dnum_v = u[i] * (1.0 + k * uu) - 2.0 * k * uu * v[i];
                let dlden_u = u[i] / uu + (u[i] - v[i]) / duv + (k * k * vv * u[i] - k * v[i]) / qq;
                let dlden_v = (v[i] - u[i]) / duv + (k * k * uu * v[i] - k * u[i]) / qq;
                g.gu[i] += c * (dnum_u / den - q * dlden_u);
                g.gv[i] += c * (dnum_v / den - q * dlden_v);
            }
        }
    }
    phi
}

// ---------------------------------------------------------------------------
// Umbral, source at the ball origin.

/// Signed foot position of `v` along the tangent light path and the apex's
/// foot position, as hyperbolic lengths from the source.
fn umbral_origin_altitude(spec: &ConeSpec, u: &[f64], v: &[f64], t: f64, alpha_minus_beta: f64) -> f64 {
    let k = spec.k;
    let sk = k.sqrt();
    let uu = norm_sq(u);
    let vv = norm_sq(v);
    let cosh_dv = (1.0 + k * vv) / (1.0 - k * vv);
    let cosh_du = (1.0 + k * uu) / (1.0 - k * uu);
    let hv = (cosh_dv / (1.0 + t * t).sqrt()).max(1.0).acosh() / sk;
    let hv = if alpha_minus_beta.cos() < 0.0 { -hv } else { hv };
    let hu = (cosh_du / (sk * spec.r).cosh()).max(1.0).acosh() / sk;
    hu - hv
}

fn umbral_origin(spec: &ConeSpec, u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> Eval {
    let k = spec.k;
    let sk = k.sqrt();
    let m = norm_sq(u).sqrt();
    let vv = norm_sq(v);
    let nv = vv.sqrt();
    let sinh_dv = 2.0 * sk * nv / (1.0 - k * vv);
    let cos_alpha = if nv > 0.0 { clamp_unit(dot(u, v) / (m * nv)) } else { 1.0 };
    let alpha = cos_alpha.acos();
    let beta = ball_source_angle(k, spec.r, u, None);
    let amb = alpha - beta;
    let t = sinh_dv * amb.sin();
    let altitude = umbral_origin_altitude(spec, u, v, t, amb);
    let boundary = t.asinh() / sk + spec.r;
    if altitude > 0.0 {
        let energy = apex(spec, u, v, grad);
        return Eval { t, altitude, boundary, energy };
    }
    if let Some(g) = grad {
        let de = g.scale / (sk * (1.0 + t * t).sqrt());
        // t = sinh(√k d_v) sin(α - β)
        if nv > 0.0 {
            let dsinh = 2.0 * sk * (1.0 + k * vv) / (1.0 - k * vv).powi(2);
            let c = de * amb.sin() * dsinh / nv;
            for (gi, vi) in g.gv.iter_mut().zip(v) {
                *gi += c * vi;
            }
            let ca = de * sinh_dv * amb.cos();
            let sin_alpha = (1.0 - cos_alpha * cos_alpha).sqrt();
            if sin_alpha > ANGLE_EPS {
                let f = -ca / sin_alpha;
                for i in 0..u.len() {
                    let dc_du = v[i] / (m * nv) - cos_alpha * u[i] / (m * m);
                    let dc_dv = u[i] / (m * nv) - cos_alpha * v[i] / vv;
                    g.gu[i] += f * dc_du;
                    g.gv[i] += f * dc_dv;
                }
            }
            ball_source_angle(k, spec.r, u, Some((-ca, &mut *g.gu)));
        }
    }
    Eval { t, altitude, boundary, energy: boundary }
}

/// Half aperture of the umbral origin cone at its apex: the angle between the
/// axis and the boundary hypercycle, `cos θ = cos β / cosh(√k r)`.
pub(crate) fn umbral_origin_aperture(spec: &ConeSpec, u: &[f64]) -> f64 {
    let beta = ball_source_angle(spec.k, spec.r, u, None);
    clamp_unit(beta.cos() / (spec.k.sqrt() * spec.r).cosh()).acos()
}

// ---------------------------------------------------------------------------
// Half-space axis angles.

/// Euclidean angle between `v - u` and the downward axis `(0, …, 0, -1)`.
pub(crate) fn vertical_axis_angle(u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> f64 {
    let n = u.len() - 1;
    let w2 = dist_sq(u, v);
    if w2 == 0.0 {
        return 0.0;
    }
    let wn = w2.sqrt();
    let q = clamp_unit(-(v[n] - u[n]) / wn);
    let phi = q.acos();
    if let Some(g) = grad {
        let sin_phi = (1.0 - q * q).sqrt();
        if sin_phi > ANGLE_EPS {
            let c = -g.scale / sin_phi;
            for i in 0..u.len() {
                let w = v[i] - u[i];
                let mut dq = (v[n] - u[n]) * w / (wn * w2);
                if i == n {
                    dq -= 1.0 / wn;
                }
                g.gv[i] += c * dq;
                g.gu[i] -= c * dq;
            }
        }
    }
    phi
}

/// Angle between `log_u(v)` and the downward axis in the half-space:
/// `cos φ = (u_n² - v_n² - ρ²) / sqrt(|u - v̄|² |u - v|²)` with `v̄` the
/// reflection of `v` through the boundary plane.
pub(crate) fn log_axis_angle(u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> f64 {
    let n = u.len() - 1;
    let rho2 = dist_sq(&u[..n], &v[..n]);
    let (un, vn) = (u[n], v[n]);
    let num = un * un - vn * vn - rho2;
    let p = rho2 + (un + vn) * (un + vn);
    let mm = rho2 + (un - vn) * (un - vn);
    if mm == 0.0 {
        return 0.0;
    }
    let root = (p * mm).sqrt();
    let q = clamp_unit(num / root);
    let phi = q.acos();
    if let Some(g) = grad {
        let sin_phi = (1.0 - q * q).sqrt();
        if sin_phi > ANGLE_EPS {
            let c = -g.scale / sin_phi;
            // ρ² enters num with -1 and p, mm with +1
            let d_rho2 = -1.0 / root - 0.5 * q * (1.0 / p + 1.0 / mm);
            for i in 0..n {
                let d = c * d_rho2 * 2.0 * (u[i] - v[i]);
                g.gu[i] += d;
                g.gv[i] -= d;
            }
            let dq_un = 2.0 * un / root - 0.5 * q * (2.0 * (un + vn) / p + 2.0 * (un - vn) / mm);
            let dq_vn = -2.0 * vn / root - 0.5 * q * (2.0 * (un + vn) / p - 2.0 * (un - vn) / mm);
            g.gu[n] += c * dq_un;
            g.gv[n] += c * dq_vn;
        }
    }
    phi
}

// ---------------------------------------------------------------------------
// Penumbral families.

/// Half aperture plus `scale * ∂θ/∂u` when asked.
pub(crate) fn penumbral_aperture(spec: &ConeSpec, u: &[f64], grad: Option<(f64, &mut [f64])>) -> f64 {
    match spec.family {
        ConeFamily::PenumbralHorosphere => {
            let n = u.len() - 1;
            let hs = spec.source_height();
            let theta = clamp_unit(u[n] / hs).asin();
            if let Some((scale, gu)) = grad {
                let c = (hs * hs - u[n] * u[n]).sqrt();
                if c > ANGLE_EPS {
                    gu[n] += scale / c;
                }
            }
            theta
        }
        _ => ball_source_angle(spec.k, spec.r, u, grad),
    }
}

pub(crate) fn penumbral_axis_angle(spec: &ConeSpec, u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> f64 {
    match spec.family {
        ConeFamily::PenumbralHorosphere => log_axis_angle(u, v, grad),
        _ => ball_axis_angle(spec.k, u, v, grad),
    }
}

fn penumbral(spec: &ConeSpec, u: &[f64], v: &[f64], grad: Option<&mut GradSink<'_>>) -> Eval {
    let geom: Geometry = spec.geometry();
    let sk = geom.sqrt_k();
    let coincident = u == v;
    let phi = if coincident { 0.0 } else { penumbral_axis_angle(spec, u, v, None) };
    let theta = penumbral_aperture(spec, u, None);
    let t = phi - theta;
    let altitude = t - FRAC_PI_2;
    let d = geom.dist(u, v);
    let sh = (sk * d).sinh();
    let x = sh * t.sin();
    let boundary = x.asinh() / sk;
    if altitude > 0.0 {
        let energy = apex(spec, u, v, grad);
        return Eval { t, altitude, boundary, energy };
    }
    if coincident {
        return Eval { t, altitude, boundary, energy: boundary };
    }
    if let Some(g) = grad {
        let de = 1.0 / (sk * (1.0 + x * x).sqrt());
        let dd = de * t.sin() * (sk * d).cosh() * sk;
        geom.dist_grad(u, v, g.scale * dd, g.gu, g.gv);
        let dt = de * sh * t.cos();
        let mut sub = g.rescaled(dt);
        penumbral_axis_angle(spec, u, v, Some(&mut sub));
        let neg = -sub.scale;
        penumbral_aperture(spec, u, Some((neg, &mut *sub.gu)));
    }
    Eval { t, altitude, boundary, energy: boundary }
}
