use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, wavenumber, GroundPlane, Mesh, Point, WireGeometry, ETA0};
use crate::linalg::CVector;
use crate::quadrature::gauss_legendre;

type C = Complex64;

/// A far-field cut at fixed azimuth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutSpec {
    pub phi_deg: f64,
    pub theta_deg: Vec<f64>,
}

impl CutSpec {
    /// Uniform sampling `start, start + step, …, stop` (inclusive).
    pub fn uniform(phi_deg: f64, start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || stop < start {
            return Err(Error::Config(format!(
                "invalid cut range {start}..{stop} step {step}"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok(Self {
            phi_deg,
            theta_deg: (0..n).map(|i| start + i as f64 * step).collect(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("theta samples must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Far-field components `F = r·e^{jkr}·E` (volts) along a cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldCut {
    pub phi_deg: f64,
    pub theta_deg: Vec<f64>,
    pub e_theta: Vec<C>,
    pub e_phi: Vec<C>,
    pub frequency: f64,
    pub label: String,
}

impl FarFieldCut {
    pub fn zeros(spec: &CutSpec, frequency: f64, label: &str) -> Self {
        let n = spec.theta_deg.len();
        Self {
            phi_deg: spec.phi_deg,
            theta_deg: spec.theta_deg.clone(),
            e_theta: vec![C::new(0.0, 0.0); n],
            e_phi: vec![C::new(0.0, 0.0); n],
            frequency,
            label: label.to_string(),
        }
    }

    /// Adds `scale · other` sample by sample.
    pub fn add_scaled(&mut self, other: &FarFieldCut, scale: C) {
        for i in 0..self.e_theta.len() {
            self.e_theta[i] += other.e_theta[i] * scale;
            self.e_phi[i] += other.e_phi[i] * scale;
        }
    }
}

/// ∫_0^d e^{jxz} dz.
fn phase_integral(x: f64, d: f64) -> C {
    let xd = x * d;
    if xd.abs() < 1e-4 {
        d * C::new(1.0 - xd * xd / 6.0, xd / 2.0 - xd * xd * xd / 24.0)
    } else {
        (C::from_polar(1.0, xd) - 1.0) / C::new(0.0, x)
    }
}

/// Radiation integrals of the start and end pieces of a segment from `a`
/// to `b`, including the phase of the segment start: ∫ piece(z) e^{jk r̂·r(z)} dz.
fn piece_radiation(a: &Point, b: &Point, k: f64, rhat: &Point) -> (Point, [C; 2]) {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len = dot(&d, &d).sqrt();
    let t = [d[0] / len, d[1] / len, d[2] / len];
    let beta = k * dot(rhat, &t);
    let sin_kd = (k * len).sin();
    let pm = phase_integral(beta - k, len);
    let pp = phase_integral(beta + k, len);
    let two_j = C::new(0.0, 2.0);
    let start = (C::from_polar(1.0, k * len) * pm - C::from_polar(1.0, -k * len) * pp) / two_j / sin_kd;
    let end = (pp - pm) / two_j / sin_kd;
    let ph = C::from_polar(1.0, k * dot(rhat, a));
    (t, [start * ph, end * ph])
}

fn directions(theta: f64, phi: f64) -> (Point, Point, Point) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    (
        [st * cp, st * sp, ct],
        [ct * cp, ct * sp, -st],
        [-sp, cp, 0.0],
    )
}

/// Far field `(F_θ, F_φ)` of basis currents at direction (θ, φ) in radians.
/// Below an infinite ground plane the field is zero.
pub fn far_field_at(
    mesh: &Mesh,
    ground: Option<&GroundPlane>,
    currents: &CVector,
    k: f64,
    theta: f64,
    phi: f64,
) -> (C, C) {
    if ground.is_some() && theta > 0.5 * PI + 1e-12 {
        return (C::new(0.0, 0.0), C::new(0.0, 0.0));
    }
    let (rhat, th, ph) = directions(theta, phi);
    let mut seg_current = vec![[C::new(0.0, 0.0); 2]; mesh.segments.len()];
    for (bi, b) in mesh.basis.iter().enumerate() {
        seg_current[b.seg_before][1] += currents[bi];
        seg_current[b.seg_after][0] += currents[bi];
    }
    let mut n = [C::new(0.0, 0.0); 3];
    let mut accumulate = |start: Point, end: Point, sign: f64, cur: &[C; 2]| {
        let (t, p) = piece_radiation(&start, &end, k, &rhat);
        let amp = (cur[0] * p[0] + cur[1] * p[1]) * sign;
        for ax in 0..3 {
            n[ax] += amp * t[ax];
        }
    };
    for (s, seg) in mesh.segments.iter().enumerate() {
        let cur = seg_current[s];
        if cur[0].norm() == 0.0 && cur[1].norm() == 0.0 {
            continue;
        }
        accumulate(seg.start, seg.end, 1.0, &cur);
        if let Some(gp) = ground {
            accumulate(gp.mirror(&seg.start), gp.mirror(&seg.end), -1.0, &cur);
        }
    }
    let pref = C::new(0.0, -k * ETA0 / (4.0 * PI));
    let ft = pref * (n[0] * th[0] + n[1] * th[1] + n[2] * th[2]);
    let fp = pref * (n[0] * ph[0] + n[1] * ph[1] + n[2] * ph[2]);
    (ft, fp)
}

/// Far-field cut of basis currents on `geometry`.
pub fn radiate(
    currents: &CVector,
    geometry: &WireGeometry,
    frequency: f64,
    cut: &CutSpec,
    label: &str,
) -> Result<FarFieldCut> {
    let mesh = geometry.mesh()?;
    radiate_mesh(&mesh, geometry.ground_plane.as_ref(), currents, frequency, cut, label)
}

pub fn radiate_mesh(
    mesh: &Mesh,
    ground: Option<&GroundPlane>,
    currents: &CVector,
    frequency: f64,
    cut: &CutSpec,
    label: &str,
) -> Result<FarFieldCut> {
    if currents.len() != mesh.basis.len() {
        return Err(Error::Dimension(format!(
            "{} currents for {} basis functions",
            currents.len(),
            mesh.basis.len()
        )));
    }
    cut.validate()?;
    let k = wavenumber(frequency);
    let phi = cut.phi_deg.to_radians();
    let mut out = FarFieldCut::zeros(cut, frequency, label);
    for (i, th) in cut.theta_deg.iter().enumerate() {
        let (ft, fp) = far_field_at(mesh, ground, currents, k, th.to_radians(), phi);
        out.e_theta[i] = ft;
        out.e_phi[i] = fp;
    }
    Ok(out)
}

/// Gauss–Legendre in θ × uniform in φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereQuadrature {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self {
            n_theta: 64,
            n_phi: 128,
        }
    }
}

/// Radiated power `(1/2η)∮|F|² dΩ` in watts; only the upper half space
/// radiates when a ground plane is present.
pub fn radiated_power(
    mesh: &Mesh,
    ground: Option<&GroundPlane>,
    currents: &CVector,
    frequency: f64,
    quad: SphereQuadrature,
) -> f64 {
    let k = wavenumber(frequency);
    let theta_max = if ground.is_some() { 0.5 * PI } else { PI };
    let (x, w) = gauss_legendre(quad.n_theta);
    let dphi = 2.0 * PI / quad.n_phi as f64;
    let mut total = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let theta = 0.5 * theta_max * (xi + 1.0);
        let wt = wi * 0.5 * theta_max * theta.sin();
        for j in 0..quad.n_phi {
            let phi = j as f64 * dphi;
            let (ft, fp) = far_field_at(mesh, ground, currents, k, theta, phi);
            total += wt * dphi * (ft.norm_sqr() + fp.norm_sqr());
        }
    }
    total / (2.0 * ETA0)
}
