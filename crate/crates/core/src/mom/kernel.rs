//! Closed-form near field of a sinusoidal current filament and the Galerkin
//! interaction between two segments.
//!
//! A segment of length `d` carries two sinusoidal pieces: the start piece
//! `sin k(d − z)/sin kd` (unit current at the start node) and the end piece
//! `sin kz/sin kd` (unit current at the end node). Because these currents
//! satisfy `I'' = −k²I`, their fields reduce to endpoint terms. The reduced
//! thin-wire kernel places the source on the wire axis and evaluates at
//! `ρ_eff = sqrt(ρ² + a²)`.

use num_complex::Complex64;

use crate::geometry::{dot, scale, sub, Point, Segment, ETA0};
use crate::quadrature::integrate_adaptive;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Source-side view of one segment.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Filament {
    pub start: Point,
    pub dir: Point,
    pub len: f64,
    pub radius: f64,
    sin_kd: f64,
    cos_kd: f64,
}

impl Filament {
    pub fn new(start: Point, end: Point, radius: f64, k: f64) -> Self {
        let d = sub(&end, &start);
        let len = dot(&d, &d).sqrt();
        Self {
            start,
            dir: scale(&d, 1.0 / len),
            len,
            radius,
            sin_kd: (k * len).sin(),
            cos_kd: (k * len).cos(),
        }
    }

    pub fn from_segment(seg: &Segment, k: f64) -> Self {
        Self::new(seg.start, seg.end, seg.radius, k)
    }

    /// Electric field (complex 3-vectors) of the start and end pieces at `r`.
    pub fn field(&self, k: f64, r: &Point) -> [[C; 3]; 2] {
        let rel = sub(r, &self.start);
        let z = dot(&rel, &self.dir);
        let rho_vec = [
            rel[0] - z * self.dir[0],
            rel[1] - z * self.dir[1],
            rel[2] - z * self.dir[2],
        ];
        let rho2 = dot(&rho_vec, &rho_vec) + self.radius * self.radius;

        // Per-endpoint coefficients multiplying I and I' in the E_z and E_rho brackets.
        let endpoint = |zp: f64| {
            let u = z - zp;
            let r2 = rho2 + u * u;
            let rr = r2.sqrt();
            let e = C::from_polar(1.0, -k * rr);
            let jkr = C::new(1.0, k * rr);
            let a = e * jkr * (u / (r2 * rr));
            let b = -e / rr;
            let cr = e * C::new(rho2 / (r2 * rr), -k * u * u / r2);
            let dr = e * (u / rr);
            (a, b, cr, dr)
        };
        let (a0, b0, c0, d0) = endpoint(0.0);
        let (a1, b1, c1, d1) = endpoint(self.len);

        let ks = k / self.sin_kd;
        // (I(0), I'(0), I(d), I'(d)) for the start and end pieces.
        let pieces = [
            (1.0, -ks * self.cos_kd, 0.0, -ks),
            (0.0, ks, 1.0, ks * self.cos_kd),
        ];
        let pref = C::new(0.0, -ETA0 / (4.0 * std::f64::consts::PI * k));
        let mut out = [[ZERO; 3]; 2];
        for (p, &(i0, di0, i1, di1)) in pieces.iter().enumerate() {
            let ez = pref * (a1 * i1 + b1 * di1 - a0 * i0 - b0 * di0);
            let er = pref * (c1 * i1 + d1 * di1 - c0 * i0 - d0 * di0) / rho2;
            for ax in 0..3 {
                out[p][ax] = ez * self.dir[ax] + er * rho_vec[ax];
            }
        }
        out
    }
}

/// Galerkin interaction `P[a][b] = −∫ g_a(s) t_test · E_b ds` between the
/// pieces of a test segment and the pieces of a source filament.
pub(crate) fn interaction(test: &Filament, source: &Filament, k: f64, abs_tol: f64) -> [[C; 2]; 2] {
    let t = test.dir;
    let inv_sin = 1.0 / test.sin_kd;
    let d = test.len;
    let integrand = |s: f64| -> [C; 4] {
        let r = [
            test.start[0] + s * t[0],
            test.start[1] + s * t[1],
            test.start[2] + s * t[2],
        ];
        let e = source.field(k, &r);
        let g0 = (k * (d - s)).sin() * inv_sin;
        let g1 = (k * s).sin() * inv_sin;
        let et0 = e[0][0] * t[0] + e[0][1] * t[1] + e[0][2] * t[2];
        let et1 = e[1][0] * t[0] + e[1][1] * t[1] + e[1][2] * t[2];
        [-et0 * g0, -et1 * g0, -et0 * g1, -et1 * g1]
    };
    let v = integrate_adaptive(&integrand, 0.0, d, abs_tol, 40);
    [[v[0], v[1]], [v[2], v[3]]]
}
