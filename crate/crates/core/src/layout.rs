//! Builtin wire layouts. Dimensions are given in wavelengths at the design
//! frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dipole, wavelength, GroundPlane, Point, Port, Wire, WireGeometry};

/// Two parallel center-fed dipoles along z, spaced along x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DipolePairSpec {
    pub spacing_wl: f64,
    pub length_wl: f64,
    pub radius_wl: f64,
    pub segments: usize,
}

impl Default for DipolePairSpec {
    fn default() -> Self {
        Self {
            spacing_wl: 0.56,
            length_wl: 0.47,
            radius_wl: 1e-3,
            segments: 20,
        }
    }
}

impl DipolePairSpec {
    pub fn geometry(&self, frequency: f64) -> Result<WireGeometry> {
        check_positive(&[
            ("spacing_wl", self.spacing_wl),
            ("length_wl", self.length_wl),
            ("radius_wl", self.radius_wl),
        ])?;
        let lam = wavelength(frequency);
        let mut wires = Vec::new();
        let mut ports = Vec::new();
        for k in 0..2 {
            let center = [k as f64 * self.spacing_wl * lam, 0.0, 0.0];
            let (w, p) = dipole(
                k,
                center,
                [0.0, 0.0, 1.0],
                self.length_wl * lam,
                self.radius_wl * lam,
                self.segments,
            )?;
            wires.push(w);
            ports.push(Port { element: k, segment: p });
        }
        let g = WireGeometry::new(wires, ports, None);
        g.validate()?;
        Ok(g)
    }
}

/// Rectangular grid of crossed dipoles above an infinite ground plane.
///
/// Each element is an x-directed dipole and a slightly shorter y-directed
/// dipole crossing at a common center without a junction, each with its own
/// center feed (port 0 on x, port 1 on y). The length difference separates
/// the two fundamental modes so that mode 1 is the x dipole, which sits
/// closest to resonance. The default low ground height keeps inter-element
/// coupling moderate, comparable to a patch on a thin substrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossedGridSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing_wl: f64,
    pub x_length_wl: f64,
    pub y_length_wl: f64,
    pub radius_wl: f64,
    /// Segments per dipole (even).
    pub segments: usize,
    /// Height of the dipoles above the ground plane; `None` removes the plane.
    pub ground_height_wl: Option<f64>,
}

impl Default for CrossedGridSpec {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 3,
            spacing_wl: 0.56,
            x_length_wl: 0.465,
            y_length_wl: 0.45,
            radius_wl: 1e-3,
            segments: 20,
            ground_height_wl: Some(0.1),
        }
    }
}

impl CrossedGridSpec {
    /// A single crossed dipole in free space.
    pub fn single() -> Self {
        Self {
            rows: 1,
            cols: 1,
            ground_height_wl: None,
            ..Self::default()
        }
    }

    pub fn element_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn geometry(&self, frequency: f64) -> Result<WireGeometry> {
        check_positive(&[
            ("spacing_wl", self.spacing_wl),
            ("x_length_wl", self.x_length_wl),
            ("y_length_wl", self.y_length_wl),
            ("radius_wl", self.radius_wl),
        ])?;
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("grid needs at least one row and column".into()));
        }
        let lam = wavelength(frequency);
        let height = match self.ground_height_wl {
            Some(h) if h > 0.0 => h * lam,
            Some(h) => return Err(Error::Config(format!("ground_height_wl must be positive, got {h}"))),
            None => 0.0,
        };
        let mut wires = Vec::new();
        let mut ports = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let k = r * self.cols + c;
                let center: Point = [
                    c as f64 * self.spacing_wl * lam,
                    r as f64 * self.spacing_wl * lam,
                    height,
                ];
                let (w, p) = crossed_dipole(k, center, self, lam)?;
                wires.extend(w);
                ports.extend(p);
            }
        }
        let ground = self.ground_height_wl.map(|_| GroundPlane { height: 0.0 });
        let g = WireGeometry::new(wires, ports, ground);
        g.validate()?;
        Ok(g)
    }
}

fn crossed_dipole(element: usize, center: Point, spec: &CrossedGridSpec, lam: f64) -> Result<(Vec<Wire>, Vec<Port>)> {
    let radius = spec.radius_wl * lam;
    let (wx, px) = dipole(element, center, [1.0, 0.0, 0.0], spec.x_length_wl * lam, radius, spec.segments)?;
    let (wy, py) = dipole(element, center, [0.0, 1.0, 0.0], spec.y_length_wl * lam, radius, spec.segments)?;
    Ok((
        vec![wx, wy],
        vec![
            Port { element, segment: px },
            Port {
                element,
                segment: spec.segments + py,
            },
        ],
    ))
}

fn check_positive(fields: &[(&str, f64)]) -> Result<()> {
    for (name, v) in fields {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}
