//! Thin-wire geometry: wires, segments, delta-gap ports and the optional
//! infinite PEC ground plane.
//!
//! A wire is a polyline of straight segments sharing one radius. Current
//! vanishes at the free ends of every wire; each interior node carries one
//! piecewise-sinusoidal basis function spanning its two adjacent segments.
//! Wires never connect to each other, so two wires may cross at a common
//! point without forming a junction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;
/// Free-space wave impedance, ohms.
pub const ETA0: f64 = 376.730_313_412;

pub fn wavelength(frequency: f64) -> f64 {
    C0 / frequency
}

pub fn wavenumber(frequency: f64) -> f64 {
    2.0 * std::f64::consts::PI * frequency / C0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wire {
    pub element: usize,
    pub radius: f64,
    /// Polyline vertices in meters; `n` vertices make `n - 1` segments.
    pub nodes: Vec<Point>,
}

/// Delta-gap feed. The gap sits at the node at the end of `segment`, where
/// `segment` counts the element's segments in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub element: usize,
    pub segment: usize,
}

/// Infinite perfectly conducting plane `z = height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub height: f64,
}

impl GroundPlane {
    pub fn mirror(&self, p: &Point) -> Point {
        [p[0], p[1], 2.0 * self.height - p[2]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireGeometry {
    pub wires: Vec<Wire>,
    #[serde(default)]
    pub ports: Vec<Port>,
    #[serde(default)]
    pub ground_plane: Option<GroundPlane>,
}

/// One straight segment after flattening the wires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
    pub radius: f64,
    pub element: usize,
    pub wire: usize,
}

impl Segment {
    pub fn length(&self) -> f64 {
        norm(&sub(&self.end, &self.start))
    }

    pub fn direction(&self) -> Point {
        let d = sub(&self.end, &self.start);
        scale(&d, 1.0 / norm(&d))
    }

    pub fn midpoint(&self) -> Point {
        scale(&add(&self.start, &self.end), 0.5)
    }
}

/// Piecewise-sinusoidal basis function on the node between `seg_before`
/// (where it rises to 1 at the segment end) and `seg_after` (where it falls
/// from 1 at the segment start).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisFunction {
    pub seg_before: usize,
    pub seg_after: usize,
    pub element: usize,
}

/// Flattened discretization: segments, basis functions and port basis indices.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub segments: Vec<Segment>,
    pub basis: Vec<BasisFunction>,
    /// Basis index of each port, in port order.
    pub port_basis: Vec<usize>,
    /// Sorted element ids present in the geometry.
    pub elements: Vec<usize>,
}

impl Mesh {
    /// Global basis indices owned by `element`, ascending.
    pub fn element_basis(&self, element: usize) -> Vec<usize> {
        self.basis
            .iter()
            .enumerate()
            .filter(|(_, b)| b.element == element)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of ports that belong to `element`, in port order.
    pub fn element_ports(&self, geometry: &WireGeometry, element: usize) -> Vec<usize> {
        geometry
            .ports
            .iter()
            .enumerate()
            .filter(|(_, p)| p.element == element)
            .map(|(i, _)| i)
            .collect()
    }
}

impl WireGeometry {
    pub fn new(wires: Vec<Wire>, ports: Vec<Port>, ground_plane: Option<GroundPlane>) -> Self {
        Self {
            wires,
            ports,
            ground_plane,
        }
    }

    /// Sorted, de-duplicated element ids.
    pub fn element_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.wires.iter().map(|w| w.element).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn validate(&self) -> Result<()> {
        if self.wires.is_empty() {
            return Err(Error::Geometry("geometry has no wires".into()));
        }
        for (wi, w) in self.wires.iter().enumerate() {
            if w.nodes.len() < 2 {
                return Err(Error::Geometry(format!("wire {wi} has fewer than two nodes")));
            }
            if !(w.radius > 0.0) || !w.radius.is_finite() {
                return Err(Error::Geometry(format!("wire {wi} has non-positive radius")));
            }
            for (si, pair) in w.nodes.windows(2).enumerate() {
                if pair.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::Geometry(format!("wire {wi} has non-finite coordinates")));
                }
                let len = norm(&sub(&pair[1], &pair[0]));
                if len <= 0.0 {
                    return Err(Error::Geometry(format!(
                        "wire {wi} segment {si} has zero length"
                    )));
                }
                if w.radius >= len {
                    return Err(Error::Geometry(format!(
                        "wire {wi} segment {si}: radius {} not below segment length {len}",
                        w.radius
                    )));
                }
            }
            if let Some(gp) = &self.ground_plane {
                for p in &w.nodes {
                    if p[2] - gp.height <= w.radius {
                        return Err(Error::Geometry(format!(
                            "wire {wi} touches or crosses the ground plane z = {}",
                            gp.height
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Validates the geometry and flattens it into segments and basis functions.
    pub fn mesh(&self) -> Result<Mesh> {
        self.validate()?;
        let mut segments = Vec::new();
        let mut basis = Vec::new();
        // (element, element-local segment index) -> (global segment, is last of wire)
        let mut local_index: Vec<(usize, usize, usize, bool)> = Vec::new();
        let mut per_element_count = std::collections::BTreeMap::<usize, usize>::new();
        for (wi, w) in self.wires.iter().enumerate() {
            let first = segments.len();
            let nseg = w.nodes.len() - 1;
            for s in 0..nseg {
                segments.push(Segment {
                    start: w.nodes[s],
                    end: w.nodes[s + 1],
                    radius: w.radius,
                    element: w.element,
                    wire: wi,
                });
                let counter = per_element_count.entry(w.element).or_insert(0);
                local_index.push((w.element, *counter, first + s, s + 1 == nseg));
                *counter += 1;
            }
            for s in 0..nseg.saturating_sub(1) {
                basis.push(BasisFunction {
                    seg_before: first + s,
                    seg_after: first + s + 1,
                    element: w.element,
                });
            }
        }
        // Stable element-major basis order so every element's unknowns are contiguous.
        basis.sort_by_key(|b| (b.element, b.seg_before));

        let mut port_basis = Vec::with_capacity(self.ports.len());
        for (pi, port) in self.ports.iter().enumerate() {
            let entry = local_index
                .iter()
                .find(|(e, l, _, _)| *e == port.element && *l == port.segment)
                .ok_or_else(|| {
                    Error::Geometry(format!(
                        "port {pi} references missing segment {} of element {}",
                        port.segment, port.element
                    ))
                })?;
            if entry.3 {
                return Err(Error::Geometry(format!(
                    "port {pi} sits at a free wire end (no current there)"
                )));
            }
            let global = entry.2;
            let bi = basis
                .iter()
                .position(|b| b.seg_before == global)
                .expect("interior node always carries a basis function");
            if port_basis.contains(&bi) {
                return Err(Error::Geometry(format!("port {pi} duplicates another port")));
            }
            port_basis.push(bi);
        }
        Ok(Mesh {
            segments,
            basis,
            port_basis,
            elements: self.element_ids(),
        })
    }

    /// Sub-geometry containing only `element` (ports and ground plane kept).
    pub fn element_geometry(&self, element: usize) -> Result<WireGeometry> {
        let wires: Vec<Wire> = self
            .wires
            .iter()
            .filter(|w| w.element == element)
            .cloned()
            .collect();
        if wires.is_empty() {
            return Err(Error::Index(format!("unknown element id {element}")));
        }
        let ports = self
            .ports
            .iter()
            .filter(|p| p.element == element)
            .copied()
            .collect();
        Ok(WireGeometry {
            wires,
            ports,
            ground_plane: self.ground_plane,
        })
    }

    /// Copy without ports (the portless scatterer).
    pub fn without_ports(&self) -> WireGeometry {
        WireGeometry {
            wires: self.wires.clone(),
            ports: Vec::new(),
            ground_plane: self.ground_plane,
        }
    }

    pub fn translated(&self, offset: Point) -> WireGeometry {
        let mut g = self.clone();
        for w in &mut g.wires {
            for p in &mut w.nodes {
                *p = add(p, &offset);
            }
        }
        g
    }

    /// Concatenates geometries; element ids are renumbered by their position
    /// in `parts` (part `k` becomes element `k`). Ground planes must agree.
    pub fn combine(parts: &[WireGeometry]) -> Result<WireGeometry> {
        let mut out = WireGeometry {
            wires: Vec::new(),
            ports: Vec::new(),
            ground_plane: parts.first().and_then(|p| p.ground_plane),
        };
        for (k, part) in parts.iter().enumerate() {
            if part.ground_plane != out.ground_plane {
                return Err(Error::Geometry("combined parts disagree on ground plane".into()));
            }
            for w in &part.wires {
                out.wires.push(Wire {
                    element: k,
                    ..w.clone()
                });
            }
            for p in &part.ports {
                out.ports.push(Port {
                    element: k,
                    segment: p.segment,
                });
            }
        }
        Ok(out)
    }
}

/// Straight wire from `start` to `end` split into `segments` equal pieces.
pub fn straight_wire(element: usize, start: Point, end: Point, segments: usize, radius: f64) -> Wire {
    let nodes = (0..=segments)
        .map(|i| {
            let t = i as f64 / segments as f64;
            [
                start[0] + t * (end[0] - start[0]),
                start[1] + t * (end[1] - start[1]),
                start[2] + t * (end[2] - start[2]),
            ]
        })
        .collect();
    Wire {
        element,
        radius,
        nodes,
    }
}

/// Center-fed straight dipole along `axis` (unit vector) centered at `center`.
/// `segments` must be even so that a node sits at the feed.
pub fn dipole(
    element: usize,
    center: Point,
    axis: Point,
    length: f64,
    radius: f64,
    segments: usize,
) -> Result<(Wire, usize)> {
    if segments < 2 || segments % 2 != 0 {
        return Err(Error::Geometry(format!(
            "center-fed dipole needs an even segment count, got {segments}"
        )));
    }
    let half = scale(&axis, 0.5 * length / norm(&axis));
    let wire = straight_wire(element, sub(&center, &half), add(&center, &half), segments, radius);
    Ok((wire, segments / 2 - 1))
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dipole() -> WireGeometry {
        let (w, port) = dipole(0, [0.0; 3], [0.0, 0.0, 1.0], 0.5, 1e-3, 10).unwrap();
        WireGeometry::new(vec![w], vec![Port { element: 0, segment: port }], None)
    }

    #[test]
    fn dipole_mesh_counts() {
        let m = one_dipole().mesh().unwrap();
        assert_eq!(m.segments.len(), 10);
        assert_eq!(m.basis.len(), 9);
        // feed at the center node -> middle basis function
        assert_eq!(m.port_basis, vec![4]);
    }

    #[test]
    fn zero_length_segment_rejected() {
        let w = Wire {
            element: 0,
            radius: 1e-3,
            nodes: vec![[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]],
        };
        let g = WireGeometry::new(vec![w], vec![], None);
        assert!(matches!(g.mesh(), Err(Error::Geometry(_))));
    }

    #[test]
    fn thick_wire_rejected() {
        let w = straight_wire(0, [0.0; 3], [0.0, 0.0, 0.1], 10, 0.02);
        let g = WireGeometry::new(vec![w], vec![], None);
        assert!(matches!(g.validate(), Err(Error::Geometry(_))));
    }

    #[test]
    fn wire_touching_ground_rejected() {
        let w = straight_wire(0, [0.0, 0.0, 0.0], [0.0, 0.0, 0.5], 10, 1e-3);
        let g = WireGeometry::new(vec![w], vec![], Some(GroundPlane { height: 0.0 }));
        assert!(matches!(g.validate(), Err(Error::Geometry(_))));
    }

    #[test]
    fn port_on_missing_segment_rejected() {
        let mut g = one_dipole();
        g.ports[0].segment = 42;
        assert!(matches!(g.mesh(), Err(Error::Geometry(_))));
        g.ports[0].segment = 9;
        assert!(matches!(g.mesh(), Err(Error::Geometry(_))));
    }

    #[test]
    fn odd_segment_dipole_rejected() {
        assert!(dipole(0, [0.0; 3], [1.0, 0.0, 0.0], 0.5, 1e-3, 9).is_err());
    }
}
