//! Thin-wire EFIE method-of-moments kernel with piecewise-sinusoidal
//! Galerkin basis functions and an optional image-theory ground plane.

mod farfield;
pub(crate) mod kernel;

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wavenumber, Mesh, WireGeometry};
use crate::linalg::{frobenius, lu_solve_vec, CMatrix, CVector, C64};
use kernel::{interaction, Filament};

pub use farfield::{
    far_field_at, radiate, radiate_mesh, radiated_power, CutSpec, FarFieldCut, SphereQuadrature,
};

/// Default port reference impedance, ohms.
pub const DEFAULT_REFERENCE_IMPEDANCE: f64 = 50.0;

/// Contiguous range of basis functions owned by one element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSpan {
    pub element: usize,
    pub start: usize,
    pub len: usize,
}

impl ElementSpan {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// MoM impedance matrix (ohms) over basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceMatrix {
    pub entries: CMatrix,
    pub frequency: f64,
    /// `(k, l)` when this is the sub-block coupling element `l` into element `k`.
    pub block_index: Option<(usize, usize)>,
    /// Element partition of the rows (and columns) of a full matrix.
    pub spans: Vec<ElementSpan>,
}

impl ImpedanceMatrix {
    /// Wraps a bare matrix as a single-element impedance matrix.
    pub fn from_entries(entries: CMatrix, frequency: f64) -> Self {
        let n = entries.nrows();
        Self {
            entries,
            frequency,
            block_index: None,
            spans: vec![ElementSpan {
                element: 0,
                start: 0,
                len: n,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// ‖Z − Zᵀ‖_F / ‖Z‖_F.
    pub fn symmetry_residual(&self) -> f64 {
        let n = frobenius(&self.entries);
        if n == 0.0 {
            return 0.0;
        }
        frobenius(&(&self.entries - self.entries.transpose())) / n
    }

    fn span(&self, element: usize) -> Result<&ElementSpan> {
        self.spans
            .iter()
            .find(|s| s.element == element)
            .ok_or_else(|| Error::Index(format!("unknown element id {element}")))
    }

    /// Sub-block Z^(k,l): rows on element `k`, columns on element `l`.
    pub fn extract_block(&self, k: usize, l: usize) -> Result<ImpedanceMatrix> {
        if self.block_index.is_some() {
            return Err(Error::Index("cannot extract a block from a block".into()));
        }
        let rk = self.span(k)?.range();
        let rl = self.span(l)?.range();
        let entries = self
            .entries
            .view((rk.start, rl.start), (rk.len(), rl.len()))
            .into_owned();
        let spans = if k == l {
            vec![ElementSpan {
                element: k,
                start: 0,
                len: rk.len(),
            }]
        } else {
            Vec::new()
        };
        Ok(ImpedanceMatrix {
            entries,
            frequency: self.frequency,
            block_index: if k == l { None } else { Some((k, l)) },
            spans,
        })
    }
}

/// Element spans of a mesh (basis functions are element-contiguous).
pub fn element_spans(mesh: &Mesh) -> Vec<ElementSpan> {
    mesh.elements
        .iter()
        .map(|&e| {
            let idx = mesh.element_basis(e);
            ElementSpan {
                element: e,
                start: idx.first().copied().unwrap_or(0),
                len: idx.len(),
            }
        })
        .collect()
}

/// For each segment: basis index of its start piece and of its end piece.
fn piece_map(mesh: &Mesh) -> Vec<[Option<usize>; 2]> {
    let mut map = vec![[None, None]; mesh.segments.len()];
    for (bi, b) in mesh.basis.iter().enumerate() {
        map[b.seg_before][1] = Some(bi);
        map[b.seg_after][0] = Some(bi);
    }
    map
}

/// Absolute quadrature tolerance for one segment-pair interaction, ohms.
const PAIR_TOLERANCE: f64 = 1e-9;

/// Assembles the full impedance matrix of `geometry` at `frequency`.
///
/// Each unordered segment pair is integrated once and mirrored, so the
/// result is exactly symmetric. With a ground plane, the interaction with
/// each mirrored source segment is subtracted (image current `−R·J`).
pub fn assemble_impedance(geometry: &WireGeometry, frequency: f64) -> Result<ImpedanceMatrix> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::Geometry(format!("frequency must be positive, got {frequency}")));
    }
    let mesh = geometry.mesh()?;
    let k = wavenumber(frequency);
    let segs = &mesh.segments;
    let fil: Vec<Filament> = segs.iter().map(|s| Filament::from_segment(s, k)).collect();
    let images: Option<Vec<Filament>> = geometry.ground_plane.map(|gp| {
        segs.iter()
            .map(|s| Filament::new(gp.mirror(&s.start), gp.mirror(&s.end), s.radius, k))
            .collect()
    });

    let pairs: Vec<(usize, usize)> = (0..segs.len())
        .flat_map(|i| (i..segs.len()).map(move |j| (i, j)))
        .collect();
    let blocks: Vec<[[C64; 2]; 2]> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut p = interaction(&fil[i], &fil[j], k, PAIR_TOLERANCE);
            if let Some(img) = &images {
                let q = interaction(&fil[i], &img[j], k, PAIR_TOLERANCE);
                for a in 0..2 {
                    for b in 0..2 {
                        p[a][b] -= q[a][b];
                    }
                }
            }
            if i == j {
                let off = 0.5 * (p[0][1] + p[1][0]);
                p[0][1] = off;
                p[1][0] = off;
            }
            p
        })
        .collect();

    let map = piece_map(&mesh);
    let n = mesh.basis.len();
    let mut z = CMatrix::zeros(n, n);
    for (&(i, j), p) in pairs.iter().zip(&blocks) {
        for a in 0..2 {
            let Some(bm) = map[i][a] else { continue };
            for b in 0..2 {
                let Some(bn) = map[j][b] else { continue };
                z[(bm, bn)] += p[a][b];
                if i != j {
                    z[(bn, bm)] += p[a][b];
                }
            }
        }
    }
    Ok(ImpedanceMatrix {
        entries: z,
        frequency,
        block_index: None,
        spans: element_spans(&mesh),
    })
}

/// Result of driving the ports of a structure with incident power waves.
#[derive(Debug, Clone)]
pub struct PortSolution {
    /// Basis-function currents, amperes.
    pub currents: CVector,
    /// Reflected power waves at each port.
    pub reflected: CVector,
    /// Gap current at each port.
    pub port_currents: CVector,
}

/// Solves the port-loaded system. Port `p` is a Thevenin source with
/// open-circuit voltage `2·v_p·sqrt(Z_ref)` behind `Z_ref`; the reflected
/// power wave is `w_p = v_p − sqrt(Z_ref)·I_gap,p`.
pub fn port_drive_solve(
    z: &ImpedanceMatrix,
    port_basis: &[usize],
    incident: &CVector,
    reference_impedance: f64,
) -> Result<PortSolution> {
    if incident.len() != port_basis.len() {
        return Err(Error::Dimension(format!(
            "{} incident waves for {} ports",
            incident.len(),
            port_basis.len()
        )));
    }
    if !(reference_impedance > 0.0) {
        return Err(Error::Constraint(format!(
            "reference impedance must be positive, got {reference_impedance}"
        )));
    }
    let n = z.dim();
    if let Some(&bad) = port_basis.iter().find(|&&b| b >= n) {
        return Err(Error::Index(format!("port basis index {bad} out of range {n}")));
    }
    let sq = reference_impedance.sqrt();
    let mut loaded = z.entries.clone();
    let mut rhs = CVector::zeros(n);
    for (p, &b) in port_basis.iter().enumerate() {
        loaded[(b, b)] += C64::new(reference_impedance, 0.0);
        rhs[b] += incident[p] * (2.0 * sq);
    }
    let currents = lu_solve_vec(&loaded, &rhs, "port-loaded MoM system")?;
    let port_currents = CVector::from_iterator(port_basis.len(), port_basis.iter().map(|&b| currents[b]));
    let reflected = incident - &port_currents * C64::new(sq, 0.0);
    Ok(PortSolution {
        currents,
        reflected,
        port_currents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dipole, wavelength, Port};

    fn dipole_geometry(len_wl: f64, segs: usize) -> (WireGeometry, f64) {
        let f = 300e6;
        let lam = wavelength(f);
        let (w, p) = dipole(0, [0.0; 3], [0.0, 0.0, 1.0], len_wl * lam, lam / 1000.0, segs).unwrap();
        (WireGeometry::new(vec![w], vec![Port { element: 0, segment: p }], None), f)
    }

    #[test]
    fn single_entry_reciprocity_within_quadrature() {
        // Compute one off-diagonal segment interaction both ways.
        let f = 300e6;
        let k = wavenumber(f);
        let a = Filament::new([0.0, 0.0, 0.0], [0.0, 0.0, 0.05], 1e-3, k);
        let b = Filament::new([0.02, 0.03, 0.04], [0.06, 0.05, 0.04], 1e-3, k);
        let ab = interaction(&a, &b, k, 1e-12);
        let ba = interaction(&b, &a, k, 1e-12);
        for x in 0..2 {
            for y in 0..2 {
                let d = (ab[x][y] - ba[y][x]).norm();
                assert!(d < 1e-6 * ab[x][y].norm().max(1e-3), "{} vs {}", ab[x][y], ba[y][x]);
            }
        }
    }

    #[test]
    fn self_block_equals_whole_for_single_element() {
        let (g, f) = dipole_geometry(0.47, 10);
        let z = assemble_impedance(&g, f).unwrap();
        let b = z.extract_block(0, 0).unwrap();
        assert_eq!(b.entries, z.entries);
        assert!(matches!(z.extract_block(0, 3), Err(Error::Index(_))));
    }

    #[test]
    fn zero_drive_gives_zero_current() {
        let (g, f) = dipole_geometry(0.47, 10);
        let z = assemble_impedance(&g, f).unwrap();
        let mesh = g.mesh().unwrap();
        let sol = port_drive_solve(&z, &mesh.port_basis, &CVector::zeros(1), 50.0).unwrap();
        assert!(sol.currents.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn passive_reflection() {
        let (g, f) = dipole_geometry(0.47, 10);
        let z = assemble_impedance(&g, f).unwrap();
        let mesh = g.mesh().unwrap();
        let v = CVector::from_element(1, C64::new(1.0, 0.0));
        let sol = port_drive_solve(&z, &mesh.port_basis, &v, 50.0).unwrap();
        assert!(sol.reflected[0].norm() <= 1.0);
    }

    #[test]
    fn port_drive_dimension_checks() {
        let (g, f) = dipole_geometry(0.47, 10);
        let z = assemble_impedance(&g, f).unwrap();
        let mesh = g.mesh().unwrap();
        let v = CVector::zeros(2);
        assert!(matches!(
            port_drive_solve(&z, &mesh.port_basis, &v, 50.0),
            Err(Error::Dimension(_))
        ));
        let v = CVector::zeros(1);
        assert!(port_drive_solve(&z, &mesh.port_basis, &v, 0.0).is_err());
    }

    #[test]
    fn nonpositive_frequency_rejected() {
        let (g, _) = dipole_geometry(0.47, 10);
        assert!(assemble_impedance(&g, 0.0).is_err());
    }
}
