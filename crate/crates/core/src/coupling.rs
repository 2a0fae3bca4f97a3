//! Inter-element modal coupling and plane-wave modal incidence.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wavenumber, ETA0};
use crate::io::{read_matrix, write_matrix};
use crate::linalg::{c, to_complex, CMatrix, CVector, C64};
use crate::modal::CharacteristicBasis;
use crate::mom::{far_field_at, ImpedanceMatrix};

/// `G^(k,l) = ½·I_CM^(k)ᵀ·Z^(k,l)·I_CM^(l)`.
pub fn coupling_block(
    basis_k: &CharacteristicBasis,
    basis_l: &CharacteristicBasis,
    z_kl: &ImpedanceMatrix,
) -> Result<CMatrix> {
    let (rk, rl) = (basis_k.eigencurrents.nrows(), basis_l.eigencurrents.nrows());
    if z_kl.entries.shape() != (rk, rl) {
        return Err(Error::Dimension(format!(
            "impedance block is {}x{}, bases have {rk} and {rl} rows",
            z_kl.entries.nrows(),
            z_kl.entries.ncols()
        )));
    }
    let ik = to_complex(&basis_k.eigencurrents);
    let il = to_complex(&basis_l.eigencurrents);
    Ok(ik.transpose() * &z_kl.entries * il * c(0.5, 0.0))
}

/// Block matrix `G`; elements are indexed by position `0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalCouplingMatrix {
    pub mode_counts: Vec<usize>,
    /// Off-diagonal blocks `(k, l) → G^(k,l)`, `k ≠ l`.
    pub blocks: BTreeMap<(usize, usize), CMatrix>,
}

impl ModalCouplingMatrix {
    /// No coupling between `mode_counts.len()` elements.
    pub fn uncoupled(mode_counts: Vec<usize>) -> Self {
        Self {
            mode_counts,
            blocks: BTreeMap::new(),
        }
    }

    pub fn from_blocks(mode_counts: Vec<usize>, blocks: BTreeMap<(usize, usize), CMatrix>) -> Result<Self> {
        let k = mode_counts.len();
        for (&(a, b), m) in &blocks {
            if a == b || a >= k || b >= k {
                return Err(Error::Index(format!("invalid coupling block ({a}, {b}) for {k} elements")));
            }
            if m.shape() != (mode_counts[a], mode_counts[b]) {
                return Err(Error::Dimension(format!(
                    "block ({a}, {b}) is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    mode_counts[a],
                    mode_counts[b]
                )));
            }
        }
        Ok(Self { mode_counts, blocks })
    }

    /// Splits a dense `G`; diagonal blocks are ignored.
    pub fn from_dense(mode_counts: Vec<usize>, g: &CMatrix) -> Result<Self> {
        let total: usize = mode_counts.iter().sum();
        if g.shape() != (total, total) {
            return Err(Error::Dimension(format!("dense coupling must be {total}x{total}")));
        }
        let offsets = offsets(&mode_counts);
        let mut blocks = BTreeMap::new();
        for k in 0..mode_counts.len() {
            for l in 0..mode_counts.len() {
                if k != l {
                    let b = g
                        .view((offsets[k], offsets[l]), (mode_counts[k], mode_counts[l]))
                        .into_owned();
                    blocks.insert((k, l), b);
                }
            }
        }
        Ok(Self { mode_counts, blocks })
    }

    pub fn element_count(&self) -> usize {
        self.mode_counts.len()
    }

    pub fn total_modes(&self) -> usize {
        self.mode_counts.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        offsets(&self.mode_counts)
    }

    /// `G^(k,l)`, zero for `k = l` or absent blocks.
    pub fn block(&self, k: usize, l: usize) -> CMatrix {
        self.blocks
            .get(&(k, l))
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(self.mode_counts[k], self.mode_counts[l]))
    }

    pub fn dense(&self) -> CMatrix {
        let n = self.total_modes();
        let off = self.offsets();
        let mut g = CMatrix::zeros(n, n);
        for (&(k, l), b) in &self.blocks {
            g.view_mut((off[k], off[l]), b.shape()).copy_from(b);
        }
        g
    }

    /// Largest `‖G^(l,k) − G^(k,l)ᵀ‖_F` over all pairs.
    pub fn transpose_residual(&self) -> f64 {
        let k = self.element_count();
        let mut worst = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    worst = worst.max((self.block(b, a) - self.block(a, b).transpose()).norm());
                }
            }
        }
        worst
    }
}

fn offsets(counts: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(counts.len());
    let mut acc = 0;
    for n in counts {
        out.push(acc);
        acc += n;
    }
    out
}

/// Builds all off-diagonal blocks from the full-array impedance matrix.
/// `bases[k]` must describe the element with id `bases[k].element`.
pub fn assemble_coupling(bases: &[CharacteristicBasis], z: &ImpedanceMatrix) -> Result<ModalCouplingMatrix> {
    for b in bases {
        let span = z
            .spans
            .iter()
            .find(|s| s.element == b.element)
            .ok_or_else(|| Error::Index(format!("element {} not in impedance matrix", b.element)))?;
        if span.len != b.eigencurrents.nrows() {
            return Err(Error::Dimension(format!(
                "element {} has {} basis functions in Z but {} in its modes",
                b.element,
                span.len,
                b.eigencurrents.nrows()
            )));
        }
    }
    let k = bases.len();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (0..k).filter(move |b| *b != a).map(move |b| (a, b)))
        .collect();
    let blocks: Vec<Result<CMatrix>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let zab = z.extract_block(bases[a].element, bases[b].element)?;
            coupling_block(&bases[a], &bases[b], &zab)
        })
        .collect();
    let mut map = BTreeMap::new();
    for (pair, block) in pairs.into_iter().zip(blocks) {
        map.insert(pair, block?);
    }
    Ok(ModalCouplingMatrix {
        mode_counts: bases.iter().map(|b| b.mode_count()).collect(),
        blocks: map,
    })
}

/// Plane wave `E(r) = (e_θ·θ̂ + e_φ·φ̂)·e^{jk·r̂·r}` arriving from direction
/// `r̂(θ, φ)` (angles in degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub e_theta: C64,
    pub e_phi: C64,
}

/// `a_n = −½·∫ J_n·E_inc dl` for each mode of the element.
///
/// The integral equals the modal radiation vector in the arrival direction,
/// so it is evaluated with the closed-form far-field integrals (including the
/// ground-plane image when present).
pub fn external_incidence(basis: &CharacteristicBasis, wave: &PlaneWave) -> Result<CVector> {
    let geometry = basis
        .geometry
        .as_ref()
        .ok_or_else(|| Error::Config("characteristic basis has no geometry attached".into()))?;
    let mesh = geometry.mesh()?;
    if mesh.basis.len() != basis.eigencurrents.nrows() {
        return Err(Error::Dimension("basis geometry does not match eigencurrents".into()));
    }
    let k = wavenumber(basis.frequency);
    let pref = c(0.0, -k * ETA0 / (4.0 * PI));
    let (theta, phi) = (wave.theta_deg.to_radians(), wave.phi_deg.to_radians());
    let mut a = CVector::zeros(basis.mode_count());
    for n in 0..basis.mode_count() {
        let cur = basis.mode_current(n)?;
        let (ft, fp) = far_field_at(&mesh, geometry.ground_plane.as_ref(), &cur, k, theta, phi);
        a[n] = -0.5 * (wave.e_theta * ft + wave.e_phi * fp) / pref;
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingBlockRecord {
    pub k: usize,
    pub l: usize,
    pub matrix: String,
}

/// JSON index of a coupling matrix with matrix-format blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub element_count: usize,
    pub mode_counts: Vec<usize>,
    pub frequency_hz: f64,
    pub blocks: Vec<CouplingBlockRecord>,
}

impl CouplingRecord {
    pub fn from_matrix(g: &ModalCouplingMatrix, frequency: f64) -> Self {
        Self {
            element_count: g.element_count(),
            mode_counts: g.mode_counts.clone(),
            frequency_hz: frequency,
            blocks: g
                .blocks
                .iter()
                .map(|(&(k, l), m)| CouplingBlockRecord {
                    k,
                    l,
                    matrix: write_matrix(m, frequency),
                })
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<ModalCouplingMatrix> {
        if self.mode_counts.len() != self.element_count {
            return Err(Error::Parse("mode_counts length differs from element_count".into()));
        }
        let mut blocks = BTreeMap::new();
        for b in &self.blocks {
            blocks.insert((b.k, b.l), read_matrix(&b.matrix)?.0);
        }
        ModalCouplingMatrix::from_blocks(self.mode_counts.clone(), blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_blocks_agree() {
        let g = CMatrix::from_fn(5, 5, |i, j| c(i as f64, j as f64));
        let m = ModalCouplingMatrix::from_dense(vec![2, 3], &g).unwrap();
        let d = m.dense();
        for i in 0..5 {
            for j in 0..5 {
                let same_block = (i < 2) == (j < 2);
                let expect = if same_block { c(0.0, 0.0) } else { g[(i, j)] };
                assert_eq!(d[(i, j)], expect);
            }
        }
        assert_eq!(m.block(0, 0), CMatrix::zeros(2, 2));
    }

    #[test]
    fn invalid_blocks_rejected() {
        let mut b = BTreeMap::new();
        b.insert((0, 0), CMatrix::zeros(2, 2));
        assert!(ModalCouplingMatrix::from_blocks(vec![2, 2], b).is_err());
        let mut b = BTreeMap::new();
        b.insert((0, 1), CMatrix::zeros(2, 3));
        assert!(ModalCouplingMatrix::from_blocks(vec![2, 2], b).is_err());
    }

    #[test]
    fn record_round_trip() {
        let g = CMatrix::from_fn(4, 4, |i, j| c(0.1 * i as f64, -(j as f64) / 3.0));
        let m = ModalCouplingMatrix::from_dense(vec![2, 2], &g).unwrap();
        let rec = CouplingRecord::from_matrix(&m, 1e9);
        assert_eq!(rec.to_matrix().unwrap(), m);
    }
}
