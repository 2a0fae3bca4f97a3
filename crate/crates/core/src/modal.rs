//! Characteristic-mode decomposition of an element impedance matrix.
//!
//! Modes solve `Im{Z0}·I = Re{Z0}·I·λ`, normalized so that
//! `I_CMᵀ·Re{Z0}·I_CM = I` (each mode radiates 0.5 W). Modes are ordered by
//! `|λ|` ascending, ties broken by signed `λ` and then by the sign of the first
//! nonzero entry; each eigencurrent is signed so that its largest-magnitude
//! entry is positive.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WireGeometry;
use crate::linalg::{frobenius_real, imag_part, real_part, CVector, RMatrix, RVector, C64};
use crate::mom::{radiate, CutSpec, FarFieldCut, ImpedanceMatrix};

/// Relative symmetry tolerance accepted for an input impedance matrix.
const SYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicBasis {
    /// Columns are modes, rows are basis functions.
    pub eigencurrents: RMatrix,
    pub eigenvalues: RVector,
    pub element: usize,
    pub frequency: f64,
    /// Diagonal shift applied to Re{Z0} before factoring (0 when none).
    pub regularization: f64,
    /// Number of basis functions (= number of available modes).
    pub dimension: usize,
    /// Element geometry used for mode far fields.
    pub geometry: Option<WireGeometry>,
}

/// Ordering metadata written alongside the eigencurrents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSidecar {
    pub element: usize,
    pub frequency_hz: f64,
    pub eigenvalues: Vec<f64>,
    pub dimension: usize,
    pub regularization: f64,
    pub ordering: String,
    pub sign_convention: String,
}

pub const ORDERING_RULE: &str = "|lambda| ascending, then lambda ascending, then first nonzero entry sign";
pub const SIGN_RULE: &str = "largest-magnitude entry positive";

impl CharacteristicBasis {
    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn with_geometry(mut self, geometry: WireGeometry) -> Self {
        self.geometry = Some(geometry);
        self
    }

    /// Eigencurrent `n` as a complex current vector.
    pub fn mode_current(&self, n: usize) -> Result<CVector> {
        if n >= self.mode_count() {
            return Err(Error::Index(format!(
                "mode {n} out of range ({} modes)",
                self.mode_count()
            )));
        }
        Ok(self.eigencurrents.column(n).map(|x| C64::new(x, 0.0)))
    }

    /// Currents `I_CM·f` for modal coefficients `f`.
    pub fn currents(&self, coefficients: &CVector) -> Result<CVector> {
        if coefficients.len() != self.mode_count() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} modes",
                coefficients.len(),
                self.mode_count()
            )));
        }
        let mut out = CVector::zeros(self.eigencurrents.nrows());
        for (n, f) in coefficients.iter().enumerate() {
            for (i, x) in self.eigencurrents.column(n).iter().enumerate() {
                out[i] += f * *x;
            }
        }
        Ok(out)
    }

    /// Keeps only the first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.mode_count() {
            return Err(Error::Constraint(format!(
                "cannot keep {n} of {} modes",
                self.mode_count()
            )));
        }
        Ok(Self {
            eigencurrents: self.eigencurrents.columns(0, n).into_owned(),
            eigenvalues: self.eigenvalues.rows(0, n).into_owned(),
            ..self.clone()
        })
    }

    pub fn sidecar(&self) -> ModeSidecar {
        ModeSidecar {
            element: self.element,
            frequency_hz: self.frequency,
            eigenvalues: self.eigenvalues.iter().copied().collect(),
            dimension: self.dimension,
            regularization: self.regularization,
            ordering: ORDERING_RULE.to_string(),
            sign_convention: SIGN_RULE.to_string(),
        }
    }

    pub fn from_parts(eigencurrents: RMatrix, sidecar: &ModeSidecar) -> Result<Self> {
        if eigencurrents.ncols() != sidecar.eigenvalues.len() {
            return Err(Error::Dimension(format!(
                "{} eigencurrent columns for {} eigenvalues",
                eigencurrents.ncols(),
                sidecar.eigenvalues.len()
            )));
        }
        Ok(Self {
            eigencurrents,
            eigenvalues: RVector::from_vec(sidecar.eigenvalues.clone()),
            element: sidecar.element,
            frequency: sidecar.frequency_hz,
            regularization: sidecar.regularization,
            dimension: sidecar.dimension,
            geometry: None,
        })
    }
}

/// Diagnostics of a decomposition against the matrix it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModalDiagnostics {
    /// ‖I_CMᵀ·Re{Z0}·I_CM − I‖_F
    pub normalization: f64,
    /// max off-diagonal |I_CMᵀ·Im{Z0}·I_CM| relative to max|λ|
    pub off_diagonal: f64,
    /// max |diag(I_CMᵀ·Im{Z0}·I_CM) − λ|
    pub diagonal: f64,
    /// ‖Im{Z0}·I_CM − Re{Z0}·I_CM·Λ‖_F / ‖Im{Z0}‖_F
    pub residual: f64,
}

pub fn diagnostics(z0: &ImpedanceMatrix, basis: &CharacteristicBasis) -> ModalDiagnostics {
    let a = real_part(&z0.entries);
    let b = imag_part(&z0.entries);
    let x = &basis.eigencurrents;
    let n = x.ncols();
    let xa = x.transpose() * &a * x;
    let xb = x.transpose() * &b * x;
    let normalization = frobenius_real(&(xa - RMatrix::identity(n, n)));
    let max_lambda = basis.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(1e-300);
    let mut off = 0.0f64;
    let mut dia = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                dia = dia.max((xb[(i, i)] - basis.eigenvalues[i]).abs());
            } else {
                off = off.max(xb[(i, j)].abs());
            }
        }
    }
    let lam = RMatrix::from_diagonal(&basis.eigenvalues);
    let res = frobenius_real(&(&b * x - &a * x * lam));
    let bn = frobenius_real(&b);
    ModalDiagnostics {
        normalization,
        off_diagonal: off / max_lambda,
        diagonal: dia,
        residual: if bn > 0.0 { res / bn } else { res },
    }
}

fn symmetrized(m: &RMatrix) -> RMatrix {
    (m + m.transpose()) * 0.5
}

/// Computes the first `n_modes` characteristic modes of `z0`.
pub fn compute_characteristic_modes(z0: &ImpedanceMatrix, n_modes: usize) -> Result<CharacteristicBasis> {
    let dim = z0.dim();
    if z0.entries.ncols() != dim {
        return Err(Error::Dimension(format!(
            "impedance matrix is {}x{}, expected square",
            dim,
            z0.entries.ncols()
        )));
    }
    if n_modes == 0 || n_modes > dim {
        return Err(Error::Constraint(format!(
            "mode count {n_modes} outside 1..={dim}"
        )));
    }
    if z0.symmetry_residual() > SYMMETRY_TOLERANCE {
        return Err(Error::Constraint(format!(
            "impedance matrix not symmetric (relative residual {:.3e})",
            z0.symmetry_residual()
        )));
    }
    let a = symmetrized(&real_part(&z0.entries));
    let b = symmetrized(&imag_part(&z0.entries));

    let spectrum = SymmetricEigen::new(a.clone()).eigenvalues;
    let a_max = spectrum.iter().cloned().fold(0.0f64, f64::max);
    let a_min = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw = if a_min > a_max * WELL_CONDITIONED {
        None
    } else {
        SHIFTS.iter().find_map(|&shift| shifted_pencil(&a, &b, shift))
    };
    let (raw, regularization) = match raw {
        Some(r) => (r, 0.0),
        None => cholesky_pencil(&a, &b, a_min)?,
    };

    let mut modes: Vec<(f64, RVector)> = raw
        .into_iter()
        .map(|(lam, mut v)| {
            fix_sign(&mut v);
            (lam, v)
        })
        .collect();
    modes.sort_by(|(la, va), (lb, vb)| {
        la.abs()
            .total_cmp(&lb.abs())
            .then(la.total_cmp(lb))
            .then(first_sign(va).total_cmp(&first_sign(vb)))
    });

    let mut eigencurrents = RMatrix::zeros(dim, n_modes);
    let mut eigenvalues = RVector::zeros(n_modes);
    for (n, (lam, v)) in modes.into_iter().take(n_modes).enumerate() {
        eigencurrents.set_column(n, &v);
        eigenvalues[n] = lam;
    }
    let element = z0.spans.first().map(|s| s.element).unwrap_or(0);
    Ok(CharacteristicBasis {
        eigencurrents,
        eigenvalues,
        element,
        frequency: z0.frequency,
        regularization,
        dimension: dim,
        geometry: None,
    })
}

/// Re{Z0} with eigenvalue spread below this ratio is factored directly.
const WELL_CONDITIONED: f64 = 1e-8;

/// Trial values of `c` for the definite combination `Re{Z0} − c·Im{Z0}`.
const SHIFTS: [f64; 7] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Smallest `ν` used for modes that carry no radiated power numerically.
const NU_FLOOR: f64 = f64::EPSILON * f64::EPSILON;

type RawModes = Vec<(f64, RVector)>;

/// Solves the pencil through `W = A − c·B`, positive definite whenever every
/// `1 − c·λ_n > 0`. With `W = L·Lᵀ` the matrix `L⁻¹·A·L⁻ᵀ` has eigenvalues
/// `ν_n = 1/(1 − c·λ_n)`; accepting only `ν ≤ 2` keeps them in `(0, 2]`, so
/// the reduction stays accurate even when `A` is numerically singular.
fn shifted_pencil(a: &RMatrix, b: &RMatrix, shift: f64) -> Option<RawModes> {
    let w = a - b * shift;
    let l = w.cholesky()?.l();
    let la = l.solve_lower_triangular(a)?;
    let m = l.solve_lower_triangular(&la.transpose())?;
    let eig = SymmetricEigen::new(symmetrized(&m));
    let nu_max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let nu_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if nu_max > 2.0 || nu_min < -1e-9 * nu_max {
        return None;
    }
    let xt = l.transpose().solve_upper_triangular(&eig.eigenvectors)?;
    Some(
        (0..a.nrows())
            .map(|i| {
                let nu = eig.eigenvalues[i].max(NU_FLOOR);
                ((1.0 - 1.0 / nu) / shift, xt.column(i) / nu.sqrt())
            })
            .collect(),
    )
}

/// Standard reduction through the Cholesky factor of `A`, shifted by
/// `ε = 1e-12·trace(A)/dim` when the plain factorization fails.
fn cholesky_pencil(a: &RMatrix, b: &RMatrix, a_min: f64) -> Result<(RawModes, f64)> {
    let dim = a.nrows();
    let (chol, regularization) = match a.clone().cholesky() {
        Some(c) => (c, 0.0),
        None => {
            let eps = 1e-12 * a.trace() / dim as f64;
            let shifted = a + RMatrix::identity(dim, dim) * eps;
            match (eps > 0.0).then(|| shifted.cholesky()).flatten() {
                Some(c) => (c, eps),
                None => return Err(Error::Decomposition { min_eigenvalue: a_min }),
            }
        }
    };
    let l = chol.l();
    let fail = || Error::Decomposition { min_eigenvalue: a_min };
    // C = L⁻¹·B·L⁻ᵀ
    let lb = l.solve_lower_triangular(b).ok_or_else(fail)?;
    let cmat = l.solve_lower_triangular(&lb.transpose()).ok_or_else(fail)?;
    let eig = SymmetricEigen::new(symmetrized(&cmat));
    let x = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(fail)?;
    let modes = (0..dim)
        .map(|i| (eig.eigenvalues[i], x.column(i).into_owned()))
        .collect();
    Ok((modes, regularization))
}

fn fix_sign(v: &mut RVector) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    if v[pivot] < 0.0 {
        v.neg_mut();
    }
}

fn first_sign(v: &RVector) -> f64 {
    v.iter()
        .find(|x| **x != 0.0)
        .map(|x| x.signum())
        .unwrap_or(0.0)
}

/// Far field of mode `mode` (the eigencurrent column driven with unit coefficient).
pub fn mode_farfield(basis: &CharacteristicBasis, mode: usize, cut: &CutSpec) -> Result<FarFieldCut> {
    let current = basis.mode_current(mode)?;
    let geometry = basis
        .geometry
        .as_ref()
        .ok_or_else(|| Error::Config("characteristic basis has no geometry attached".into()))?;
    radiate(&current, geometry, basis.frequency, cut, &format!("mode {}", mode + 1))
}
