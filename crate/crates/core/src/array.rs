//! Coupled-array solution from per-element GSMs and the direct MoM oracle.
//!
//! Element `k` of an [`ArrayModel`] is the `k`-th element id in ascending
//! order. Port and mode vectors are stacked element-major.

use serde::Serialize;

use crate::coupling::ModalCouplingMatrix;
use crate::error::{Error, Result};
use crate::geometry::WireGeometry;
use crate::gsm::{measured_gsm, Gsm};
use crate::io::format_f64;
use crate::linalg::{block_diag, c, identity, lu_solve, lu_solve_vec, spectral_radius, CMatrix, CVector, C64, J};
use crate::modal::{compute_characteristic_modes, mode_farfield, CharacteristicBasis};
use crate::mom::{assemble_impedance, port_drive_solve, CutSpec, FarFieldCut, ImpedanceMatrix};

#[derive(Debug, Clone)]
pub struct ArrayModel {
    pub elements: Vec<Gsm>,
    pub coupling: ModalCouplingMatrix,
    /// Characteristic bases with positioned geometry; may be empty for
    /// purely synthetic models, which then cannot produce currents or fields.
    pub bases: Vec<CharacteristicBasis>,
    pub element_ids: Vec<usize>,
}

impl ArrayModel {
    pub fn new(elements: Vec<Gsm>, coupling: ModalCouplingMatrix, bases: Vec<CharacteristicBasis>) -> Result<Self> {
        let k = elements.len();
        let element_ids = if bases.is_empty() {
            (0..k).collect()
        } else {
            bases.iter().map(|b| b.element).collect()
        };
        let model = Self {
            elements,
            coupling,
            bases,
            element_ids,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.elements.len();
        if k == 0 {
            return Err(Error::Dimension("array model has no elements".into()));
        }
        if self.coupling.element_count() != k {
            return Err(Error::Dimension(format!(
                "coupling covers {} elements, model has {k}",
                self.coupling.element_count()
            )));
        }
        for (i, g) in self.elements.iter().enumerate() {
            if self.coupling.mode_counts[i] != g.modes() {
                return Err(Error::Dimension(format!(
                    "element {i}: GSM has {} modes, coupling {}",
                    g.modes(),
                    self.coupling.mode_counts[i]
                )));
            }
        }
        if !self.bases.is_empty() {
            if self.bases.len() != k {
                return Err(Error::Dimension(format!("{} bases for {k} elements", self.bases.len())));
            }
            for (i, (b, g)) in self.bases.iter().zip(&self.elements).enumerate() {
                if b.mode_count() != g.modes() {
                    return Err(Error::Dimension(format!(
                        "element {i}: basis has {} modes, GSM {}",
                        b.mode_count(),
                        g.modes()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn mode_counts(&self) -> Vec<usize> {
        self.elements.iter().map(|g| g.modes()).collect()
    }

    pub fn port_counts(&self) -> Vec<usize> {
        self.elements.iter().map(|g| g.ports()).collect()
    }

    pub fn total_modes(&self) -> usize {
        self.elements.iter().map(|g| g.modes()).sum()
    }

    pub fn total_ports(&self) -> usize {
        self.elements.iter().map(|g| g.ports()).sum()
    }

    /// Same model with all inter-element coupling removed.
    pub fn uncoupled(&self) -> Self {
        Self {
            coupling: ModalCouplingMatrix::uncoupled(self.mode_counts()),
            ..self.clone()
        }
    }

    fn stacked(&self) -> Stacked {
        let t: Vec<&CMatrix> = self.elements.iter().map(|g| &g.t).collect();
        let r: Vec<&CMatrix> = self.elements.iter().map(|g| &g.r).collect();
        let gm: Vec<&CMatrix> = self.elements.iter().map(|g| &g.gamma).collect();
        let s: Vec<&CMatrix> = self.elements.iter().map(|g| &g.s_minus_i).collect();
        Stacked {
            t: block_diag(&t),
            r: block_diag(&r),
            gamma: block_diag(&gm),
            s_minus_i: block_diag(&s),
            g: self.coupling.dense(),
        }
    }
}

struct Stacked {
    t: CMatrix,
    r: CMatrix,
    gamma: CMatrix,
    s_minus_i: CMatrix,
    g: CMatrix,
}

fn resonance(e: Error) -> Error {
    match e {
        Error::Solver { condition, .. } => Error::Resonance { condition },
        other => other,
    }
}

/// Port and modal blocks of the whole array including coupling.
#[derive(Debug, Clone)]
pub struct CoupledBlocks {
    pub gamma: CMatrix,
    pub r: CMatrix,
    pub t: CMatrix,
    /// `S^(coupled) − I`
    pub s_minus_i: CMatrix,
    /// Spectral radius of `(S^(iso) − I)·G`.
    pub spectral_radius: f64,
}

/// `M = (I − (S − I)·G)⁻¹` applied through LU solves:
/// `Γc = Γ + R·G·M·T`, `Rc = R + R·G·M·(S − I)`, `Tc = M·T`, `Sc − I = M·(S − I)`.
pub fn couple(model: &ArrayModel) -> Result<CoupledBlocks> {
    model.validate()?;
    let st = model.stacked();
    let n = model.total_modes();
    let a = &st.s_minus_i * &st.g;
    let system = identity(n) - &a;
    let mt = lu_solve(&system, &st.t, "coupled modal system").map_err(resonance)?;
    let ms = lu_solve(&system, &st.s_minus_i, "coupled modal system").map_err(resonance)?;
    let rg = &st.r * &st.g;
    Ok(CoupledBlocks {
        gamma: &st.gamma + &rg * &mt,
        r: &st.r + &rg * &ms,
        t: mt,
        s_minus_i: ms,
        spectral_radius: spectral_radius(&a),
    })
}

#[derive(Debug, Clone)]
pub struct CoupledSolution {
    pub v: CVector,
    pub w: CVector,
    pub a_ext: CVector,
    /// Stacked outgoing modal coefficients `f = b − a`.
    pub f: CVector,
    pub mode_counts: Vec<usize>,
    /// Relative residual of the modal block row.
    pub residual: f64,
}

impl CoupledSolution {
    /// `f^(k)` of element `k`.
    pub fn element_coefficients(&self, k: usize) -> CVector {
        let start: usize = self.mode_counts[..k].iter().sum();
        self.f.rows(start, self.mode_counts[k]).into_owned()
    }
}

/// Solves `f = T·v + (S − I)·(a_ext + G·f)`, `w = Γ·v + R·(a_ext + G·f)`.
pub fn solve_excitation(model: &ArrayModel, v: &CVector, a_ext: &CVector) -> Result<CoupledSolution> {
    model.validate()?;
    let (n, p) = (model.total_modes(), model.total_ports());
    if v.len() != p || a_ext.len() != n {
        return Err(Error::Dimension(format!(
            "expected {p} port waves and {n} modal coefficients, got {} and {}",
            v.len(),
            a_ext.len()
        )));
    }
    let st = model.stacked();
    let system = identity(n) - &st.s_minus_i * &st.g;
    let rhs = &st.t * v + &st.s_minus_i * a_ext;
    let f = lu_solve_vec(&system, &rhs, "coupled modal system").map_err(resonance)?;
    let incoming = a_ext + &st.g * &f;
    let w = &st.gamma * v + &st.r * &incoming;
    let resid = &f - &st.t * v - &st.s_minus_i * &incoming;
    let scale = f.norm().max(rhs.norm());
    Ok(CoupledSolution {
        v: v.clone(),
        w,
        a_ext: a_ext.clone(),
        f,
        mode_counts: model.mode_counts(),
        residual: if scale > 0.0 { resid.norm() / scale } else { resid.norm() },
    })
}

/// Fixed-point iteration on `f`; returns the solution and the iteration count.
/// Fails with a resonance error when the iteration does not reach `tolerance`.
pub fn solve_iterative(
    model: &ArrayModel,
    v: &CVector,
    a_ext: &CVector,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(CoupledSolution, usize)> {
    model.validate()?;
    let (n, p) = (model.total_modes(), model.total_ports());
    if v.len() != p || a_ext.len() != n {
        return Err(Error::Dimension(format!(
            "expected {p} port waves and {n} modal coefficients, got {} and {}",
            v.len(),
            a_ext.len()
        )));
    }
    let st = model.stacked();
    let drive = &st.t * v + &st.s_minus_i * a_ext;
    let a = &st.s_minus_i * &st.g;
    let mut f = drive.clone();
    for it in 1..=max_iterations {
        let next = &drive + &a * &f;
        let change = (&next - &f).norm();
        f = next;
        if change <= tolerance * f.norm().max(f64::MIN_POSITIVE) {
            let incoming = a_ext + &st.g * &f;
            let w = &st.gamma * v + &st.r * &incoming;
            let resid = (&f - &drive - &a * &f).norm() / f.norm().max(f64::MIN_POSITIVE);
            return Ok((
                CoupledSolution {
                    v: v.clone(),
                    w,
                    a_ext: a_ext.clone(),
                    f,
                    mode_counts: model.mode_counts(),
                    residual: resid,
                },
                it,
            ));
        }
    }
    Err(Error::Resonance {
        condition: spectral_radius(&a),
    })
}

/// `I^(k) = I_CM^(k)·f^(k)` for every element.
pub fn element_currents(solution: &CoupledSolution, bases: &[CharacteristicBasis]) -> Result<Vec<CVector>> {
    if bases.len() != solution.mode_counts.len() {
        return Err(Error::Dimension(format!(
            "{} bases for {} elements",
            bases.len(),
            solution.mode_counts.len()
        )));
    }
    bases
        .iter()
        .enumerate()
        .map(|(k, b)| b.currents(&solution.element_coefficients(k)))
        .collect()
}

/// `F = Σ_k Σ_n F_CM,n^(k)·f_n^(k)`.
pub fn array_farfield(
    solution: &CoupledSolution,
    bases: &[CharacteristicBasis],
    cut: &CutSpec,
    label: &str,
) -> Result<FarFieldCut> {
    if bases.len() != solution.mode_counts.len() {
        return Err(Error::Dimension(format!(
            "{} bases for {} elements",
            bases.len(),
            solution.mode_counts.len()
        )));
    }
    cut.validate()?;
    let frequency = bases.first().map(|b| b.frequency).unwrap_or(0.0);
    let mut total = FarFieldCut::zeros(cut, frequency, label);
    for (k, b) in bases.iter().enumerate() {
        let fk = solution.element_coefficients(k);
        for (n, coef) in fk.iter().enumerate() {
            if *coef == c(0.0, 0.0) {
                continue;
            }
            total.add_scaled(&mode_farfield(b, n, cut)?, *coef);
        }
    }
    Ok(total)
}

/// Port indices of `geometry.ports` in model order (element-major, stable).
pub fn model_port_order(geometry: &WireGeometry) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..geometry.ports.len()).collect();
    idx.sort_by_key(|&i| geometry.ports[i].element);
    idx
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// Reflected port waves in model order.
    pub w: CVector,
    /// Global basis currents (element-major).
    pub currents: CVector,
    pub element_currents: Vec<CVector>,
}

/// Dense full-array MoM solve with all ports loaded; `v` is in model order.
pub fn direct_solve_oracle(
    geometry: &WireGeometry,
    frequency: f64,
    v: &CVector,
    reference_impedance: f64,
) -> Result<OracleSolution> {
    let z = assemble_impedance(geometry, frequency)?;
    direct_solve_with(&z, geometry, v, reference_impedance)
}

/// [`direct_solve_oracle`] with a pre-assembled impedance matrix.
pub fn direct_solve_with(
    z: &ImpedanceMatrix,
    geometry: &WireGeometry,
    v: &CVector,
    reference_impedance: f64,
) -> Result<OracleSolution> {
    let mesh = geometry.mesh()?;
    let order = model_port_order(geometry);
    if v.len() != order.len() {
        return Err(Error::Dimension(format!("{} port waves for {} ports", v.len(), order.len())));
    }
    let mut v_geom = CVector::zeros(v.len());
    for (m, &g) in order.iter().enumerate() {
        v_geom[g] = v[m];
    }
    let sol = port_drive_solve(z, &mesh.port_basis, &v_geom, reference_impedance)?;
    let w = CVector::from_iterator(order.len(), order.iter().map(|&g| sol.reflected[g]));
    let element_currents = z
        .spans
        .iter()
        .map(|s| sol.currents.rows(s.start, s.len).into_owned())
        .collect();
    Ok(OracleSolution {
        w,
        currents: sol.currents,
        element_currents,
    })
}

/// Measured model of a wire array: characteristic modes of every element's
/// self block, GSMs from port solves and coupling from the off-diagonal
/// blocks. `n_modes = None` keeps all modes. Returns the full impedance
/// matrix alongside for oracle comparisons.
pub fn build_measured_model(
    geometry: &WireGeometry,
    frequency: f64,
    n_modes: Option<usize>,
    reference_impedance: f64,
) -> Result<(ArrayModel, ImpedanceMatrix)> {
    let z = assemble_impedance(geometry, frequency)?;
    let model = measured_model_from(&z, geometry, n_modes, reference_impedance)?;
    Ok((model, z))
}

pub fn measured_model_from(
    z: &ImpedanceMatrix,
    geometry: &WireGeometry,
    n_modes: Option<usize>,
    reference_impedance: f64,
) -> Result<ArrayModel> {
    let mesh = geometry.mesh()?;
    let mut bases = Vec::new();
    let mut elements = Vec::new();
    for span in &z.spans {
        let e = span.element;
        let z0 = z.extract_block(e, e)?;
        let modes = n_modes.unwrap_or(span.len);
        let basis = compute_characteristic_modes(&z0, modes)?.with_geometry(geometry.element_geometry(e)?);
        let ports: Vec<usize> = mesh
            .element_ports(geometry, e)
            .into_iter()
            .map(|p| mesh.port_basis[p] - span.start)
            .collect();
        elements.push(measured_gsm(&basis, &z0, &ports, reference_impedance)?);
        bases.push(basis);
    }
    let coupling = crate::coupling::assemble_coupling(&bases, z)?;
    ArrayModel::new(elements, coupling, bases)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Handedness {
    Left,
    Right,
}

/// Circular components `E_L = (E_θ + jE_φ)/√2`, `E_R = (E_θ − jE_φ)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularComponents {
    pub theta_deg: Vec<f64>,
    pub e_l: Vec<C64>,
    pub e_r: Vec<C64>,
}

/// Upper bound reported for XPR when the cross-polar field vanishes.
pub const XPR_CAP_DB: f64 = 100.0;

impl CircularComponents {
    /// `max|E_co|² / max|E_cross|²` in dB over samples with θ inside
    /// `window` (inclusive, degrees; whole cut when `None`), capped at 100 dB.
    pub fn xpr_db(&self, co: Handedness, window: Option<(f64, f64)>) -> f64 {
        let (co_f, cross_f) = match co {
            Handedness::Left => (&self.e_l, &self.e_r),
            Handedness::Right => (&self.e_r, &self.e_l),
        };
        let inside = |t: f64| window.map(|(lo, hi)| t >= lo && t <= hi).unwrap_or(true);
        let mut co_max = 0.0f64;
        let mut cross_max = 0.0f64;
        for (i, t) in self.theta_deg.iter().enumerate() {
            if inside(*t) {
                co_max = co_max.max(co_f[i].norm_sqr());
                cross_max = cross_max.max(cross_f[i].norm_sqr());
            }
        }
        if cross_max == 0.0 {
            return XPR_CAP_DB;
        }
        (10.0 * (co_max / cross_max).log10()).min(XPR_CAP_DB)
    }
}

pub fn circular_components(cut: &FarFieldCut) -> CircularComponents {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CircularComponents {
        theta_deg: cut.theta_deg.clone(),
        e_l: cut
            .e_theta
            .iter()
            .zip(&cut.e_phi)
            .map(|(t, p)| (t + J * p) * s)
            .collect(),
        e_r: cut
            .e_theta
            .iter()
            .zip(&cut.e_phi)
            .map(|(t, p)| (t - J * p) * s)
            .collect(),
    }
}

fn db20(x: f64) -> f64 {
    20.0 * x.max(1e-15).log10()
}

/// CSV with columns `theta_deg, re/im e_theta, re/im e_phi, |E_L|_dB, |E_R|_dB`.
pub fn farfield_csv(cut: &FarFieldCut) -> String {
    let circ = circular_components(cut);
    let mut out = String::from("theta_deg,re_e_theta,im_e_theta,re_e_phi,im_e_phi,abs_e_l_db,abs_e_r_db\n");
    for i in 0..cut.theta_deg.len() {
        let cols = [
            cut.theta_deg[i],
            cut.e_theta[i].re,
            cut.e_theta[i].im,
            cut.e_phi[i].re,
            cut.e_phi[i].im,
            db20(circ.e_l[i].norm()),
            db20(circ.e_r[i].norm()),
        ];
        let row: Vec<String> = cols.iter().map(|x| format_f64(*x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
