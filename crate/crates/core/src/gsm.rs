//! Generalized scattering matrices of single elements.
//!
//! Wave vectors follow `[w; b] = Ψ·[v; a]` with `Ψ = [[Γ, R], [T, S]]`, where
//! `v`/`w` are port waves and `a`/`b` incoming/outgoing modal coefficients.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_matrix, write_matrix};
use crate::linalg::{c, diag, frobenius, identity, lu_solve, wrap_angle, CMatrix, CVector, C64, J};
use crate::modal::CharacteristicBasis;
use crate::mom::{port_drive_solve, ImpedanceMatrix};

/// Tolerance of the lossless checks.
pub const LOSSLESS_TOLERANCE: f64 = 1e-9;

/// `s = −(1 − jλ)/(1 + jλ)`, evaluated so that `|s| = 1` to rounding.
pub fn eigenvalue_to_scattering(lambda: f64) -> C64 {
    if lambda.abs() <= 1.0 {
        let d = 1.0 + lambda * lambda;
        c((lambda * lambda - 1.0) / d, 2.0 * lambda / d)
    } else {
        let t = 1.0 / lambda;
        let d = 1.0 + t * t;
        c((1.0 - t * t) / d, 2.0 * t / d)
    }
}

/// Inverse of [`eigenvalue_to_scattering`]: `λ = cot(∠s / 2)`.
pub fn scattering_to_eigenvalue(s: C64) -> Result<f64> {
    let theta = s.im.atan2(s.re);
    if theta == 0.0 {
        return Err(Error::Constraint("s = 1 corresponds to an infinite eigenvalue".into()));
    }
    Ok(1.0 / (0.5 * theta).tan())
}

/// Load reflection `Γ_L,0` seen by the ports when the element behaves as the
/// bare scatterer described by `S0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Open,
    Short,
    /// Reactive load with the given unit-modulus reflection coefficient.
    Reactive(C64),
}

impl Termination {
    pub fn reflection(&self) -> C64 {
        match self {
            Termination::Open => c(1.0, 0.0),
            Termination::Short => c(-1.0, 0.0),
            Termination::Reactive(g) => *g,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Termination::Open => "open",
            Termination::Short => "short",
            Termination::Reactive(_) => "reactive",
        }
    }
}

/// Orientation constant `σ = ±j` of a synthetic element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sigma {
    #[serde(rename = "+j")]
    PlusJ,
    #[serde(rename = "-j")]
    MinusJ,
}

impl Sigma {
    pub fn value(&self) -> C64 {
        match self {
            Sigma::PlusJ => J,
            Sigma::MinusJ => -J,
        }
    }

    pub fn angle(&self) -> f64 {
        match self {
            Sigma::PlusJ => FRAC_PI_2,
            Sigma::MinusJ => -FRAC_PI_2,
        }
    }

    pub fn flipped(&self) -> Sigma {
        match self {
            Sigma::PlusJ => Sigma::MinusJ,
            Sigma::MinusJ => Sigma::PlusJ,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gsm {
    pub s: CMatrix,
    /// `S − I`, kept separately because `S ≈ I` for weakly radiating modes
    /// and subtracting afterwards loses their scattering entirely.
    pub s_minus_i: CMatrix,
    pub t: CMatrix,
    pub r: CMatrix,
    pub gamma: CMatrix,
    pub s0: CVector,
    pub termination: Termination,
    pub frequency: f64,
}

impl Gsm {
    pub fn modes(&self) -> usize {
        self.s.nrows()
    }

    pub fn ports(&self) -> usize {
        self.gamma.nrows()
    }

    /// The full matrix `Ψ = [[Γ, R], [T, S]]`.
    pub fn psi(&self) -> CMatrix {
        let (p, n) = (self.ports(), self.modes());
        let mut m = CMatrix::zeros(p + n, p + n);
        m.view_mut((0, 0), (p, p)).copy_from(&self.gamma);
        m.view_mut((0, p), (p, n)).copy_from(&self.r);
        m.view_mut((p, 0), (n, p)).copy_from(&self.t);
        m.view_mut((p, p), (n, n)).copy_from(&self.s);
        m
    }

    fn check(&self) -> Result<()> {
        let (p, n) = (self.ports(), self.modes());
        let ok = self.s.ncols() == n
            && self.s_minus_i.shape() == (n, n)
            && self.t.shape() == (n, p)
            && self.r.shape() == (p, n)
            && self.gamma.ncols() == p
            && self.s0.len() == n;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "inconsistent GSM blocks for {n} modes and {p} ports"
            )))
        }
    }
}

/// `t_{n,p} = I_CM,nᵀ·Z0·I_p / (1 + jλ_n)`; `port_currents` holds one column per port.
pub fn transmit_from_ports(
    basis: &CharacteristicBasis,
    z0: &ImpedanceMatrix,
    port_currents: &CMatrix,
) -> Result<CMatrix> {
    let dim = basis.eigencurrents.nrows();
    if z0.dim() != dim || z0.entries.ncols() != dim || port_currents.nrows() != dim {
        return Err(Error::Dimension(format!(
            "basis has {dim} rows, impedance {}x{}, port currents {} rows",
            z0.dim(),
            z0.entries.ncols(),
            port_currents.nrows()
        )));
    }
    let icm = basis.eigencurrents.map(|x| c(x, 0.0));
    let mut t = icm.transpose() * &z0.entries * port_currents;
    for (n, lam) in basis.eigenvalues.iter().enumerate() {
        let scale = c(1.0, *lam).inv();
        for p in 0..t.ncols() {
            t[(n, p)] *= scale;
        }
    }
    Ok(t)
}

/// `S = S0·(I − T*·Tᵀ)` for a matched element with decoupled ports.
pub fn scattering_from_s0_and_t(s0: &CVector, t: &CMatrix) -> Result<CMatrix> {
    let n = s0.len();
    if t.nrows() != n {
        return Err(Error::Dimension(format!("T has {} rows for {n} modes", t.nrows())));
    }
    let gram = t.adjoint() * t;
    let err = frobenius(&(gram - identity(t.ncols())));
    if err > LOSSLESS_TOLERANCE {
        return Err(Error::Constraint(format!(
            "ports not matched and decoupled: ‖Tᴴ·T − I‖ = {err:.3e}"
        )));
    }
    Ok(diag(s0) * (identity(n) - t.conjugate() * t.transpose()))
}

/// `‖S0·T*·Tᵀ − T·Tᴴ·S0‖_F`; zero exactly when `S` of the matched element is symmetric.
pub fn reciprocity_residual(s0: &CVector, t: &CMatrix) -> f64 {
    let d = diag(s0);
    frobenius(&(&d * t.conjugate() * t.transpose() - t * t.adjoint() * &d))
}

/// `S = S0 − T·(Γ_L,0 − Γ)⁻¹·R`.
pub fn scattering_via_termination(
    s0: &CVector,
    t: &CMatrix,
    r: &CMatrix,
    gamma: &CMatrix,
    gamma_l0: &CMatrix,
) -> Result<CMatrix> {
    let (n, p) = (s0.len(), gamma.nrows());
    if t.shape() != (n, p) || r.shape() != (p, n) || gamma.ncols() != p || gamma_l0.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "inconsistent blocks for {n} modes and {p} ports"
        )));
    }
    Ok(diag(s0) - termination_term(t, r, gamma, gamma_l0)?)
}

/// `T·(Γ_L,0 − Γ)⁻¹·R`
fn termination_term(t: &CMatrix, r: &CMatrix, gamma: &CMatrix, gamma_l0: &CMatrix) -> Result<CMatrix> {
    if gamma.nrows() == 0 {
        return Ok(CMatrix::zeros(t.nrows(), t.nrows()));
    }
    let x = lu_solve(&(gamma_l0 - gamma), r, "termination").map_err(|e| match e {
        Error::Solver { condition, .. } => Error::Termination { condition },
        other => other,
    })?;
    Ok(t * x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosslessReport {
    /// ‖Ψᴴ·Ψ − I‖_F
    pub unitarity: f64,
    /// ‖S − Sᵀ‖_F
    pub symmetry: f64,
    /// ‖Tᴴ·T − I‖_F
    pub matched: f64,
    /// ‖Sᴴ·T‖_F
    pub orthogonality: f64,
    pub tolerance: f64,
}

impl LosslessReport {
    pub fn unitary_ok(&self) -> bool {
        self.unitarity < self.tolerance
    }
    pub fn symmetric_ok(&self) -> bool {
        self.symmetry < self.tolerance
    }
    pub fn matched_ok(&self) -> bool {
        self.matched < self.tolerance
    }
    pub fn orthogonal_ok(&self) -> bool {
        self.orthogonality < self.tolerance
    }
    pub fn passed(&self) -> bool {
        self.unitary_ok() && self.symmetric_ok() && self.matched_ok() && self.orthogonal_ok()
    }
}

pub fn assert_lossless(psi: &Gsm) -> LosslessReport {
    let m = psi.psi();
    let dim = m.nrows();
    LosslessReport {
        unitarity: frobenius(&(m.adjoint() * &m - identity(dim))),
        symmetry: frobenius(&(&psi.s - psi.s.transpose())),
        matched: frobenius(&(psi.t.adjoint() * &psi.t - identity(psi.ports()))),
        orthogonality: frobenius(&(psi.s.adjoint() * &psi.t)),
        tolerance: LOSSLESS_TOLERANCE,
    }
}

/// Modal degrees of freedom of a single-port synthetic element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticElementParams {
    /// `∠s_n′` in radians.
    pub s_phases: Vec<f64>,
    /// `|t_n′|`, unit norm.
    pub t_magnitudes: Vec<f64>,
    pub sigma: Sigma,
}

impl SyntheticElementParams {
    /// Parameters of the matched element with transmit vector `t`.
    ///
    /// The scattering phases are `∠σ + 2∠t_n`; for a unit-norm `t` whose first
    /// entry is nonzero, [`Self::transmit`] returns `t` up to a sign.
    pub fn from_transmit(t: &CVector, sigma: Sigma) -> Self {
        Self {
            s_phases: t.iter().map(|x| wrap_angle(sigma.angle() + 2.0 * x.arg())).collect(),
            t_magnitudes: t.iter().map(|x| x.norm()).collect(),
            sigma,
        }
    }

    /// Rescales the magnitudes to unit norm.
    pub fn normalized(&self) -> Self {
        let norm = self.t_magnitudes.iter().map(|x| x * x).sum::<f64>().sqrt();
        Self {
            t_magnitudes: self.t_magnitudes.iter().map(|x| x / norm).collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.s_phases.len();
        if n == 0 || self.t_magnitudes.len() != n {
            return Err(Error::Dimension(format!(
                "{} phases and {} magnitudes",
                n,
                self.t_magnitudes.len()
            )));
        }
        if self
            .s_phases
            .iter()
            .chain(&self.t_magnitudes)
            .any(|x| !x.is_finite())
            || self.t_magnitudes.iter().any(|x| *x < 0.0)
        {
            return Err(Error::Constraint("phases must be finite and magnitudes nonnegative".into()));
        }
        let sum: f64 = self.t_magnitudes.iter().map(|x| x * x).sum();
        if (sum - 1.0).abs() > LOSSLESS_TOLERANCE {
            return Err(Error::Constraint(format!(
                "transmit magnitudes not unit norm: Σ|t|² = {sum}"
            )));
        }
        Ok(())
    }

    /// Phases of `T′`: `∠t_1 = ½(∠s_1 − ∠σ)` folded into (−90°, 90°] and
    /// `∠t_n = ∠t_1 + ½·wrap(∠s_n − ∠s_1)`.
    pub fn t_phases(&self) -> Vec<f64> {
        let first = half_angle(self.s_phases[0] - self.sigma.angle());
        self.s_phases
            .iter()
            .map(|s| first + 0.5 * wrap_angle(s - self.s_phases[0]))
            .collect()
    }

    pub fn transmit(&self) -> CVector {
        CVector::from_iterator(
            self.t_magnitudes.len(),
            self.t_magnitudes
                .iter()
                .zip(self.t_phases())
                .map(|(m, p)| C64::from_polar(*m, p)),
        )
    }

    pub fn s0(&self) -> CVector {
        CVector::from_iterator(
            self.s_phases.len(),
            self.s_phases.iter().map(|p| C64::from_polar(1.0, *p)),
        )
    }
}

/// Solution of `2x ≡ θ (mod 2π)` in (−π/2, π/2].
fn half_angle(theta: f64) -> f64 {
    let h = 0.5 * wrap_angle(theta);
    if h <= -FRAC_PI_2 {
        h + PI
    } else {
        h
    }
}

/// Lossless, reciprocal, matched single-port element from modal parameters.
pub fn build_synthetic_gsm(params: &SyntheticElementParams) -> Result<Gsm> {
    params.validate()?;
    let s0 = params.s0();
    let t = CMatrix::from_column_slice(s0.len(), 1, params.transmit().as_slice());
    let s = scattering_from_s0_and_t(&s0, &t)?;
    Ok(Gsm {
        s_minus_i: &s - identity(s.nrows()),
        s,
        r: t.transpose(),
        t,
        gamma: CMatrix::zeros(1, 1),
        s0,
        termination: Termination::Reactive(params.sigma.value().inv()),
        frequency: 0.0,
    })
}

/// Single-port synthetic element with transmit vector `t` (unit norm) and
/// `S0 = σ·diag(e^{2j∠t_n})`, the phase choice that makes `S` symmetric.
pub fn synthetic_gsm_from_transmit(t: &CVector, sigma: Sigma) -> Result<Gsm> {
    let n = t.len();
    if n == 0 {
        return Err(Error::Dimension("transmit vector is empty".into()));
    }
    let s0 = CVector::from_iterator(n, t.iter().map(|x| sigma.value() * C64::from_polar(1.0, 2.0 * x.arg())));
    let tm = CMatrix::from_column_slice(n, 1, t.as_slice());
    let s = scattering_from_s0_and_t(&s0, &tm)?;
    Ok(Gsm {
        s_minus_i: &s - identity(n),
        s,
        r: tm.transpose(),
        t: tm,
        gamma: CMatrix::zeros(1, 1),
        s0,
        termination: Termination::Reactive(sigma.value().inv()),
        frequency: 0.0,
    })
}

/// GSM of a wire element from its characteristic modes and port solves.
///
/// Port `p` is driven with `v_p = 1` while the other ports are terminated in
/// the reference impedance. The bare wire corresponds to shorted ports.
pub fn measured_gsm(
    basis: &CharacteristicBasis,
    z0: &ImpedanceMatrix,
    port_basis: &[usize],
    reference_impedance: f64,
) -> Result<Gsm> {
    let p = port_basis.len();
    let n = basis.mode_count();
    let s0 = CVector::from_iterator(n, basis.eigenvalues.iter().map(|l| eigenvalue_to_scattering(*l)));
    let dim = z0.dim();
    let mut currents = CMatrix::zeros(dim, p);
    let mut gamma = CMatrix::zeros(p, p);
    for q in 0..p {
        let mut v = CVector::zeros(p);
        v[q] = c(1.0, 0.0);
        let sol = port_drive_solve(z0, port_basis, &v, reference_impedance)?;
        currents.set_column(q, &sol.currents);
        gamma.set_column(q, &sol.reflected);
    }
    let t = transmit_from_ports(basis, z0, &currents)?;
    let r = t.transpose();
    let termination = Termination::Short;
    let gl0 = identity(p) * termination.reflection();
    // s_n − 1 = −2/(1 + jλ_n), exact even when s_n rounds to 1.
    let s0_minus_1 = CVector::from_iterator(n, basis.eigenvalues.iter().map(|l| c(-2.0, 0.0) / c(1.0, *l)));
    let s_minus_i = diag(&s0_minus_1) - termination_term(&t, &r, &gamma, &gl0)?;
    Ok(Gsm {
        s: &s_minus_i + identity(n),
        s_minus_i,
        t,
        r,
        gamma,
        s0,
        termination,
        frequency: z0.frequency,
    })
}

/// JSON container of a GSM; blocks are stored in the matrix text format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsmRecord {
    pub convention: String,
    pub gamma_l0: [f64; 2],
    pub frequency_hz: f64,
    pub modes: usize,
    pub ports: usize,
    pub s0: String,
    pub s: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_minus_i: Option<String>,
    pub t: String,
    pub r: String,
    pub gamma: String,
}

impl GsmRecord {
    pub fn from_gsm(g: &Gsm) -> Self {
        let f = g.frequency;
        let refl = g.termination.reflection();
        Self {
            convention: g.termination.name().to_string(),
            gamma_l0: [refl.re, refl.im],
            frequency_hz: f,
            modes: g.modes(),
            ports: g.ports(),
            s0: write_matrix(&CMatrix::from_column_slice(g.s0.len(), 1, g.s0.as_slice()), f),
            s: write_matrix(&g.s, f),
            s_minus_i: Some(write_matrix(&g.s_minus_i, f)),
            t: write_matrix(&g.t, f),
            r: write_matrix(&g.r, f),
            gamma: write_matrix(&g.gamma, f),
        }
    }

    pub fn to_gsm(&self) -> Result<Gsm> {
        let refl = c(self.gamma_l0[0], self.gamma_l0[1]);
        let termination = match self.convention.as_str() {
            "open" => Termination::Open,
            "short" => Termination::Short,
            "reactive" => Termination::Reactive(refl),
            other => return Err(Error::Parse(format!("unknown termination convention {other:?}"))),
        };
        if termination.reflection() != refl {
            return Err(Error::Parse(format!(
                "convention {:?} inconsistent with gamma_l0",
                self.convention
            )));
        }
        let s0m = read_matrix(&self.s0)?.0;
        if s0m.ncols() != 1 {
            return Err(Error::Parse("s0 must be a column".into()));
        }
        let s = read_matrix(&self.s)?.0;
        let s_minus_i = match &self.s_minus_i {
            Some(text) => read_matrix(text)?.0,
            None => &s - identity(s.nrows()),
        };
        let g = Gsm {
            s,
            s_minus_i,
            t: read_matrix(&self.t)?.0,
            r: read_matrix(&self.r)?.0,
            gamma: read_matrix(&self.gamma)?.0,
            s0: s0m.column(0).into_owned(),
            termination,
            frequency: self.frequency_hz,
        };
        g.check()?;
        if g.modes() != self.modes || g.ports() != self.ports {
            return Err(Error::Parse("declared sizes do not match blocks".into()));
        }
        Ok(g)
    }
}
