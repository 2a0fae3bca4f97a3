//! Iterative synthesis of synthetic two-mode elements under mutual coupling.
//!
//! Every element `k` should radiate the outgoing modal configuration
//! `f^(k) = q·u` with the same real `q`. Assuming all other elements already
//! do, the incoming field at `k` is `q·α^(k)` with `α^(k) = Σ_{l≠k} G^(k,l)·u`,
//! so the element must transmit `T′·v = q·(u − (S′ − I)·α^(k))`. The update
//! alternates between fixing `S′` from the previous `T′` and solving for the
//! new `T′`, `v` and `q`.

use serde::{Deserialize, Serialize};

use crate::array::{array_farfield, circular_components, solve_excitation, ArrayModel, Handedness};
use crate::coupling::ModalCouplingMatrix;
use crate::error::{Error, Result};
use crate::gsm::{reciprocity_residual, synthetic_gsm_from_transmit, Sigma, SyntheticElementParams};
use crate::linalg::{c, identity, CMatrix, CVector, C64, J};
use crate::modal::CharacteristicBasis;
use crate::mom::{CutSpec, FarFieldCut};

/// Left-hand circular modal target `(1, −j)/√2`.
pub fn u_left() -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_vec(vec![c(s, 0.0), -J * s])
}

/// Right-hand circular modal target `(1, j)/√2`.
pub fn u_right() -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_vec(vec![c(s, 0.0), J * s])
}

/// Unit vector orthogonal to the two-mode target `u` (the cross-polar state).
pub fn orthogonal_complement(u: &CVector) -> CVector {
    CVector::from_vec(vec![-u[1].conj(), u[0].conj()])
}

/// Which scattering term multiplies the incoming coefficients in the
/// per-element balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatterTerm {
    /// `S′ − I`: outgoing coefficients `f = b − a`, consistent with the
    /// coupled-array solver.
    #[default]
    Outgoing,
    /// `S′`: total reflected coefficients.
    Total,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub target: CVector,
    /// One orientation constant per element.
    pub sigma: Vec<Sigma>,
    pub max_iterations: usize,
    /// Bound on `Σ_k ‖f_T,τ^(k) − f_T,τ−1^(k)‖`.
    pub threshold: f64,
    /// Starting `T′` for every element; the target when `None`.
    pub initial_t: Option<CVector>,
    pub scatter_term: ScatterTerm,
}

pub const DEFAULT_MAX_ITERATIONS: usize = 100;
pub const DEFAULT_THRESHOLD: f64 = 0.01;

impl SynthesisConfig {
    /// LHCP target with the same `σ` for all `k` elements.
    pub fn uniform(k: usize, sigma: Sigma) -> Self {
        Self {
            target: u_left(),
            sigma: vec![sigma; k],
            max_iterations: DEFAULT_MAX_ITERATIONS,
            threshold: DEFAULT_THRESHOLD,
            initial_t: None,
            scatter_term: ScatterTerm::Outgoing,
        }
    }

    pub fn validate(&self, coupling: &ModalCouplingMatrix) -> Result<()> {
        if self.target.len() != 2 || (self.target.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Constraint("target must be a unit two-vector".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Constraint(format!("threshold must be positive, got {}", self.threshold)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Constraint("max_iterations must be at least 1".into()));
        }
        if let Some(t) = &self.initial_t {
            if t.len() != 2 || (t.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Constraint("initial T′ must be a unit two-vector".into()));
            }
        }
        if coupling.mode_counts.iter().any(|&n| n != 2) {
            return Err(Error::Constraint("synthesis requires exactly two modes per element".into()));
        }
        if self.sigma.len() != coupling.element_count() {
            return Err(Error::Dimension(format!(
                "{} σ values for {} elements",
                self.sigma.len(),
                coupling.element_count()
            )));
        }
        Ok(())
    }
}

/// `α^(k) = Σ_{l≠k} G^(k,l)·u`.
pub fn incident_from_neighbors(g: &ModalCouplingMatrix, target: &CVector, k: usize) -> Result<CVector> {
    if k >= g.element_count() {
        return Err(Error::Index(format!("element {k} out of range ({} elements)", g.element_count())));
    }
    let mut alpha = CVector::zeros(g.mode_counts[k]);
    for l in 0..g.element_count() {
        if l == k {
            continue;
        }
        if let Some(b) = g.blocks.get(&(k, l)) {
            if b.ncols() != target.len() {
                return Err(Error::Dimension(format!(
                    "block ({k}, {l}) has {} columns for a {}-mode target",
                    b.ncols(),
                    target.len()
                )));
            }
            alpha += b * target;
        }
    }
    Ok(alpha)
}

/// `S0′ = σ·diag(e^{2j∠t_n})` with `∠t_n` in (−π, π].
pub fn synthetic_s0(t: &CVector, sigma: Sigma) -> CVector {
    CVector::from_iterator(t.len(), t.iter().map(|x| sigma.value() * C64::from_polar(1.0, 2.0 * x.arg())))
}

/// `S′ = S0′·(I − T′*·T′ᵀ)`.
pub fn synthetic_scattering(t: &CVector, sigma: Sigma) -> CMatrix {
    let s0 = synthetic_s0(t, sigma);
    let n = t.len();
    CMatrix::from_diagonal(&s0) * (identity(n) - t.conjugate() * t.transpose())
}

/// Iteration state after step τ.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisState {
    pub t_prime: Vec<CVector>,
    pub v: Vec<f64>,
    pub q: f64,
}

impl SynthesisState {
    pub fn initial(k: usize, t0: &CVector) -> Self {
        Self {
            t_prime: vec![t0.clone(); k],
            v: vec![1.0 / (k as f64).sqrt(); k],
            q: f64::NAN,
        }
    }

    /// `f_T^(k) = T′^(k)·v^(k)`.
    pub fn f_t(&self) -> Vec<CVector> {
        self.t_prime.iter().zip(&self.v).map(|(t, v)| t * c(*v, 0.0)).collect()
    }
}

/// One update: `S′` from the previous `T′`, then `T′ = x/‖x‖`,
/// `q = 1/√(Σ‖x_k‖²)`, `v_k = q‖x_k‖` with `x_k = u − (S′ − I)·α^(k)`.
pub fn iterate_step(
    state: &SynthesisState,
    alphas: &[CVector],
    config: &SynthesisConfig,
) -> Result<SynthesisState> {
    let k = state.t_prime.len();
    if alphas.len() != k || config.sigma.len() != k {
        return Err(Error::Dimension(format!(
            "state has {k} elements, {} incident vectors, {} σ values",
            alphas.len(),
            config.sigma.len()
        )));
    }
    let u = &config.target;
    let mut xs = Vec::with_capacity(k);
    for e in 0..k {
        let mut s = synthetic_scattering(&state.t_prime[e], config.sigma[e]);
        if config.scatter_term == ScatterTerm::Outgoing {
            s -= identity(u.len());
        }
        let x = u - s * &alphas[e];
        if x.norm() <= 1e-14 {
            return Err(Error::DegenerateTarget { element: e });
        }
        xs.push(x);
    }
    let total: f64 = xs.iter().map(|x| x.norm_squared()).sum();
    let q = 1.0 / total.sqrt();
    Ok(SynthesisState {
        t_prime: xs.iter().map(|x| x / c(x.norm(), 0.0)).collect(),
        v: xs.iter().map(|x| q * x.norm()).collect(),
        q,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// `Σ_k ‖f_T,τ^(k) − f_T,τ−1^(k)‖`
    pub change: f64,
    pub state: SynthesisState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub target: CVector,
    pub sigma: Vec<Sigma>,
    pub scatter_term: ScatterTerm,
    pub threshold: f64,
    pub t_prime: Vec<CVector>,
    pub v: Vec<f64>,
    pub q: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

impl SynthesisResult {
    pub fn element_count(&self) -> usize {
        self.t_prime.len()
    }

    pub fn params(&self) -> Vec<SyntheticElementParams> {
        self.t_prime
            .iter()
            .zip(&self.sigma)
            .map(|(t, s)| SyntheticElementParams::from_transmit(t, *s))
            .collect()
    }

    pub fn f_t(&self) -> Vec<CVector> {
        self.t_prime.iter().zip(&self.v).map(|(t, v)| t * c(*v, 0.0)).collect()
    }

    /// Largest Eq.-16 residual over the final synthetic elements.
    pub fn reciprocity_residual(&self) -> f64 {
        self.t_prime
            .iter()
            .zip(&self.sigma)
            .map(|(t, s)| {
                let tm = CMatrix::from_column_slice(t.len(), 1, t.as_slice());
                reciprocity_residual(&synthetic_s0(t, *s), &tm)
            })
            .fold(0.0, f64::max)
    }
}

/// Runs [`iterate_step`] until the step change drops below the threshold or
/// the iteration cap is hit (then `converged = false`).
pub fn synthesize(coupling: &ModalCouplingMatrix, config: &SynthesisConfig) -> Result<SynthesisResult> {
    config.validate(coupling)?;
    let k = coupling.element_count();
    let alphas: Vec<CVector> = (0..k)
        .map(|e| incident_from_neighbors(coupling, &config.target, e))
        .collect::<Result<_>>()?;
    let t0 = config.initial_t.clone().unwrap_or_else(|| config.target.clone());
    let mut state = SynthesisState::initial(k, &t0);
    let mut trace = Vec::new();
    let mut converged = false;
    for it in 1..=config.max_iterations {
        let next = iterate_step(&state, &alphas, config)?;
        let change: f64 = next
            .f_t()
            .iter()
            .zip(state.f_t())
            .map(|(a, b)| (a - b).norm())
            .sum();
        trace.push(TraceEntry {
            iteration: it,
            change,
            state: next.clone(),
        });
        state = next;
        if change < config.threshold {
            converged = true;
            break;
        }
    }
    Ok(SynthesisResult {
        target: config.target.clone(),
        sigma: config.sigma.clone(),
        scatter_term: config.scatter_term,
        threshold: config.threshold,
        t_prime: state.t_prime,
        v: state.v,
        q: state.q,
        iterations: trace.len(),
        converged,
        trace,
    })
}

/// Array model of synthetic elements with the given `T′`.
pub fn synthetic_model(
    t_prime: &[CVector],
    sigma: &[Sigma],
    coupling: &ModalCouplingMatrix,
    bases: Vec<CharacteristicBasis>,
) -> Result<ArrayModel> {
    let elements = t_prime
        .iter()
        .zip(sigma)
        .map(|(t, s)| synthetic_gsm_from_transmit(t, *s))
        .collect::<Result<Vec<_>>>()?;
    ArrayModel::new(elements, coupling.clone(), bases)
}

/// Handedness whose modal target is closest to `u`.
pub fn handedness_of(u: &CVector) -> Handedness {
    if u.dotc(&u_left()).norm() >= u.dotc(&u_right()).norm() {
        Handedness::Left
    } else {
        Handedness::Right
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationReport {
    pub v: Vec<f64>,
    /// Outgoing modal coefficients per element.
    pub f: Vec<CVector>,
    /// `10·log10(Σ|uᴴf|² / Σ|u⊥ᴴf|²)`.
    pub modal_suppression_db: f64,
    /// Worst `‖f^(k) − q·u‖/q` over elements (synthesized configuration only).
    pub plug_back_error: Option<f64>,
    pub farfield: Option<FarFieldCut>,
    pub xpr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub initial: ConfigurationReport,
    pub synthesized: ConfigurationReport,
}

impl EvaluationReport {
    pub fn modal_improvement_db(&self) -> f64 {
        self.synthesized.modal_suppression_db - self.initial.modal_suppression_db
    }
}

/// Modal cross-polar suppression of stacked per-element coefficients.
pub fn modal_suppression_db(f: &[CVector], u: &CVector) -> f64 {
    let perp = orthogonal_complement(u);
    let co: f64 = f.iter().map(|x| u.dotc(x).norm_sqr()).sum();
    let cross: f64 = f.iter().map(|x| perp.dotc(x).norm_sqr()).sum();
    if cross == 0.0 {
        return crate::array::XPR_CAP_DB;
    }
    (10.0 * (co / cross).log10()).min(crate::array::XPR_CAP_DB)
}

fn evaluate_configuration(
    t_prime: &[CVector],
    v: &[f64],
    sigma: &[Sigma],
    target: &CVector,
    coupling: &ModalCouplingMatrix,
    bases: &[CharacteristicBasis],
    cut: Option<&CutSpec>,
    q: Option<f64>,
) -> Result<ConfigurationReport> {
    let model = synthetic_model(t_prime, sigma, coupling, bases.to_vec())?;
    let vv = CVector::from_iterator(v.len(), v.iter().map(|x| c(*x, 0.0)));
    let sol = solve_excitation(&model, &vv, &CVector::zeros(model.total_modes()))?;
    let f: Vec<CVector> = (0..v.len()).map(|k| sol.element_coefficients(k)).collect();
    let plug_back_error = q.map(|q| {
        f.iter()
            .map(|fk| (fk - target * c(q, 0.0)).norm() / q)
            .fold(0.0, f64::max)
    });
    let (farfield, xpr_db) = match (cut, bases.is_empty()) {
        (Some(cut), false) => {
            let ff = array_farfield(&sol, bases, cut, "array")?;
            let xpr = circular_components(&ff).xpr_db(handedness_of(target), None);
            (Some(ff), Some(xpr))
        }
        _ => (None, None),
    };
    Ok(ConfigurationReport {
        v: v.to_vec(),
        modal_suppression_db: modal_suppression_db(&f, target),
        f,
        plug_back_error,
        farfield,
        xpr_db,
    })
}

/// Compares the initial configuration (`T′ = u`, uniform `v`) with the
/// synthesized one by solving the coupled array for both. Far fields and XPR
/// are produced when `bases` is nonempty and a cut is given.
pub fn evaluate_result(
    result: &SynthesisResult,
    coupling: &ModalCouplingMatrix,
    bases: &[CharacteristicBasis],
    cut: Option<&CutSpec>,
) -> Result<EvaluationReport> {
    let k = result.element_count();
    let initial_t = vec![result.target.clone(); k];
    let initial_v = vec![1.0 / (k as f64).sqrt(); k];
    Ok(EvaluationReport {
        initial: evaluate_configuration(&initial_t, &initial_v, &result.sigma, &result.target, coupling, bases, cut, None)?,
        synthesized: evaluate_configuration(
            &result.t_prime,
            &result.v,
            &result.sigma,
            &result.target,
            coupling,
            bases,
            cut,
            Some(result.q),
        )?,
    })
}

/// JSON form of one synthesized element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub element: usize,
    pub sigma: Sigma,
    pub s_phases_deg: Vec<f64>,
    pub t_magnitudes: Vec<f64>,
    pub t_phases_deg: Vec<f64>,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub change: f64,
    pub q: f64,
    pub v: Vec<f64>,
    pub t_magnitudes: Vec<Vec<f64>>,
    pub t_phases_deg: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRecord {
    pub target: Vec<[f64; 2]>,
    pub scatter_term: ScatterTerm,
    pub threshold: f64,
    pub converged: bool,
    pub iterations: usize,
    pub q: f64,
    pub reciprocity_residual: f64,
    pub elements: Vec<ElementRecord>,
    pub trace: Vec<TraceRecord>,
}

fn mags(t: &CVector) -> Vec<f64> {
    t.iter().map(|x| x.norm()).collect()
}

fn phases_deg(t: &CVector) -> Vec<f64> {
    t.iter().map(|x| x.arg().to_degrees()).collect()
}

impl SynthesisRecord {
    pub fn from_result(r: &SynthesisResult) -> Self {
        let params = r.params();
        Self {
            target: r.target.iter().map(|x| [x.re, x.im]).collect(),
            scatter_term: r.scatter_term,
            threshold: r.threshold,
            converged: r.converged,
            iterations: r.iterations,
            q: r.q,
            reciprocity_residual: r.reciprocity_residual(),
            elements: (0..r.element_count())
                .map(|k| ElementRecord {
                    element: k,
                    sigma: r.sigma[k],
                    s_phases_deg: params[k].s_phases.iter().map(|p| p.to_degrees()).collect(),
                    t_magnitudes: mags(&r.t_prime[k]),
                    t_phases_deg: phases_deg(&r.t_prime[k]),
                    v: r.v[k],
                })
                .collect(),
            trace: r
                .trace
                .iter()
                .map(|e| TraceRecord {
                    iteration: e.iteration,
                    change: e.change,
                    q: e.state.q,
                    v: e.state.v.clone(),
                    t_magnitudes: e.state.t_prime.iter().map(mags).collect(),
                    t_phases_deg: e.state.t_prime.iter().map(phases_deg).collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds the result; the trace keeps step changes and `q`/`v`.
    pub fn to_result(&self) -> Result<SynthesisResult> {
        let vec_from = |m: &[f64], p: &[f64]| -> Result<CVector> {
            if m.len() != p.len() {
                return Err(Error::Parse("magnitude and phase lists differ in length".into()));
            }
            Ok(CVector::from_iterator(
                m.len(),
                m.iter().zip(p).map(|(a, b)| C64::from_polar(*a, b.to_radians())),
            ))
        };
        let trace = self
            .trace
            .iter()
            .map(|t| {
                Ok(TraceEntry {
                    iteration: t.iteration,
                    change: t.change,
                    state: SynthesisState {
                        t_prime: t
                            .t_magnitudes
                            .iter()
                            .zip(&t.t_phases_deg)
                            .map(|(m, p)| vec_from(m, p))
                            .collect::<Result<_>>()?,
                        v: t.v.clone(),
                        q: t.q,
                    },
                })
            })
            .collect::<Result<_>>()?;
        Ok(SynthesisResult {
            target: CVector::from_iterator(self.target.len(), self.target.iter().map(|x| c(x[0], x[1]))),
            sigma: self.elements.iter().map(|e| e.sigma).collect(),
            scatter_term: self.scatter_term,
            threshold: self.threshold,
            t_prime: self
                .elements
                .iter()
                .map(|e| vec_from(&e.t_magnitudes, &e.t_phases_deg))
                .collect::<Result<_>>()?,
            v: self.elements.iter().map(|e| e.v).collect(),
            q: self.q,
            iterations: self.iterations,
            converged: self.converged,
            trace,
        })
    }
}
