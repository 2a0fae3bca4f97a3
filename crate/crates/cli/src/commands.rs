//! The workbench subcommands.

use std::path::Path;

use cmsynth_core::array::{
    array_farfield, circular_components, couple, direct_solve_with, element_currents,
    farfield_csv, measured_model_from, solve_excitation, ArrayModel, Handedness,
};
use cmsynth_core::coupling::{CouplingRecord, ModalCouplingMatrix};
use cmsynth_core::geometry::WireGeometry;
use cmsynth_core::gsm::{eigenvalue_to_scattering, GsmRecord};
use cmsynth_core::io::{format_f64, write_matrix, write_real_matrix};
use cmsynth_core::linalg::{relative_error, CVector, C64};
use cmsynth_core::modal::{compute_characteristic_modes, diagnostics, ModalDiagnostics};
use cmsynth_core::mom::{assemble_impedance, ImpedanceMatrix};
use cmsynth_core::synthesis::{
    evaluate_result, handedness_of, synthesize, ConfigurationReport, SynthesisRecord, SynthesisResult,
};
use cmsynth_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Polarization, RunConfig};
use crate::output::{pairs, Document, OutputDir, Provenance};

/// Options shared by all subcommands after config resolution.
pub struct Options {
    pub seed: Option<u64>,
    pub coupling: bool,
    pub oracle: bool,
    pub drive_file: Option<std::path::PathBuf>,
    pub result_file: Option<std::path::PathBuf>,
}

/// Everything a command needs: resolved config, geometry and output sink.
pub struct Run {
    pub cfg: RunConfig,
    pub geometry: WireGeometry,
    pub opts: Options,
    pub out: OutputDir,
}

impl Run {
    fn provenance(&self, command: &str) -> Result<Provenance> {
        Provenance::new(command, &self.cfg, &self.geometry, self.opts.seed, self.opts.coupling)
    }

    /// Modes per element, checked against the smallest element.
    fn mode_count(&self, z: &ImpedanceMatrix) -> Result<Option<usize>> {
        let smallest = z.spans.iter().map(|s| s.len).min().unwrap_or(0);
        match self.cfg.n_modes {
            Some(n) if n > smallest => Err(Error::Config(format!(
                "n_modes = {n} exceeds the {smallest} basis functions of the smallest element"
            ))),
            n => Ok(n),
        }
    }

    fn model(&self, n_modes: Option<usize>) -> Result<(ArrayModel, ImpedanceMatrix)> {
        let z = assemble_impedance(&self.geometry, self.cfg.frequency_hz)?;
        let n = match n_modes {
            Some(n) => Some(n),
            None => self.mode_count(&z)?,
        };
        let model = measured_model_from(&z, &self.geometry, n, self.cfg.reference_impedance)?;
        let model = if self.opts.coupling { model } else { model.uncoupled() };
        Ok((model, z))
    }

    fn co_polarization(&self) -> Handedness {
        match self.cfg.synthesis.target {
            Polarization::Lhcp => Handedness::Left,
            Polarization::Rhcp => Handedness::Right,
        }
    }
}

#[derive(Serialize)]
struct ModeRow {
    mode: usize,
    eigenvalue: f64,
    modal_significance: f64,
    scattering: [f64; 2],
}

#[derive(Serialize)]
struct ElementModes {
    element: usize,
    dimension: usize,
    regularization: f64,
    eigencurrents_file: String,
    modes: Vec<ModeRow>,
    diagnostics: ModalDiagnostics,
}

#[derive(Serialize)]
struct ModesReport {
    frequency_hz: f64,
    ordering: &'static str,
    sign_convention: &'static str,
    elements: Vec<ElementModes>,
}

/// Characteristic modes of every element's self block.
pub fn modes(run: &mut Run) -> Result<String> {
    let z = assemble_impedance(&run.geometry, run.cfg.frequency_hz)?;
    let n_modes = run.mode_count(&z)?;
    let mut elements = Vec::new();
    let mut csv = String::from("element,mode,eigenvalue,abs_eigenvalue,modal_significance\n");
    let mut table = format!("{:>7} {:>4} {:>24} {:>12}\n", "element", "mode", "lambda", "MS");
    for span in &z.spans {
        let z0 = z.extract_block(span.element, span.element)?;
        let basis = compute_characteristic_modes(&z0, n_modes.unwrap_or(span.len))?;
        let name = format!("modes/element_{:03}.modes", span.element);
        run.out.write(&name, &write_real_matrix(&basis.eigencurrents, basis.frequency))?;
        run.out.write_json(&format!("modes/element_{:03}.json", span.element), &basis.sidecar())?;
        let mut rows = Vec::new();
        for (n, &lambda) in basis.eigenvalues.iter().enumerate() {
            let ms = 1.0 / (1.0 + lambda * lambda).sqrt();
            let s = eigenvalue_to_scattering(lambda);
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                span.element,
                n + 1,
                format_f64(lambda),
                format_f64(lambda.abs()),
                format_f64(ms)
            ));
            table.push_str(&format!("{:>7} {:>4} {:>24.16e} {:>12.6}\n", span.element, n + 1, lambda, ms));
            rows.push(ModeRow {
                mode: n + 1,
                eigenvalue: lambda,
                modal_significance: ms,
                scattering: [s.re, s.im],
            });
        }
        elements.push(ElementModes {
            element: span.element,
            dimension: basis.dimension,
            regularization: basis.regularization,
            eigencurrents_file: name,
            modes: rows,
            diagnostics: diagnostics(&z0, &basis),
        });
    }
    run.out.write("eigenvalues.csv", &csv)?;
    let prov = run.provenance("modes")?;
    run.out.write_json(
        "modes.json",
        &Document {
            provenance: &prov,
            body: ModesReport {
                frequency_hz: run.cfg.frequency_hz,
                ordering: cmsynth_core::modal::ORDERING_RULE,
                sign_convention: cmsynth_core::modal::SIGN_RULE,
                elements,
            },
        },
    )?;
    Ok(table)
}

#[derive(Serialize)]
struct AssembleReport<'a> {
    frequency_hz: f64,
    dimension: usize,
    spans: &'a [cmsynth_core::mom::ElementSpan],
    port_basis: Vec<usize>,
    symmetry_residual: f64,
    matrix_file: &'static str,
}

/// Full impedance matrix of the layout.
pub fn assemble(run: &mut Run) -> Result<String> {
    let z = assemble_impedance(&run.geometry, run.cfg.frequency_hz)?;
    run.out.write("impedance.mat", &write_matrix(&z.entries, z.frequency))?;
    let prov = run.provenance("assemble")?;
    let report = AssembleReport {
        frequency_hz: z.frequency,
        dimension: z.dim(),
        spans: &z.spans,
        port_basis: run.geometry.mesh()?.port_basis,
        symmetry_residual: z.symmetry_residual(),
        matrix_file: "impedance.mat",
    };
    run.out.write_json("assemble.json", &Document { provenance: &prov, body: &report })?;
    Ok(format!(
        "assembled {}x{} impedance matrix ({} elements), symmetry residual {:.3e}\n",
        z.dim(),
        z.dim(),
        z.spans.len(),
        report.symmetry_residual
    ))
}

#[derive(Serialize)]
struct BlockNorm {
    k: usize,
    l: usize,
    frobenius: f64,
}

#[derive(Serialize)]
struct CoupleReport {
    element_count: usize,
    mode_counts: Vec<usize>,
    spectral_radius: f64,
    transpose_residual: f64,
    block_norms: Vec<BlockNorm>,
    coupling: CouplingRecord,
    gsm_files: Vec<String>,
}

/// Per-element GSMs and the modal coupling matrix.
pub fn couple_cmd(run: &mut Run) -> Result<String> {
    let (model, _) = run.model(None)?;
    let mut gsm_files = Vec::new();
    for (k, g) in model.elements.iter().enumerate() {
        let name = format!("gsm/element_{:03}.json", model.element_ids[k]);
        run.out.write_json(&name, &GsmRecord::from_gsm(g))?;
        gsm_files.push(name);
    }
    let blocks = couple(&model)?;
    let g = &model.coupling;
    let report = CoupleReport {
        element_count: g.element_count(),
        mode_counts: g.mode_counts.clone(),
        spectral_radius: blocks.spectral_radius,
        transpose_residual: g.transpose_residual(),
        block_norms: g
            .blocks
            .iter()
            .map(|(&(k, l), m)| BlockNorm {
                k,
                l,
                frobenius: m.norm(),
            })
            .collect(),
        coupling: CouplingRecord::from_matrix(g, run.cfg.frequency_hz),
        gsm_files,
    };
    let prov = run.provenance("couple")?;
    run.out.write_json("coupling.json", &Document { provenance: &prov, body: &report })?;
    Ok(format!(
        "{} elements, modes per element {:?}, spectral radius of (S-I)G {:.6}\n",
        report.element_count, report.mode_counts, report.spectral_radius
    ))
}

fn read_drive_file(path: &Path, ports: usize) -> Result<CVector> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read drive file {}: {e}", path.display())))?;
    let d: Vec<[f64; 2]> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("drive file {} must hold [re, im] pairs: {e}", path.display())))?;
    if d.len() != ports {
        return Err(Error::Config(format!("drive file has {} entries, the layout has {ports} ports", d.len())));
    }
    Ok(CVector::from_iterator(ports, d.iter().map(|[re, im]| C64::new(*re, *im))))
}

fn random_drive(rng: &mut ChaCha8Rng, ports: usize) -> CVector {
    let v = CVector::from_iterator(
        ports,
        (0..ports).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
    );
    let n = v.norm();
    v / C64::new(n, 0.0)
}

#[derive(Serialize)]
struct CutXpr {
    phi_deg: f64,
    xpr_db: f64,
    pattern_file: String,
}

#[derive(Serialize)]
struct OracleComparison {
    w_relative_error: f64,
    current_relative_error: f64,
}

#[derive(Serialize)]
struct SolveReport {
    drive_source: String,
    v: Vec<[f64; 2]>,
    w: Vec<[f64; 2]>,
    f: Vec<Vec<[f64; 2]>>,
    residual: f64,
    spectral_radius: f64,
    co_polarization: Handedness,
    cuts: Vec<CutXpr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleComparison>,
}

fn write_pattern(out: &mut OutputDir, name: &str, cut: &cmsynth_core::mom::FarFieldCut) -> Result<()> {
    out.write(name, &farfield_csv(cut))
}

/// Coupled solution for one drive vector, with patterns and port waves.
pub fn solve(run: &mut Run) -> Result<String> {
    let (model, z) = run.model(None)?;
    let ports = model.total_ports();
    let (v, source) = if let Some(path) = run.opts.drive_file.clone() {
        (read_drive_file(&path, ports)?, format!("file {}", path.display()))
    } else if let Some(v) = run.cfg.drive_vector(ports)? {
        (v, "config".to_string())
    } else if let Some(seed) = run.opts.seed {
        (random_drive(&mut ChaCha8Rng::seed_from_u64(seed), ports), format!("random (seed {seed})"))
    } else {
        let a = 1.0 / (ports as f64).sqrt();
        (CVector::from_element(ports, C64::new(a, 0.0)), "uniform".to_string())
    };
    let sol = solve_excitation(&model, &v, &CVector::zeros(model.total_modes()))?;
    let co = run.co_polarization();
    let mut cuts = Vec::new();
    for (cfg_cut, spec) in run.cfg.cuts.clone().iter().zip(run.cfg.cut_specs()?) {
        let ff = array_farfield(&sol, &model.bases, &spec, "solution")?;
        let name = format!("pattern_{}.csv", cfg_cut.tag());
        write_pattern(&mut run.out, &name, &ff)?;
        cuts.push(CutXpr {
            phi_deg: cfg_cut.phi_deg,
            xpr_db: circular_components(&ff).xpr_db(co, run.cfg.xpr_window()),
            pattern_file: name,
        });
    }
    let oracle = if run.opts.oracle {
        let direct = direct_solve_with(&z, &run.geometry, &v, run.cfg.reference_impedance)?;
        let cur = element_currents(&sol, &model.bases)?;
        let stacked = CVector::from_iterator(direct.currents.len(), cur.iter().flat_map(|c| c.iter().copied()));
        Some(OracleComparison {
            w_relative_error: relative_error(&sol.w, &direct.w),
            current_relative_error: relative_error(&stacked, &direct.currents),
        })
    } else {
        None
    };
    let report = SolveReport {
        drive_source: source,
        v: pairs(&v),
        w: pairs(&sol.w),
        f: (0..model.element_count()).map(|k| pairs(&sol.element_coefficients(k))).collect(),
        residual: sol.residual,
        spectral_radius: couple(&model)?.spectral_radius,
        co_polarization: co,
        cuts,
        oracle,
    };
    let prov = run.provenance("solve")?;
    run.out.write_json("solution.json", &Document { provenance: &prov, body: &report })?;
    let mut summary = format!("solved {ports}-port array, modal residual {:.3e}\n", report.residual);
    for c in &report.cuts {
        summary.push_str(&format!("  phi {:>5.1}: XPR {:.2} dB\n", c.phi_deg, c.xpr_db));
    }
    if let Some(o) = &report.oracle {
        summary.push_str(&format!(
            "  oracle: port-wave error {:.3e}, current error {:.3e}\n",
            o.w_relative_error, o.current_relative_error
        ));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct ConfigSummary {
    v: Vec<f64>,
    f: Vec<Vec<[f64; 2]>>,
    modal_suppression_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    plug_back_error: Option<f64>,
    cuts: Vec<CutXpr>,
}

#[derive(Serialize)]
struct SynthReport {
    result: SynthesisRecord,
    initial: ConfigSummary,
    synthesized: ConfigSummary,
    modal_improvement_db: f64,
}

fn summarize(r: &ConfigurationReport, cuts: Vec<CutXpr>) -> ConfigSummary {
    ConfigSummary {
        v: r.v.clone(),
        f: r.f.iter().map(pairs).collect(),
        modal_suppression_db: r.modal_suppression_db,
        plug_back_error: r.plug_back_error,
        cuts,
    }
}

/// Reads a `SynthesisRecord`, either bare or inside a `synthesis.json` document.
pub fn load_result(path: &Path) -> Result<SynthesisResult> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read result {}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid result {}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("result") {
        value = inner.take();
    }
    let record: SynthesisRecord = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("invalid result {}: {e}", path.display())))?;
    record.to_result()
}

/// Iterative synthesis followed by a before/after evaluation.
pub fn synth(run: &mut Run) -> Result<String> {
    let n = run.cfg.n_modes.unwrap_or(2);
    if n != 2 {
        return Err(Error::Config(format!("synthesis needs n_modes = 2, got {n}")));
    }
    let (model, _) = run.model(Some(2))?;
    let k = model.element_count();
    let coupling: &ModalCouplingMatrix = &model.coupling;
    let result = match run.opts.result_file.clone() {
        Some(path) => {
            let r = load_result(&path)?;
            if r.element_count() != k {
                return Err(Error::Config(format!(
                    "result has {} elements, the layout has {k}",
                    r.element_count()
                )));
            }
            r
        }
        None => synthesize(coupling, &run.cfg.synthesis_config(k)?)?,
    };
    let co = handedness_of(&result.target);
    let mut initial_cuts = Vec::new();
    let mut synth_cuts = Vec::new();
    let mut report = None;
    for (cfg_cut, spec) in run.cfg.cuts.clone().iter().zip(run.cfg.cut_specs()?) {
        let ev = evaluate_result(&result, coupling, &model.bases, Some(&spec))?;
        for (label, conf, list) in [
            ("initial", &ev.initial, &mut initial_cuts),
            ("synthesized", &ev.synthesized, &mut synth_cuts),
        ] {
            let ff = conf.farfield.as_ref().expect("bases are attached");
            let name = format!("pattern_{label}_{}.csv", cfg_cut.tag());
            write_pattern(&mut run.out, &name, ff)?;
            list.push(CutXpr {
                phi_deg: cfg_cut.phi_deg,
                xpr_db: circular_components(ff).xpr_db(co, run.cfg.xpr_window()),
                pattern_file: name,
            });
        }
        report.get_or_insert(ev);
    }
    let ev = report.expect("at least one cut");
    let mut trace = String::from("iteration,change,q\n");
    for e in &result.trace {
        trace.push_str(&format!("{},{},{}\n", e.iteration, format_f64(e.change), format_f64(e.state.q)));
    }
    run.out.write("trace.csv", &trace)?;
    let doc = SynthReport {
        result: SynthesisRecord::from_result(&result),
        modal_improvement_db: ev.modal_improvement_db(),
        initial: summarize(&ev.initial, initial_cuts),
        synthesized: summarize(&ev.synthesized, synth_cuts),
    };
    let prov = run.provenance("synth")?;
    run.out.write_json("synthesis.json", &Document { provenance: &prov, body: &doc })?;

    let status = if result.converged {
        format!("converged in {} iterations", result.iterations)
    } else {
        format!("not converged after {} iterations", result.iterations)
    };
    let mut summary = format!(
        "{status}; modal cross-polar suppression {:.2} dB -> {:.2} dB (improvement {:.2} dB)\n",
        doc.initial.modal_suppression_db, doc.synthesized.modal_suppression_db, doc.modal_improvement_db
    );
    if let Some(p) = doc.synthesized.plug_back_error {
        summary.push_str(&format!("  plug-back error {:.3e}\n", p));
    }
    for (a, b) in doc.initial.cuts.iter().zip(&doc.synthesized.cuts) {
        summary.push_str(&format!(
            "  phi {:>5.1}: XPR {:.2} dB -> {:.2} dB\n",
            a.phi_deg, a.xpr_db, b.xpr_db
        ));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct OracleDrive {
    v: Vec<[f64; 2]>,
    w_relative_error: f64,
    current_relative_error: f64,
}

#[derive(Serialize)]
struct OracleReport {
    modes_per_element: Vec<usize>,
    drives: Vec<OracleDrive>,
    max_w_relative_error: f64,
    max_current_relative_error: f64,
}

/// Coupled-model solutions against the direct dense MoM solve for random drives.
pub fn oracle(run: &mut Run) -> Result<String> {
    let (model, z) = run.model(None)?;
    let seed = run.opts.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ports = model.total_ports();
    let mut drives = Vec::new();
    for _ in 0..run.cfg.oracle_drives {
        let v = random_drive(&mut rng, ports);
        let sol = solve_excitation(&model, &v, &CVector::zeros(model.total_modes()))?;
        let direct = direct_solve_with(&z, &run.geometry, &v, run.cfg.reference_impedance)?;
        let cur = element_currents(&sol, &model.bases)?;
        let stacked = CVector::from_iterator(direct.currents.len(), cur.iter().flat_map(|c| c.iter().copied()));
        drives.push(OracleDrive {
            v: pairs(&v),
            w_relative_error: relative_error(&sol.w, &direct.w),
            current_relative_error: relative_error(&stacked, &direct.currents),
        });
    }
    let report = OracleReport {
        modes_per_element: model.mode_counts(),
        max_w_relative_error: drives.iter().map(|d| d.w_relative_error).fold(0.0, f64::max),
        max_current_relative_error: drives.iter().map(|d| d.current_relative_error).fold(0.0, f64::max),
        drives,
    };
    let prov = run.provenance("oracle")?;
    run.out.write_json("oracle.json", &Document { provenance: &prov, body: &report })?;
    Ok(format!(
        "{} drives, modes per element {:?}: max port-wave error {:.3e}, max current error {:.3e}\n",
        report.drives.len(),
        report.modes_per_element,
        report.max_w_relative_error,
        report.max_current_relative_error
    ))
}
