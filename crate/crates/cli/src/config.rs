//! Run configuration: a single JSON document plus command-line overrides.

use std::path::{Path, PathBuf};

use cmsynth_core::geometry::WireGeometry;
use cmsynth_core::gsm::Sigma;
use cmsynth_core::layout::{CrossedGridSpec, DipolePairSpec};
use cmsynth_core::linalg::{CVector, C64};
use cmsynth_core::mom::CutSpec;
use cmsynth_core::synthesis::{u_left, u_right, ScatterTerm, SynthesisConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_THRESHOLD};
use cmsynth_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// JSON schema of [`RunConfig`], published alongside the binary.
pub const SCHEMA: &str = include_str!("../schema/run-config.schema.json");

/// Output directory used when neither the command line, the environment nor
/// the config names one.
pub const DEFAULT_OUTPUT_DIR: &str = "cmsynth-out";

/// Environment variable overriding the output directory.
pub const OUTPUT_ENV: &str = "CMSYNTH_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySource {
    /// A builtin layout with optional parameter overrides.
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<serde_json::Value>,
    },
    /// A `WireGeometry` JSON file, relative to the config file.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Lhcp,
    Rhcp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSettings {
    pub target: Polarization,
    /// One orientation constant per element; `+j` for all when empty.
    pub sigma: Vec<Sigma>,
    pub max_iterations: usize,
    pub threshold: f64,
    pub scatter_term: ScatterTerm,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self {
            target: Polarization::Lhcp,
            sigma: Vec::new(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            threshold: DEFAULT_THRESHOLD,
            scatter_term: ScatterTerm::Outgoing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutConfig {
    pub phi_deg: f64,
    pub theta_start_deg: f64,
    pub theta_stop_deg: f64,
    pub theta_step_deg: f64,
}

impl CutConfig {
    pub fn spec(&self) -> Result<CutSpec> {
        CutSpec::uniform(self.phi_deg, self.theta_start_deg, self.theta_stop_deg, self.theta_step_deg)
            .map_err(|e| Error::Config(format!("cut at phi {}: {e}", self.phi_deg)))
    }

    /// File-name tag such as `phi000`.
    pub fn tag(&self) -> String {
        format!("phi{:03}", self.phi_deg.round() as i64)
    }
}

fn default_cuts() -> Vec<CutConfig> {
    [0.0, 90.0]
        .iter()
        .map(|&phi_deg| CutConfig {
            phi_deg,
            theta_start_deg: -90.0,
            theta_stop_deg: 90.0,
            theta_step_deg: 1.0,
        })
        .collect()
}

fn default_reference() -> f64 {
    50.0
}

fn default_oracle_drives() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySource,
    pub frequency_hz: f64,
    /// Modes retained per element; all modes when absent.
    #[serde(default)]
    pub n_modes: Option<usize>,
    #[serde(default = "default_reference")]
    pub reference_impedance: f64,
    /// Incident port waves `[re, im]` in model order for `solve`.
    #[serde(default)]
    pub drive: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub synthesis: SynthesisSettings,
    #[serde(default = "default_cuts")]
    pub cuts: Vec<CutConfig>,
    /// θ range `[lo, hi]` in degrees used for XPR; the whole cut when absent.
    #[serde(default)]
    pub xpr_window_deg: Option<[f64; 2]>,
    /// Random drives used by `oracle`.
    #[serde(default = "default_oracle_drives")]
    pub oracle_drives: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Builtin layout names.
pub const BUILTINS: [&str; 2] = ["dipole-pair", "grid3x3-crossed"];

impl RunConfig {
    /// Default configuration of a builtin layout.
    pub fn builtin(name: &str) -> Result<Self> {
        let (frequency_hz, n_modes) = match name {
            "dipole-pair" => (1e9, Some(2)),
            "grid3x3-crossed" => (28e9, Some(2)),
            other => return Err(unknown_builtin(other)),
        };
        Ok(Self {
            geometry: GeometrySource::Builtin {
                name: name.to_string(),
                params: None,
            },
            frequency_hz,
            n_modes,
            reference_impedance: default_reference(),
            drive: None,
            synthesis: SynthesisSettings::default(),
            cuts: default_cuts(),
            xpr_window_deg: None,
            oracle_drives: default_oracle_drives(),
            output_dir: None,
        })
    }

    /// Reads a config file; relative geometry paths are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        if let GeometrySource::File(p) = &mut cfg.geometry {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("frequency_hz", self.frequency_hz)?;
        positive("reference_impedance", self.reference_impedance)?;
        positive("synthesis.threshold", self.synthesis.threshold)?;
        if self.n_modes == Some(0) {
            return Err(Error::Config("n_modes must be at least 1".into()));
        }
        if self.synthesis.max_iterations == 0 {
            return Err(Error::Config("synthesis.max_iterations must be at least 1".into()));
        }
        if self.oracle_drives == 0 {
            return Err(Error::Config("oracle_drives must be at least 1".into()));
        }
        if self.cuts.is_empty() {
            return Err(Error::Config("at least one cut is required".into()));
        }
        for cut in &self.cuts {
            cut.spec()?;
        }
        if let Some([lo, hi]) = self.xpr_window_deg {
            if !(lo <= hi) {
                return Err(Error::Config(format!("xpr_window_deg [{lo}, {hi}] is empty")));
            }
        }
        match &self.geometry {
            GeometrySource::Builtin { name, .. } if !BUILTINS.contains(&name.as_str()) => Err(unknown_builtin(name)),
            GeometrySource::File(p) if !p.is_file() => {
                Err(Error::Config(format!("geometry file {} does not exist", p.display())))
            }
            _ => Ok(()),
        }
    }

    pub fn geometry(&self) -> Result<WireGeometry> {
        match &self.geometry {
            GeometrySource::Builtin { name, params } => {
                let params = params.clone().unwrap_or_else(|| serde_json::json!({}));
                let bad = |e: serde_json::Error| Error::Config(format!("invalid parameters for {name}: {e}"));
                match name.as_str() {
                    "dipole-pair" => serde_json::from_value::<DipolePairSpec>(params)
                        .map_err(bad)?
                        .geometry(self.frequency_hz),
                    "grid3x3-crossed" => serde_json::from_value::<CrossedGridSpec>(params)
                        .map_err(bad)?
                        .geometry(self.frequency_hz),
                    other => Err(unknown_builtin(other)),
                }
            }
            GeometrySource::File(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read geometry {}: {e}", p.display())))?;
                let g: WireGeometry = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("invalid geometry {}: {e}", p.display())))?;
                g.validate()?;
                Ok(g)
            }
        }
    }

    pub fn cut_specs(&self) -> Result<Vec<CutSpec>> {
        self.cuts.iter().map(CutConfig::spec).collect()
    }

    pub fn xpr_window(&self) -> Option<(f64, f64)> {
        self.xpr_window_deg.map(|[lo, hi]| (lo, hi))
    }

    /// Drive vector from the config, checked against the port count.
    pub fn drive_vector(&self, ports: usize) -> Result<Option<CVector>> {
        match &self.drive {
            None => Ok(None),
            Some(d) if d.len() != ports => Err(Error::Config(format!(
                "drive has {} entries, the layout has {ports} ports",
                d.len()
            ))),
            Some(d) => Ok(Some(CVector::from_iterator(ports, d.iter().map(|[re, im]| C64::new(*re, *im))))),
        }
    }

    pub fn synthesis_config(&self, elements: usize) -> Result<SynthesisConfig> {
        let s = &self.synthesis;
        let sigma = match s.sigma.len() {
            0 => vec![Sigma::PlusJ; elements],
            n if n == elements => s.sigma.clone(),
            n => {
                return Err(Error::Config(format!(
                    "synthesis.sigma has {n} entries for {elements} elements"
                )))
            }
        };
        Ok(SynthesisConfig {
            target: match s.target {
                Polarization::Lhcp => u_left(),
                Polarization::Rhcp => u_right(),
            },
            sigma,
            max_iterations: s.max_iterations,
            threshold: s.threshold,
            initial_t: None,
            scatter_term: s.scatter_term,
        })
    }
}

fn unknown_builtin(name: &str) -> Error {
    Error::Config(format!("unknown builtin layout {name:?}; expected one of {}", BUILTINS.join(", ")))
}
