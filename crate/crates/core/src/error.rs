use thiserror::Error;

/// Errors raised anywhere in the modal synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular system ({context}), condition estimate {condition:.3e}")]
    Solver { context: String, condition: f64 },

    #[error("characteristic-mode decomposition failed: Re{{Z0}} smallest eigenvalue {min_eigenvalue:.6e}")]
    Decomposition { min_eigenvalue: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("termination matrix (Gamma_L0 - Gamma) is singular, condition estimate {condition:.3e}")]
    Termination { condition: f64 },

    #[error("coupled system is resonant, condition estimate {condition:.3e}")]
    Resonance { condition: f64 },

    #[error("degenerate synthesis target at element {element}: |u - S'alpha| vanishes")]
    DegenerateTarget { element: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::Index(_) => "index",
            Error::Dimension(_) => "dimension",
            Error::Solver { .. } => "solver",
            Error::Decomposition { .. } => "decomposition",
            Error::Constraint(_) => "constraint",
            Error::Termination { .. } => "termination",
            Error::Resonance { .. } => "resonance",
            Error::DegenerateTarget { .. } => "degenerate",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "parse",
        }
    }

    /// True for errors caused by user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse(_) | Error::Io(_) | Error::Json(_) | Error::Geometry(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
