use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layout construction failed: {0}")]
    ConstructionFailure(String),

    #[error("meshing failed: {0}")]
    MeshingFailure(String),

    #[error("linear solve failed: {reason} (relative residual {residual:.3e} after {iterations} refinement steps)")]
    SolveFailure {
        reason: String,
        residual: f64,
        iterations: usize,
    },

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("participation undefined: {0}")]
    UndefinedParticipation(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("divergent rate: {0}")]
    DivergentRate(String),

    #[error("at trench depth {depth_nm} nm: {source}")]
    AtDepth {
        depth_nm: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("design {design}: {source}")]
    InDesign {
        design: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn solve(msg: impl Into<String>) -> Self {
        Error::SolveFailure {
            reason: msg.into(),
            residual: f64::NAN,
            iterations: 0,
        }
    }

    /// Stable machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::ConstructionFailure(_) => "construction-failure",
            Error::MeshingFailure(_) => "meshing-failure",
            Error::SolveFailure { .. } => "solve-failure",
            Error::UnsupportedConfiguration(_) => "unsupported-configuration",
            Error::UndefinedParticipation(_) => "undefined-participation",
            Error::FitFailure(_) => "fit-failure",
            Error::DivergentRate(_) => "divergent-rate",
            Error::AtDepth { source, .. } | Error::InDesign { source, .. } => source.kind(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
