use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the toolkit.
///
/// Variants split into two families: configuration/validation problems
/// (bad inputs, violated preconditions) and numerical failures (solver
/// non-convergence). [`Error::is_numerical`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("nodes {0} and {1} coincide")]
    DuplicateNodes(usize, usize),

    #[error("inversion center coincides with node {0}")]
    InversionSingularity(usize),

    #[error("probe {probe} coincides with atom {atom} under the unregularized kernel")]
    ProbeOnAtom { probe: usize, atom: usize },

    #[error("overlapping supports: atoms coincide at a point where the kernel is singular")]
    OverlappingSupports,

    #[error("an atom sits at the Kelvin center")]
    AtomAtCenter,

    #[error("kernel diagonal requested under the unregularized rule")]
    Unregularized,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("target node sets are not nested: level {0} is not contained in level {1}")]
    NotNested(usize, usize),

    #[error("node set is not a subset of the target: node {0} is missing")]
    NotSubset(usize),

    #[error("candidate measure is infeasible at target node {node}: potential deficit {deficit:e}")]
    InfeasibleCandidate { node: usize, deficit: f64 },

    #[error("cloud carries no interior/boundary tags")]
    MissingTags,

    #[error("shell decomposition has the wrong direction: {0}")]
    WrongDirection(&'static str),

    #[error("solver did not converge after {iterations} iterations (largest KKT residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotConverged { .. })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
