use thiserror::Error;

pub type Result<T> = std::result::Result<T, QfixError>;

#[derive(Debug, Error)]
pub enum QfixError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix JSON has {found} entries, expected {expected} for dim {dim}")]
    EntryCount {
        dim: usize,
        expected: usize,
        found: usize,
    },

    #[error("not a density operator: {0}")]
    NotDensity(String),

    #[error("operator is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("not a projection (defect {defect:e})")]
    NotProjection { defect: f64 },

    #[error("vector is not normalized (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("Kraus operators are not trace preserving (completeness defect {defect:e})")]
    NotTracePreserving { defect: f64 },

    #[error("channel is not CPTP: trace defect {trace_defect:e}, Choi min eigenvalue {choi_min:e}")]
    NotCptp { trace_defect: f64, choi_min: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (dim {dim})")]
    EigenNoConvergence { dim: usize, iterations: usize },

    #[error("{what} did not converge (dim {dim})")]
    DecompositionFailed { what: &'static str, dim: usize },

    #[error("no fixed point at this tolerance: closest eigenvalue distance to 1 is {closest:e}")]
    NoFixedPoint { closest: f64 },

    #[error("Fock basis exceeds the cap of {cap} states; use smaller cutoffs")]
    BasisTooLarge { cap: usize },

    #[error("K sampler has no support: no basis state lies inside the constraint box")]
    EmptySupport,

    #[error("state is not in K (expectations {expectations:?})")]
    NotInK { expectations: Vec<f64> },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
