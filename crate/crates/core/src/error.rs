use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SusyError {
    #[error("support {support} is not contained in region {region}")]
    SupportOutsideRegion { support: String, region: String },

    #[error("region with {sites} sites exceeds the representation limit of {limit} sites")]
    RegionTooLarge { sites: usize, limit: usize },

    #[error("superderivation is not nilpotent: delta^2({generator}) = {image}")]
    NotNilpotent { generator: String, image: String },

    #[error("tail bound {achieved:e} above tolerance {tol:e} at truncation order {order}")]
    ToleranceUnreachable { achieved: f64, tol: f64, order: usize },

    #[error("time {t:e} outside the certified radius {t0:e}")]
    OutsideRadius { t: f64, t0: f64 },

    #[error("order {order} produced {terms} terms, above the budget of {budget}")]
    TermBudgetExceeded { order: usize, terms: usize, budget: usize },

    #[error("matrix is not hermitian (residual {residual:e})")]
    NonHermitian { residual: f64 },

    #[error("test function does not decay at the grid edge (|f| = {edge:e})")]
    InsufficientDecay { edge: f64 },

    #[error("space dimension {dim} exceeds limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("invalid charge assignment: {0}")]
    InvalidAssignment(String),

    #[error("{line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, SusyError>;
