use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite response {value} at observation {row}")]
    NonFiniteResponse { row: usize, value: f64 },
    #[error("level `{level}` is not in the declared {factor} level order")]
    UnknownLevel { factor: &'static str, level: String },
    #[error("duplicate level `{0}` in explicit level order")]
    DuplicateLevel(String),
    #[error("unknown stratum `{0}`")]
    UnknownStratum(String),
    #[error("contrast `{label}` needs cell ({a_level}, {b_level}) which has no observations")]
    EmptyCell {
        label: String,
        a_level: String,
        b_level: String,
    },
    #[error("primary level `{0}` has no observations in any stratum")]
    EmptyLevel(String),
    #[error("no residual degrees of freedom (N = {observations}, cells = {cells})")]
    ZeroResidualDf { observations: usize, cells: usize },
    #[error("HC3 is undefined for cell ({a_level}, {b_level}) with a single observation; use HC0")]
    Hc3SingleObservation { a_level: String, b_level: String },
    #[error("cell ({a_level}, {b_level}) has {successes} of {trials} successes: the logit is infinite, enable add-two")]
    DegenerateProportion {
        a_level: String,
        b_level: String,
        successes: u64,
        trials: u64,
    },
    #[error("invalid binomial cell ({a_level}, {b_level}): {successes} successes of {trials} trials")]
    InvalidCounts {
        a_level: String,
        b_level: String,
        successes: u64,
        trials: u64,
    },
    #[error("invalid contrast family: {0}")]
    InvalidFamily(String),
    #[error("Williams contrasts need an explicit ordering of the primary levels with the control first")]
    WilliamsNeedsOrder,
    #[error("control level `{0}` is not a primary level")]
    UnknownControl(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("contrast `{0}` has zero standard error")]
    ZeroStandardError(String),
    #[error("invalid integration problem: {0}")]
    InvalidProblem(String),
    #[error("correlation matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),
    #[error("quantile search did not converge: {0}")]
    NonConvergence(String),
    #[error("contrast `{0}` is not a weighted two-group comparison (positive and negative parts must each sum to one)")]
    UnsupportedContrast(String),
    #[error("sample of size {0} is too small for a variance estimate")]
    SampleTooSmall(usize),
    #[error("saturated interaction model: no residual degrees of freedom")]
    Saturated,
    #[error("the design needs at least two levels of each factor")]
    TooFewLevels,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("{0}")]
    Parse(String),
}
