use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("instance has no candidate centers")]
    EmptyCandidates,

    #[error("k = {k} exceeds candidate count {candidates}")]
    KTooLarge { k: usize, candidates: usize },

    #[error("k must be at least 1")]
    KZero,

    #[error("epsilon {0} outside (0, 1)")]
    BadEpsilon(f64),

    #[error("point has dimension {got}, instance dimension is {want}")]
    DimensionMismatch { got: usize, want: usize },

    #[error("negative or non-finite weight {0}")]
    BadWeight(f64),

    #[error("coordinate {0} is negative")]
    NegativeCoordinate(i64),

    #[error("open set is empty")]
    EmptyOpenSet,

    #[error("candidate index {index} out of range ({len} candidates)")]
    CandidateOutOfRange { index: usize, len: usize },

    #[error("point {point:?} does not lie outside the region")]
    NotOutsideRegion { point: Vec<i64> },

    #[error("point at distance {dist} from the region is below the applicability threshold {threshold}")]
    TooCloseToRegion { dist: f64, threshold: f64 },

    #[error("point {point:?} does not lie inside the region")]
    NotInsideRegion { point: Vec<i64> },

    #[error("enumeration budget exhausted: needed {needed} evaluations, budget is {budget}")]
    BudgetExhausted { needed: u64, budget: u64 },

    #[error("malformed instance file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that should map to the budget-exhaustion exit code.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExhausted { .. })
    }
}
