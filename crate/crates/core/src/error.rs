use thiserror::Error;

/// Errors raised by the estimation, variance and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("design matrix has column rank {rank} < {cols}")]
    RankDeficient { rank: usize, cols: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("group {0} has no members")]
    EmptyGroup(usize),
    #[error("sample is empty")]
    EmptySample,
    #[error("group {group} has {size} members, at least {required} required")]
    GroupTooSmall {
        group: usize,
        size: usize,
        required: usize,
    },
    #[error("auxiliary variable has zero variance")]
    DegenerateAuxiliary,
    #[error("invalid sample size {n} for population of {population}")]
    InvalidSampleSize { n: usize, population: usize },
    #[error("{count} subsets exceed the enumeration limit of {limit}")]
    TooManySubsets { count: u128, limit: u64 },
    #[error("observation {0} has leverage one")]
    LeverageOne(usize),
    #[error("degrees of freedom are required for a Student-t interval")]
    MissingDf,
    #[error("argument out of domain: {0}")]
    OutOfDomain(String),
    #[error("both group variances are zero")]
    DegenerateVariance,
    #[error("operation supports a single covariate, got {0}")]
    MultiCovariateUnsupported(usize),
    #[error("operation requires exactly two groups, got {0}")]
    UnsupportedGroupCount(usize),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("variance flavor {0} does not apply here")]
    FlavorNotApplicable(&'static str),
    #[error("{failures} of {reps} replications failed, above the 0.1% limit")]
    ExcessiveFailures { failures: usize, reps: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
