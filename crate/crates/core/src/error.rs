use thiserror::Error;

/// Errors produced by series ingestion, cost evaluation, fitting and scoring.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series must contain at least one flow")]
    EmptySeries,
    #[error("flow at index {index} is not finite: {value}")]
    NonFiniteFlow { index: usize, value: f64 },
    #[error("label count {labels} does not match flow count {flows}")]
    LabelCountMismatch { labels: usize, flows: usize },
    #[error("labels must be strictly increasing dates: {prev:?} precedes {next:?}")]
    LabelsNotIncreasing { prev: String, next: String },
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: u64, message: String },
    #[error("csv header must be `flow` or `date,flow`, got {found:?}")]
    CsvHeader { found: String },
    #[error("standard deviation requires at least 2 observations, got {len}")]
    StdUndefined { len: usize },
    #[error("split ratio {ratio} is outside (0, 1)")]
    InvalidSplitRatio { ratio: f64 },
    #[error("split ratio {ratio} on {len} flows leaves an empty {part} part")]
    EmptySplitPart {
        ratio: f64,
        len: usize,
        part: &'static str,
    },
    #[error("subsequence size {n} is invalid for a series of length {len}")]
    InvalidSampleSize { n: usize, len: usize },
    #[error("sigma must be > 0, got {sigma}")]
    InvalidSigma { sigma: f64 },
    #[error("generated series length must be >= 1")]
    EmptyGeneration,
    #[error("invalid cost structure: {reason}")]
    InvalidCost { reason: String },
    #[error("invalid bound triple ({lower}, {target}, {upper}): {reason}")]
    InvalidBounds {
        lower: f64,
        target: f64,
        upper: f64,
        reason: &'static str,
    },
    #[error("big-M {given} is below the instance floor {required}")]
    BigMTooSmall { given: f64, required: f64 },
    #[error("MILP instance is infeasible: no bound triple keeps every balance at or above the floor")]
    Infeasible,
    #[error("LP solve failed numerically: {reason}")]
    Numerical { reason: String },
    #[error("no feasible bound triple in the search box")]
    NoFeasibleTriple,
    #[error("benchmark cost is zero; the cost ratio is undefined")]
    UndefinedRatio,
    #[error("ensemble has no successfully fitted member")]
    NoSuccessfulMember,
    #[error("bound list is empty; nothing to average")]
    EmptyBoundList,
}

pub type Result<T> = std::result::Result<T, Error>;
