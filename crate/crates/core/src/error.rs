use crate::solver::{Coefficients, SolveDiagnostics};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Best iterate and diagnostics of a solve that hit `max_iter`.
#[derive(Debug, Clone)]
pub struct NotConverged {
    pub coefficients: Coefficients,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("column {index} is the zero vector")]
    ZeroColumn { index: usize },

    #[error("matrix is rank deficient: smallest singular value {sigma_min:.3e} vs largest {sigma_max:.3e}")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },

    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error(
        "solver did not converge after {} iterations (primal {:.3e}, dual {:.3e})",
        .0.diagnostics.iterations,
        .0.diagnostics.primal_residual,
        .0.diagnostics.dual_residual
    )]
    NotConverged(Box<NotConverged>),

    #[error("brute search over C({p}, {d}) = {count} subsets exceeds the cap of {cap}")]
    CombinatorialBlowup {
        p: usize,
        d: usize,
        count: u128,
        cap: u64,
    },

    #[error("every candidate subset evaluates to +inf")]
    AllInfeasible,

    #[error("greedy search stuck at {selected} of {target} columns: every remaining candidate is rank deficient")]
    Stuck { selected: usize, target: usize },

    #[error("isometry pursuit support has {found} columns, fewer than D = {needed}")]
    SupportTooSmall { found: usize, needed: usize },

    #[error("row {row} is constant and cannot be standardized")]
    ConstantRow { row: usize },

    #[error("csv: line {line}, column {column}: cannot parse {value:?} as a finite number")]
    BadCell {
        line: usize,
        column: usize,
        value: String,
    },

    #[error("csv: line {line} has {found} fields, expected {expected}")]
    RaggedRow {
        line: usize,
        found: usize,
        expected: usize,
    },

    #[error("csv: no data rows")]
    EmptyInput,

    #[error("unknown fixture {0:?}: only iris and wine are bundled; pass other matrices as CSV files instead")]
    UnknownFixture(String),

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
