use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped so the CLI can map them onto exit codes: input and
/// data validation problems on one side, numerical guards (refusals that
/// protect against explosion or degenerate statistics) on the other.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TvorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("histogram has {0} bins, at least {1} required")]
    TooFewBins(usize, usize),

    #[error("bin count mismatch: expected {expected} bins, found {found}{}", context_suffix(.context))]
    BinMismatch {
        expected: usize,
        found: usize,
        context: Option<String>,
    },

    #[error("requested subsample of size {requested} exceeds histogram size {available}")]
    SubsampleTooLarge { requested: u64, available: u64 },

    #[error("histogram has zero items; score is undefined")]
    EmptyHistogram,

    #[error("rank-deficient design: need at least two distinct positive sample sizes, found {0}")]
    RankDeficient(usize),

    #[error("no consensus: largest consensus set has {found} points, at least {required} required")]
    NoConsensus { found: usize, required: usize },

    #[error("at least {required} histograms required, got {found}")]
    TooFewHistograms { required: usize, found: usize },

    #[error("the tested histogram contains all data; leave-one-out expectation undefined")]
    LeaveOneOutEmpty,

    #[error("no values in range")]
    NoValuesInRange,

    #[error("insufficient span: {0}")]
    InsufficientSpan(String),

    #[error("oracle refused: {outcomes} outcomes exceed limit {limit}")]
    OracleExplosion { outcomes: f64, limit: u64 },

    #[error("standard deviation {sigma} for sample size {size} is below the minimum {min}")]
    DegenerateSigma { size: u64, sigma: f64, min: f64 },

    #[error("sample size {size} outside Monte Carlo table range [{lo}, {hi}]")]
    OutsideTable { size: u64, lo: u64, hi: u64 },

    #[error("degenerate table: {0}")]
    DegenerateTable(String),

    #[error("{0}")]
    Parse(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn context_suffix(ctx: &Option<String>) -> String {
    match ctx {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}

impl TvorError {
    /// True for refusals raised by numerical guards rather than bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            TvorError::OracleExplosion { .. }
                | TvorError::DegenerateSigma { .. }
                | TvorError::RankDeficient(_)
                | TvorError::NoConsensus { .. }
                | TvorError::DegenerateTable(_)
                | TvorError::LeaveOneOutEmpty
        )
    }
}

pub type Result<T> = std::result::Result<T, TvorError>;
