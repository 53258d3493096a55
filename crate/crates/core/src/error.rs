use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Variants fall in two families: input problems (parse and validation
/// failures, exit status 1 on the command line) and numerical failures
/// (degenerate geometry, solver breakdown, exit status 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation angle {0} rad is outside [0, pi)")]
    InvalidAngle(f64),

    #[error("vector norm {0:e} is too small to recover a direction")]
    NearZeroVector(f64),

    #[error("rays are parallel; triangulation is undefined")]
    SkewDegenerate,

    #[error("product degree {needed} exceeds basis degree {available}")]
    DegreeOverflow { needed: usize, available: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("template is rank deficient: {pivots} pivots for {rows} rows")]
    RankDeficient { pivots: usize, rows: usize },

    #[error("quotient basis anomaly: {0}")]
    BasisAnomaly(String),

    #[error("monomial {0} is neither standard nor a leading monomial of the template")]
    UnreachableMonomial(String),

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(#[source] Box<Error>),

    #[error("no candidate places a point in front of both cameras")]
    NoCheiralSolution,

    #[error("translation scale is unobservable (central-camera configuration)")]
    ScaleUnobservable,

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("could not generate a visible scene after {0} attempts")]
    RetryExhausted(usize),

    #[error("no sampled subset produced a hypothesis")]
    NoHypothesis,

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("gyro log covers [{log_start}, {log_end}] ns but [{from}, {to}] ns was requested")]
    CoverageGap {
        log_start: i64,
        log_end: i64,
        from: i64,
        to: i64,
    },

    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    /// Wraps solver-internal failures (rank loss, basis anomalies, eigen
    /// breakdown) into [`Error::DegenerateConfiguration`]; anything else
    /// is passed through unchanged.
    pub(crate) fn into_degenerate(self) -> Self {
        match self {
            Error::RankDeficient { .. }
            | Error::BasisAnomaly(_)
            | Error::UnreachableMonomial(_)
            | Error::EigenFailure
            | Error::DegenerateInput(_) => Error::DegenerateConfiguration(Box::new(self)),
            other => other,
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::InvalidAngle(_)
            | Error::TooFewObservations { .. }
            | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
