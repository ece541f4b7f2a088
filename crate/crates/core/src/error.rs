use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("panel contains a non-finite value at row {row}, series `{series}`")]
    NonFiniteCell { row: usize, series: String },

    #[error("model is not stable: spectral radius {0:.6} >= 1")]
    Unstable(f64),

    #[error("estimated VAR is non-stationary: spectral radius {0:.6} >= 1")]
    NonStationaryEstimate(f64),

    #[error("innovation covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("covariance matrix is numerically singular (reciprocal condition {rcond:.3e})")]
    SingularCovariance { rcond: f64 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("coordinate descent did not converge after {iterations} sweeps")]
    NonConvergence { iterations: usize },

    #[error("equation {equation}: {source}")]
    Equation {
        equation: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("eigenvalue iteration did not converge (ill-conditioned input)")]
    EigenNonConvergence,

    #[error("sample too short: {0}")]
    SampleTooShort(String),

    #[error("variance matrix is not positive semi-definite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("DGP draw remained unstable after {0} retries")]
    DgpRetriesExhausted(usize),

    #[error("null pair {cause}->{effect} has a non-zero causal coefficient {value:.3e} at horizon {h}")]
    InvalidNullPair {
        cause: usize,
        effect: usize,
        h: usize,
        value: f64,
    },

    #[error("{failed} of {reps} replications failed (limit 5%)")]
    TooManyFailures { failed: usize, reps: usize },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_equation(self, equation: usize) -> Self {
        Error::Equation {
            equation,
            source: Box::new(self),
        }
    }
}
