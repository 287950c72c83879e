use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum CvError {
    #[error("fock cutoff n_max = {0} is below the minimum of 2")]
    CutoffTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid trace {0}")]
    InvalidTrace(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stellar rank {0} is not supported (only 0, 1, 2)")]
    UnsupportedRank(usize),

    #[error("state generation failed after {attempts} attempts (last leakage {leakage:.3e})")]
    ResamplingExhausted { attempts: usize, leakage: f64 },

    #[error("joint pdf is negative ({0:.3e}); state is corrupt")]
    NegativeDensity(f64),

    #[error("empty distribution: {0}")]
    EmptyDistribution(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CvError> = std::result::Result<T, E>;
