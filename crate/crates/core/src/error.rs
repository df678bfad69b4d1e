use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("{what} contains non-finite entries")]
    NonFinite { what: &'static str },

    #[error("{what} is not symmetric (asymmetry {asymmetry:.3e} exceeds {tolerance:.3e})")]
    NotSymmetric {
        what: &'static str,
        asymmetry: f64,
        tolerance: f64,
    },

    #[error("invalid integration grid: {0}")]
    Grid(String),

    #[error("time {t} outside the covered interval [{start}, {end}]")]
    Range { t: f64, start: f64, end: f64 },

    #[error(
        "C_i never vanishes up to index {max_m} (|C_{max_m}|_F = {residual:.6e}); \
         the system has no finite immersion"
    )]
    AssumptionViolated { max_m: usize, residual: f64 },

    #[error("signal provides derivatives up to order {available}, order {required} required")]
    SignalOrder { required: usize, available: usize },

    #[error("gamma table stops at k = {available}, index {required} requested")]
    GammaDepth { required: usize, available: usize },

    #[error("state matrix has complex eigenvalues (max |Im| = {max_imag:.3e})")]
    ComplexEigenvalues { max_imag: f64 },

    #[error("pair (A, Gamma) is not Kalman observable (rank {rank} < {n})")]
    GammaUnobservable { rank: usize, n: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("Riccati matrix lost positive definiteness at t = {t} (min eigenvalue {min_eig:.3e})")]
    RiccatiDegenerate { t: f64, min_eig: f64 },

    #[error("integration produced non-finite values at t = {t}")]
    NumericalBlowup { t: f64 },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool.
    ///
    /// 2 configuration/validation, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RiccatiDegenerate { .. } | Error::NumericalBlowup { .. } => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }

    pub fn is_numerical(&self) -> bool {
        self.exit_code() == 3
    }
}
