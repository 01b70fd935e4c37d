use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix that must be positive semidefinite has a negative eigenvalue.
    #[error("{which} is not positive semidefinite: smallest eigenvalue {eigenvalue:e}")]
    NotPsd { which: String, eigenvalue: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-finite value at iteration {iteration}: {message}")]
    Numeric { iteration: usize, message: String },

    #[error("certificate: {0}")]
    Certificate(#[from] CertificateError),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("oracle: {0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("LICQ violated: active Jacobian Gram matrix has smallest eigenvalue {kappa:e}")]
    LicqViolated { kappa: f64 },

    #[error("active set is empty; the rate bound needs at least one active constraint")]
    EmptyActiveSet,

    #[error("constant {name} is not positive ({value:e})")]
    NonPositive { name: &'static str, value: f64 },

    #[error(
        "(pi*, delta, C) assembly did not converge after {rounds} rounds (last change {change:e})"
    )]
    NoFixedPoint { rounds: usize, change: f64 },

    #[error("reference pair is not a KKT point (max residual {residual:e})")]
    NotKkt { residual: f64 },
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
