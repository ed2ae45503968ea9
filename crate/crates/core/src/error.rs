use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid frequency grid: {0}")]
    Grid(String),

    /// An integral whose low-frequency behaviour `x^exponent` is not integrable.
    #[error("divergent bath integral (low-frequency exponent {exponent})")]
    Divergent { exponent: i32 },

    #[error("matrix is not hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("invalid matrix: {0}")]
    Matrix(String),

    #[error("unknown DFS label `{label}` for {model}")]
    UnknownLabel { model: String, label: String },

    #[error("unsupported protocol: {0}")]
    Protocol(String),

    #[error("Fock oracle unconverged: |Δη| = {delta:e} > {tol:e} at n_max = {n_max}")]
    Unconverged { n_max: usize, delta: f64, tol: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
