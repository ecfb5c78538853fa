use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A weighted sum that must be positive vanished.
    #[error("total weighted mass is zero")]
    ZeroMass,

    /// Every potential in the population (or the exact flow) vanished at `step`.
    #[error("extinction at step {step}: all potentials vanish")]
    Extinction { step: usize },

    #[error("step order violated: p = {p} > n = {n}")]
    IndexOrder { p: usize, n: usize },

    #[error("epsilon {eps} out of range at step {step}: eps * G = {product} > 1")]
    EpsilonOutOfRange { eps: f64, step: usize, product: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid tables: {0}")]
    InvalidTables(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The interaction variance constant is zero, so the crossover threshold is
    /// not finite. `threshold` carries the reported limit (`+inf` or `0`).
    #[error("degenerate V_tilde = 0 (threshold reported as {threshold})")]
    DegenerateVtilde { threshold: f64 },
}

impl Error {
    /// Attach a step index to errors raised without one.
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::ZeroMass => Error::Extinction { step },
            other => other,
        }
    }
}
