/// Error type shared by every module. Messages state the violated condition
/// so callers (and the CLI) can report it verbatim.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A parameter or precondition check failed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request exceeds a configured size cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The quantity is undefined at (or beyond) a singular point.
    #[error("singular: {0}")]
    Singular(String),

    /// An iterative method failed to converge.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// The operation requires a supercritical (or subcritical) regime.
    #[error("subcritical: {0}")]
    Subcritical(String),

    /// The requested configuration cannot be realised.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Arithmetic broke down (overflow, NaN, failed allocation in
    /// extended-precision routines).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
