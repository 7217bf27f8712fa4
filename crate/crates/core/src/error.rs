use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The kernel was evaluated at coincident points.
    #[error("kernel singularity at coincident points (r={r}, z={z})")]
    Singular { r: f64, z: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// The support of a field reaches (or would reach) the edge of the box.
    #[error("support overflow: {0}")]
    SupportOverflow(String),

    /// No multipliers satisfy the constraints on this grid.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The requested impulse cannot be resolved on this grid.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("CFL violation: number {cfl:.3} exceeds {max:.3}")]
    Cfl { cfl: f64, max: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("penalized energy decreased from {from:.12e} to {to:.12e} at iteration {iteration}")]
    EnergyDecrease { iteration: usize, from: f64, to: f64 },
}

impl Error {
    /// True for failures of a numerical procedure on otherwise valid input
    /// (as opposed to rejected input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SupportOverflow(_)
                | Error::Infeasible(_)
                | Error::Resolution(_)
                | Error::NotConverged { .. }
                | Error::EnergyDecrease { .. }
                | Error::Cfl { .. }
        )
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
