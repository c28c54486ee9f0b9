use thiserror::Error;

/// Errors produced by the model, distribution, information and oracle layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// One or more physical feasibility constraints are violated.
    #[error("infeasible experiment: {}", .0.join("; "))]
    Infeasible(Vec<String>),

    #[error("quadrature not converged: estimate {estimate:e}, refined {refined:e} (tolerance {tolerance:e})")]
    QuadratureNotConverged {
        estimate: f64,
        refined: f64,
        tolerance: f64,
    },

    #[error("adaptive integration did not reach tolerance {tolerance:e} (error estimate {estimate:e})")]
    IntegralNotConverged { tolerance: f64, estimate: f64 },

    /// The smearing function leaks out of its detector region.
    #[error("smearing function has only {mass_inside:.9} of its mass inside detector region {region}")]
    SupportViolation { region: usize, mass_inside: f64 },

    #[error("Fock space dimension {dimension} exceeds cap {cap}; try a smaller grid or photon cutoff")]
    DimensionCap { dimension: usize, cap: usize },

    /// Operator power would reach the truncation shell of the Fock space.
    #[error("moment order {order} is not truncation-safe for a {photons}-photon state with cutoff {cutoff}")]
    TruncationUnsafe {
        order: u32,
        photons: usize,
        cutoff: usize,
    },

    #[error("characteristic-function reconstruction aliased (minimum density {min_density:e})")]
    Aliasing { min_density: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error stems from invalid caller input rather than a
    /// numerical failure.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Infeasible(_)
                | Error::SupportViolation { .. }
                | Error::DimensionCap { .. }
                | Error::TruncationUnsafe { .. }
                | Error::Config(_)
        )
    }
}
