use thiserror::Error;

/// Errors shared across the laboratory's modules.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A precondition on the inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested energy sits too close to the spectrum for a resolvent.
    #[error("spectral collision: energy within {distance:.3e} of the spectrum")]
    SpectralCollision { distance: f64 },

    /// An iterative solver ran out of budget.
    #[error("no convergence after {iterations} iterations (residual {achieved:.3e}, wanted {wanted:.3e})")]
    NonConvergence {
        iterations: usize,
        achieved: f64,
        wanted: f64,
    },

    /// Quadrature did not reach the requested tolerance.
    #[error("quadrature tolerance not met: achieved {achieved:.3e}, wanted {wanted:.3e}")]
    Quadrature { achieved: f64, wanted: f64 },

    /// Dense eigendecomposition requested beyond the configured cap.
    #[error("dimension {dim} exceeds dense cap {cap}; use the iterative path")]
    DenseCap { dim: usize, cap: usize },

    /// The quantile split produced a zero gap; try another Bernoulli weight.
    #[error("gap failure: quantile split has zero infimum for p = {p}")]
    GapFailure { p: f64 },

    /// No Bernoulli weight on the search grid produced a positive gap, or a
    /// quantitative certificate failed.
    #[error("certification failure: {0}")]
    Certification(String),

    /// The test-function machinery needs a larger net radius.
    #[error("R too small: {0}")]
    RTooSmall(String),

    /// Scale scheduling could not satisfy its defining identities.
    #[error("scheduling error: {0}")]
    Schedule(String),

    /// An eigenvalue path ran through a near-degeneracy.
    #[error("eigenvalue crossing at s = {s} (gap {gap:.3e})")]
    PathCrossing { s: f64, gap: f64 },
}

pub type Result<T> = std::result::Result<T, CoreError>;
