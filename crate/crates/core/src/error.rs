use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid drift specification: {0}")]
    InvalidSpec(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("integral diverges: {0}")]
    DivergentIntegral(String),

    #[error("exponent {exponent} overflows f64 in {context}")]
    Overflow { context: &'static str, exponent: f64 },

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate:e}, error estimate {error_estimate:e})"
    )]
    Quadrature {
        estimate: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("linear solver did not converge in {iterations} iterations (last relative residual {last:e})")]
    Solver {
        iterations: usize,
        last: f64,
        residual_history: Vec<f64>,
    },

    #[error("discrete maximum principle violated: min u = {min:e}")]
    MaximumPrinciple { min: f64 },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DivergentIntegral(_)
                | Error::Overflow { .. }
                | Error::Quadrature { .. }
                | Error::Solver { .. }
                | Error::MaximumPrinciple { .. }
        )
    }
}
