use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { what: &'static str, iterations: usize, residual: f64 },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("implicit step failed at t = {t} with dt = {dt:e} after all dt halvings")]
    Step { t: f64, dt: f64 },
}
