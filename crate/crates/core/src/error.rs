use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {x} outside open domain ({left}, {right})")]
    Domain { x: f64, left: f64, right: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("quadrature did not converge (best estimate {best}, error {abs_error})")]
    Quadrature { best: f64, abs_error: f64 },

    #[error("non-finite value {value} at x = {x}")]
    Evaluation { x: f64, value: f64 },

    #[error("numeric failure at {location}: {message}")]
    Numeric { location: String, message: String },

    #[error("newton failed at t = {t} after {halvings} step halvings; residuals {residuals:?}")]
    Newton {
        t: f64,
        halvings: usize,
        residuals: Vec<f64>,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("scenario {name}: {message}")]
    Scenario { name: String, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
