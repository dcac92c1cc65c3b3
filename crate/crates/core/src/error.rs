use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-domain input data or parameters.
    #[error("invalid input: {0}")]
    Input(String),

    /// A column with zero pooled variance; the index is into the CLR columns.
    #[error("degenerate column {index}{}: pooled variance is zero", .label.as_ref().map(|l| format!(" ({l})")).unwrap_or_default())]
    DegenerateColumn { index: usize, label: Option<String> },

    /// The quadratic statistic's variance estimate came out nonpositive.
    #[error("degenerate variance estimate: sigma_hat^2 = {0:e} is not positive")]
    DegenerateVariance(f64),

    /// Simulation configuration problem; `field` names the offending key.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// Numerical routine failed (e.g. factorization of a non-SPD matrix).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
