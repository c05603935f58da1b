use thiserror::Error;

/// Errors produced by the mismatch model and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid scan preset: {0}")]
    Preset(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("analytic report is for a {report} scenario but trials ran {trials}")]
    ScenarioMismatch {
        report: &'static str,
        trials: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain { what, value })
    }
}

pub(crate) fn check_nonneg(what: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain { what, value })
    }
}
