use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spot {spot} is outside the domain of the {model} model")]
    Domain { model: &'static str, spot: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} is after maturity {maturity}")]
    PastMaturity { t: f64, maturity: f64 },

    #[error("time {0} is not covered by the path")]
    OutsidePath(f64),

    #[error("roll schedule is exhausted before time {0}")]
    ScheduleExhausted(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("projected SOR did not converge at time step {step} (last update {residual:e})")]
    NonConvergence { step: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
