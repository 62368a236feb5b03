use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integrator diverged at t = {t:.6e} s: {component} is not finite")]
    Divergence { t: f64, component: &'static str },

    #[error("output index {0} out of range (expected 1..=3)")]
    OutputIndex(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("events are not sorted by time (event {index} at {t:.6e} s)")]
    UnsortedEvents { index: usize, t: f64 },

    #[error("window [{start:.6e}, {end:.6e}] s is not covered by the trace")]
    WindowOutsideTrace { start: f64, end: f64 },

    #[error("rule base parse error on line {line}: {reason}")]
    RuleParse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
