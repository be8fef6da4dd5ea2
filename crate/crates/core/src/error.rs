use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("kernel order {order} is not supported (valid range 1..={max})")]
    KernelOrder { order: usize, max: usize },
    #[error("kernel moment system is singular at order {order}")]
    SingularMomentSystem { order: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid mixture: {0}")]
    InvalidMixture(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("non-finite state at step {step} (trajectory {trajectory})")]
    NonFinite { step: usize, trajectory: usize },
    #[error("integration interval misses {missing:.3e} of probability mass")]
    IntervalTooSmall { missing: f64 },
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("degenerate rate data: {0}")]
    DegenerateFit(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }
}
