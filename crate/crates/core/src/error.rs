use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty field")]
    EmptyField,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at sample {0}")]
    NonFinite(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sequence too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("bandwidth too small: weighted normal equations are singular at sample {0}")]
    BandwidthTooSmall(usize),

    #[error("dictionary limits exceeded: {0}")]
    DictionaryLimits(String),

    #[error("missing derivative table entry: {0}")]
    MissingDerivative(String),

    #[error("mx/mt too large: test function support {support} exceeds {axis} extent {extent}")]
    TestFunctionTooLarge {
        axis: &'static str,
        support: usize,
        extent: usize,
    },

    #[error("empty row selection")]
    EmptySelection,

    #[error("blow-up; reduce internal step (non-finite state at step {0})")]
    BlowUp(usize),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}
