use thiserror::Error;

/// Errors raised anywhere in the link simulation.
///
/// Variants carry enough context to tell which stage of a round failed.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite parameter value {0} (corrupt model state)")]
    NonFinite(f64),

    #[error("length mismatch in {context}: expected {expected}, got {actual}")]
    Length {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("sum digit {digit} at position {position} exceeds {max} (decoder fault)")]
    SumDigit { digit: u8, position: usize, max: u8 },

    #[error("frame capacity exceeded: {bits} coded bits, room for {capacity}")]
    FrameOverflow { bits: usize, capacity: usize },

    #[error("zero training cell on subcarrier {0}")]
    ZeroTraining(i32),

    #[error("user {0} has no pilot subcarriers")]
    NoPilots(usize),

    #[error("timing offset {tau} samples does not fit inside the {cp}-sample cyclic prefix")]
    TimingOffset { tau: usize, cp: usize },

    #[error("non-positive {0}")]
    NonPositive(&'static str),

    #[error("exhaustive search refused: {bits} source bits exceeds limit {limit}")]
    TooLarge { bits: usize, limit: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
