use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or lengths that do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Group maps, schedules, training configs.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("fit failed: {0}")]
    Fit(String),

    /// A rollout left the finite/bounded region.
    #[error("rollout diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("parameter {0} was not recorded on the tape")]
    ParamNotOnTape(usize),
}
