use thiserror::Error;

use crate::partition::PartitionIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("moment weight {weight} exceeds the configured capacity p_max = {p_max}")]
    Capacity { weight: usize, p_max: usize },

    #[error("no value supplied for moment {0}")]
    MissingMoment(PartitionIndex),

    #[error("moment map is singular for effective column count {n_eff}")]
    Singular { n_eff: u64 },

    #[error("malformed matrix file: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
