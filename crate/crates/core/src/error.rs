use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid observation grid: {0}")]
    InvalidGrid(String),

    #[error("invalid incidence data: {0}")]
    InvalidData(String),

    #[error("invalid latent path: {0}")]
    InvalidPath(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "no latent path with positive likelihood found in {attempts} draws from the proposal; \
         the data cannot be reached from the initial parameters"
    )]
    DegenerateInitialisation { attempts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
