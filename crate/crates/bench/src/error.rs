use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] eerk_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    /// Process exit code: 2 for configuration problems, 3 for divergence.
    pub fn exit_code(&self) -> i32 {
        use eerk_core::Error as E;
        match self {
            BenchError::Config(_) => 2,
            BenchError::Core(E::Parse(_) | E::Parameter(_) | E::Domain(_) | E::Unsupported(_)) => 2,
            BenchError::Core(E::Diverged { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
