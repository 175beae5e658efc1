use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] netmimo_core::Error),
    #[error("{failed} acceptance check(s) failed")]
    ValidationFailed { failed: usize },
}

impl CliError {
    /// 2 for anything the config can fix, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use netmimo_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::InvalidParameter { .. }
                | E::DimensionMismatch { .. }
                | E::InfeasibleLoad { .. }
                | E::EmptyCluster { .. }
                | E::NotSymmetric,
            ) => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } => 1,
            CliError::ValidationFailed { .. } => 1,
        }
    }
}
