use std::path::Path;

/// Failures of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or input files (exit 2).
    #[error("{0}")]
    Input(String),
    /// A numerical method failed (exit 3).
    #[error("{0}")]
    Numerical(String),
    /// Output could not be written (exit 1).
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
    /// A replay produced different bytes (exit 1).
    #[error("replay differs from the recorded run: {0}")]
    ReplayMismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Output { .. } | CliError::ReplayMismatch(_) => 1,
        }
    }

    pub fn output(path: &Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<lambdacoal::Error> for CliError {
    fn from(e: lambdacoal::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}
