use std::fmt;

/// Failures of a CLI run, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid inputs, bad arguments or unwritable output (exit 2).
    Input(String),
    /// A pipeline stage rejected the data (exit 3).
    Module { module: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Module { .. } => 3,
        }
    }

    pub fn module(&self) -> Option<&'static str> {
        match self {
            CliError::Input(_) => None,
            CliError::Module { module, .. } => Some(module),
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Module { message: m, .. } => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => f.write_str(m),
            CliError::Module { module, message } => write!(f, "[{module}] {message}"),
        }
    }
}

impl std::error::Error for CliError {}

pub trait ResultExt<T> {
    /// Attributes a library error to a pipeline stage.
    fn in_module(self, module: &'static str) -> Result<T, CliError>;
    /// Treats a library error as bad input.
    fn into_input(self) -> Result<T, CliError>;
}

impl<T> ResultExt<T> for eigenmarket::Result<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Module {
            module,
            message: e.to_string(),
        })
    }

    fn into_input(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Input(e.to_string()))
    }
}
