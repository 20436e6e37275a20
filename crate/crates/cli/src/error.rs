use std::fmt;

use ginn_core::Error as CoreError;

/// Process exit codes.
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::InvalidInput(_) => EXIT_USAGE,
            CoreError::Numerical(_) => EXIT_NUMERICAL,
            CoreError::Io { .. } | CoreError::Parse { .. } | CoreError::Data(_) | CoreError::Serde(_) => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(CoreError::InvalidInput("x".into())).code, EXIT_USAGE);
        assert_eq!(CliError::from(CoreError::Data("x".into())).code, EXIT_DATA);
        assert_eq!(CliError::from(CoreError::Numerical("x".into())).code, EXIT_NUMERICAL);
        let parse = CoreError::Parse {
            line: 3,
            message: "bad".into(),
        };
        assert_eq!(CliError::from(parse).code, EXIT_DATA);
    }
}
