use std::fmt;

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

/// Bad usage, configuration or a missing file.
pub const EXIT_USAGE: u8 = 2;
/// Data or model inconsistent with each other or with the configuration.
pub const EXIT_MISMATCH: u8 = 3;

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn mismatch(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_MISMATCH,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<adrmine::Error> for Failure {
    fn from(e: adrmine::Error) -> Self {
        match e {
            adrmine::Error::Io { .. } | adrmine::Error::InvalidArgument(_) => Failure::usage(e.to_string()),
            _ => Failure::mismatch(e.to_string()),
        }
    }
}
