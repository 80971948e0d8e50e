use std::fmt;

/// A library error with the file or step it came from.
#[derive(Debug, thiserror::Error)]
pub struct CliError {
    context: String,
    #[source]
    source: picm::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.context, self.source)
    }
}

impl CliError {
    pub fn new(context: impl Into<String>, source: picm::Error) -> Self {
        CliError {
            context: context.into(),
            source,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        let msg = msg.into();
        CliError::new("arguments", picm::Error::InvalidArgument(msg))
    }

    /// Exit status by error class. 2 is left to argument parsing.
    pub fn exit_code(&self) -> u8 {
        use picm::Error::*;
        match &self.source {
            Io(_) => 3,
            BadMagic { .. }
            | UnsupportedVersion(_)
            | TruncatedPayload { .. }
            | CorruptHeader(_)
            | DimensionOverflow { .. } => 4,
            InvalidArgument(_) | DimensionMismatch { .. } | BudgetTooSmall { .. } => 5,
            NonFinite { .. } | OutOfRange { .. } | ScaleTooLarge { .. } => 6,
            Csv(_) | Schema(_) => 7,
            Oracle(_) => 8,
            Coder(_) | Invariant(_) => 9,
        }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Attaches context to library results.
pub trait Context<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for picm::Result<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::new(context(), e))
    }
}

impl<T> Context<T> for std::io::Result<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::new(context(), e.into()))
    }
}

impl<T> Context<T> for csv::Result<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::new(context(), e.into()))
    }
}
