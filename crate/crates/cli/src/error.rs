use std::fmt;

/// A failed command. Data and usage problems exit with 1, broken internal
/// invariants with 2.
#[derive(Debug)]
pub enum CliError {
    User(String),
    Invariant(String),
}

impl CliError {
    pub fn user(msg: impl Into<String>) -> Self {
        Self::User(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::User(_) => 1,
            Self::Invariant(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::User(m) => f.write_str(m),
            Self::Invariant(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<trajart_core::Error> for CliError {
    fn from(e: trajart_core::Error) -> Self {
        match e {
            trajart_core::Error::Invariant(_) => Self::Invariant(e.to_string()),
            other => Self::User(other.to_string()),
        }
    }
}
